#include "boxforge/voc_eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

std::optional<double> MeanOfPresent(const std::vector<std::optional<double>>& aps) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& ap : aps) {
    if (ap) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string Percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

std::string Row(const std::string& label, const std::vector<std::string>& cells) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-24s", label.c_str());
  std::string out = buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%8s", c.c_str());
    out += buf;
  }
  return out + "\n";
}

std::vector<std::string> ApCells(const std::optional<double>& map,
                                 const std::vector<std::optional<double>>& ap) {
  std::vector<std::string> cells{Percent(map)};
  for (const auto& v : ap) cells.push_back(Percent(v));
  return cells;
}

nlohmann::ordered_json ApJson(const std::vector<std::optional<double>>& ap) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < ap.size(); ++c) {
    out[std::string(CategoryName(static_cast<int>(c)))] =
        ap[c] ? nlohmann::ordered_json(*ap[c]) : nlohmann::ordered_json(nullptr);
  }
  return out;
}

}  // namespace

std::string_view InterpolationName(Interpolation i) {
  return i == Interpolation::kAllPoint ? "all_point" : "eleven_point";
}

void EvalConfig::Validate() const {
  if (!(iou_threshold > 0 && iou_threshold < 1)) {
    throw ValidationError("eval: iou_threshold must lie in (0,1)");
  }
}

std::size_t CountBoxes(const GroundTruthMap& gts) {
  std::size_t n = 0;
  for (const auto& [page, boxes] : gts) n += boxes.size();
  return n;
}

PrCurve BuildPrCurve(const std::vector<ScoredBox>& dets,
                     const GroundTruthMap& gts, double iou_threshold) {
  PrCurve curve;
  curve.num_gt = CountBoxes(gts);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::map<PageKey, std::vector<bool>> used;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ScoredBox& det = dets[order[rank]];
    bool hit = false;
    auto it = gts.find(det.page);
    if (it != gts.end()) {
      auto& taken = used[det.page];
      taken.resize(it->second.size(), false);
      double best = -1;
      std::size_t best_index = 0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (taken[g]) continue;
        const double iou = IoU(det.box, it->second[g]);
        if (iou >= iou_threshold && iou > best) {
          best = iou;
          best_index = g;
        }
      }
      if (best >= 0) {
        taken[best_index] = true;
        hit = true;
      }
    }
    if (hit) ++tp;
    curve.scores.push_back(det.score);
    curve.true_positive.push_back(hit);
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    curve.recall.push_back(curve.num_gt ? static_cast<double>(tp) /
                                              static_cast<double>(curve.num_gt)
                                        : 0.0);
  }
  return curve;
}

double InterpolatedAp(const PrCurve& curve, Interpolation interpolation) {
  const std::size_t n = curve.precision.size();
  if (interpolation == Interpolation::kElevenPoint) {
    double ap = 0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (curve.recall[j] >= t) p = std::max(p, curve.precision[j]);
      }
      ap += p;
    }
    return ap / 11.0;
  }
  std::vector<double> mrec(n + 2), mpre(n + 2);
  mrec[0] = 0;
  mpre[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mrec[i + 1] = curve.recall[i];
    mpre[i + 1] = curve.precision[i];
  }
  mrec[n + 1] = 1;
  mpre[n + 1] = 0;
  for (std::size_t i = n + 1; i-- > 0;) mpre[i] = std::max(mpre[i], mpre[i + 1]);
  double ap = 0;
  for (std::size_t i = 0; i + 1 < mrec.size(); ++i) {
    if (mrec[i + 1] != mrec[i]) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
  }
  return ap;
}

std::optional<double> AveragePrecision(const std::vector<ScoredBox>& dets,
                                       const GroundTruthMap& gts,
                                       const EvalConfig& cfg) {
  cfg.Validate();
  if (CountBoxes(gts) == 0) return std::nullopt;
  return InterpolatedAp(BuildPrCurve(dets, gts, cfg.iou_threshold),
                        cfg.interpolation);
}

PrfResult PrfAtBestThreshold(const std::vector<ScoredBox>& dets,
                             const GroundTruthMap& gts, double iou_threshold) {
  PrfResult best{0, 0, 0, std::numeric_limits<double>::infinity()};
  if (dets.empty()) return best;
  const PrCurve curve = BuildPrCurve(dets, gts, iou_threshold);
  bool have = false;
  std::size_t tp = 0;
  const std::size_t n = curve.scores.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.true_positive[i]) ++tp;
    // Evaluate only at the last detection of each distinct score.
    if (i + 1 < n && curve.scores[i + 1] == curve.scores[i]) continue;
    const double r = curve.num_gt ? static_cast<double>(tp) /
                                        static_cast<double>(curve.num_gt)
                                  : 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(i + 1);
    const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    if (!have || f > best.f_measure) {
      best = {r, p, f, curve.scores[i]};
      have = true;
    }
  }
  return best;
}

CategorySplit SplitByCategory(const std::vector<PageDetection>& dets,
                              const AnnotationCorpus& corpus,
                              bool include_irregular) {
  CategorySplit split;
  split.dets.resize(kNumCategories);
  split.gts.resize(kNumCategories);

  // page id -> volumes containing it, and whether each page is included.
  std::map<int, std::vector<std::string>> volumes_of_page;
  std::map<PageKey, bool> included;
  for (const Volume& volume : corpus.volumes) {
    for (const Page& page : volume.pages) {
      const PageKey key{volume.title, page.page_id};
      const bool use = include_irregular || !page.irregular;
      included[key] = use;
      volumes_of_page[page.page_id].push_back(volume.title);
      if (!use) continue;
      for (const AnnotatedObject& obj : page.objects) {
        split.gts[static_cast<std::size_t>(obj.category)][key].push_back(obj.box);
      }
    }
  }

  for (std::size_t i = 0; i < dets.size(); ++i) {
    const PageDetection& d = dets[i];
    PageKey key{d.volume, d.page_id};
    if (key.volume.empty()) {
      auto it = volumes_of_page.find(d.page_id);
      if (it == volumes_of_page.end()) {
        throw ValidationError("detection " + std::to_string(i) +
                              ": unknown page_id " + std::to_string(d.page_id));
      }
      if (it->second.size() > 1) {
        throw ValidationError("detection " + std::to_string(i) + ": page_id " +
                              std::to_string(d.page_id) +
                              " exists in several volumes; give \"volume\"");
      }
      key.volume = it->second.front();
    }
    auto it = included.find(key);
    if (it == included.end()) {
      throw ValidationError("detection " + std::to_string(i) + ": unknown page " +
                            key.volume + "/" + std::to_string(d.page_id));
    }
    if (!it->second) continue;
    if (d.det.category < 0 || d.det.category >= kNumCategories) {
      throw ValidationError("detection " + std::to_string(i) +
                            ": category out of range");
    }
    split.dets[static_cast<std::size_t>(d.det.category)].push_back(
        {key, d.det.box, d.det.score});
  }
  return split;
}

EvalResult MeanAp(const std::vector<PageDetection>& dets,
                  const AnnotationCorpus& corpus, const EvalConfig& cfg,
                  bool per_volume) {
  cfg.Validate();
  const CategorySplit split = SplitByCategory(dets, corpus, cfg.include_irregular);

  EvalResult result;
  result.interpolation = cfg.interpolation;
  result.iou_threshold = cfg.iou_threshold;
  for (int c = 0; c < kNumCategories; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    result.ap.push_back(AveragePrecision(split.dets[idx], split.gts[idx], cfg));
    if (!result.ap.back()) {
      result.warnings.push_back("category " + std::string(CategoryName(c)) +
                                " has no ground truth; excluded from mAP");
    }
  }
  result.map = MeanOfPresent(result.ap);

  if (per_volume) {
    for (const Volume& volume : corpus.volumes) {
      VolumeEval ve;
      ve.title = volume.title;
      for (int c = 0; c < kNumCategories; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        std::vector<ScoredBox> vd;
        for (const ScoredBox& d : split.dets[idx]) {
          if (d.page.volume == volume.title) vd.push_back(d);
        }
        GroundTruthMap vg;
        for (const auto& [key, boxes] : split.gts[idx]) {
          if (key.volume == volume.title) vg[key] = boxes;
        }
        ve.ap.push_back(AveragePrecision(vd, vg, cfg));
      }
      ve.map = MeanOfPresent(ve.ap);
      result.per_volume.push_back(std::move(ve));
    }
  }
  return result;
}

std::vector<PrfResult> PrfPerCategory(const std::vector<PageDetection>& dets,
                                      const AnnotationCorpus& corpus,
                                      const EvalConfig& cfg) {
  cfg.Validate();
  const CategorySplit split = SplitByCategory(dets, corpus, cfg.include_irregular);
  std::vector<PrfResult> out;
  for (std::size_t c = 0; c < split.dets.size(); ++c) {
    out.push_back(PrfAtBestThreshold(split.dets[c], split.gts[c], cfg.iou_threshold));
  }
  return out;
}

std::string FormatEvalTable(const EvalResult& result) {
  char header[96];
  std::snprintf(header, sizeof header, "# AP (%%), IoU >= %.2f, %s\n",
                result.iou_threshold,
                std::string(InterpolationName(result.interpolation)).c_str());
  std::string out = header;
  std::vector<std::string> columns{"mAP"};
  for (int c = 0; c < kNumCategories; ++c) columns.emplace_back(CategoryName(c));
  out += Row("", columns);
  for (const VolumeEval& ve : result.per_volume) {
    out += Row(ve.title, ApCells(ve.map, ve.ap));
  }
  out += Row("total", ApCells(result.map, result.ap));
  return out;
}

std::string FormatPrfTable(const std::vector<PrfResult>& prf) {
  std::string out = "# recall / precision / F-measure (%) at the best threshold\n";
  out += Row("", {"R", "P", "F", "thresh"});
  for (std::size_t c = 0; c < prf.size(); ++c) {
    char th[32];
    std::snprintf(th, sizeof th, "%.4g", prf[c].threshold);
    out += Row(std::string(CategoryName(static_cast<int>(c))),
               {Percent(prf[c].recall), Percent(prf[c].precision),
                Percent(prf[c].f_measure), th});
  }
  return out;
}

std::string EvalResultToJson(const EvalResult& result,
                             const std::vector<PrfResult>* prf) {
  nlohmann::ordered_json doc;
  doc["interpolation"] = InterpolationName(result.interpolation);
  doc["iou_threshold"] = result.iou_threshold;
  doc["map"] = result.map ? nlohmann::ordered_json(*result.map)
                          : nlohmann::ordered_json(nullptr);
  doc["ap"] = ApJson(result.ap);
  if (!result.per_volume.empty()) {
    nlohmann::ordered_json vols = nlohmann::ordered_json::array();
    for (const VolumeEval& ve : result.per_volume) {
      nlohmann::ordered_json jv;
      jv["title"] = ve.title;
      jv["map"] = ve.map ? nlohmann::ordered_json(*ve.map)
                         : nlohmann::ordered_json(nullptr);
      jv["ap"] = ApJson(ve.ap);
      vols.push_back(std::move(jv));
    }
    doc["per_volume"] = std::move(vols);
  }
  if (prf) {
    nlohmann::ordered_json jp = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < prf->size(); ++c) {
      const PrfResult& r = (*prf)[c];
      nlohmann::ordered_json entry;
      entry["recall"] = r.recall;
      entry["precision"] = r.precision;
      entry["f_measure"] = r.f_measure;
      entry["threshold"] = std::isinf(r.threshold) ? nlohmann::ordered_json(nullptr)
                                                   : nlohmann::ordered_json(r.threshold);
      jp[std::string(CategoryName(static_cast<int>(c)))] = std::move(entry);
    }
    doc["prf"] = std::move(jp);
  }
  doc["warnings"] = result.warnings;
  return doc.dump(2) + "\n";
}

}  // namespace boxforge
