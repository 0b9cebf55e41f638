#include "boxforge/matcher.h"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

void CheckInputs(const std::vector<GtObject>& gts, std::size_t num_anchors,
                 const MatcherConfig& cfg) {
  cfg.Validate();
  if (num_anchors == 0) throw ValidationError("matcher: empty anchor set");
  std::set<int> ids;
  for (const GtObject& gt : gts) {
    if (gt.id < 0) {
      throw ValidationError("matcher: object ids must be non-negative");
    }
    if (!ids.insert(gt.id).second) {
      throw ValidationError("matcher: duplicate object id " +
                            std::to_string(gt.id));
    }
    if (gt.category < 0 || gt.category >= cfg.num_categories) {
      throw ValidationError("matcher: object " + std::to_string(gt.id) +
                            " has category out of range");
    }
    if (!gt.box.valid()) {
      throw ValidationError("matcher: object " + std::to_string(gt.id) +
                            " has an invalid box");
    }
  }
}

// Writes the assignment of `gts` against `anchors` into out[0, K).
void AssignInto(const std::vector<GtObject>& gts, const AnchorSet& anchors,
                const MatcherConfig& cfg, int* out) {
  const std::size_t num_anchors = anchors.size();
  std::vector<double> best_iou(num_anchors, -1.0);
  std::fill(out, out + num_anchors, kBackground);

  // Per object: best anchor and its IoU.
  std::vector<std::size_t> claim_anchor(gts.size(), 0);
  std::vector<double> claim_iou(gts.size(), 0.0);

  for (std::size_t g = 0; g < gts.size(); ++g) {
    const GtObject& gt = gts[g];
    for (std::size_t k = 0; k < num_anchors; ++k) {
      const double iou = IoU(gt.box, anchors[k]);
      if (iou > claim_iou[g]) {
        claim_iou[g] = iou;
        claim_anchor[g] = k;
      }
      if (iou < cfg.iou_threshold) continue;
      if (iou > best_iou[k] ||
          (iou == best_iou[k] && out[k] != kBackground && gt.id < out[k])) {
        best_iou[k] = iou;
        out[k] = gt.id;
      }
    }
  }

  if (!cfg.force_best_match) return;

  // Resolve competing forced claims per anchor, then apply them.
  std::vector<int> forced(num_anchors, kBackground);
  std::vector<double> forced_iou(num_anchors, 0.0);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!(claim_iou[g] > 0)) continue;
    const std::size_t k = claim_anchor[g];
    if (forced[k] == kBackground || claim_iou[g] > forced_iou[k] ||
        (claim_iou[g] == forced_iou[k] && gts[g].id < forced[k])) {
      forced[k] = gts[g].id;
      forced_iou[k] = claim_iou[g];
    }
  }
  for (std::size_t k = 0; k < num_anchors; ++k) {
    if (forced[k] != kBackground) out[k] = forced[k];
  }
}

void Summarize(const std::vector<GtObject>& gts, MatchResult& result) {
  std::set<int> assigned;
  result.positives_per_category.assign(
      static_cast<std::size_t>(result.num_categories), 0);
  // (id, category), sorted by id.
  std::vector<std::pair<int, int>> lookup;
  lookup.reserve(gts.size());
  for (const GtObject& gt : gts) lookup.emplace_back(gt.id, gt.category);
  std::sort(lookup.begin(), lookup.end());
  for (int id : result.assignment) {
    if (id == kBackground) continue;
    auto it = std::lower_bound(lookup.begin(), lookup.end(),
                               std::make_pair(id, -1));
    ++result.positives_per_category[static_cast<std::size_t>(it->second)];
    assigned.insert(id);
  }
  result.unassigned_gt.clear();
  for (const auto& [id, category] : lookup) {
    if (!assigned.count(id)) result.unassigned_gt.push_back(id);
  }
}

}  // namespace

void MatcherConfig::Validate() const {
  if (!(iou_threshold > 0 && iou_threshold < 1)) {
    throw ValidationError("matcher: iou_threshold must lie in (0,1)");
  }
  if (num_categories <= 0) {
    throw ValidationError("matcher: num_categories must be positive");
  }
}

std::size_t MatchResult::total_positives() const {
  std::size_t total = 0;
  for (std::size_t n : positives_per_category) total += n;
  return total;
}

MatchResult MatchStandard(const std::vector<GtObject>& gts,
                          const AnchorSet& anchors, const MatcherConfig& cfg) {
  CheckInputs(gts, anchors.size(), cfg);
  MatchResult result;
  result.regime = Regime::kStandard;
  result.num_anchors = anchors.size();
  result.num_categories = cfg.num_categories;
  result.assignment.resize(anchors.size());
  AssignInto(gts, anchors, cfg, result.assignment.data());
  Summarize(gts, result);
  return result;
}

MatchResult MatchForked(const std::vector<GtObject>& gts,
                        const ForkedAnchorSet& fork, const MatcherConfig& cfg) {
  CheckInputs(gts, fork.base.size(), cfg);
  if (fork.num_categories != cfg.num_categories) {
    throw ValidationError("matcher: fork has " +
                          std::to_string(fork.num_categories) +
                          " replicas but config has " +
                          std::to_string(cfg.num_categories) + " categories");
  }
  MatchResult result;
  result.regime = Regime::kFork;
  result.num_anchors = fork.base.size();
  result.num_categories = cfg.num_categories;
  result.assignment.resize(fork.slots());
  std::vector<GtObject> subset;
  for (int c = 0; c < cfg.num_categories; ++c) {
    subset.clear();
    for (const GtObject& gt : gts) {
      if (gt.category == c) subset.push_back(gt);
    }
    AssignInto(subset, fork.replica(c), cfg,
               result.assignment.data() +
                   static_cast<std::size_t>(c) * result.num_anchors);
  }
  Summarize(gts, result);
  return result;
}

std::vector<GtObject> NormalizedObjects(const Page& page) {
  std::vector<GtObject> out;
  out.reserve(page.objects.size());
  const double w = page.width;
  const double h = page.height;
  for (std::size_t i = 0; i < page.objects.size(); ++i) {
    const AnnotatedObject& obj = page.objects[i];
    out.push_back({{obj.box.x_min / w, obj.box.y_min / h, obj.box.x_max / w,
                    obj.box.y_max / h},
                   CategoryIndex(obj.category),
                   static_cast<int>(i)});
  }
  return out;
}

std::size_t PageConflict::n_gt() const {
  std::size_t n = 0;
  for (const auto& c : per_category) n += c.n_gt;
  return n;
}

std::size_t PageConflict::unassigned(Regime regime) const {
  std::size_t n = 0;
  for (const auto& c : per_category) {
    n += regime == Regime::kStandard ? c.unassigned_standard : c.unassigned_fork;
  }
  return n;
}

std::size_t ConflictReport::n_gt() const {
  std::size_t n = 0;
  for (const auto& c : totals) n += c.n_gt;
  return n;
}

std::size_t ConflictReport::unassigned(Regime regime) const {
  std::size_t n = 0;
  for (const auto& c : totals) {
    n += regime == Regime::kStandard ? c.unassigned_standard : c.unassigned_fork;
  }
  return n;
}

ConflictReport BuildConflictReport(const AnnotationCorpus& corpus,
                                   const AnchorSet& anchors,
                                   const MatcherConfig& cfg,
                                   bool include_irregular, unsigned threads) {
  cfg.Validate();
  const auto num_categories = static_cast<std::size_t>(cfg.num_categories);
  ForkedAnchorSet fork{anchors, cfg.num_categories};

  std::vector<const Page*> pages;
  ConflictReport report;
  for (const Volume& volume : corpus.volumes) {
    for (const Page& page : volume.pages) {
      if (page.irregular && !include_irregular) continue;
      pages.push_back(&page);
      PageConflict pc;
      pc.volume = volume.title;
      pc.page_id = page.page_id;
      pc.per_category.resize(num_categories);
      report.pages.push_back(std::move(pc));
    }
  }

  auto process = [&](std::size_t i) {
    const std::vector<GtObject> gts = NormalizedObjects(*pages[i]);
    const MatchResult standard = MatchStandard(gts, anchors, cfg);
    const MatchResult forked = MatchForked(gts, fork, cfg);
    auto& per_category = report.pages[i].per_category;
    for (const GtObject& gt : gts) {
      ++per_category[static_cast<std::size_t>(gt.category)].n_gt;
    }
    // Ids are object ordinals, so gts[id] is the object.
    for (int id : standard.unassigned_gt) {
      ++per_category[static_cast<std::size_t>(gts[static_cast<std::size_t>(id)].category)]
            .unassigned_standard;
    }
    for (int id : forked.unassigned_gt) {
      ++per_category[static_cast<std::size_t>(gts[static_cast<std::size_t>(id)].category)]
            .unassigned_fork;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(pages.size(), 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < pages.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = next++; i < pages.size(); i = next++) process(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  report.totals.assign(num_categories, {});
  for (const PageConflict& pc : report.pages) {
    for (std::size_t c = 0; c < num_categories; ++c) {
      report.totals[c] += pc.per_category[c];
    }
  }
  return report;
}

std::string ConflictReportToJson(const ConflictReport& report, Regime regime) {
  using nlohmann::ordered_json;
  auto per_category = [&](const std::vector<CategoryConflict>& cats) {
    ordered_json out = ordered_json::object();
    for (std::size_t c = 0; c < cats.size(); ++c) {
      const std::string name = c < static_cast<std::size_t>(kNumCategories)
                                   ? std::string(CategoryName(static_cast<int>(c)))
                                   : std::to_string(c);
      out[name] = {{"n_gt", cats[c].n_gt},
                   {"n_unassigned", regime == Regime::kStandard
                                        ? cats[c].unassigned_standard
                                        : cats[c].unassigned_fork}};
    }
    return out;
  };
  ordered_json doc;
  doc["regime"] = regime == Regime::kStandard ? "standard" : "fork";
  ordered_json pages = ordered_json::array();
  for (const PageConflict& pc : report.pages) {
    ordered_json jp;
    jp["volume"] = pc.volume;
    jp["page_id"] = pc.page_id;
    jp["n_gt"] = pc.n_gt();
    jp["n_unassigned"] = pc.unassigned(regime);
    jp["per_category"] = per_category(pc.per_category);
    pages.push_back(std::move(jp));
  }
  doc["pages"] = std::move(pages);
  ordered_json totals;
  totals["n_gt"] = report.n_gt();
  totals["n_unassigned"] = report.unassigned(regime);
  totals["per_category"] = per_category(report.totals);
  doc["totals"] = std::move(totals);
  return doc.dump(2) + "\n";
}

}  // namespace boxforge
