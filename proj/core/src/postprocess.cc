#include "boxforge/postprocess.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "boxforge/annotation_io.h"
#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

using nlohmann::json;

struct Candidate {
  Detection det;
  std::size_t anchor;
};

// Indices of the detections kept by greedy suppression, in visit order.
std::vector<std::size_t> KeptIndices(const std::vector<Detection>& dets,
                                     double nms_iou) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return IoU(dets[k].box, dets[i].box) > nms_iou;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

}  // namespace

void PostConfig::Validate() const {
  if (!(score_threshold > 0 && score_threshold < 1)) {
    throw ValidationError("postprocess: score_threshold must lie in (0,1)");
  }
  if (!(nms_iou > 0 && nms_iou < 1)) {
    throw ValidationError("postprocess: nms_iou must lie in (0,1)");
  }
}

std::vector<Detection> Nms(const std::vector<Detection>& dets, double nms_iou) {
  std::vector<Detection> kept;
  for (std::size_t i : KeptIndices(dets, nms_iou)) kept.push_back(dets[i]);
  return kept;
}

std::vector<Detection> Detect(const PredictionSet& pred,
                              const AnchorSet& anchors, const PostConfig& cfg,
                              const Variances& variances) {
  pred.Validate();
  cfg.Validate();
  if (pred.num_anchors != anchors.size()) {
    throw ValidationError("detect: predictions have K=" +
                          std::to_string(pred.num_anchors) + " but there are " +
                          std::to_string(anchors.size()) + " anchors");
  }

  auto decode = [&](int c, std::size_t k) {
    const auto l = pred.loc_of(c, k);
    return Decode({l[0], l[1], l[2], l[3]}, anchors[k], variances);
  };

  std::vector<Candidate> merged;
  std::vector<Detection> per_category;
  std::vector<std::size_t> anchor_of;
  for (int c = 0; c < pred.num_categories; ++c) {
    per_category.clear();
    anchor_of.clear();
    for (std::size_t k = 0; k < pred.num_anchors; ++k) {
      double score;
      if (pred.mode == HeadMode::kFork) {
        score = Sigmoid(pred.fork_conf(c, k));
      } else {
        const auto logits = pred.baseline_conf(k);
        const double m = *std::max_element(logits.begin(), logits.end());
        double denom = 0;
        for (double v : logits) denom += std::exp(v - m);
        score = std::exp(logits[static_cast<std::size_t>(c)] - m) / denom;
      }
      if (!(score >= cfg.score_threshold)) continue;
      per_category.push_back({decode(c, k), c, score});
      anchor_of.push_back(k);
    }
    for (std::size_t i : KeptIndices(per_category, cfg.nms_iou)) {
      merged.push_back({per_category[i], anchor_of[i]});
    }
  }

  std::stable_sort(merged.begin(), merged.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.det.score != b.det.score) return a.det.score > b.det.score;
                     if (a.det.category != b.det.category)
                       return a.det.category < b.det.category;
                     return a.anchor < b.anchor;
                   });
  if (merged.size() > cfg.top_k) merged.resize(cfg.top_k);
  std::vector<Detection> out;
  out.reserve(merged.size());
  for (const Candidate& c : merged) out.push_back(c.det);
  return out;
}

BBox Denormalize(const BBox& b, double width, double height) {
  return {b.x_min * width, b.y_min * height, b.x_max * width, b.y_max * height};
}

std::string WriteDetectionsJsonl(const std::vector<PageDetection>& dets) {
  std::string out;
  for (const PageDetection& d : dets) {
    json line;
    if (!d.volume.empty()) line["volume"] = d.volume;
    line["page_id"] = d.page_id;
    line["category"] = d.det.category < kNumCategories
                           ? json(CategoryName(d.det.category))
                           : json(d.det.category);
    line["score"] = d.det.score;
    line["box"] = {d.det.box.x_min, d.det.box.y_min, d.det.box.x_max,
                   d.det.box.y_max};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<PageDetection> ReadDetectionsJsonl(std::string_view text) {
  std::vector<PageDetection> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "detections line " + std::to_string(line_no) + ": ";
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + e.what());
    }
    PageDetection d;
    try {
      if (doc.contains("volume")) d.volume = doc["volume"].get<std::string>();
      d.page_id = doc.at("page_id").get<int>();
      const json& cat = doc.at("category");
      d.det.category = cat.is_string() ? CategoryIndex(CategoryFromName(cat.get<std::string>()))
                                       : cat.get<int>();
      d.det.score = doc.at("score").get<double>();
      const auto box = doc.at("box").get<std::vector<double>>();
      if (box.size() != 4) throw ValidationError(where + "box needs 4 values");
      d.det.box = {box[0], box[1], box[2], box[3]};
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    if (!d.det.box.valid()) throw ValidationError(where + "box must satisfy min <= max");
    if (!(d.det.score >= 0 && d.det.score <= 1)) {
      throw ValidationError(where + "score must lie in [0,1]");
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace boxforge
