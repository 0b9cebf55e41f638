#include "reference/oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

namespace boxforge::reference {
namespace {

const GtObject& FindGt(const std::vector<GtObject>& gts, int id) {
  for (const GtObject& g : gts) {
    if (g.id == id) return g;
  }
  throw std::logic_error("reference: unknown id");
}

double RefSmoothL1(double r) {
  return std::abs(r) < 1 ? r * r / 2 : std::abs(r) - 0.5;
}

std::vector<double> RefTarget(const BBox& g, const BBox& a, const Variances& v) {
  const double gw = g.x_max - g.x_min, gh = g.y_max - g.y_min;
  const double aw = a.x_max - a.x_min, ah = a.y_max - a.y_min;
  const double gcx = (g.x_min + g.x_max) / 2, gcy = (g.y_min + g.y_max) / 2;
  const double acx = (a.x_min + a.x_max) / 2, acy = (a.y_min + a.y_max) / 2;
  return {(gcx - acx) / aw / v.center, (gcy - acy) / ah / v.center,
          std::log(gw / aw) / v.size, std::log(gh / ah) / v.size};
}

// Indices of the `count` largest losses, ties to the lower index.
std::vector<std::size_t> RefMine(std::vector<std::pair<double, std::size_t>> pool,
                                 std::size_t count) {
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size() && i < count; ++i) out.push_back(pool[i].second);
  return out;
}

}  // namespace

double RefIoU(const BBox& a, const BBox& b) {
  const double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = w * h;
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<int> RefAssign(const std::vector<GtObject>& gts,
                           const std::vector<BBox>& anchors, double threshold,
                           bool force_best_match) {
  std::vector<int> out(anchors.size(), kBackground);
  // Threshold stage: for each anchor, the best qualifying (iou, -id).
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    std::pair<double, int> best{-1, 0};
    for (const GtObject& g : gts) {
      const double iou = RefIoU(g.box, anchors[k]);
      if (iou < threshold) continue;
      const std::pair<double, int> key{iou, -g.id};
      if (key > best) best = key;
    }
    if (best.first >= 0) out[k] = -best.second;
  }
  if (!force_best_match) return out;

  // Each object names its best anchor (lowest index among equals).
  std::vector<std::pair<std::size_t, double>> claims;
  for (const GtObject& g : gts) {
    std::size_t best_k = 0;
    double best_iou = -1;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double iou = RefIoU(g.box, anchors[k]);
      if (iou > best_iou) {
        best_iou = iou;
        best_k = k;
      }
    }
    claims.emplace_back(best_k, best_iou);
  }
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    std::pair<double, int> winner{-1, 0};
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claims[g].first != k || !(claims[g].second > 0)) continue;
      const std::pair<double, int> key{claims[g].second, -gts[g].id};
      if (key > winner) winner = key;
    }
    if (winner.first > 0) out[k] = -winner.second;
  }
  return out;
}

namespace {

RefMatch Summarize(std::vector<int> assignment, const std::vector<GtObject>& gts,
                   int num_categories) {
  RefMatch m;
  m.assignment = std::move(assignment);
  m.positives_per_category.assign(static_cast<std::size_t>(num_categories), 0);
  for (int id : m.assignment) {
    if (id != kBackground) {
      ++m.positives_per_category[static_cast<std::size_t>(FindGt(gts, id).category)];
    }
  }
  for (const GtObject& g : gts) {
    if (std::find(m.assignment.begin(), m.assignment.end(), g.id) == m.assignment.end()) {
      m.unassigned.push_back(g.id);
    }
  }
  std::sort(m.unassigned.begin(), m.unassigned.end());
  return m;
}

}  // namespace

RefMatch RefMatchStandard(const std::vector<GtObject>& gts,
                          const std::vector<BBox>& anchors, double threshold,
                          bool force, int num_categories) {
  return Summarize(RefAssign(gts, anchors, threshold, force), gts, num_categories);
}

RefMatch RefMatchForked(const std::vector<GtObject>& gts,
                        const std::vector<BBox>& anchors, double threshold,
                        bool force, int num_categories) {
  std::vector<int> all;
  for (int c = 0; c < num_categories; ++c) {
    std::vector<GtObject> subset;
    for (const GtObject& g : gts) {
      if (g.category == c) subset.push_back(g);
    }
    const auto part = RefAssign(subset, anchors, threshold, force);
    all.insert(all.end(), part.begin(), part.end());
  }
  return Summarize(std::move(all), gts, num_categories);
}

RefLoss RefLossFork(const PredictionSet& pred, const std::vector<int>& assignment,
                    const std::vector<GtObject>& gts,
                    const std::vector<BBox>& anchors, const LossConfig& cfg) {
  const std::size_t K = anchors.size();
  const auto C = static_cast<std::size_t>(pred.num_categories);
  RefLoss out;
  out.loc.assign(C, 0);
  out.conf.assign(C, 0);
  out.weighted.assign(C, 0);
  out.positives.assign(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<std::pair<double, std::size_t>> background;
    for (std::size_t k = 0; k < K; ++k) {
      const int id = assignment[c * K + k];
      const double z = pred.conf[c * K + k];
      const double p = 1.0 / (1.0 + std::exp(-z));
      if (id == kBackground) {
        background.emplace_back(-std::log(1.0 - p), k);
        continue;
      }
      ++out.positives[c];
      const auto t = RefTarget(FindGt(gts, id).box, anchors[k], cfg.variances);
      for (std::size_t j = 0; j < 4; ++j) {
        out.loc[c] += RefSmoothL1(pred.loc[(c * K + k) * 4 + j] - t[j]);
      }
      out.conf[c] += -std::log(p);
    }
    if (out.positives[c] == 0) continue;
    const auto budget = static_cast<std::size_t>(
        std::ceil(cfg.negative_ratio * static_cast<double>(out.positives[c])));
    for (std::size_t k : RefMine(background, budget)) {
      const double p = 1.0 / (1.0 + std::exp(-pred.conf[c * K + k]));
      out.conf[c] += -std::log(1.0 - p);
    }
    out.weighted[c] =
        cfg.weights[c] * (out.loc[c] + out.conf[c]) / static_cast<double>(out.positives[c]);
    out.total += out.weighted[c];
  }
  return out;
}

RefLoss RefLossBaseline(const PredictionSet& pred,
                        const std::vector<int>& assignment,
                        const std::vector<GtObject>& gts,
                        const std::vector<BBox>& anchors, const LossConfig& cfg) {
  const std::size_t K = anchors.size();
  const auto C = static_cast<std::size_t>(pred.num_categories);
  RefLoss out;
  out.loc.assign(C, 0);
  out.conf.assign(C, 0);
  out.weighted.assign(C, 0);
  out.positives.assign(C, 0);
  auto neg_log_softmax = [&](std::size_t k, std::size_t cls) {
    double denom = 0;
    for (std::size_t j = 0; j <= C; ++j) denom += std::exp(pred.conf[k * (C + 1) + j]);
    return -std::log(std::exp(pred.conf[k * (C + 1) + cls]) / denom);
  };
  std::vector<std::pair<double, std::size_t>> background;
  std::size_t positives = 0;
  double sum = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const int id = assignment[k];
    if (id == kBackground) {
      background.emplace_back(neg_log_softmax(k, C), k);
      continue;
    }
    const GtObject& g = FindGt(gts, id);
    const auto c = static_cast<std::size_t>(g.category);
    const auto t = RefTarget(g.box, anchors[k], cfg.variances);
    for (std::size_t j = 0; j < 4; ++j) {
      const double l = RefSmoothL1(pred.loc[k * 4 + j] - t[j]);
      out.loc[c] += l;
      sum += l;
    }
    const double l = neg_log_softmax(k, c);
    out.conf[c] += l;
    sum += l;
    ++out.positives[c];
    ++positives;
  }
  if (positives == 0) return out;
  const auto budget = static_cast<std::size_t>(
      std::ceil(cfg.negative_ratio * static_cast<double>(positives)));
  for (std::size_t k : RefMine(background, budget)) sum += neg_log_softmax(k, C);
  out.total = sum / static_cast<double>(positives);
  return out;
}

std::vector<Detection> RefNms(const std::vector<Detection>& dets, double nms_iou) {
  const std::size_t n = dets.size();
  // rank[i] = number of detections that precede i.
  std::vector<std::size_t> rank(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (dets[j].score > dets[i].score || (dets[j].score == dets[i].score && j < i)) {
        ++rank[i];
      }
    }
  }
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[rank[i]] = i;
  std::vector<bool> keep(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = by_rank[r];
    keep[i] = true;
    for (std::size_t q = 0; q < r; ++q) {
      const std::size_t j = by_rank[q];
      if (keep[j] && RefIoU(dets[i].box, dets[j].box) > nms_iou) keep[i] = false;
    }
  }
  std::vector<Detection> out;
  for (std::size_t r = 0; r < n; ++r) {
    if (keep[by_rank[r]]) out.push_back(dets[by_rank[r]]);
  }
  return out;
}

bool IsGreedyNmsResult(const std::vector<Detection>& dets,
                       const std::vector<Detection>& kept, double nms_iou) {
  const std::size_t n = dets.size();
  auto before = [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score || (dets[a].score == dets[b].score && a < b);
  };
  // Map each kept detection back to a distinct input index.
  std::vector<bool> in_kept(n, false);
  std::vector<std::size_t> kept_index;
  for (const Detection& k : kept) {
    bool found = false;
    for (std::size_t i = 0; i < n && !found; ++i) {
      if (!in_kept[i] && dets[i] == k) {
        in_kept[i] = true;
        kept_index.push_back(i);
        found = true;
      }
    }
    if (!found) return false;
  }
  for (std::size_t a = 0; a + 1 < kept_index.size(); ++a) {
    if (!before(kept_index[a], kept_index[a + 1])) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool covered = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !in_kept[j]) continue;
      if (RefIoU(dets[i].box, dets[j].box) > nms_iou) {
        if (in_kept[i]) return false;  // two kept boxes overlap
        if (before(j, i)) covered = true;
      }
    }
    if (!in_kept[i] && !covered) return false;
  }
  return true;
}

RefCurve RefRankAndMatch(const std::vector<ScoredBox>& dets,
                         const GroundTruthMap& gts, double iou_threshold) {
  RefCurve curve;
  // Flatten ground truth into one list with page labels.
  std::vector<std::pair<PageKey, BBox>> flat;
  for (const auto& [page, boxes] : gts) {
    for (const BBox& b : boxes) flat.emplace_back(page, b);
  }
  curve.num_gt = flat.size();
  std::vector<bool> used(flat.size(), false);

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Insertion sort: descending score, ties by input position.
  for (std::size_t i = 1; i < order.size(); ++i) {
    for (std::size_t j = i; j > 0 && dets[order[j]].score > dets[order[j - 1]].score; --j) {
      std::swap(order[j], order[j - 1]);
    }
  }
  for (std::size_t idx : order) {
    const ScoredBox& d = dets[idx];
    std::size_t best = flat.size();
    double best_iou = 0;
    for (std::size_t g = 0; g < flat.size(); ++g) {
      if (used[g] || !(flat[g].first == d.page)) continue;
      const double iou = RefIoU(d.box, flat[g].second);
      if (iou >= iou_threshold && (best == flat.size() || iou > best_iou)) {
        best = g;
        best_iou = iou;
      }
    }
    if (best != flat.size()) used[best] = true;
    curve.scores.push_back(d.score);
    curve.tp.push_back(best != flat.size());
  }
  return curve;
}

double RefApAllPoint(const RefCurve& curve) {
  const std::size_t n = curve.tp.size();
  if (curve.num_gt == 0) return 0;
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  double ap = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!curve.tp[j]) continue;
    double best = 0;
    for (std::size_t i = j; i < n; ++i) best = std::max(best, precision[i]);
    ap += best / static_cast<double>(curve.num_gt);
  }
  return ap;
}

double RefApElevenPoint(const RefCurve& curve) {
  const std::size_t n = curve.tp.size();
  if (curve.num_gt == 0) return 0;
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(curve.num_gt);
  }
  double ap = 0;
  for (int t = 0; t <= 10; ++t) {
    double best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (recall[i] >= t / 10.0) best = std::max(best, precision[i]);
    }
    ap += best / 11.0;
  }
  return ap;
}

PrfResult RefPrfSweep(const std::vector<ScoredBox>& dets,
                      const GroundTruthMap& gts, double iou_threshold) {
  PrfResult best{0, 0, 0, std::numeric_limits<double>::infinity()};
  std::set<double> thresholds;
  for (const ScoredBox& d : dets) thresholds.insert(d.score);
  bool have = false;
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    std::vector<ScoredBox> kept;
    for (const ScoredBox& d : dets) {
      if (d.score >= *it) kept.push_back(d);
    }
    const RefCurve curve = RefRankAndMatch(kept, gts, iou_threshold);
    const auto tp = static_cast<std::size_t>(
        std::count(curve.tp.begin(), curve.tp.end(), true));
    const double r = curve.num_gt ? static_cast<double>(tp) /
                                        static_cast<double>(curve.num_gt)
                                  : 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(kept.size());
    const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    if (!have || f > best.f_measure) {
      best = {r, p, f, *it};
      have = true;
    }
  }
  return best;
}

}  // namespace boxforge::reference
