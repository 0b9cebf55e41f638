#include "boxforge/multibox_loss.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

using nlohmann::json;

using GtIndex = std::map<int, const GtObject*>;

GtIndex IndexGts(const std::vector<GtObject>& gts) {
  GtIndex index;
  for (const GtObject& gt : gts) {
    if (!index.emplace(gt.id, &gt).second) {
      throw ValidationError("loss: duplicate object id " + std::to_string(gt.id));
    }
  }
  return index;
}

const GtObject& Lookup(const GtIndex& index, int id) {
  auto it = index.find(id);
  if (it == index.end()) {
    throw ValidationError("loss: match refers to unknown object id " +
                          std::to_string(id));
  }
  return *it->second;
}

void CheckCompatible(const PredictionSet& pred, const MatchResult& match,
                     const AnchorSet& anchors, const LossConfig& cfg,
                     HeadMode mode) {
  pred.Validate();
  if (pred.mode != mode) {
    throw ValidationError("loss: prediction head mode does not match the loss");
  }
  const Regime regime = mode == HeadMode::kFork ? Regime::kFork : Regime::kStandard;
  if (match.regime != regime) {
    throw ValidationError(mode == HeadMode::kFork
                              ? "loss: fork loss needs a forked match"
                              : "loss: baseline loss needs a standard match");
  }
  if (pred.num_anchors != anchors.size() || match.num_anchors != anchors.size()) {
    throw ValidationError("loss: K differs between predictions (" +
                          std::to_string(pred.num_anchors) + "), match (" +
                          std::to_string(match.num_anchors) + ") and anchors (" +
                          std::to_string(anchors.size()) + ")");
  }
  if (pred.num_categories != match.num_categories) {
    throw ValidationError("loss: C differs between predictions and match");
  }
  if (mode == HeadMode::kFork &&
      cfg.weights.size() != static_cast<std::size_t>(pred.num_categories)) {
    throw ValidationError("loss: expected " + std::to_string(pred.num_categories) +
                          " category weights, got " +
                          std::to_string(cfg.weights.size()));
  }
  for (double w : cfg.weights) {
    if (!(w >= 0)) throw ValidationError("loss: weights must be non-negative");
  }
  if (!(cfg.negative_ratio >= 0)) {
    throw ValidationError("loss: negative_ratio must be non-negative");
  }
}

double SmoothL1Grad(double r) {
  if (std::abs(r) < 1.0) return r;
  return r > 0 ? 1.0 : -1.0;
}

double LogSumExp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

std::array<double, 4> TargetOf(const GtObject& gt, const BBox& anchor,
                               const Variances& v) {
  const EncodedOffsets t = Encode(gt.box, anchor, v);
  return {t.d_cx, t.d_cy, t.d_w, t.d_h};
}

// Picks the `count` candidates with the largest loss (ties to the lower
// anchor index) and returns their indices ascending.
std::vector<std::size_t> MineHardest(
    std::vector<std::pair<double, std::size_t>> candidates, std::size_t count) {
  count = std::min(count, candidates.size());
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(count),
                    candidates.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(candidates[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t NegativeBudget(double ratio, std::size_t positives) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(positives)));
}

void CheckFrozen(const std::vector<std::size_t>& negatives,
                 const MatchResult& match, int replica) {
  for (std::size_t k : negatives) {
    if (k >= match.num_anchors || match.slot(replica, k) != kBackground) {
      throw ValidationError("loss: frozen negative " + std::to_string(k) +
                            " is not a background anchor");
    }
  }
}

// Negatives of one replica, either frozen or mined from `candidates`.
std::vector<std::size_t> SelectNegatives(
    const NegativeSelection* frozen, std::size_t replica,
    const MatchResult& match,
    std::vector<std::pair<double, std::size_t>> candidates,
    std::size_t positives, double ratio) {
  if (frozen) {
    CheckFrozen((*frozen)[replica], match, static_cast<int>(replica));
    return (*frozen)[replica];
  }
  return MineHardest(std::move(candidates), NegativeBudget(ratio, positives));
}

void CheckFrozenShape(const NegativeSelection* frozen, std::size_t replicas) {
  if (frozen && frozen->size() != replicas) {
    throw ValidationError("loss: frozen negative selection has " +
                          std::to_string(frozen->size()) + " lists, expected " +
                          std::to_string(replicas));
  }
}

json NestedLoc(const PredictionSet& pred, int c) {
  json rows = json::array();
  for (std::size_t k = 0; k < pred.num_anchors; ++k) {
    auto l = pred.loc_of(c, k);
    rows.push_back({l[0], l[1], l[2], l[3]});
  }
  return rows;
}

void ReadLocRows(const json& rows, std::vector<double>& out) {
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != 4) {
      throw ValidationError("predictions: every loc row needs 4 values");
    }
    for (const auto& v : row) out.push_back(v.get<double>());
  }
}

}  // namespace

double SmoothL1(double r) {
  const double a = std::abs(r);
  return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

PredictionSet PredictionSet::Zeros(HeadMode mode, std::size_t num_anchors,
                                   int num_categories) {
  PredictionSet p;
  p.mode = mode;
  p.num_anchors = num_anchors;
  p.num_categories = num_categories;
  p.loc.assign(p.expected_loc_size(), 0.0);
  p.conf.assign(p.expected_conf_size(), 0.0);
  return p;
}

std::size_t PredictionSet::expected_loc_size() const {
  const std::size_t replicas =
      mode == HeadMode::kFork ? static_cast<std::size_t>(num_categories) : 1;
  return replicas * num_anchors * 4;
}

std::size_t PredictionSet::expected_conf_size() const {
  const auto c = static_cast<std::size_t>(num_categories);
  return mode == HeadMode::kFork ? c * num_anchors : num_anchors * (c + 1);
}

void PredictionSet::Validate() const {
  if (num_categories <= 0) {
    throw ValidationError("predictions: C must be positive");
  }
  if (loc.size() != expected_loc_size() || conf.size() != expected_conf_size()) {
    throw ValidationError("predictions: shape mismatch for K=" +
                          std::to_string(num_anchors) +
                          ", C=" + std::to_string(num_categories));
  }
}

std::span<const double, 4> PredictionSet::loc_of(int c, std::size_t k) const {
  const std::size_t replica = mode == HeadMode::kFork ? static_cast<std::size_t>(c) : 0;
  return std::span<const double, 4>(loc.data() + (replica * num_anchors + k) * 4, 4);
}

std::span<double, 4> PredictionSet::loc_of(int c, std::size_t k) {
  const std::size_t replica = mode == HeadMode::kFork ? static_cast<std::size_t>(c) : 0;
  return std::span<double, 4>(loc.data() + (replica * num_anchors + k) * 4, 4);
}

double& PredictionSet::fork_conf(int c, std::size_t k) {
  return conf[static_cast<std::size_t>(c) * num_anchors + k];
}

double PredictionSet::fork_conf(int c, std::size_t k) const {
  return conf[static_cast<std::size_t>(c) * num_anchors + k];
}

std::span<const double> PredictionSet::baseline_conf(std::size_t k) const {
  const auto width = static_cast<std::size_t>(num_categories) + 1;
  return {conf.data() + k * width, width};
}

std::span<double> PredictionSet::baseline_conf(std::size_t k) {
  const auto width = static_cast<std::size_t>(num_categories) + 1;
  return {conf.data() + k * width, width};
}

std::string PredictionSetToJson(const PredictionSet& pred) {
  pred.Validate();
  json doc;
  if (pred.mode == HeadMode::kFork) {
    doc["mode"] = "fork";
    json loc = json::array(), conf = json::array();
    for (int c = 0; c < pred.num_categories; ++c) {
      loc.push_back(NestedLoc(pred, c));
      json row = json::array();
      for (std::size_t k = 0; k < pred.num_anchors; ++k) {
        row.push_back(pred.fork_conf(c, k));
      }
      conf.push_back(std::move(row));
    }
    doc["loc"] = std::move(loc);
    doc["conf"] = std::move(conf);
  } else {
    doc["mode"] = "baseline";
    doc["loc"] = NestedLoc(pred, 0);
    json conf = json::array();
    for (std::size_t k = 0; k < pred.num_anchors; ++k) {
      auto row = pred.baseline_conf(k);
      conf.push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["conf"] = std::move(conf);
  }
  return doc.dump() + "\n";
}

PredictionSet PredictionSetFromJson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("predictions: ") + e.what());
  }
  PredictionSet pred;
  try {
    const std::string mode = doc.at("mode").get<std::string>();
    const json& loc = doc.at("loc");
    const json& conf = doc.at("conf");
    if (!loc.is_array() || !conf.is_array()) {
      throw ValidationError("predictions: loc and conf must be arrays");
    }
    if (mode == "fork") {
      pred.mode = HeadMode::kFork;
      pred.num_categories = static_cast<int>(loc.size());
      pred.num_anchors = loc.empty() ? 0 : loc[0].size();
      if (conf.size() != loc.size()) {
        throw ValidationError("predictions: fork loc and conf disagree on C");
      }
      for (const auto& replica : loc) {
        if (!replica.is_array() || replica.size() != pred.num_anchors) {
          throw ValidationError("predictions: fork loc replicas differ in K");
        }
        ReadLocRows(replica, pred.loc);
      }
      for (const auto& row : conf) {
        if (!row.is_array() || row.size() != pred.num_anchors) {
          throw ValidationError("predictions: fork conf replicas differ in K");
        }
        for (const auto& v : row) pred.conf.push_back(v.get<double>());
      }
    } else if (mode == "baseline") {
      pred.mode = HeadMode::kBaseline;
      pred.num_anchors = loc.size();
      if (conf.size() != loc.size() || conf.empty() || !conf[0].is_array()) {
        throw ValidationError("predictions: baseline loc and conf disagree on K");
      }
      pred.num_categories = static_cast<int>(conf[0].size()) - 1;
      ReadLocRows(loc, pred.loc);
      for (const auto& row : conf) {
        if (!row.is_array() ||
            row.size() != static_cast<std::size_t>(pred.num_categories) + 1) {
          throw ValidationError("predictions: baseline conf rows differ in width");
        }
        for (const auto& v : row) pred.conf.push_back(v.get<double>());
      }
    } else {
      throw ValidationError("predictions: unknown mode \"" + mode + "\"");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("predictions: ") + e.what());
  }
  pred.Validate();
  return pred;
}

LossBreakdown LossFork(const PredictionSet& pred, const MatchResult& match,
                       const std::vector<GtObject>& gts,
                       const AnchorSet& anchors, const LossConfig& cfg,
                       const NegativeSelection* frozen) {
  CheckCompatible(pred, match, anchors, cfg, HeadMode::kFork);
  const auto num_categories = static_cast<std::size_t>(pred.num_categories);
  CheckFrozenShape(frozen, num_categories);
  const GtIndex index = IndexGts(gts);

  LossBreakdown out;
  out.categories.resize(num_categories);
  out.negatives.resize(num_categories);
  for (std::size_t c = 0; c < num_categories; ++c) {
    const int ci = static_cast<int>(c);
    CategoryTerm& term = out.categories[c];
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t k = 0; k < pred.num_anchors; ++k) {
      const int id = match.slot(ci, k);
      const double z = pred.fork_conf(ci, k);
      if (id == kBackground) {
        candidates.emplace_back(Softplus(z), k);
        continue;
      }
      const auto target = TargetOf(Lookup(index, id), anchors[k], cfg.variances);
      const auto offsets = pred.loc_of(ci, k);
      for (int j = 0; j < 4; ++j) term.loc += SmoothL1(offsets[j] - target[j]);
      term.conf += Softplus(-z);
      ++term.positives;
    }
    if (term.positives == 0) {
      term = {};
      continue;
    }
    out.negatives[c] = SelectNegatives(frozen, c, match, std::move(candidates),
                                       term.positives, cfg.negative_ratio);
    for (std::size_t k : out.negatives[c]) term.conf += Softplus(pred.fork_conf(ci, k));
    term.weighted =
        cfg.weights[c] * ((term.loc + term.conf) / static_cast<double>(term.positives));
  }
  for (const CategoryTerm& term : out.categories) out.total += term.weighted;
  return out;
}

LossBreakdown LossBaseline(const PredictionSet& pred, const MatchResult& match,
                           const std::vector<GtObject>& gts,
                           const AnchorSet& anchors, const LossConfig& cfg,
                           const NegativeSelection* frozen) {
  CheckCompatible(pred, match, anchors, cfg, HeadMode::kBaseline);
  CheckFrozenShape(frozen, 1);
  const auto num_categories = static_cast<std::size_t>(pred.num_categories);
  const GtIndex index = IndexGts(gts);

  LossBreakdown out;
  out.categories.resize(num_categories);
  out.negatives.resize(1);
  std::vector<std::pair<double, std::size_t>> candidates;
  std::size_t positives = 0;
  for (std::size_t k = 0; k < pred.num_anchors; ++k) {
    const auto logits = pred.baseline_conf(k);
    const double lse = LogSumExp(logits);
    const int id = match.slot(0, k);
    if (id == kBackground) {
      candidates.emplace_back(lse - logits[num_categories], k);
      continue;
    }
    const GtObject& gt = Lookup(index, id);
    CategoryTerm& term = out.categories[static_cast<std::size_t>(gt.category)];
    const auto target = TargetOf(gt, anchors[k], cfg.variances);
    const auto offsets = pred.loc_of(0, k);
    for (int j = 0; j < 4; ++j) term.loc += SmoothL1(offsets[j] - target[j]);
    term.conf += lse - logits[static_cast<std::size_t>(gt.category)];
    ++term.positives;
    ++positives;
  }
  if (positives == 0) {
    out.categories.assign(num_categories, {});
    return out;
  }
  out.negatives[0] = SelectNegatives(frozen, 0, match, std::move(candidates),
                                     positives, cfg.negative_ratio);
  for (std::size_t k : out.negatives[0]) {
    const auto logits = pred.baseline_conf(k);
    out.background_conf += LogSumExp(logits) - logits[num_categories];
  }
  double sum = 0;
  for (const CategoryTerm& term : out.categories) sum += term.loc + term.conf;
  sum += out.background_conf;
  out.total = sum / static_cast<double>(positives);
  return out;
}

LossBreakdown ComputeLoss(const PredictionSet& pred, const MatchResult& match,
                          const std::vector<GtObject>& gts,
                          const AnchorSet& anchors, const LossConfig& cfg,
                          const NegativeSelection* frozen) {
  return pred.mode == HeadMode::kFork
             ? LossFork(pred, match, gts, anchors, cfg, frozen)
             : LossBaseline(pred, match, gts, anchors, cfg, frozen);
}

PredictionSet LossGradient(const PredictionSet& pred, const MatchResult& match,
                           const std::vector<GtObject>& gts,
                           const AnchorSet& anchors, const LossConfig& cfg,
                           const NegativeSelection* frozen) {
  const LossBreakdown loss = ComputeLoss(pred, match, gts, anchors, cfg, frozen);
  const GtIndex index = IndexGts(gts);
  PredictionSet grad =
      PredictionSet::Zeros(pred.mode, pred.num_anchors, pred.num_categories);

  auto add_loc_grad = [&](int c, std::size_t k, const GtObject& gt, double scale) {
    const auto target = TargetOf(gt, anchors[k], cfg.variances);
    const auto offsets = pred.loc_of(c, k);
    auto g = grad.loc_of(c, k);
    for (int j = 0; j < 4; ++j) g[j] = scale * SmoothL1Grad(offsets[j] - target[j]);
  };

  if (pred.mode == HeadMode::kFork) {
    for (int c = 0; c < pred.num_categories; ++c) {
      const CategoryTerm& term = loss.categories[static_cast<std::size_t>(c)];
      if (term.positives == 0) continue;
      const double scale = cfg.weights[static_cast<std::size_t>(c)] /
                           static_cast<double>(term.positives);
      for (std::size_t k = 0; k < pred.num_anchors; ++k) {
        const int id = match.slot(c, k);
        if (id == kBackground) continue;
        add_loc_grad(c, k, Lookup(index, id), scale);
        grad.fork_conf(c, k) = scale * (Sigmoid(pred.fork_conf(c, k)) - 1.0);
      }
      for (std::size_t k : loss.negatives[static_cast<std::size_t>(c)]) {
        grad.fork_conf(c, k) = scale * Sigmoid(pred.fork_conf(c, k));
      }
    }
    return grad;
  }

  std::size_t positives = 0;
  for (const CategoryTerm& term : loss.categories) positives += term.positives;
  if (positives == 0) return grad;
  const double scale = 1.0 / static_cast<double>(positives);
  auto add_softmax_grad = [&](std::size_t k, std::size_t target_class) {
    const auto logits = pred.baseline_conf(k);
    const double lse = LogSumExp(logits);
    auto g = grad.baseline_conf(k);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      g[j] = scale * (std::exp(logits[j] - lse) - (j == target_class ? 1.0 : 0.0));
    }
  };
  for (std::size_t k = 0; k < pred.num_anchors; ++k) {
    const int id = match.slot(0, k);
    if (id == kBackground) continue;
    const GtObject& gt = Lookup(index, id);
    add_loc_grad(0, k, gt, scale);
    add_softmax_grad(k, static_cast<std::size_t>(gt.category));
  }
  for (std::size_t k : loss.negatives[0]) {
    add_softmax_grad(k, static_cast<std::size_t>(pred.num_categories));
  }
  return grad;
}

std::string LossBreakdownToJson(const LossBreakdown& loss, HeadMode mode) {
  nlohmann::ordered_json doc;
  doc["mode"] = mode == HeadMode::kFork ? "fork" : "baseline";
  doc["total"] = loss.total;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < loss.categories.size(); ++c) {
    const CategoryTerm& t = loss.categories[c];
    const std::string name = c < static_cast<std::size_t>(kNumCategories)
                                 ? std::string(CategoryName(static_cast<int>(c)))
                                 : std::to_string(c);
    nlohmann::ordered_json jc;
    jc["positives"] = t.positives;
    jc["loc"] = t.loc;
    jc["conf"] = t.conf;
    if (mode == HeadMode::kFork) {
      jc["weighted"] = t.weighted;
      jc["negatives"] = loss.negatives[c].size();
    }
    cats[name] = std::move(jc);
  }
  doc["categories"] = std::move(cats);
  if (mode == HeadMode::kBaseline) {
    doc["background_conf"] = loss.background_conf;
    doc["negatives"] = loss.negatives.empty() ? 0 : loss.negatives[0].size();
  }
  return doc.dump(2) + "\n";
}

}  // namespace boxforge
