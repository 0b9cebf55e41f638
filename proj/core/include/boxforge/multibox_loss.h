#ifndef BOXFORGE_MULTIBOX_LOSS_H_
#define BOXFORGE_MULTIBOX_LOSS_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boxforge/anchor_grid.h"
#include "boxforge/geometry.h"
#include "boxforge/matcher.h"

namespace boxforge {

enum class HeadMode { kBaseline, kFork };

// Raw detection-layer outputs.
//
//   fork:     loc = C x K x 4 offsets, conf = C x K sigmoid logits
//   baseline: loc = K x 4 offsets,     conf = K x (C+1) softmax logits,
//             background in the last column
//
// Stored flat, row-major in the order listed.
struct PredictionSet {
  HeadMode mode = HeadMode::kFork;
  std::size_t num_anchors = 0;
  int num_categories = 0;
  std::vector<double> loc;
  std::vector<double> conf;

  static PredictionSet Zeros(HeadMode mode, std::size_t num_anchors,
                             int num_categories);

  std::size_t expected_loc_size() const;
  std::size_t expected_conf_size() const;
  // Throws ValidationError on a shape mismatch.
  void Validate() const;

  // Offsets of anchor k for replica c (baseline ignores c).
  std::span<const double, 4> loc_of(int c, std::size_t k) const;
  std::span<double, 4> loc_of(int c, std::size_t k);
  // Fork: logit of anchor k in replica c.
  double& fork_conf(int c, std::size_t k);
  double fork_conf(int c, std::size_t k) const;
  // Baseline: the C+1 logits of anchor k.
  std::span<const double> baseline_conf(std::size_t k) const;
  std::span<double> baseline_conf(std::size_t k);

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

// {"mode": "fork"|"baseline", "loc": nested arrays, "conf": nested arrays}
// with the shapes above.
std::string PredictionSetToJson(const PredictionSet& pred);
PredictionSet PredictionSetFromJson(std::string_view text);

struct LossConfig {
  // w_c for (frame, text, face, body).
  std::vector<double> weights = {0.2, 0.2, 0.4, 0.2};
  // Mined negatives per positive.
  double negative_ratio = 3.0;
  Variances variances;
};

// Mined background anchors: one list per replica for the fork head, a
// single global list for the baseline head. Indices ascending.
using NegativeSelection = std::vector<std::vector<std::size_t>>;

struct CategoryTerm {
  double loc = 0;    // sum of smooth-L1 over positive slots
  double conf = 0;   // fork: positives + mined negatives; baseline: positives
  std::size_t positives = 0;
  // Fork: w_c * (loc + conf) / N_+^c, or 0 when N_+^c = 0. Baseline: 0.
  double weighted = 0;
};

struct LossBreakdown {
  double total = 0;
  std::vector<CategoryTerm> categories;
  NegativeSelection negatives;
  // Baseline only: confidence loss of the mined negatives.
  double background_conf = 0;
};

double SmoothL1(double r);
double Sigmoid(double z);
// log(1 + e^x) without overflow.
double Softplus(double x);

// Category-weighted sigmoid loss of the forked head:
//   L = sum_c w_c (L_loc^c + L_conf^c) / N_+^c  over categories with N_+^c > 0.
// When `frozen` is given it replaces hard-negative mining.
LossBreakdown LossFork(const PredictionSet& pred, const MatchResult& match,
                       const std::vector<GtObject>& gts,
                       const AnchorSet& anchors, const LossConfig& cfg,
                       const NegativeSelection* frozen = nullptr);

// Softmax multibox loss of the single head, normalized by the total number
// of positives. Weights are ignored.
LossBreakdown LossBaseline(const PredictionSet& pred, const MatchResult& match,
                           const std::vector<GtObject>& gts,
                           const AnchorSet& anchors, const LossConfig& cfg,
                           const NegativeSelection* frozen = nullptr);

// Dispatches on pred.mode.
LossBreakdown ComputeLoss(const PredictionSet& pred, const MatchResult& match,
                          const std::vector<GtObject>& gts,
                          const AnchorSet& anchors, const LossConfig& cfg,
                          const NegativeSelection* frozen = nullptr);

// Analytic dL/dpred, shaped like `pred`. The mined set is taken from
// `frozen` when given, otherwise mined at `pred`; either way it is held
// fixed while differentiating.
PredictionSet LossGradient(const PredictionSet& pred, const MatchResult& match,
                           const std::vector<GtObject>& gts,
                           const AnchorSet& anchors, const LossConfig& cfg,
                           const NegativeSelection* frozen = nullptr);

std::string LossBreakdownToJson(const LossBreakdown& loss, HeadMode mode);

}  // namespace boxforge

#endif  // BOXFORGE_MULTIBOX_LOSS_H_
