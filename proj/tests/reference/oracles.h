// Straightforward reference implementations used as test oracles. They
// follow the documented rules literally and share no code with core/ beyond
// the plain data types.
#ifndef BOXFORGE_TESTS_REFERENCE_ORACLES_H_
#define BOXFORGE_TESTS_REFERENCE_ORACLES_H_

#include <cstddef>
#include <vector>

#include "boxforge/anchor_grid.h"
#include "boxforge/matcher.h"
#include "boxforge/multibox_loss.h"
#include "boxforge/postprocess.h"
#include "boxforge/voc_eval.h"

namespace boxforge::reference {

double RefIoU(const BBox& a, const BBox& b);

// Brute-force standard matcher: every rule applied by exhaustive scans.
std::vector<int> RefAssign(const std::vector<GtObject>& gts,
                           const std::vector<BBox>& anchors, double threshold,
                           bool force_best_match);

struct RefMatch {
  std::vector<int> assignment;  // replica-major for fork
  std::vector<std::size_t> positives_per_category;
  std::vector<int> unassigned;  // ascending
};

RefMatch RefMatchStandard(const std::vector<GtObject>& gts,
                          const std::vector<BBox>& anchors, double threshold,
                          bool force, int num_categories);
RefMatch RefMatchForked(const std::vector<GtObject>& gts,
                        const std::vector<BBox>& anchors, double threshold,
                        bool force, int num_categories);

struct RefLoss {
  double total = 0;
  std::vector<double> loc, conf, weighted;
  std::vector<std::size_t> positives;
};

// Naive per-term loss of the forked head (sigmoid) and of the baseline head
// (softmax). Mining sorts every background candidate.
RefLoss RefLossFork(const PredictionSet& pred, const std::vector<int>& assignment,
                    const std::vector<GtObject>& gts,
                    const std::vector<BBox>& anchors, const LossConfig& cfg);
RefLoss RefLossBaseline(const PredictionSet& pred,
                        const std::vector<int>& assignment,
                        const std::vector<GtObject>& gts,
                        const std::vector<BBox>& anchors, const LossConfig& cfg);

// True iff `kept` is exactly the greedy NMS result of `dets`: checks the
// characterization (pairwise separation of kept boxes, every dropped box is
// covered by a better-ranked kept box, rank order) over all pairs.
bool IsGreedyNmsResult(const std::vector<Detection>& dets,
                       const std::vector<Detection>& kept, double nms_iou);

// Literal O(n^2) greedy NMS over explicit ranks.
std::vector<Detection> RefNms(const std::vector<Detection>& dets, double nms_iou);

// Per-detection TP flags in ranked order, from a from-scratch matching.
struct RefCurve {
  std::vector<double> scores;
  std::vector<bool> tp;
  std::size_t num_gt = 0;
};
RefCurve RefRankAndMatch(const std::vector<ScoredBox>& dets,
                         const GroundTruthMap& gts, double iou_threshold);

// All-point AP as the sum, over true positives, of recall step times the
// best precision at or beyond that rank. Eleven-point AP by definition.
double RefApAllPoint(const RefCurve& curve);
double RefApElevenPoint(const RefCurve& curve);

// Re-matches from scratch at every distinct threshold.
PrfResult RefPrfSweep(const std::vector<ScoredBox>& dets,
                      const GroundTruthMap& gts, double iou_threshold);

}  // namespace boxforge::reference

#endif  // BOXFORGE_TESTS_REFERENCE_ORACLES_H_
