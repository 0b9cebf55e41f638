#ifndef BOXFORGE_VOC_EVAL_H_
#define BOXFORGE_VOC_EVAL_H_

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "boxforge/annotation_io.h"
#include "boxforge/geometry.h"
#include "boxforge/postprocess.h"

namespace boxforge {

enum class Interpolation { kElevenPoint, kAllPoint };

std::string_view InterpolationName(Interpolation i);

struct EvalConfig {
  double iou_threshold = 0.5;
  Interpolation interpolation = Interpolation::kAllPoint;
  bool include_irregular = false;

  void Validate() const;
};

struct PageKey {
  std::string volume;
  int page_id = 0;

  auto operator<=>(const PageKey&) const = default;
};

// One detection of a single category.
struct ScoredBox {
  PageKey page;
  BBox box;
  double score = 0;
};

// Ground truth of a single category, by page.
using GroundTruthMap = std::map<PageKey, std::vector<BBox>>;

std::size_t CountBoxes(const GroundTruthMap& gts);

// Precision/recall after each detection, in descending score order (ties
// keep input order). Each detection takes the unmatched gt on its page with
// the highest IoU >= iou_threshold; a gt matches at most once.
struct PrCurve {
  std::vector<double> scores;
  std::vector<bool> true_positive;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t num_gt = 0;
};

PrCurve BuildPrCurve(const std::vector<ScoredBox>& dets,
                     const GroundTruthMap& gts, double iou_threshold);

// Area under the curve. all-point: exact area under the monotone precision
// envelope. eleven-point: mean of the envelope at recall 0, 0.1, ..., 1.
double InterpolatedAp(const PrCurve& curve, Interpolation interpolation);

// nullopt when the category has no ground truth.
std::optional<double> AveragePrecision(const std::vector<ScoredBox>& dets,
                                       const GroundTruthMap& gts,
                                       const EvalConfig& cfg);

struct PrfResult {
  double recall = 0;
  double precision = 0;
  double f_measure = 0;
  // Detections with score >= threshold are kept. +inf when there are none.
  double threshold = 0;
};

// Sweeps every distinct detection score and returns the operating point
// with the highest F-measure (ties to the higher threshold).
PrfResult PrfAtBestThreshold(const std::vector<ScoredBox>& dets,
                             const GroundTruthMap& gts, double iou_threshold);

struct VolumeEval {
  std::string title;
  std::vector<std::optional<double>> ap;
  std::optional<double> map;
};

struct EvalResult {
  Interpolation interpolation = Interpolation::kAllPoint;
  double iou_threshold = 0.5;
  // nullopt for categories without ground truth; those are left out of mAP.
  std::vector<std::optional<double>> ap;
  std::optional<double> map;
  std::vector<VolumeEval> per_volume;
  std::vector<std::string> warnings;
};

// Splits corpus ground truth and detections by category. Detections on
// excluded (irregular) pages are dropped; detections naming an unknown page
// throw ValidationError.
struct CategorySplit {
  std::vector<std::vector<ScoredBox>> dets;
  std::vector<GroundTruthMap> gts;
};
CategorySplit SplitByCategory(const std::vector<PageDetection>& dets,
                              const AnnotationCorpus& corpus,
                              bool include_irregular);

EvalResult MeanAp(const std::vector<PageDetection>& dets,
                  const AnnotationCorpus& corpus, const EvalConfig& cfg,
                  bool per_volume = false);

// Recall/precision/F per category at each category's best threshold.
std::vector<PrfResult> PrfPerCategory(const std::vector<PageDetection>& dets,
                                      const AnnotationCorpus& corpus,
                                      const EvalConfig& cfg);

// Plain-text report, columns mAP, frame, text, face, body (percent).
std::string FormatEvalTable(const EvalResult& result);
std::string FormatPrfTable(const std::vector<PrfResult>& prf);
std::string EvalResultToJson(const EvalResult& result,
                             const std::vector<PrfResult>* prf = nullptr);

}  // namespace boxforge

#endif  // BOXFORGE_VOC_EVAL_H_
