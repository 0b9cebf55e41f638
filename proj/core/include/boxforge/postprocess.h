#ifndef BOXFORGE_POSTPROCESS_H_
#define BOXFORGE_POSTPROCESS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "boxforge/anchor_grid.h"
#include "boxforge/geometry.h"
#include "boxforge/multibox_loss.h"

namespace boxforge {

struct Detection {
  BBox box;
  int category = 0;
  double score = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct PostConfig {
  double score_threshold = 0.01;
  double nms_iou = 0.45;
  std::size_t top_k = 200;

  void Validate() const;
};

// Greedy suppression within one category: visit by descending score (ties
// to the earlier input), keep a detection iff its IoU with every kept one
// is <= nms_iou. Output is in visit order.
std::vector<Detection> Nms(const std::vector<Detection>& dets, double nms_iou);

// Scores every (anchor, category) pair, keeps scores >= score_threshold,
// suppresses per category and returns the global top_k by score. Ties are
// ordered by category, then anchor index.
std::vector<Detection> Detect(const PredictionSet& pred,
                              const AnchorSet& anchors, const PostConfig& cfg,
                              const Variances& variances);

// A detection placed on a corpus page, in pixel coordinates.
struct PageDetection {
  std::string volume;  // may be empty when page ids are unique corpus-wide
  int page_id = 0;
  Detection det;

  friend bool operator==(const PageDetection&, const PageDetection&) = default;
};

// Scales a normalized box to a width x height page.
BBox Denormalize(const BBox& b, double width, double height);

// One JSON object per line:
//   {"box":[x_min,y_min,x_max,y_max],"category":"face","page_id":3,
//    "score":0.9,"volume":"..."}
// "volume" is omitted when empty.
std::string WriteDetectionsJsonl(const std::vector<PageDetection>& dets);
// Blank lines are skipped. Errors name the 1-based line.
std::vector<PageDetection> ReadDetectionsJsonl(std::string_view text);

}  // namespace boxforge

#endif  // BOXFORGE_POSTPROCESS_H_
