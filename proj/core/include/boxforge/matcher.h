#ifndef BOXFORGE_MATCHER_H_
#define BOXFORGE_MATCHER_H_

#include <cstddef>
#include <string>
#include <vector>

#include "boxforge/anchor_grid.h"
#include "boxforge/annotation_io.h"
#include "boxforge/geometry.h"

namespace boxforge {

// A ground-truth object in normalized [0,1] page coordinates.
struct GtObject {
  BBox box;
  int category = 0;
  int id = 0;  // >= 0, unique within a page; breaks ties
};

struct MatcherConfig {
  double iou_threshold = 0.5;
  // Each object also claims its single best anchor, even below threshold.
  bool force_best_match = true;
  int num_categories = kNumCategories;

  void Validate() const;
};

enum class Regime { kStandard, kFork };

inline constexpr int kBackground = -1;

struct MatchResult {
  Regime regime = Regime::kStandard;
  std::size_t num_anchors = 0;
  int num_categories = 0;
  // Standard: one slot per anchor. Fork: slot c * num_anchors + k belongs
  // to anchor k of replica c. Holds a GtObject id or kBackground.
  std::vector<int> assignment;
  // N_+^c: slots assigned to category-c objects.
  std::vector<std::size_t> positives_per_category;
  // Ids of objects that received no slot, ascending.
  std::vector<int> unassigned_gt;

  std::size_t num_replicas() const {
    return regime == Regime::kFork ? static_cast<std::size_t>(num_categories)
                                   : 1;
  }
  int slot(int replica, std::size_t anchor) const {
    return assignment[static_cast<std::size_t>(replica) * num_anchors + anchor];
  }
  std::size_t total_positives() const;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

// Threshold matching (highest IoU >= threshold, ties to the lower id),
// followed by forced best-anchor claims when enabled. A forced claim
// overrides any threshold assignment; competing forced claims on one
// anchor go to the higher IoU, then the lower id. An object whose best IoU
// is 0 has nothing to claim.
//
// Throws ValidationError for an empty anchor set, duplicate ids or an
// out-of-range category.
MatchResult MatchStandard(const std::vector<GtObject>& gts,
                          const AnchorSet& anchors, const MatcherConfig& cfg);

// Runs MatchStandard per category against that category's replica.
MatchResult MatchForked(const std::vector<GtObject>& gts,
                        const ForkedAnchorSet& fork, const MatcherConfig& cfg);

// Objects of a page in normalized coordinates; ids are object ordinals.
std::vector<GtObject> NormalizedObjects(const Page& page);

struct CategoryConflict {
  std::size_t n_gt = 0;
  std::size_t unassigned_standard = 0;
  std::size_t unassigned_fork = 0;

  CategoryConflict& operator+=(const CategoryConflict& o) {
    n_gt += o.n_gt;
    unassigned_standard += o.unassigned_standard;
    unassigned_fork += o.unassigned_fork;
    return *this;
  }
  friend bool operator==(const CategoryConflict&,
                         const CategoryConflict&) = default;
};

struct PageConflict {
  std::string volume;
  int page_id = 0;
  std::vector<CategoryConflict> per_category;

  std::size_t n_gt() const;
  std::size_t unassigned(Regime regime) const;
};

struct ConflictReport {
  std::vector<PageConflict> pages;  // corpus order
  std::vector<CategoryConflict> totals;

  std::size_t n_gt() const;
  std::size_t unassigned(Regime regime) const;
};

// Matches every included page under both regimes. Pages run on up to
// `threads` worker threads (0 = hardware concurrency); the result does not
// depend on the thread count.
ConflictReport BuildConflictReport(const AnnotationCorpus& corpus,
                                   const AnchorSet& anchors,
                                   const MatcherConfig& cfg,
                                   bool include_irregular = false,
                                   unsigned threads = 1);

// {"regime", "pages":[{volume, page_id, n_gt, n_unassigned,
//  per_category:{name:{n_gt, n_unassigned}}}], "totals":{...}}.
std::string ConflictReportToJson(const ConflictReport& report, Regime regime);

}  // namespace boxforge

#endif  // BOXFORGE_MATCHER_H_
