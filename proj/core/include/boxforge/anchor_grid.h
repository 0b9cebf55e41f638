#ifndef BOXFORGE_ANCHOR_GRID_H_
#define BOXFORGE_ANCHOR_GRID_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "boxforge/geometry.h"

namespace boxforge {

// Minimum and maximum anchor size of one feature map, normalized to the
// input side. Each map gets a square of side `min` and one of side
// sqrt(min * max).
struct AnchorScale {
  double min = 0;
  double max = 0;

  friend bool operator==(const AnchorScale&, const AnchorScale&) = default;
};

// Architecture constants of an SSD-style anchor grid.
//
// aspect_ratios[i] lists the ratios r > 1 used by map i; each contributes
// two shapes (r and 1/r). Together with the two squares this gives
// shapes_per_cell[i] == 2 + 2 * aspect_ratios[i].size().
struct DetectorSpec {
  std::vector<int> shapes_per_cell;  // k_i
  std::vector<int> grid_sizes;       // g_i
  int num_categories = 0;            // C
  std::vector<AnchorScale> scales;
  std::vector<std::vector<double>> aspect_ratios;
  Variances variances;

  std::size_t num_feature_maps() const { return grid_sizes.size(); }
  // K = sum_i k_i * g_i^2.
  std::size_t num_anchors() const;
  std::size_t layer_anchor_count(std::size_t map) const;

  // Throws ValidationError describing the first inconsistency.
  void Validate() const;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

// The SSD300 / PASCAL VOC configuration with C = 4 comic categories.
DetectorSpec CanonicalSpec();

// JSON round trip. Field names: F, k, g, C, scales ([[min,max],...]),
// aspect_ratios, variances ([center,size]). F is written for readability
// and checked on read.
std::string DetectorSpecToJson(const DetectorSpec& spec);
DetectorSpec DetectorSpecFromJson(std::string_view text);

struct AnchorSet {
  std::vector<BBox> anchors;
  // Start index of each feature map's block; size F.
  std::vector<std::size_t> layer_offsets;

  std::size_t size() const { return anchors.size(); }
  const BBox& operator[](std::size_t i) const { return anchors[i]; }
};

// Feature maps in order, cells row-major, shapes in declared order:
// small square, large square, then (r, 1/r) for each listed ratio.
// Coordinates are clipped to [0,1].
AnchorSet GenerateAnchors(const DetectorSpec& spec);

// Writes {"K":..., "layer_offsets":[...], "anchors":[[x0,y0,x1,y1],...]}.
std::string AnchorSetToJson(const AnchorSet& anchors);

// C logical replicas of one anchor geometry; replica c serves category c.
struct ForkedAnchorSet {
  AnchorSet base;
  int num_categories = 0;

  std::size_t slots() const {
    return base.size() * static_cast<std::size_t>(num_categories);
  }
  const AnchorSet& replica(int /*category*/) const { return base; }
};

enum class HeadKind { kBaseline, kFork, kNaiveReplication };

struct LayerDesc {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;

  std::int64_t parameters() const {
    return static_cast<std::int64_t>(kernel) * kernel * in_channels *
               out_channels +
           out_channels;
  }
};

// Feature extractor shared by every head: VGG-16 through conv5_3, the
// fc6/fc7 convolutions, the conv4_3 L2-normalization scale and the extra
// SSD300 feature layers.
std::vector<LayerDesc> FeatureExtractorLayers();

// 3x3 prediction convolutions attached to each source map. Requires the
// canonical six source maps.
std::vector<LayerDesc> DetectionHeadLayers(const DetectorSpec& spec,
                                           HeadKind head);

std::int64_t CountParameters(const DetectorSpec& spec, HeadKind head);

}  // namespace boxforge

#endif  // BOXFORGE_ANCHOR_GRID_H_
