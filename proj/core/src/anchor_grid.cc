#include "boxforge/anchor_grid.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

using nlohmann::json;

constexpr double kInputSide = 300.0;

// Channels of the six SSD300 source maps.
constexpr int kSourceChannels[] = {512, 1024, 512, 256, 256, 256};

}  // namespace

std::size_t DetectorSpec::layer_anchor_count(std::size_t map) const {
  const auto g = static_cast<std::size_t>(grid_sizes.at(map));
  return static_cast<std::size_t>(shapes_per_cell.at(map)) * g * g;
}

std::size_t DetectorSpec::num_anchors() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < num_feature_maps(); ++i) {
    total += layer_anchor_count(i);
  }
  return total;
}

void DetectorSpec::Validate() const {
  const std::size_t f = grid_sizes.size();
  if (f == 0) throw ValidationError("DetectorSpec: no feature maps");
  if (shapes_per_cell.size() != f || scales.size() != f ||
      aspect_ratios.size() != f) {
    std::ostringstream msg;
    msg << "DetectorSpec: sequence lengths differ (k=" << shapes_per_cell.size()
        << ", g=" << f << ", scales=" << scales.size()
        << ", aspect_ratios=" << aspect_ratios.size() << ")";
    throw ValidationError(msg.str());
  }
  if (num_categories <= 0) {
    throw ValidationError("DetectorSpec: C must be positive");
  }
  if (!(variances.center > 0) || !(variances.size > 0)) {
    throw ValidationError("DetectorSpec: variances must be positive");
  }
  for (std::size_t i = 0; i < f; ++i) {
    const std::string where = "DetectorSpec map " + std::to_string(i) + ": ";
    if (grid_sizes[i] <= 0) throw ValidationError(where + "g must be positive");
    if (!(scales[i].min > 0) || !(scales[i].max >= scales[i].min)) {
      throw ValidationError(where + "scales must satisfy 0 < min <= max");
    }
    for (double r : aspect_ratios[i]) {
      if (!(r > 0)) throw ValidationError(where + "aspect ratio must be > 0");
    }
    const auto expected = 2 + 2 * static_cast<int>(aspect_ratios[i].size());
    if (shapes_per_cell[i] != expected) {
      throw ValidationError(where + "k=" + std::to_string(shapes_per_cell[i]) +
                            " but the scales/ratios define " +
                            std::to_string(expected) + " shapes");
    }
  }
}

DetectorSpec CanonicalSpec() {
  DetectorSpec spec;
  spec.shapes_per_cell = {4, 6, 6, 6, 4, 4};
  spec.grid_sizes = {38, 19, 10, 5, 3, 1};
  spec.num_categories = 4;
  const double sizes[] = {30, 60, 111, 162, 213, 264, 315};
  for (int i = 0; i < 6; ++i) {
    spec.scales.push_back({sizes[i] / kInputSide, sizes[i + 1] / kInputSide});
  }
  spec.aspect_ratios = {{2}, {2, 3}, {2, 3}, {2, 3}, {2}, {2}};
  spec.variances = {0.1, 0.2};
  return spec;
}

std::string DetectorSpecToJson(const DetectorSpec& spec) {
  json doc;
  doc["F"] = spec.num_feature_maps();
  doc["k"] = spec.shapes_per_cell;
  doc["g"] = spec.grid_sizes;
  doc["C"] = spec.num_categories;
  json scales = json::array();
  for (const auto& s : spec.scales) scales.push_back({s.min, s.max});
  doc["scales"] = std::move(scales);
  doc["aspect_ratios"] = spec.aspect_ratios;
  doc["variances"] = {spec.variances.center, spec.variances.size};
  return doc.dump(2) + "\n";
}

DetectorSpec DetectorSpecFromJson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("detector spec: ") + e.what());
  }
  DetectorSpec spec;
  try {
    doc.at("k").get_to(spec.shapes_per_cell);
    doc.at("g").get_to(spec.grid_sizes);
    doc.at("C").get_to(spec.num_categories);
    for (const auto& s : doc.at("scales")) {
      if (!s.is_array() || s.size() != 2) {
        throw ValidationError("detector spec: each scale must be [min, max]");
      }
      spec.scales.push_back({s[0].get<double>(), s[1].get<double>()});
    }
    doc.at("aspect_ratios").get_to(spec.aspect_ratios);
    if (doc.contains("variances")) {
      const auto& v = doc["variances"];
      if (!v.is_array() || v.size() != 2) {
        throw ValidationError("detector spec: variances must be [center, size]");
      }
      spec.variances = {v[0].get<double>(), v[1].get<double>()};
    }
    if (doc.contains("F") &&
        doc["F"].get<std::size_t>() != spec.grid_sizes.size()) {
      throw ValidationError("detector spec: F does not match length of g");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("detector spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

AnchorSet GenerateAnchors(const DetectorSpec& spec) {
  spec.Validate();
  AnchorSet out;
  out.anchors.reserve(spec.num_anchors());
  out.layer_offsets.reserve(spec.num_feature_maps());

  for (std::size_t i = 0; i < spec.num_feature_maps(); ++i) {
    out.layer_offsets.push_back(out.anchors.size());

    // (width, height) of each shape, in declared order.
    std::vector<std::pair<double, double>> shapes;
    const double s = spec.scales[i].min;
    const double s_big = std::sqrt(spec.scales[i].min * spec.scales[i].max);
    shapes.emplace_back(s, s);
    shapes.emplace_back(s_big, s_big);
    for (double r : spec.aspect_ratios[i]) {
      const double sr = std::sqrt(r);
      shapes.emplace_back(s * sr, s / sr);
      shapes.emplace_back(s / sr, s * sr);
    }

    const int g = spec.grid_sizes[i];
    for (int row = 0; row < g; ++row) {
      for (int col = 0; col < g; ++col) {
        const double cx = (col + 0.5) / g;
        const double cy = (row + 0.5) / g;
        for (const auto& [w, h] : shapes) {
          BBox b = BBox::FromCenterSize(cx, cy, w, h);
          b.x_min = std::clamp(b.x_min, 0.0, 1.0);
          b.y_min = std::clamp(b.y_min, 0.0, 1.0);
          b.x_max = std::clamp(b.x_max, 0.0, 1.0);
          b.y_max = std::clamp(b.y_max, 0.0, 1.0);
          out.anchors.push_back(b);
        }
      }
    }
  }
  return out;
}

std::string AnchorSetToJson(const AnchorSet& anchors) {
  json doc;
  doc["K"] = anchors.size();
  doc["layer_offsets"] = anchors.layer_offsets;
  json boxes = json::array();
  for (const auto& b : anchors.anchors) {
    boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  }
  doc["anchors"] = std::move(boxes);
  return doc.dump() + "\n";
}

std::vector<LayerDesc> FeatureExtractorLayers() {
  return {
      {"conv1_1", 3, 64, 3},      {"conv1_2", 64, 64, 3},
      {"conv2_1", 64, 128, 3},    {"conv2_2", 128, 128, 3},
      {"conv3_1", 128, 256, 3},   {"conv3_2", 256, 256, 3},
      {"conv3_3", 256, 256, 3},   {"conv4_1", 256, 512, 3},
      {"conv4_2", 512, 512, 3},   {"conv4_3", 512, 512, 3},
      // Per-channel scale only: no kernel weights.
      {"conv4_3_norm", 0, 512, 1},
      {"conv5_1", 512, 512, 3},   {"conv5_2", 512, 512, 3},
      {"conv5_3", 512, 512, 3},   {"fc6", 512, 1024, 3},
      {"fc7", 1024, 1024, 1},     {"conv8_1", 1024, 256, 1},
      {"conv8_2", 256, 512, 3},   {"conv9_1", 512, 128, 1},
      {"conv9_2", 128, 256, 3},   {"conv10_1", 256, 128, 1},
      {"conv10_2", 128, 256, 3},  {"conv11_1", 256, 128, 1},
      {"conv11_2", 128, 256, 3},
  };
}

std::vector<LayerDesc> DetectionHeadLayers(const DetectorSpec& spec,
                                           HeadKind head) {
  spec.Validate();
  if (spec.num_feature_maps() != std::size(kSourceChannels)) {
    throw ValidationError(
        "parameter count requires the six SSD300 source feature maps");
  }
  std::vector<LayerDesc> layers;
  auto add_head = [&](const std::string& prefix, int conf_per_shape) {
    for (std::size_t i = 0; i < spec.num_feature_maps(); ++i) {
      const int k = spec.shapes_per_cell[i];
      const std::string suffix = std::to_string(i + 1);
      layers.push_back({prefix + "loc" + suffix, kSourceChannels[i], 4 * k, 3});
      layers.push_back(
          {prefix + "conf" + suffix, kSourceChannels[i], conf_per_shape * k, 3});
    }
  };
  switch (head) {
    case HeadKind::kBaseline:
    case HeadKind::kNaiveReplication:
      add_head("", spec.num_categories + 1);
      break;
    case HeadKind::kFork:
      for (int c = 0; c < spec.num_categories; ++c) {
        add_head("fork" + std::to_string(c) + "/", 1);
      }
      break;
  }
  return layers;
}

std::int64_t CountParameters(const DetectorSpec& spec, HeadKind head) {
  auto sum = [](const std::vector<LayerDesc>& layers) {
    return std::accumulate(
        layers.begin(), layers.end(), std::int64_t{0},
        [](std::int64_t acc, const LayerDesc& l) { return acc + l.parameters(); });
  };
  if (head == HeadKind::kNaiveReplication) {
    return spec.num_categories * CountParameters(spec, HeadKind::kBaseline);
  }
  return sum(FeatureExtractorLayers()) + sum(DetectionHeadLayers(spec, head));
}

}  // namespace boxforge
