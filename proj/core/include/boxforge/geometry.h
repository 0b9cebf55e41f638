#ifndef BOXFORGE_GEOMETRY_H_
#define BOXFORGE_GEOMETRY_H_

#include <compare>

namespace boxforge {

// Axis-aligned rectangle. Coordinates are plain reals: pixels for page
// annotations, [0,1] for the anchor grid. The box carries no unit tag.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  // x_min <= x_max and y_min <= y_max (NaN coordinates are invalid).
  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  // Zero width or zero height.
  bool degenerate() const { return !(x_max > x_min && y_max > y_min); }

  static BBox FromCenterSize(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Scale factors applied to the center and size offsets during encoding.
// {1, 1} disables the scaling.
struct Variances {
  double center = 0.1;
  double size = 0.2;

  friend bool operator==(const Variances&, const Variances&) = default;
};

// Offsets of a box relative to an anchor, in units of the variances.
struct EncodedOffsets {
  double d_cx = 0;
  double d_cy = 0;
  double d_w = 0;
  double d_h = 0;

  friend bool operator==(const EncodedOffsets&,
                         const EncodedOffsets&) = default;
};

double Area(const BBox& b);

// Intersection over union; 0 when the union has zero area.
double IoU(const BBox& a, const BBox& b);

// Throws ValidationError for a degenerate anchor and DomainError for a
// degenerate ground-truth box.
EncodedOffsets Encode(const BBox& gt, const BBox& anchor,
                      const Variances& variances = {});

// Inverse of Encode. The result is re-ordered so that min <= max holds.
BBox Decode(const EncodedOffsets& offsets, const BBox& anchor,
            const Variances& variances = {});

}  // namespace boxforge

#endif  // BOXFORGE_GEOMETRY_H_
