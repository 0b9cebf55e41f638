#include "boxforge/geometry.h"

#include <algorithm>
#include <cmath>

#include "boxforge/errors.h"

namespace boxforge {

double Area(const BBox& b) {
  if (!b.valid()) return 0.0;
  return b.width() * b.height();
}

double IoU(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (ix > 0 && iy > 0) ? ix * iy : 0.0;
  const double uni = Area(a) + Area(b) - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

EncodedOffsets Encode(const BBox& gt, const BBox& anchor,
                      const Variances& variances) {
  if (anchor.degenerate()) {
    throw ValidationError("Encode: anchor box is degenerate");
  }
  if (gt.degenerate()) {
    throw DomainError("Encode: ground-truth box has zero width or height");
  }
  const double aw = anchor.width();
  const double ah = anchor.height();
  return {
      (gt.center_x() - anchor.center_x()) / aw / variances.center,
      (gt.center_y() - anchor.center_y()) / ah / variances.center,
      std::log(gt.width() / aw) / variances.size,
      std::log(gt.height() / ah) / variances.size,
  };
}

BBox Decode(const EncodedOffsets& offsets, const BBox& anchor,
            const Variances& variances) {
  if (anchor.degenerate()) {
    throw ValidationError("Decode: anchor box is degenerate");
  }
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.center_x() + offsets.d_cx * variances.center * aw;
  const double cy = anchor.center_y() + offsets.d_cy * variances.center * ah;
  const double w = aw * std::exp(offsets.d_w * variances.size);
  const double h = ah * std::exp(offsets.d_h * variances.size);
  BBox out = BBox::FromCenterSize(cx, cy, w, h);
  if (out.x_min > out.x_max) std::swap(out.x_min, out.x_max);
  if (out.y_min > out.y_max) std::swap(out.y_min, out.y_max);
  return out;
}

}  // namespace boxforge
