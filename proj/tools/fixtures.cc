#include "fixtures.h"

#include <algorithm>
#include <string>

namespace boxforge::tools {

// splitmix64
std::uint64_t Rng::Next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::Uniform(double lo, double hi) {
  const double unit = static_cast<double>(Next() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

AnnotationCorpus ConflictDemoCorpus(int pages, std::uint64_t seed) {
  constexpr int kWidth = 1654;
  constexpr int kHeight = 1170;
  Rng rng(seed);
  AnnotationCorpus corpus;
  Volume volume;
  volume.title = "ConflictDemo";
  volume.genre = "synthetic";
  for (int p = 0; p < pages; ++p) {
    Page page;
    page.page_id = p;
    page.width = kWidth;
    page.height = kHeight;

    // Panel in the left two thirds of the spread.
    const double w = rng.Uniform(300, 700);
    const double h = rng.Uniform(300, 700);
    const double x0 = rng.Uniform(20, kWidth * 2.0 / 3.0 - w);
    const double y0 = rng.Uniform(20, kHeight - 20 - h);
    const BBox panel{x0, y0, x0 + w, y0 + h};
    page.objects.push_back({panel, Category::kFrame, {}, {}});
    page.objects.push_back({panel, Category::kBody, "Hero", {}});

    const double fs = rng.Uniform(0.15, 0.25) * std::min(w, h);
    const double fx = x0 + rng.Uniform(0.1 * w, 0.9 * w - fs);
    const double fy = y0 + rng.Uniform(0.05 * h, 0.4 * h);
    page.objects.push_back({{fx, fy, fx + fs, fy + fs}, Category::kFace, "Hero", {}});

    // Balloon in the right third.
    const double tw = rng.Uniform(80, 200);
    const double th = rng.Uniform(150, 350);
    const double tx = rng.Uniform(kWidth * 2.0 / 3.0 + 20, kWidth - 20 - tw);
    const double ty = rng.Uniform(20, kHeight - 20 - th);
    page.objects.push_back(
        {{tx, ty, tx + tw, ty + th}, Category::kText, {}, std::string("…!")});
    volume.pages.push_back(std::move(page));
  }
  corpus.volumes.push_back(std::move(volume));
  return corpus;
}

}  // namespace boxforge::tools
