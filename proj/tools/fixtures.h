#ifndef BOXFORGE_TOOLS_FIXTURES_H_
#define BOXFORGE_TOOLS_FIXTURES_H_

#include <cstdint>

#include "boxforge/annotation_io.h"

namespace boxforge::tools {

// Uniform doubles from a 64-bit stream, identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t Next();
  // [lo, hi)
  double Uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

// Double-sided pages where every frame has a body with the identical box
// (a character drawn filling the panel), plus a small face inside the body
// and a text balloon elsewhere on the page.
AnnotationCorpus ConflictDemoCorpus(int pages, std::uint64_t seed);

}  // namespace boxforge::tools

#endif  // BOXFORGE_TOOLS_FIXTURES_H_
