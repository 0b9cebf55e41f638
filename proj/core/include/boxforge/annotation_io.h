#ifndef BOXFORGE_ANNOTATION_IO_H_
#define BOXFORGE_ANNOTATION_IO_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "boxforge/geometry.h"

namespace boxforge {

enum class Category { kFrame = 0, kText = 1, kFace = 2, kBody = 3 };

inline constexpr int kNumCategories = 4;
inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::kFrame, Category::kText, Category::kFace, Category::kBody};

std::string_view CategoryName(Category c);
std::string_view CategoryName(int index);
// Throws ValidationError for an unknown name.
Category CategoryFromName(std::string_view name);
inline int CategoryIndex(Category c) { return static_cast<int>(c); }

struct AnnotatedObject {
  BBox box;  // pixels
  Category category = Category::kFrame;
  std::optional<std::string> character_name;  // face/body only
  std::optional<std::string> text_content;    // text only

  friend bool operator==(const AnnotatedObject&,
                         const AnnotatedObject&) = default;
};

struct Page {
  int page_id = 0;
  int width = 0;
  int height = 0;
  // Covers, tables of contents, afterwords. Kept in the corpus and skipped
  // by matching, evaluation and statistics unless requested.
  bool irregular = false;
  std::vector<AnnotatedObject> objects;

  friend bool operator==(const Page&, const Page&) = default;
};

struct Volume {
  std::string title;
  std::optional<std::string> genre;
  std::vector<Page> pages;

  friend bool operator==(const Volume&, const Volume&) = default;
};

struct AnnotationCorpus {
  int schema_version = 1;
  std::vector<Volume> volumes;

  friend bool operator==(const AnnotationCorpus&,
                         const AnnotationCorpus&) = default;
};

// Checks every invariant; throws ValidationError naming the offending path,
// e.g. "volumes[0].pages[2].objects[5]".
void ValidateCorpus(const AnnotationCorpus& corpus);

// Throws ParseError for malformed JSON (with line/byte location) and
// ValidationError for invariant violations.
AnnotationCorpus ParseCorpus(std::string_view document);

// Canonical serialization: sorted keys, two-space indent, trailing newline.
// Byte-identical for equal corpora.
std::string WriteCorpus(const AnnotationCorpus& corpus);

struct CorpusStats {
  std::array<std::size_t, kNumCategories> objects{};
  std::size_t pages = 0;
  std::size_t volumes = 0;
  // Distinct (volume title, character name) pairs.
  std::size_t unique_character_names = 0;
  // Unicode scalar values over all text contents.
  std::size_t text_letters = 0;

  std::size_t total_objects() const;
  CorpusStats& operator+=(const CorpusStats& other);
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) {
    return a += b;
  }
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats ComputeStats(const AnnotationCorpus& corpus,
                         bool include_irregular = false);

// Number of Unicode scalar values in a UTF-8 string. Throws
// ValidationError on malformed UTF-8.
std::size_t CountUnicodeScalars(std::string_view utf8);

// Joins a left/right page pair into one double-sided page. Right-page
// objects move by +left.width in x. Throws ValidationError if heights
// differ.
Page ConcatDoublePage(const Page& left, const Page& right);

// (train, test): volumes whose titles are listed go to test, others to
// train, order preserved. Throws ValidationError for an unknown title.
std::pair<AnnotationCorpus, AnnotationCorpus> SplitTrainTest(
    const AnnotationCorpus& corpus,
    const std::vector<std::string>& test_volume_titles);

// Reads/writes whole files; throws IoError.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view contents);

}  // namespace boxforge

#endif  // BOXFORGE_ANNOTATION_IO_H_
