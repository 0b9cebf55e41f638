#include "boxforge/annotation_io.h"

#include <fstream>
#include <set>
#include <sstream>

#include "boxforge/errors.h"
#include "json.hpp"

namespace boxforge {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "frame", "text", "face", "body"};

std::string ObjectPath(std::size_t v, std::size_t p, std::size_t o) {
  std::ostringstream s;
  s << "volumes[" << v << "].pages[" << p << "].objects[" << o << "]";
  return s.str();
}

std::string PagePath(std::size_t v, std::size_t p) {
  std::ostringstream s;
  s << "volumes[" << v << "].pages[" << p << "]";
  return s.str();
}

void RejectUnknownKeys(const json& obj, std::initializer_list<const char*> keys,
                       const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ValidationError(path + ": unknown field \"" + key + "\"");
  }
}

template <typename T>
T Field(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) {
    throw ValidationError(path + ": missing field \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + "." + key + ": wrong type");
  }
}

template <typename T>
std::optional<T> OptionalField(const json& obj, const char* key,
                               const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return Field<T>(obj, key, path);
}

bool IsContinuationByte(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::string_view CategoryName(Category c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::string_view CategoryName(int index) {
  if (index < 0 || index >= kNumCategories) {
    throw ValidationError("category index out of range: " +
                          std::to_string(index));
  }
  return kCategoryNames[static_cast<std::size_t>(index)];
}

Category CategoryFromName(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  throw ValidationError("unknown category \"" + std::string(name) + "\"");
}

std::size_t CountUnicodeScalars(std::string_view utf8) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < utf8.size()) {
    const auto lead = static_cast<unsigned char>(utf8[i]);
    std::size_t len = 0;
    if (lead < 0x80) {
      len = 1;
    } else if ((lead & 0xE0) == 0xC0 && lead >= 0xC2) {
      len = 2;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
    } else if ((lead & 0xF8) == 0xF0 && lead <= 0xF4) {
      len = 4;
    } else {
      throw ValidationError("malformed UTF-8 at byte " + std::to_string(i));
    }
    if (i + len > utf8.size()) {
      throw ValidationError("truncated UTF-8 at byte " + std::to_string(i));
    }
    for (std::size_t j = 1; j < len; ++j) {
      if (!IsContinuationByte(static_cast<unsigned char>(utf8[i + j]))) {
        throw ValidationError("malformed UTF-8 at byte " + std::to_string(i));
      }
    }
    ++count;
    i += len;
  }
  return count;
}

void ValidateCorpus(const AnnotationCorpus& corpus) {
  if (corpus.schema_version != 1) {
    throw ValidationError("unsupported schema_version " +
                          std::to_string(corpus.schema_version));
  }
  std::set<std::string> titles;
  for (std::size_t v = 0; v < corpus.volumes.size(); ++v) {
    const Volume& volume = corpus.volumes[v];
    if (!titles.insert(volume.title).second) {
      throw ValidationError("volumes[" + std::to_string(v) +
                            "]: duplicate title \"" + volume.title + "\"");
    }
    std::set<int> page_ids;
    for (std::size_t p = 0; p < volume.pages.size(); ++p) {
      const Page& page = volume.pages[p];
      if (!page_ids.insert(page.page_id).second) {
        throw ValidationError(PagePath(v, p) + ": duplicate page_id " +
                              std::to_string(page.page_id));
      }
      if (page.width <= 0 || page.height <= 0) {
        throw ValidationError(PagePath(v, p) +
                              ": width and height must be positive");
      }
      for (std::size_t o = 0; o < page.objects.size(); ++o) {
        const AnnotatedObject& obj = page.objects[o];
        const BBox& b = obj.box;
        if (!b.valid()) {
          throw ValidationError(ObjectPath(v, p, o) +
                                ": box must satisfy min <= max");
        }
        if (b.x_min < 0 || b.y_min < 0 || b.x_max > page.width ||
            b.y_max > page.height) {
          throw ValidationError(ObjectPath(v, p, o) +
                                ": box exceeds page bounds");
        }
        if (obj.character_name && obj.category != Category::kFace &&
            obj.category != Category::kBody) {
          throw ValidationError(ObjectPath(v, p, o) +
                                ": character_name on a non-character object");
        }
        if (obj.text_content) {
          if (obj.category != Category::kText) {
            throw ValidationError(ObjectPath(v, p, o) +
                                  ": text_content on a non-text object");
          }
          try {
            CountUnicodeScalars(*obj.text_content);
          } catch (const ValidationError& e) {
            throw ValidationError(ObjectPath(v, p, o) + ": " + e.what());
          }
        }
      }
    }
  }
}

AnnotationCorpus ParseCorpus(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("annotation corpus: ") + e.what());
  }

  AnnotationCorpus corpus;
  RejectUnknownKeys(doc, {"schema_version", "volumes"}, "corpus");
  corpus.schema_version = Field<int>(doc, "schema_version", "corpus");
  const json& volumes = doc.contains("volumes") ? doc["volumes"] : json();
  if (!volumes.is_array()) {
    throw ValidationError("corpus.volumes: expected an array");
  }
  for (std::size_t v = 0; v < volumes.size(); ++v) {
    const std::string vpath = "volumes[" + std::to_string(v) + "]";
    const json& jv = volumes[v];
    RejectUnknownKeys(jv, {"title", "genre", "pages"}, vpath);
    Volume volume;
    volume.title = Field<std::string>(jv, "title", vpath);
    volume.genre = OptionalField<std::string>(jv, "genre", vpath);
    const json pages = jv.value("pages", json::array());
    if (!pages.is_array()) throw ValidationError(vpath + ".pages: expected an array");
    for (std::size_t p = 0; p < pages.size(); ++p) {
      const std::string ppath = PagePath(v, p);
      const json& jp = pages[p];
      RejectUnknownKeys(jp, {"page_id", "width", "height", "irregular", "objects"},
                        ppath);
      Page page;
      page.page_id = Field<int>(jp, "page_id", ppath);
      page.width = Field<int>(jp, "width", ppath);
      page.height = Field<int>(jp, "height", ppath);
      page.irregular = OptionalField<bool>(jp, "irregular", ppath).value_or(false);
      const json objects = jp.value("objects", json::array());
      if (!objects.is_array()) {
        throw ValidationError(ppath + ".objects: expected an array");
      }
      for (std::size_t o = 0; o < objects.size(); ++o) {
        const std::string opath = ObjectPath(v, p, o);
        const json& jo = objects[o];
        RejectUnknownKeys(jo, {"category", "box", "character_name", "text_content"},
                          opath);
        AnnotatedObject obj;
        try {
          obj.category = CategoryFromName(Field<std::string>(jo, "category", opath));
        } catch (const ValidationError& e) {
          throw ValidationError(opath + ": " + e.what());
        }
        const auto box = Field<std::vector<double>>(jo, "box", opath);
        if (box.size() != 4) {
          throw ValidationError(opath + ".box: expected [x_min, y_min, x_max, y_max]");
        }
        obj.box = {box[0], box[1], box[2], box[3]};
        obj.character_name = OptionalField<std::string>(jo, "character_name", opath);
        obj.text_content = OptionalField<std::string>(jo, "text_content", opath);
        page.objects.push_back(std::move(obj));
      }
      volume.pages.push_back(std::move(page));
    }
    corpus.volumes.push_back(std::move(volume));
  }
  ValidateCorpus(corpus);
  return corpus;
}

std::string WriteCorpus(const AnnotationCorpus& corpus) {
  json volumes = json::array();
  for (const Volume& volume : corpus.volumes) {
    json jv;
    jv["title"] = volume.title;
    if (volume.genre) jv["genre"] = *volume.genre;
    json pages = json::array();
    for (const Page& page : volume.pages) {
      json jp;
      jp["page_id"] = page.page_id;
      jp["width"] = page.width;
      jp["height"] = page.height;
      jp["irregular"] = page.irregular;
      json objects = json::array();
      for (const AnnotatedObject& obj : page.objects) {
        json jo;
        jo["category"] = CategoryName(obj.category);
        jo["box"] = {obj.box.x_min, obj.box.y_min, obj.box.x_max, obj.box.y_max};
        if (obj.character_name) jo["character_name"] = *obj.character_name;
        if (obj.text_content) jo["text_content"] = *obj.text_content;
        objects.push_back(std::move(jo));
      }
      jp["objects"] = std::move(objects);
      pages.push_back(std::move(jp));
    }
    jv["pages"] = std::move(pages);
    volumes.push_back(std::move(jv));
  }
  json doc;
  doc["schema_version"] = corpus.schema_version;
  doc["volumes"] = std::move(volumes);
  return doc.dump(2) + "\n";
}

std::size_t CorpusStats::total_objects() const {
  std::size_t total = 0;
  for (std::size_t n : objects) total += n;
  return total;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i] += other.objects[i];
  pages += other.pages;
  volumes += other.volumes;
  unique_character_names += other.unique_character_names;
  text_letters += other.text_letters;
  return *this;
}

CorpusStats ComputeStats(const AnnotationCorpus& corpus,
                         bool include_irregular) {
  CorpusStats stats;
  stats.volumes = corpus.volumes.size();
  for (const Volume& volume : corpus.volumes) {
    std::set<std::string> names;
    for (const Page& page : volume.pages) {
      if (page.irregular && !include_irregular) continue;
      ++stats.pages;
      for (const AnnotatedObject& obj : page.objects) {
        ++stats.objects[static_cast<std::size_t>(obj.category)];
        if (obj.character_name) names.insert(*obj.character_name);
        if (obj.text_content) {
          stats.text_letters += CountUnicodeScalars(*obj.text_content);
        }
      }
    }
    stats.unique_character_names += names.size();
  }
  return stats;
}

Page ConcatDoublePage(const Page& left, const Page& right) {
  if (left.height != right.height) {
    throw ValidationError("ConcatDoublePage: page heights differ (" +
                          std::to_string(left.height) + " vs " +
                          std::to_string(right.height) + ")");
  }
  Page out;
  out.page_id = left.page_id;
  out.width = left.width + right.width;
  out.height = left.height;
  out.irregular = left.irregular || right.irregular;
  out.objects = left.objects;
  out.objects.reserve(left.objects.size() + right.objects.size());
  for (AnnotatedObject obj : right.objects) {
    obj.box.x_min += left.width;
    obj.box.x_max += left.width;
    out.objects.push_back(std::move(obj));
  }
  return out;
}

std::pair<AnnotationCorpus, AnnotationCorpus> SplitTrainTest(
    const AnnotationCorpus& corpus,
    const std::vector<std::string>& test_volume_titles) {
  std::set<std::string> wanted(test_volume_titles.begin(),
                               test_volume_titles.end());
  std::set<std::string> seen;
  AnnotationCorpus train, test;
  train.schema_version = test.schema_version = corpus.schema_version;
  for (const Volume& volume : corpus.volumes) {
    if (wanted.count(volume.title)) {
      seen.insert(volume.title);
      test.volumes.push_back(volume);
    } else {
      train.volumes.push_back(volume);
    }
  }
  for (const std::string& title : wanted) {
    if (!seen.count(title)) {
      throw ValidationError("SplitTrainTest: no volume titled \"" + title + "\"");
    }
  }
  return {std::move(train), std::move(test)};
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path);
  return buf.str();
}

void WriteFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("error while writing " + path);
}

}  // namespace boxforge
