#pragma once

// Dataset schema, loaders/writers for the on-disk formats, and the
// stratified half split used for validation.
//
// On-disk layout (paths relative to the manifest's directory):
//   manifest.json   {"K","P","M","B","metadata","split","ratings","batches"?,"features":{name:path}}
//   metadata        one ImageRecord JSON object per line
//   split           one {"image_id","split":"train"|"test"} per line
//   ratings         one RatingRecord JSON object per line
//   batches         one AnnotationBatch JSON object per line (optional)
//   features        binary ICFM files, see write_feature_file()

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "iconika/common.hpp"

namespace iconika {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::optional<double> score;  // detector confidence, det boxes only

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  bool operator==(const BoundingBox&) const = default;
};

struct ImageRecord {
  std::string image_id;
  int class_id = 0;
  int width = 0;
  int height = 0;
  std::optional<BoundingBox> gt_box;
  std::optional<BoundingBox> det_box;
  std::optional<std::vector<bool>> parts;
  std::optional<std::vector<bool>> attributes;
  std::map<std::string, double> external_scores;
  std::string provenance;

  bool operator==(const ImageRecord&) const = default;
};

struct FeatureMatrix {
  std::string feature_name;
  std::size_t dim = 0;
  std::map<std::string, Vector> rows;

  const Vector* find(const std::string& image_id) const {
    auto it = rows.find(image_id);
    return it == rows.end() ? nullptr : &it->second;
  }
  bool operator==(const FeatureMatrix&) const = default;
};

struct RatingRecord {
  std::string annotator_id;
  std::string batch_id;
  std::string image_id;
  int rating = 0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingRecord&) const = default;
  auto operator<=>(const RatingRecord&) const = default;
};

struct AnnotationBatch {
  std::string batch_id;
  int class_id = 0;
  std::vector<std::string> image_ids;
  std::string assigned_annotator;

  bool operator==(const AnnotationBatch&) const = default;
};

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetManifest {
  int K = 0;  // classes
  int P = 0;  // parts per image
  int M = 0;  // attributes per image
  int B = 5;  // images per annotation batch
  fs::path base_dir;
  fs::path metadata;
  fs::path split;
  std::optional<fs::path> ratings;
  std::optional<fs::path> batches;
  std::map<std::string, fs::path> features;

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

inline constexpr bool is_valid_rating(int r) { return r >= 0 && r <= 2; }

struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, ImageRecord> records;
  std::map<std::string, FeatureMatrix> features;
  std::vector<RatingRecord> ratings;       // sorted (annotator, batch, image)
  std::vector<AnnotationBatch> batches;    // sorted by batch_id
  std::map<std::string, Split> split;

  const ImageRecord& record(const std::string& id) const {
    auto it = records.find(id);
    if (it == records.end()) throw ValidationError(fmt::format("unknown image_id '{}'", id));
    return it->second;
  }

  const FeatureMatrix& feature(const std::string& name) const {
    auto it = features.find(name);
    if (it == features.end()) {
      std::string names;
      for (const auto& [n, _] : features) names += (names.empty() ? "" : ", ") + n;
      throw ValidationError(fmt::format("unknown feature '{}' (available: {})", name, names));
    }
    return it->second;
  }

  std::vector<std::string> ids(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, sp] : split)
      if (sp == s) out.push_back(id);
    return out;
  }

  std::vector<std::string> all_ids() const {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& [id, _] : records) out.push_back(id);
    return out;
  }

  // Mean rating per rated image. Most images carry a single rating; images
  // shared between annotators get the average.
  std::map<std::string, double> image_ratings() const {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : ratings) {
      auto& [sum, n] = acc[r.image_id];
      sum += r.rating;
      ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [id, sn] : acc) out.emplace(id, sn.first / sn.second);
    return out;
  }

  // Restriction to a set of images. Features, ratings and batches are
  // filtered; batches keep only their member images present in the subset,
  // so subset batches may hold fewer than B images.
  Dataset subset(const std::vector<std::string>& keep) const {
    std::set<std::string> ids(keep.begin(), keep.end());
    Dataset out;
    out.manifest = manifest;
    for (const auto& id : ids) {
      out.records.emplace(id, record(id));
      if (auto it = split.find(id); it != split.end()) out.split.emplace(id, it->second);
    }
    for (const auto& [name, fm] : features) {
      FeatureMatrix sub{fm.feature_name, fm.dim, {}};
      for (const auto& id : ids)
        if (const Vector* row = fm.find(id)) sub.rows.emplace(id, *row);
      out.features.emplace(name, std::move(sub));
    }
    for (const auto& r : ratings)
      if (ids.contains(r.image_id)) out.ratings.push_back(r);
    for (const auto& b : batches) {
      AnnotationBatch sub = b;
      std::erase_if(sub.image_ids, [&](const std::string& id) { return !ids.contains(id); });
      if (!sub.image_ids.empty()) out.batches.push_back(std::move(sub));
    }
    return out;
  }

  // Content equality; file locations in the manifest are ignored.
  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.manifest.K == b.manifest.K && a.manifest.P == b.manifest.P &&
           a.manifest.M == b.manifest.M && a.manifest.B == b.manifest.B &&
           a.records == b.records && a.features == b.features && a.ratings == b.ratings &&
           a.batches == b.batches && a.split == b.split;
  }
};

// ---------------------------------------------------------------------------
// JSON encoding of records

namespace detail {

inline std::vector<bool> bools_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected an array of 0/1 flags");
  std::vector<bool> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_boolean()) {
      out.push_back(v.get<bool>());
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      out.push_back(v.get<int>() == 1);
    } else {
      throw ValidationError("flag entries must be 0, 1, true or false");
    }
  }
  return out;
}

inline json bools_to_json(const std::vector<bool>& v) {
  json arr = json::array();
  for (bool b : v) arr.push_back(b ? 1 : 0);
  return arr;
}

inline BoundingBox box_from_json(const json& j) {
  BoundingBox b;
  b.x = j.at("x").get<double>();
  b.y = j.at("y").get<double>();
  b.w = j.at("w").get<double>();
  b.h = j.at("h").get<double>();
  if (j.contains("score")) b.score = j.at("score").get<double>();
  if (!(b.w > 0.0) || !(b.h > 0.0)) throw ValidationError("box must have w > 0 and h > 0");
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h))
    throw ValidationError("box coordinates must be finite");
  return b;
}

inline json box_to_json(const BoundingBox& b) {
  json j = {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
  if (b.score) j["score"] = *b.score;
  return j;
}

// Open a text file and call fn(json, locator) for every non-blank line.
template <typename Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: malformed record: {}", where, e.what()));
    }
    try {
      fn(j, where);
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}: schema violation: {}", where, e.what()));
    } catch (const IoError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const fs::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw ValidationError(fmt::format("{}: truncated feature file", path.string()));
  return value;
}

}  // namespace detail

inline json to_json(const ImageRecord& r) {
  json j = {{"image_id", r.image_id},
            {"class_id", r.class_id},
            {"width", r.width},
            {"height", r.height}};
  if (r.gt_box) j["gt_box"] = detail::box_to_json(*r.gt_box);
  if (r.det_box) j["det_box"] = detail::box_to_json(*r.det_box);
  if (r.parts) j["parts"] = detail::bools_to_json(*r.parts);
  if (r.attributes) j["attributes"] = detail::bools_to_json(*r.attributes);
  if (!r.external_scores.empty()) j["external_scores"] = r.external_scores;
  if (!r.provenance.empty()) j["provenance"] = r.provenance;
  return j;
}

inline ImageRecord image_record_from_json(const json& j) {
  ImageRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  if (r.image_id.empty()) throw ValidationError("empty image_id");
  r.class_id = j.at("class_id").get<int>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  if (j.contains("gt_box")) r.gt_box = detail::box_from_json(j.at("gt_box"));
  if (j.contains("det_box")) r.det_box = detail::box_from_json(j.at("det_box"));
  if (j.contains("parts")) r.parts = detail::bools_from_json(j.at("parts"));
  if (j.contains("attributes")) r.attributes = detail::bools_from_json(j.at("attributes"));
  if (j.contains("external_scores")) {
    for (const auto& [name, v] : j.at("external_scores").items()) {
      const double value = v.get<double>();
      if (!std::isfinite(value)) throw ValidationError(fmt::format("external score '{}' not finite", name));
      if (r.external_scores.contains(name))
        log().warn("image '{}': duplicate external score '{}', keeping the last", r.image_id, name);
      r.external_scores[name] = value;
    }
  }
  if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::string>();
  return r;
}

inline json to_json(const RatingRecord& r) {
  return {{"annotator_id", r.annotator_id},
          {"batch_id", r.batch_id},
          {"image_id", r.image_id},
          {"rating", r.rating},
          {"timestamp", r.timestamp}};
}

inline RatingRecord rating_record_from_json(const json& j) {
  RatingRecord r;
  r.annotator_id = j.at("annotator_id").get<std::string>();
  r.batch_id = j.at("batch_id").get<std::string>();
  r.image_id = j.at("image_id").get<std::string>();
  if (!j.at("rating").is_number_integer()) throw ValidationError("rating must be an integer");
  r.rating = j.at("rating").get<int>();
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  if (!is_valid_rating(r.rating))
    throw ValidationError(fmt::format("rating {} outside {{0,1,2}} (annotator '{}', image '{}')",
                                      r.rating, r.annotator_id, r.image_id));
  return r;
}

inline json to_json(const AnnotationBatch& b) {
  return {{"batch_id", b.batch_id},
          {"class_id", b.class_id},
          {"image_ids", b.image_ids},
          {"assigned_annotator", b.assigned_annotator}};
}

inline AnnotationBatch annotation_batch_from_json(const json& j) {
  AnnotationBatch b;
  b.batch_id = j.at("batch_id").get<std::string>();
  b.class_id = j.at("class_id").get<int>();
  b.image_ids = j.at("image_ids").get<std::vector<std::string>>();
  b.assigned_annotator = j.value("assigned_annotator", std::string{});
  return b;
}

// ---------------------------------------------------------------------------
// Feature files
//
// Layout, all integers little-endian:
//   "ICFM" | version u32 | dim u32 | rows u64 | rows × (id_len u16 | id bytes | dim × f32)

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

inline void write_feature_file(const fs::path& path, const FeatureMatrix& fm) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write("ICFM", 4);
  detail::write_le<std::uint32_t>(out, kFeatureFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(fm.dim));
  detail::write_le<std::uint64_t>(out, fm.rows.size());
  for (const auto& [id, row] : fm.rows) {
    if (id.size() > 0xFFFF) throw ValidationError(fmt::format("image_id too long: '{}'", id));
    if (row.size() != fm.dim)
      throw ValidationError(fmt::format("feature row '{}' has length {}, expected {}", id, row.size(), fm.dim));
    detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double v : row) detail::write_le<float>(out, static_cast<float>(v));
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

inline FeatureMatrix read_feature_file(const fs::path& path, std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ICFM", 4) != 0)
    throw ValidationError(fmt::format("{}: bad magic, not an ICFM feature file", path.string()));
  const auto version = detail::read_le<std::uint32_t>(in, path);
  if (version != kFeatureFormatVersion)
    throw ValidationError(fmt::format("{}: unsupported feature format version {}", path.string(), version));
  FeatureMatrix fm;
  fm.feature_name = std::move(name);
  fm.dim = detail::read_le<std::uint32_t>(in, path);
  if (fm.dim == 0) throw ValidationError(fmt::format("{}: dim must be positive", path.string()));
  const auto count = detail::read_le<std::uint64_t>(in, path);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = detail::read_le<std::uint16_t>(in, path);
    std::string id(len, '\0');
    if (len > 0 && !in.read(id.data(), len))
      throw ValidationError(fmt::format("{}: truncated id at row {}", path.string(), r));
    Vector row(fm.dim);
    for (std::size_t k = 0; k < fm.dim; ++k) {
      float v = 0.0f;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof(float)))
        throw ValidationError(fmt::format("{}: row for image_id '{}' ends after {} of {} values", path.string(), id, k,
                                          fm.dim));
      if (!std::isfinite(v))
        throw ValidationError(fmt::format("{}: non-finite feature value at (image_id '{}', index {})",
                                          path.string(), id, k));
      row[k] = v;
    }
    if (!fm.rows.emplace(id, std::move(row)).second)
      throw ValidationError(fmt::format("{}: duplicate feature row for image_id '{}'", path.string(), id));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw ValidationError(fmt::format("{}: trailing bytes after {} rows", path.string(), count));
  return fm;
}

// ---------------------------------------------------------------------------
// Manifest and dataset loading

inline DatasetManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(fmt::format("cannot open manifest '{}'", manifest_path.string()));
  DatasetManifest m;
  try {
    const json j = json::parse(in);
    m.K = j.at("K").get<int>();
    m.P = j.value("P", 0);
    m.M = j.value("M", 0);
    m.B = j.value("B", 5);
    m.metadata = j.at("metadata").get<std::string>();
    m.split = j.at("split").get<std::string>();
    if (j.contains("ratings")) m.ratings = j.at("ratings").get<std::string>();
    if (j.contains("batches")) m.batches = j.at("batches").get<std::string>();
    if (j.contains("features"))
      for (const auto& [name, p] : j.at("features").items()) m.features.emplace(name, p.get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: invalid manifest: {}", manifest_path.string(), e.what()));
  }
  if (m.K < 1 || m.P < 0 || m.M < 0 || m.B < 2)
    throw ValidationError(fmt::format("{}: require K >= 1, P >= 0, M >= 0, B >= 2", manifest_path.string()));
  m.base_dir = manifest_path.parent_path();
  return m;
}

namespace detail {

// Clamp a box to the image. Returns false if nothing of the box remains.
inline bool clamp_box(BoundingBox& b, int width, int height) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(b.x + b.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(b.y + b.h, 0.0, static_cast<double>(height));
  if (!(x1 > x0) || !(y1 > y0)) return false;
  b.x = x0;
  b.y = y0;
  b.w = x1 - x0;
  b.h = y1 - y0;
  return true;
}

inline void validate_record(ImageRecord& r, const DatasetManifest& m) {
  if (r.class_id < 1 || r.class_id > m.K)
    throw ValidationError(fmt::format("image '{}': class_id {} outside [1..{}]", r.image_id, r.class_id, m.K));
  if (r.width <= 0 || r.height <= 0)
    throw ValidationError(fmt::format("image '{}': width and height must be positive", r.image_id));
  if (r.parts && static_cast<int>(r.parts->size()) != m.P)
    throw ValidationError(fmt::format("image '{}': parts has {} entries, expected P={}", r.image_id, r.parts->size(), m.P));
  if (r.attributes && static_cast<int>(r.attributes->size()) != m.M)
    throw ValidationError(fmt::format("image '{}': attributes has {} entries, expected M={}", r.image_id,
                                      r.attributes->size(), m.M));
  for (auto* box : {&r.gt_box, &r.det_box}) {
    if (!*box) continue;
    const BoundingBox before = **box;
    if (!clamp_box(**box, r.width, r.height))
      throw ValidationError(fmt::format("image '{}': box lies entirely outside the image", r.image_id));
    if (!(before == **box)) log().warn("image '{}': box clamped to image bounds", r.image_id);
  }
}

// Batches implied by the ratings log when no batches file is given.
inline std::vector<AnnotationBatch> batches_from_ratings(const std::vector<RatingRecord>& ratings,
                                                         const std::map<std::string, ImageRecord>& records) {
  std::map<std::string, AnnotationBatch> by_id;
  for (const auto& r : ratings) {
    auto& b = by_id[r.batch_id];
    b.batch_id = r.batch_id;
    if (b.assigned_annotator.empty() || r.annotator_id < b.assigned_annotator) b.assigned_annotator = r.annotator_id;
    if (std::find(b.image_ids.begin(), b.image_ids.end(), r.image_id) == b.image_ids.end())
      b.image_ids.push_back(r.image_id);
    b.class_id = records.at(r.image_id).class_id;
  }
  std::vector<AnnotationBatch> out;
  for (auto& [_, b] : by_id) {
    std::sort(b.image_ids.begin(), b.image_ids.end());
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

inline Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const auto& m = ds.manifest;

  detail::for_each_json_line(m.resolve(m.metadata), [&](const json& j, const std::string&) {
    ImageRecord r = image_record_from_json(j);
    detail::validate_record(r, m);
    const std::string id = r.image_id;
    if (!ds.records.emplace(id, std::move(r)).second)
      throw ValidationError(fmt::format("duplicate image_id '{}'", id));
  });

  detail::for_each_json_line(m.resolve(m.split), [&](const json& j, const std::string&) {
    const auto id = j.at("image_id").get<std::string>();
    const auto s = j.at("split").get<std::string>();
    if (!ds.records.contains(id)) throw ValidationError(fmt::format("split names unknown image_id '{}'", id));
    if (s != "train" && s != "test") throw ValidationError(fmt::format("split must be train or test, got '{}'", s));
    if (!ds.split.emplace(id, s == "train" ? Split::train : Split::test).second)
      throw ValidationError(fmt::format("image '{}' assigned to more than one split", id));
  });
  for (const auto& [id, _] : ds.records)
    if (!ds.split.contains(id))
      throw ValidationError(fmt::format("{}: image '{}' is in no split", m.resolve(m.split).string(), id));

  for (const auto& [name, path] : m.features) {
    FeatureMatrix fm = read_feature_file(m.resolve(path), name);
    for (const auto& [id, _] : fm.rows)
      if (!ds.records.contains(id))
        throw ValidationError(fmt::format("{}: feature row for unknown image_id '{}'", m.resolve(path).string(), id));
    ds.features.emplace(name, std::move(fm));
  }

  if (m.batches) {
    std::set<std::string> seen;
    detail::for_each_json_line(m.resolve(*m.batches), [&](const json& j, const std::string&) {
      AnnotationBatch b = annotation_batch_from_json(j);
      if (!seen.insert(b.batch_id).second) throw ValidationError(fmt::format("duplicate batch_id '{}'", b.batch_id));
      if (static_cast<int>(b.image_ids.size()) != m.B)
        throw ValidationError(fmt::format("batch '{}' has {} images, expected B={}", b.batch_id, b.image_ids.size(), m.B));
      for (const auto& id : b.image_ids) {
        auto it = ds.records.find(id);
        if (it == ds.records.end()) throw ValidationError(fmt::format("batch '{}': unknown image_id '{}'", b.batch_id, id));
        if (it->second.class_id != b.class_id)
          throw ValidationError(fmt::format("batch '{}': image '{}' is not of class {}", b.batch_id, id, b.class_id));
      }
      ds.batches.push_back(std::move(b));
    });
  }

  if (m.ratings) {
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, const AnnotationBatch*> batch_index;
    for (const auto& b : ds.batches) batch_index.emplace(b.batch_id, &b);
    detail::for_each_json_line(m.resolve(*m.ratings), [&](const json& j, const std::string&) {
      RatingRecord r = rating_record_from_json(j);
      if (!ds.records.contains(r.image_id))
        throw ValidationError(fmt::format("rating for unknown image_id '{}'", r.image_id));
      if (!seen.emplace(r.annotator_id, r.image_id).second)
        throw ValidationError(fmt::format("annotator '{}' rated image '{}' twice", r.annotator_id, r.image_id));
      if (m.batches) {
        auto it = batch_index.find(r.batch_id);
        if (it == batch_index.end()) throw ValidationError(fmt::format("rating references unknown batch '{}'", r.batch_id));
        const auto& ids = it->second->image_ids;
        if (std::find(ids.begin(), ids.end(), r.image_id) == ids.end())
          throw ValidationError(fmt::format("image '{}' is not part of batch '{}'", r.image_id, r.batch_id));
      }
      ds.ratings.push_back(std::move(r));
    });
    std::sort(ds.ratings.begin(), ds.ratings.end());
  }

  if (!m.batches) ds.batches = detail::batches_from_ratings(ds.ratings, ds.records);
  std::sort(ds.batches.begin(), ds.batches.end(),
            [](const AnnotationBatch& a, const AnnotationBatch& b) { return a.batch_id < b.batch_id; });
  return ds;
}

// Write a dataset in the layout load_dataset() reads. Returns the manifest path.
inline fs::path save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  auto write_lines = [&](const fs::path& p, auto&& emit) {
    std::ofstream out(dir / p, std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / p).string()));
    emit(out);
  };
  write_lines("metadata.jsonl", [&](std::ostream& out) {
    for (const auto& [_, r] : ds.records) out << to_json(r).dump() << '\n';
  });
  write_lines("split.jsonl", [&](std::ostream& out) {
    for (const auto& [id, s] : ds.split) out << json{{"image_id", id}, {"split", to_string(s)}}.dump() << '\n';
  });
  write_lines("ratings.jsonl", [&](std::ostream& out) {
    for (const auto& r : ds.ratings) out << to_json(r).dump() << '\n';
  });
  write_lines("batches.jsonl", [&](std::ostream& out) {
    for (const auto& b : ds.batches) out << to_json(b).dump() << '\n';
  });
  json features = json::object();
  for (const auto& [name, fm] : ds.features) {
    const std::string file = name + ".icfm";
    write_feature_file(dir / file, fm);
    features[name] = file;
  }
  const json manifest = {{"K", ds.manifest.K},       {"P", ds.manifest.P},
                         {"M", ds.manifest.M},       {"B", ds.manifest.B},
                         {"metadata", "metadata.jsonl"}, {"split", "split.jsonl"},
                         {"ratings", "ratings.jsonl"},   {"batches", "batches.jsonl"},
                         {"features", features}};
  const fs::path manifest_path = dir / "manifest.json";
  std::ofstream(manifest_path, std::ios::trunc) << manifest.dump(2) << '\n';
  return manifest_path;
}

// ---------------------------------------------------------------------------
// Stratified half split

struct HalfSplit {
  Dataset first;
  Dataset second;
  std::vector<std::string> warnings;
};

// Per class, train ids are sorted, shuffled with the seeded generator, and the
// first ceil(n/2) go to the first half.
inline HalfSplit split_half(const Dataset& ds, std::uint64_t seed) {
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& id : ds.ids(Split::train)) by_class[ds.record(id).class_id].push_back(id);
  if (by_class.empty()) throw ValidationError("split_half: train split is empty");

  Rng rng(seed);
  std::vector<std::string> first, second;
  HalfSplit out;
  for (auto& [cls, ids] : by_class) {
    std::sort(ids.begin(), ids.end());
    shuffle(ids, rng);
    if (ids.size() < 2) {
      out.warnings.push_back(fmt::format("class {} has a single train image; it goes to the first half", cls));
      log().warn("{}", out.warnings.back());
    }
    const std::size_t cut = (ids.size() + 1) / 2;
    first.insert(first.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
    second.insert(second.end(), ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
  }
  out.first = ds.subset(first);
  out.second = ds.subset(second);
  return out;
}

}  // namespace iconika
