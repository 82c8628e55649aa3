#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <fmt/format.h>

#include "iconika/datamodel.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "iconika") {
    std::random_device rd;
    path_ = fs::temp_directory_path() / fmt::format("{}-{:016x}", tag, (static_cast<std::uint64_t>(rd()) << 32) | rd());
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::trunc) << text; }

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Hand-written dataset: 10 images of 2 classes (5 each), P=3, M=2, B=5,
// 3 train + 2 test images per class, one rated batch per class, a 2-d
// feature matrix. Returns the manifest path.
inline fs::path write_small_fixture(const fs::path& dir) {
  std::string meta, split, ratings, batches;
  for (int c = 1; c <= 2; ++c) {
    std::string batch_ids;
    for (int i = 0; i < 5; ++i) {
      const std::string id = fmt::format("c{}_{}", c, i);
      meta += fmt::format(
          R"({{"image_id":"{}","class_id":{},"width":100,"height":100,"gt_box":{{"x":{},"y":10,"w":50,"h":50}},)"
          R"("parts":[1,{},1],"attributes":[{},1],"external_scores":{{"aesthetic":{}}}}})"
          "\n",
          id, c, 5 * i, i % 2, c - 1, 0.1 * i);
      split += fmt::format(R"({{"image_id":"{}","split":"{}"}})"
                           "\n",
                           id, i < 3 ? "train" : "test");
      ratings += fmt::format(R"({{"annotator_id":"ann{}","batch_id":"b{}","image_id":"{}","rating":{},"timestamp":{}}})"
                             "\n",
                             c, c, id, i % 3, 1000 + i);
      batch_ids += fmt::format("{}\"{}\"", i ? "," : "", id);
    }
    batches += fmt::format(R"({{"batch_id":"b{}","class_id":{},"image_ids":[{}],"assigned_annotator":"ann{}"}})"
                           "\n",
                           c, c, batch_ids, c);
  }
  write_text(dir / "metadata.jsonl", meta);
  write_text(dir / "split.jsonl", split);
  write_text(dir / "ratings.jsonl", ratings);
  write_text(dir / "batches.jsonl", batches);

  iconika::FeatureMatrix fm{"gist", 2, {}};
  for (int c = 1; c <= 2; ++c)
    for (int i = 0; i < 5; ++i) fm.rows[fmt::format("c{}_{}", c, i)] = {static_cast<double>(c), 0.5 * i};
  iconika::write_feature_file(dir / "gist.icfm", fm);

  write_text(dir / "manifest.json", R"({"K":2,"P":3,"M":2,"B":5,"metadata":"metadata.jsonl","split":"split.jsonl",
"ratings":"ratings.jsonl","batches":"batches.jsonl","features":{"gist":"gist.icfm"}})");
  return dir / "manifest.json";
}

}  // namespace fixtures
