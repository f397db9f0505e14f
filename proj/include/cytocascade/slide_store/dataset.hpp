// Copyright 2026 The cytocascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/slide_store/patch_grid.hpp"

namespace cyto {

// Axis-aligned annotated region (an expert-marked follicular group).
struct Region {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  friend bool operator==(const Region&, const Region&) = default;
};

inline long long intersection_area(const Region& a, const Region& b) {
  const int x0 = std::max(a.x, b.x), x1 = std::min(a.x + a.w, b.x + b.w);
  const int y0 = std::max(a.y, b.y), y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return 0;
  return static_cast<long long>(x1 - x0) * (y1 - y0);
}

// Annotation file: one "x y w h" region per line; '#' comments allowed.
inline std::vector<Region> parse_annotations(std::string_view text) {
  std::vector<Region> out;
  for (const auto& raw : split_char(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_ws(line);
    if (f.size() != 4) throw IoError("bad annotation line: " + std::string(line));
    Region r{parse_number<int>(f[0], "x"), parse_number<int>(f[1], "y"), parse_number<int>(f[2], "w"),
             parse_number<int>(f[3], "h")};
    if (r.w <= 0 || r.h <= 0) throw IoError("annotation with empty extent: " + std::string(line));
    out.push_back(r);
  }
  return out;
}

inline std::string format_annotations(const std::vector<Region>& regions) {
  std::ostringstream os;
  os << "# x y w h\n";
  for (const auto& r : regions) os << r.x << " " << r.y << " " << r.w << " " << r.h << "\n";
  return os.str();
}

inline std::vector<Region> load_annotations(const fs::path& path) { return parse_annotations(read_text_file(path)); }

// Per-slide ground truth.
struct SlideRecord {
  std::string slide_id;
  int malignant = 0;  // Y
  int tbs = 2;        // S in 2..6
  std::vector<Region> annotations;

  void validate() const {
    CYTO_CHECK(malignant == 0 || malignant == 1, ConfigError, "malignancy label must be 0 or 1");
    CYTO_CHECK(tbs >= 2 && tbs <= 6, ConfigError, "TBS category must be in 2..6");
  }
};

// One line of the dataset manifest. Paths are stored relative to the
// manifest's directory and resolved on load.
struct DatasetEntry {
  std::string slide_id;
  fs::path container;
  int malignant = 0;
  int tbs = 2;
  fs::path annotations;  // empty when the slide carries no local annotation
};

inline constexpr const char* kDatasetHeader = "# cytocascade-dataset v1\n# slide_id\tcontainer\tY\tS\tannotations\n";

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<DatasetEntry> entries) : entries_(std::move(entries)) {}

  static Dataset load(const fs::path& manifest_path) {
    const auto base = manifest_path.parent_path();
    Dataset ds;
    for (const auto& raw : split_char(read_text_file(manifest_path), '\n')) {
      const auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      const auto f = split_char(line, '\t');
      if (f.size() != 5) throw IoError("bad dataset line: " + std::string(line));
      DatasetEntry e;
      e.slide_id = f[0];
      e.container = base / f[1];
      e.malignant = parse_number<int>(f[2], "Y");
      e.tbs = parse_number<int>(f[3], "S");
      if (f[4] != "-") e.annotations = base / f[4];
      if ((e.malignant != 0 && e.malignant != 1) || e.tbs < 2 || e.tbs > 6) {
        throw IoError("invalid labels for slide " + e.slide_id);
      }
      ds.entries_.push_back(std::move(e));
    }
    return ds;
  }

  // Writes entries with paths made relative to the manifest location.
  void save(const fs::path& manifest_path) const {
    const auto base = fs::absolute(manifest_path).parent_path();
    std::ostringstream os;
    os << kDatasetHeader;
    for (const auto& e : entries_) {
      os << e.slide_id << '\t' << fs::relative(fs::absolute(e.container), base).generic_string() << '\t'
         << e.malignant << '\t' << e.tbs << '\t'
         << (e.annotations.empty() ? std::string("-")
                                   : fs::relative(fs::absolute(e.annotations), base).generic_string())
         << '\n';
    }
    write_text_file(manifest_path, os.str());
  }

  const std::vector<DatasetEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const DatasetEntry& operator[](std::size_t i) const { return entries_[i]; }

  const DatasetEntry& find(const std::string& slide_id) const {
    for (const auto& e : entries_) {
      if (e.slide_id == slide_id) return e;
    }
    throw IoError("slide '" + slide_id + "' not in dataset");
  }

  SlideRecord record(std::size_t i) const {
    const auto& e = entries_[i];
    SlideRecord r{e.slide_id, e.malignant, e.tbs, {}};
    if (!e.annotations.empty()) r.annotations = load_annotations(e.annotations);
    return r;
  }

  Dataset subset(std::size_t begin, std::size_t end) const {
    return Dataset({entries_.begin() + static_cast<std::ptrdiff_t>(begin),
                    entries_.begin() + static_cast<std::ptrdiff_t>(end)});
  }

 private:
  std::vector<DatasetEntry> entries_;
};

}  // namespace cyto
