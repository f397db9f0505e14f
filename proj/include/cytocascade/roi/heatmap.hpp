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

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/slide_store/image.hpp"
#include "cytocascade/slide_store/patch_grid.hpp"
#include "cytocascade/slide_store/png_codec.hpp"

namespace cyto::roi {

// Detector probability per grid cell, row-major.
struct HeatMap {
  std::string slide_id;
  PatchGrid grid;
  std::vector<float> scores;

  void validate() const {
    CYTO_CHECK(scores.size() == grid.count(), ShapeError, "heatmap size does not match its grid");
    for (float s : scores) {
      CYTO_CHECK(s >= 0.0f && s <= 1.0f, NumericError, "heatmap score outside [0,1]");
    }
  }
};

inline constexpr char kHeatMagic[8] = {'C', 'Y', 'T', 'O', 'H', 'E', 'A', 'T'};

// Binary layout: magic, u32 version, slide_id, i32 slide_w, slide_h,
// patch_w, patch_h, stride, cols, rows, then cols*rows f32 scores.
inline void save_heatmap(const fs::path& path, const HeatMap& hm) {
  BinaryWriter w;
  w.put_raw(std::string_view(kHeatMagic, 8));
  w.put<std::uint32_t>(1);
  w.put_string(hm.slide_id);
  const auto& g = hm.grid;
  for (int v : {g.slide_w(), g.slide_h(), g.patch_w(), g.patch_h(), g.stride(), g.cols(), g.rows()}) {
    w.put<std::int32_t>(v);
  }
  w.put_array<float>(hm.scores);
  w.save(path);
}

inline HeatMap load_heatmap(const fs::path& path) {
  auto r = BinaryReader::from_file(path);
  if (r.get_raw(8) != std::string_view(kHeatMagic, 8)) throw IoError("not a heatmap file: " + path.string());
  if (r.get<std::uint32_t>() != 1) throw IoError("unsupported heatmap version");
  HeatMap hm;
  hm.slide_id = r.get_string();
  int v[7];
  for (int& x : v) x = r.get<std::int32_t>();
  hm.grid = PatchGrid(v[0], v[1], v[2], v[3], v[4]);
  if (hm.grid.cols() != v[5] || hm.grid.rows() != v[6]) throw IoError("heatmap grid dims inconsistent");
  hm.scores.resize(hm.grid.count());
  r.get_array<float>(hm.scores);
  if (!r.at_end()) throw IoError("trailing bytes in heatmap");
  hm.validate();
  return hm;
}

// 8-bit grayscale rendering, one block of `scale` pixels per cell.
inline Image render_heatmap(const HeatMap& hm, int scale = 4) {
  const auto& g = hm.grid;
  Image img(std::max(1, g.cols() * scale), std::max(1, g.rows() * scale), 1);
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      const float s = hm.scores[static_cast<std::size_t>(r) * g.cols() + c];
      const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(s, 0.0f, 1.0f) * 255.0f));
      for (int y = 0; y < scale; ++y) {
        std::fill_n(img.px(c * scale, r * scale + y), scale, v);
      }
    }
  }
  return img;
}

struct SelectedRegion {
  Origin origin;
  float score = 0.0f;
  std::size_t index = 0;  // grid cell
};

// Top regions of one slide, descending score.
struct RoiSelection {
  std::string slide_id;
  std::vector<SelectedRegion> regions;
};

// The min(m_tilde, M) highest-scoring cells; ties go to the earlier cell in
// row-major order.
inline RoiSelection select_top(const HeatMap& hm, std::size_t m_tilde) {
  CYTO_CHECK(m_tilde >= 1, ConfigError, "m_tilde must be >= 1");
  CYTO_CHECK(!hm.scores.empty(), ShapeError, "empty heatmap for slide " + hm.slide_id);
  CYTO_CHECK(hm.scores.size() == hm.grid.count(), ShapeError, "heatmap size does not match its grid");
  std::vector<std::size_t> idx(hm.scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t k = std::min(m_tilde, idx.size());
  const auto before = [&](std::size_t a, std::size_t b) {
    return hm.scores[a] != hm.scores[b] ? hm.scores[a] > hm.scores[b] : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  RoiSelection sel{hm.slide_id, {}};
  sel.regions.reserve(k);
  for (std::size_t i = 0; i < k; ++i) sel.regions.push_back({hm.grid.origin(idx[i]), hm.scores[idx[i]], idx[i]});
  return sel;
}

// Text form: one "x y score" line per region, descending.
inline std::string format_selection(const RoiSelection& sel) {
  std::ostringstream os;
  os << "# slide_id " << sel.slide_id << "\n# x y score\n";
  for (const auto& r : sel.regions) os << r.origin.x << " " << r.origin.y << " " << format_real(r.score) << "\n";
  return os.str();
}

inline RoiSelection parse_selection(std::string_view text, const PatchGrid& grid, std::string slide_id) {
  RoiSelection sel{std::move(slide_id), {}};
  for (const auto& raw : split_char(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_ws(line);
    if (f.size() != 3) throw IoError("bad selection line: " + std::string(line));
    SelectedRegion r;
    r.origin = {parse_number<int>(f[0], "x"), parse_number<int>(f[1], "y")};
    r.score = parse_number<float>(f[2], "score");
    r.index = grid.index_of(r.origin);
    sel.regions.push_back(r);
  }
  return sel;
}

}  // namespace cyto::roi
