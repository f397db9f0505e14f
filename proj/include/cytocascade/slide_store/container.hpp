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
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/slide_store/image.hpp"
#include "cytocascade/slide_store/patch_grid.hpp"
#include "cytocascade/slide_store/png_codec.hpp"
#include "cytocascade/slide_store/tile_cache.hpp"

namespace cyto {

inline constexpr const char* kSlideManifestName = "manifest.txt";
inline constexpr const char* kSlideFormatTag = "cytocascade-slide";
inline constexpr int kSlideFormatVersion = 1;

struct TileEntry {
  int row = 0;
  int col = 0;
  std::string file;
  std::uint32_t crc = 0;
};

// Parsed form of a container's manifest.txt.
struct SlideManifest {
  std::string slide_id;
  int width = 0;
  int height = 0;
  int channels = 3;
  int tile_size = 256;
  int downscale_factor = 1;
  int source_width = 0;
  int source_height = 0;
  int tile_rows = 0;
  int tile_cols = 0;
  std::vector<TileEntry> tiles;  // row-major

  std::string to_text() const {
    std::ostringstream os;
    os << "# tiled slide container\n"
       << "format " << kSlideFormatTag << "\n"
       << "version " << kSlideFormatVersion << "\n"
       << "slide_id " << slide_id << "\n"
       << "width " << width << "\n"
       << "height " << height << "\n"
       << "channels " << channels << "\n"
       << "tile_size " << tile_size << "\n"
       << "downscale_factor " << downscale_factor << "\n"
       << "source_width " << source_width << "\n"
       << "source_height " << source_height << "\n"
       << "tile_rows " << tile_rows << "\n"
       << "tile_cols " << tile_cols << "\n"
       << "tile_count " << tiles.size() << "\n";
    for (const auto& t : tiles) {
      os << "tile " << t.row << " " << t.col << " " << t.file << " " << hex32(t.crc) << "\n";
    }
    return os.str();
  }

  static SlideManifest parse(std::string_view text) {
    const auto kv = KeyValueText::parse(text);
    if (kv.get("format") != kSlideFormatTag) throw IoError("not a slide manifest");
    if (kv.get_as<int>("version") != kSlideFormatVersion) throw IoError("unsupported slide manifest version");
    SlideManifest m;
    m.slide_id = kv.get("slide_id");
    m.width = kv.get_as<int>("width");
    m.height = kv.get_as<int>("height");
    m.channels = kv.get_as<int>("channels");
    m.tile_size = kv.get_as<int>("tile_size");
    m.downscale_factor = kv.get_as<int>("downscale_factor");
    m.source_width = kv.get_as<int>("source_width");
    m.source_height = kv.get_as<int>("source_height");
    m.tile_rows = kv.get_as<int>("tile_rows");
    m.tile_cols = kv.get_as<int>("tile_cols");
    const auto count = kv.get_as<std::size_t>("tile_count");
    if (m.channels != 3) throw IoError("only RGB containers are supported");
    if (m.width <= 0 || m.height <= 0 || m.tile_size <= 0) throw IoError("bad container geometry");
    const int expect_rows = (m.height + m.tile_size - 1) / m.tile_size;
    const int expect_cols = (m.width + m.tile_size - 1) / m.tile_size;
    if (m.tile_rows != expect_rows || m.tile_cols != expect_cols ||
        count != static_cast<std::size_t>(expect_rows) * expect_cols) {
      throw IoError("tile grid inconsistent with dimensions");
    }
    m.tiles.resize(count);
    std::vector<bool> seen(count, false);
    for (const auto& line : kv.all("tile")) {
      const auto f = split_ws(line);
      if (f.size() != 4) throw IoError("bad tile line: " + line);
      TileEntry t;
      t.row = parse_number<int>(f[0], "tile row");
      t.col = parse_number<int>(f[1], "tile col");
      t.file = f[2];
      t.crc = static_cast<std::uint32_t>(std::stoul(f[3], nullptr, 16));
      if (t.row < 0 || t.row >= m.tile_rows || t.col < 0 || t.col >= m.tile_cols) {
        throw IoError("tile index out of range: " + line);
      }
      const auto idx = static_cast<std::size_t>(t.row) * m.tile_cols + t.col;
      if (seen[idx]) throw IoError("duplicate tile: " + line);
      seen[idx] = true;
      m.tiles[idx] = std::move(t);
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw IoError("manifest is missing tiles");
    return m;
  }
};

inline std::string tile_file_name(int row, int col) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r%05d_c%05d.png", row, col);
  return buf;
}

// Immutable tiled RGB image on disk. Patch reads go through a bounded,
// internally synchronized tile cache, so concurrent readers are fine.
class SlideContainer {
 public:
  static SlideContainer open(const fs::path& dir, std::size_t cache_budget = cache_budget_from_env()) {
    return SlideContainer(dir, SlideManifest::parse(read_text_file(dir / kSlideManifestName)), cache_budget);
  }

  static std::shared_ptr<const SlideContainer> open_shared(const fs::path& dir,
                                                           std::size_t cache_budget = cache_budget_from_env()) {
    return std::shared_ptr<const SlideContainer>(
        new SlideContainer(dir, SlideManifest::parse(read_text_file(dir / kSlideManifestName)), cache_budget));
  }

  const fs::path& dir() const { return dir_; }
  const SlideManifest& manifest() const { return manifest_; }
  const std::string& slide_id() const { return manifest_.slide_id; }
  int width() const { return manifest_.width; }
  int height() const { return manifest_.height; }
  int tile_size() const { return manifest_.tile_size; }
  int downscale_factor() const { return manifest_.downscale_factor; }
  std::size_t tile_count() const { return manifest_.tiles.size(); }

  CacheStats cache_stats() const { return cache_->stats(); }
  std::size_t cache_budget() const { return cache_->budget(); }

  // Decoded tile (row, col), verified against its manifest checksum.
  std::shared_ptr<const Image> tile(int row, int col) const {
    return cache_->get(static_cast<std::size_t>(row) * manifest_.tile_cols + col);
  }

  // Exact pixels of the w x h region at `origin`. When `tiles_touched` is
  // given it receives the number of tiles the read intersected.
  Image read_region(Origin origin, int w, int h, int* tiles_touched = nullptr) const {
    if (w <= 0 || h <= 0 || origin.x < 0 || origin.y < 0 || origin.x + w > width() ||
        origin.y + h > height()) {
      throw OutOfBoundsError("patch (" + std::to_string(origin.x) + "," + std::to_string(origin.y) + ") " +
                             std::to_string(w) + "x" + std::to_string(h) + " outside slide " + slide_id());
    }
    Image out(w, h, 3);
    const int ts = tile_size();
    const int r0 = origin.y / ts;
    const int r1 = (origin.y + h - 1) / ts;
    const int c0 = origin.x / ts;
    const int c1 = (origin.x + w - 1) / ts;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const auto t = tile(r, c);
        const int tx0 = c * ts;
        const int ty0 = r * ts;
        const int x_lo = std::max(origin.x, tx0);
        const int x_hi = std::min(origin.x + w, tx0 + t->width);
        const int y_lo = std::max(origin.y, ty0);
        const int y_hi = std::min(origin.y + h, ty0 + t->height);
        const std::size_t span = static_cast<std::size_t>(x_hi - x_lo) * 3;
        for (int y = y_lo; y < y_hi; ++y) {
          const auto* src = t->px(x_lo - tx0, y - ty0);
          std::copy(src, src + span, out.px(x_lo - origin.x, y - origin.y));
        }
      }
    }
    if (tiles_touched) *tiles_touched = (r1 - r0 + 1) * (c1 - c0 + 1);
    return out;
  }

  Patch read_patch(Origin origin, int w, int h, int* tiles_touched = nullptr) const {
    return Patch{slide_id(), origin, read_region(origin, w, h, tiles_touched)};
  }

  // Verifies every tile decodes and matches its checksum.
  void verify() const {
    for (int r = 0; r < manifest_.tile_rows; ++r) {
      for (int c = 0; c < manifest_.tile_cols; ++c) load_tile(static_cast<std::size_t>(r) * manifest_.tile_cols + c);
    }
  }

 private:
  SlideContainer(fs::path dir, SlideManifest manifest, std::size_t cache_budget)
      : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    cache_ = std::make_shared<TileCache>(cache_budget, [this](std::size_t key) { return load_tile(key); });
  }

  Image load_tile(std::size_t key) const {
    const auto& entry = manifest_.tiles.at(key);
    Image img = read_png(dir_ / "tiles" / entry.file, 3);
    const int ts = tile_size();
    const int ew = std::min(ts, width() - entry.col * ts);
    const int eh = std::min(ts, height() - entry.row * ts);
    if (img.width != ew || img.height != eh) throw IoError("tile " + entry.file + " has wrong size");
    if (crc32_of(img.pixels) != entry.crc) throw IoError("tile " + entry.file + " checksum mismatch");
    return img;
  }

  fs::path dir_;
  SlideManifest manifest_;
  // The loader captures `this`; containers are handed around by shared_ptr
  // or kept in place, never moved after open.
  std::shared_ptr<TileCache> cache_;

 public:
  SlideContainer(const SlideContainer&) = delete;
  SlideContainer& operator=(const SlideContainer&) = delete;
  SlideContainer(SlideContainer&& other) noexcept = delete;
};

}  // namespace cyto
