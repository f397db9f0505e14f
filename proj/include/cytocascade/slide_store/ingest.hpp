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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/slide_store/container.hpp"
#include "cytocascade/slide_store/image.hpp"
#include "cytocascade/slide_store/png_codec.hpp"

namespace cyto {

// Sequential RGB8 row producer. Rows are requested strictly top to bottom,
// once each, so sources never need to hold the whole image.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual void read_row(int y, std::uint8_t* out) = 0;
};

class MemoryImageSource final : public ImageSource {
 public:
  explicit MemoryImageSource(const Image& img) : img_(img) {
    if (img.channels != 3) throw IoError("memory source must be RGB");
  }
  int width() const override { return img_.width; }
  int height() const override { return img_.height; }
  void read_row(int y, std::uint8_t* out) override {
    const auto row = img_.row(y);
    std::copy(row.begin(), row.end(), out);
  }

 private:
  const Image& img_;
};

class PngImageSource final : public ImageSource {
 public:
  explicit PngImageSource(const fs::path& path) : reader_(path) {}
  int width() const override { return reader_.width(); }
  int height() const override { return reader_.height(); }
  void read_row(int, std::uint8_t* out) override { reader_.next_row(out); }

 private:
  PngRowReader reader_;
};

inline bool valid_tile_size(int tile_size) {
  return tile_size == 128 || tile_size == 256 || tile_size == 512;
}

// Streams `source` into a tiled container at `out_dir`, block-mean
// downscaling by `downscale_factor` (rounded half up). Peak working memory is
// one band of tile_size output rows plus one source row.
inline SlideContainer ingest(ImageSource& source, const fs::path& out_dir, const std::string& slide_id,
                             int tile_size, int downscale_factor,
                             std::size_t cache_budget = cache_budget_from_env()) {
  CYTO_CHECK(valid_tile_size(tile_size), ConfigError, "tile_size must be 128, 256 or 512");
  CYTO_CHECK(downscale_factor >= 1, ConfigError, "downscale_factor must be >= 1");
  CYTO_CHECK(!slide_id.empty() && slide_id.find_first_of(" \t\n") == std::string::npos, ConfigError,
             "slide_id must be a non-empty token");
  const int f = downscale_factor;
  const int src_w = source.width();
  const int src_h = source.height();
  const int out_w = src_w / f;
  const int out_h = src_h / f;
  if (out_w <= 0 || out_h <= 0) throw ConfigError("zero-area image after downscale");

  fs::create_directories(out_dir / "tiles");
  SlideManifest m;
  m.slide_id = slide_id;
  m.width = out_w;
  m.height = out_h;
  m.tile_size = tile_size;
  m.downscale_factor = f;
  m.source_width = src_w;
  m.source_height = src_h;
  m.tile_rows = (out_h + tile_size - 1) / tile_size;
  m.tile_cols = (out_w + tile_size - 1) / tile_size;
  m.tiles.resize(static_cast<std::size_t>(m.tile_rows) * m.tile_cols);

  std::vector<std::uint8_t> src_row(static_cast<std::size_t>(src_w) * 3);
  std::vector<std::uint32_t> acc(static_cast<std::size_t>(out_w) * 3);
  const std::uint32_t block = static_cast<std::uint32_t>(f) * static_cast<std::uint32_t>(f);
  int next_src_row = 0;

  for (int tr = 0; tr < m.tile_rows; ++tr) {
    const int band_y0 = tr * tile_size;
    const int band_h = std::min(tile_size, out_h - band_y0);
    Image band(out_w, band_h, 3);
    for (int oy = 0; oy < band_h; ++oy) {
      std::fill(acc.begin(), acc.end(), 0u);
      for (int k = 0; k < f; ++k) {
        source.read_row(next_src_row++, src_row.data());
        for (int ox = 0; ox < out_w; ++ox) {
          for (int dx = 0; dx < f; ++dx) {
            const std::size_t s = (static_cast<std::size_t>(ox) * f + dx) * 3;
            acc[ox * 3 + 0] += src_row[s + 0];
            acc[ox * 3 + 1] += src_row[s + 1];
            acc[ox * 3 + 2] += src_row[s + 2];
          }
        }
      }
      auto* dst = band.px(0, oy);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        dst[i] = static_cast<std::uint8_t>((acc[i] + block / 2) / block);
      }
    }
    for (int tc = 0; tc < m.tile_cols; ++tc) {
      const int x0 = tc * tile_size;
      const Image tile = band.crop(x0, 0, std::min(tile_size, out_w - x0), band_h);
      TileEntry& e = m.tiles[static_cast<std::size_t>(tr) * m.tile_cols + tc];
      e.row = tr;
      e.col = tc;
      e.file = tile_file_name(tr, tc);
      e.crc = crc32_of(tile.pixels);
      write_png(out_dir / "tiles" / e.file, tile);
    }
  }
  // Drain remaining source rows so row-streaming sources are consumed fully.
  while (next_src_row < src_h) source.read_row(next_src_row++, src_row.data());

  const auto tmp = out_dir / "manifest.txt.tmp";
  write_text_file(tmp, m.to_text());
  fs::rename(tmp, out_dir / kSlideManifestName);
  return SlideContainer::open(out_dir, cache_budget);
}

inline SlideContainer ingest_png(const fs::path& png_path, const fs::path& out_dir, const std::string& slide_id,
                                 int tile_size, int downscale_factor,
                                 std::size_t cache_budget = cache_budget_from_env()) {
  PngImageSource src(png_path);
  return ingest(src, out_dir, slide_id, tile_size, downscale_factor, cache_budget);
}

}  // namespace cyto
