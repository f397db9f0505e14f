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
#include <span>
#include <vector>

#include "cytocascade/common/error.hpp"

namespace cyto {

// Interleaved 8-bit image, row-major, `channels` bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c = 3)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c)) {}

  std::size_t row_bytes() const { return static_cast<std::size_t>(width) * channels; }

  std::uint8_t* px(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* px(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  std::span<std::uint8_t> row(int y) { return {px(0, y), row_bytes()}; }
  std::span<const std::uint8_t> row(int y) const { return {px(0, y), row_bytes()}; }

  Image crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width || y0 + h > height) {
      throw OutOfBoundsError("crop outside image");
    }
    Image out(w, h, channels);
    for (int y = 0; y < h; ++y) {
      const auto* src = px(x0, y0 + y);
      std::copy(src, src + out.row_bytes(), out.px(0, y));
    }
    return out;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace cyto
