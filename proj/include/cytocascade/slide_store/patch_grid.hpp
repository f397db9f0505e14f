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
#include <string>

#include "cytocascade/common/error.hpp"
#include "cytocascade/slide_store/image.hpp"

namespace cyto {

struct Origin {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Origin&, const Origin&) = default;
};

// Row-major order: y first, then x.
inline bool row_major_less(const Origin& a, const Origin& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

// A w x h x 3 region cut from a slide.
struct Patch {
  std::string slide_id;
  Origin origin;
  Image pixels;
};

// Regular grid of patches; partial patches at the right/bottom edges are
// dropped.
class PatchGrid {
 public:
  PatchGrid() = default;

  PatchGrid(int slide_w, int slide_h, int patch_w, int patch_h, int stride)
      : slide_w_(slide_w), slide_h_(slide_h), patch_w_(patch_w), patch_h_(patch_h), stride_(stride) {
    CYTO_CHECK(patch_w > 0 && patch_h > 0, ConfigError, "patch size must be positive");
    CYTO_CHECK(stride > 0, ConfigError, "stride must be positive");
    CYTO_CHECK(slide_w >= 0 && slide_h >= 0, ConfigError, "negative slide size");
    if (slide_w >= patch_w && slide_h >= patch_h) {
      cols_ = (slide_w - patch_w) / stride + 1;
      rows_ = (slide_h - patch_h) / stride + 1;
    }
  }

  int patch_w() const { return patch_w_; }
  int patch_h() const { return patch_h_; }
  int stride() const { return stride_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  int slide_w() const { return slide_w_; }
  int slide_h() const { return slide_h_; }
  std::size_t count() const { return static_cast<std::size_t>(cols_) * static_cast<std::size_t>(rows_); }

  Origin origin(std::size_t index) const {
    const auto c = static_cast<int>(index % static_cast<std::size_t>(cols_));
    const auto r = static_cast<int>(index / static_cast<std::size_t>(cols_));
    return {c * stride_, r * stride_};
  }

  // Index of the cell whose origin is exactly `o`; throws when `o` is not on the grid.
  std::size_t index_of(Origin o) const {
    if (o.x % stride_ != 0 || o.y % stride_ != 0 || o.x / stride_ >= cols_ || o.y / stride_ >= rows_ ||
        o.x < 0 || o.y < 0) {
      throw OutOfBoundsError("origin not on patch grid");
    }
    return static_cast<std::size_t>(o.y / stride_) * cols_ + static_cast<std::size_t>(o.x / stride_);
  }

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  int slide_w_ = 0;
  int slide_h_ = 0;
  int patch_w_ = 1;
  int patch_h_ = 1;
  int stride_ = 1;
  int cols_ = 0;
  int rows_ = 0;
};

}  // namespace cyto
