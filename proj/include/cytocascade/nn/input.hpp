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

#include <span>
#include <vector>

#include "cytocascade/nn/tensor.hpp"
#include "cytocascade/slide_store/patch_grid.hpp"

namespace cyto::nn {

// Interleaved RGB8 patches -> (n, 3, h, w) floats, centered and scaled to
// roughly unit range.
inline TensorF images_to_tensor(std::span<const Image* const> images) {
  CYTO_CHECK(!images.empty(), ShapeError, "empty patch batch");
  const int h = images[0]->height, w = images[0]->width;
  TensorF t({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t s = 0; s < images.size(); ++s) {
    const Image& img = *images[s];
    CYTO_CHECK(img.width == w && img.height == h && img.channels == 3, ShapeError, "mixed patch sizes in batch");
    for (int y = 0; y < h; ++y) {
      const auto* row = img.px(0, y);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          t.at(static_cast<int>(s), c, y, x) = (static_cast<float>(row[3 * x + c]) - 127.5f) / 64.0f;
        }
      }
    }
  }
  return t;
}

inline TensorF patches_to_tensor(std::span<const Patch> patches) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(patches.size());
  for (const auto& p : patches) ptrs.push_back(&p.pixels);
  return images_to_tensor(ptrs);
}

}  // namespace cyto::nn
