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

#include <cstddef>
#include <iterator>
#include <vector>

#include "cytocascade/common/parallel.hpp"
#include "cytocascade/slide_store/container.hpp"
#include "cytocascade/slide_store/patch_grid.hpp"

namespace cyto {

inline PatchGrid make_grid(const SlideContainer& c, int patch_w, int patch_h, int stride) {
  return PatchGrid(c.width(), c.height(), patch_w, patch_h, stride);
}

inline void check_grid(const SlideContainer& c, const PatchGrid& grid) {
  if (grid.slide_w() != c.width() || grid.slide_h() != c.height()) {
    throw ShapeError("patch grid built for a different slide size than " + c.slide_id());
  }
}

// Row-major, lazily-read stream of every grid patch.
class GridStream {
 public:
  GridStream(const SlideContainer& container, PatchGrid grid) : container_(&container), grid_(grid) {
    check_grid(container, grid);
  }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Patch;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const GridStream* s, std::size_t i) : stream_(s), index_(i) {}

    Patch operator*() const {
      return stream_->container_->read_patch(stream_->grid_.origin(index_), stream_->grid_.patch_w(),
                                             stream_->grid_.patch_h());
    }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    void operator++(int) { ++index_; }
    std::size_t index() const { return index_; }
    friend bool operator==(const iterator& a, const iterator& b) { return a.index_ == b.index_; }

   private:
    const GridStream* stream_ = nullptr;
    std::size_t index_ = 0;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, grid_.count()}; }
  std::size_t size() const { return grid_.count(); }

 private:
  const SlideContainer* container_;
  PatchGrid grid_;
};

// Reads grid patches [begin, end) in index order.
inline std::vector<Patch> read_grid_range(const SlideContainer& c, const PatchGrid& grid, std::size_t begin,
                                          std::size_t end) {
  std::vector<Patch> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(c.read_patch(grid.origin(i), grid.patch_w(), grid.patch_h()));
  }
  return out;
}

// Calls fn(first_index, patches) for fixed chunks of the grid, possibly from
// several threads. Chunk boundaries do not depend on `workers`.
template <class Fn>
void for_each_grid_chunk(const SlideContainer& c, const PatchGrid& grid, std::size_t chunk, int workers, Fn&& fn) {
  check_grid(c, grid);
  parallel_chunks(grid.count(), chunk, workers, [&](std::size_t b, std::size_t e) {
    fn(b, read_grid_range(c, grid, b, e));
  });
}

}  // namespace cyto
