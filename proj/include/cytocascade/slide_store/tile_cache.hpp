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
#include <cstdlib>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/slide_store/image.hpp"

namespace cyto {

inline constexpr std::size_t kDefaultCacheBytes = 64u << 20;

// Cache budget from CYTO_CACHE_BYTES, else the default.
inline std::size_t cache_budget_from_env() {
  if (const char* v = std::getenv("CYTO_CACHE_BYTES"); v && *v) {
    return parse_number<std::size_t>(v, "CYTO_CACHE_BYTES");
  }
  return kDefaultCacheBytes;
}

struct CacheStats {
  std::size_t resident_bytes = 0;
  std::size_t peak_bytes = 0;
  std::size_t loads = 0;
  std::size_t hits = 0;
};

// Thread-safe LRU of decoded tiles, bounded by decoded byte size.
class TileCache {
 public:
  using Loader = std::function<Image(std::size_t)>;

  TileCache(std::size_t budget_bytes, Loader loader)
      : budget_(budget_bytes), loader_(std::move(loader)) {}

  std::size_t budget() const { return budget_; }

  std::shared_ptr<const Image> get(std::size_t key) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = index_.find(key); it != index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        ++stats_.hits;
        return it->second->tile;
      }
    }
    // Decode outside the lock; a racing loader of the same key just loses.
    auto tile = std::make_shared<const Image>(loader_(key));
    const std::size_t bytes = tile->pixels.size();
    if (bytes > budget_) {
      throw ConfigError("tile cache budget (" + std::to_string(budget_) +
                        " bytes) smaller than one tile (" + std::to_string(bytes) + " bytes)");
    }
    std::lock_guard lock(mutex_);
    ++stats_.loads;
    if (auto it = index_.find(key); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->tile;
    }
    while (!lru_.empty() && stats_.resident_bytes + bytes > budget_) {
      stats_.resident_bytes -= lru_.back().tile->pixels.size();
      index_.erase(lru_.back().key);
      lru_.pop_back();
    }
    lru_.push_front({key, tile});
    index_[key] = lru_.begin();
    stats_.resident_bytes += bytes;
    stats_.peak_bytes = std::max(stats_.peak_bytes, stats_.resident_bytes);
    return tile;
  }

  CacheStats stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
  }

  void clear() {
    std::lock_guard lock(mutex_);
    lru_.clear();
    index_.clear();
    stats_.resident_bytes = 0;
  }

 private:
  struct Entry {
    std::size_t key;
    std::shared_ptr<const Image> tile;
  };

  std::size_t budget_;
  Loader loader_;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
  CacheStats stats_;
};

}  // namespace cyto
