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

#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"

namespace cyto::nn {

struct LayerSpec {
  enum class Kind { kConv, kPool, kBatchNorm, kRelu, kLinear };
  Kind kind;
  int size = 0;  // filters for conv, output dimension for linear
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Ordered layer list, e.g. "conv:8,bn,relu,pool,linear:64,bn,relu,linear:1".
class ArchitectureDescriptor {
 public:
  ArchitectureDescriptor() = default;
  explicit ArchitectureDescriptor(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {}

  static ArchitectureDescriptor parse(std::string_view text) {
    std::vector<LayerSpec> layers;
    for (const auto& raw : split_char(text, ',')) {
      const std::string tok(trim(raw));
      const auto colon = tok.find(':');
      const std::string head = tok.substr(0, colon);
      const auto arg = [&] {
        if (colon == std::string::npos) throw ConfigError("layer '" + tok + "' needs a size");
        const int v = parse_number<int>(tok.substr(colon + 1), "layer size");
        if (v <= 0) throw ConfigError("layer '" + tok + "' needs a positive size");
        return v;
      };
      if (head == "conv") {
        layers.push_back({LayerSpec::Kind::kConv, arg()});
      } else if (head == "linear") {
        layers.push_back({LayerSpec::Kind::kLinear, arg()});
      } else if (head == "pool" && colon == std::string::npos) {
        layers.push_back({LayerSpec::Kind::kPool, 0});
      } else if (head == "bn" && colon == std::string::npos) {
        layers.push_back({LayerSpec::Kind::kBatchNorm, 0});
      } else if (head == "relu" && colon == std::string::npos) {
        layers.push_back({LayerSpec::Kind::kRelu, 0});
      } else {
        throw ConfigError("unknown layer '" + tok + "'");
      }
    }
    return ArchitectureDescriptor(std::move(layers));
  }

  std::string to_string() const {
    std::string s;
    for (const auto& l : layers_) {
      if (!s.empty()) s += ',';
      switch (l.kind) {
        case LayerSpec::Kind::kConv: s += "conv:" + std::to_string(l.size); break;
        case LayerSpec::Kind::kLinear: s += "linear:" + std::to_string(l.size); break;
        case LayerSpec::Kind::kPool: s += "pool"; break;
        case LayerSpec::Kind::kBatchNorm: s += "bn"; break;
        case LayerSpec::Kind::kRelu: s += "relu"; break;
      }
    }
    return s;
  }

  const std::vector<LayerSpec>& layers() const { return layers_; }

  // Shape after every layer for a (channels, h, w) input. Throws ConfigError
  // if a spatial dimension collapses, convolution follows a linear layer, or
  // the network does not end in linear:1.
  std::vector<std::vector<int>> validate(int channels, int h, int w) const {
    CYTO_CHECK(!layers_.empty(), ConfigError, "empty architecture");
    CYTO_CHECK(channels > 0 && h > 0 && w > 0, ConfigError, "input dimensions must be positive");
    std::vector<std::vector<int>> shapes;
    std::vector<int> cur{channels, h, w};
    for (const auto& l : layers_) {
      const bool flat = cur.size() == 1;
      switch (l.kind) {
        case LayerSpec::Kind::kConv:
          CYTO_CHECK(!flat, ConfigError, "conv after linear layer");
          cur[0] = l.size;
          break;
        case LayerSpec::Kind::kPool:
          CYTO_CHECK(!flat, ConfigError, "pool after linear layer");
          cur[1] /= 2;
          cur[2] /= 2;
          CYTO_CHECK(cur[1] > 0 && cur[2] > 0, ConfigError, "input too small for the number of pooling layers");
          break;
        case LayerSpec::Kind::kLinear:
          cur = {l.size};
          break;
        case LayerSpec::Kind::kBatchNorm:
        case LayerSpec::Kind::kRelu:
          break;
      }
      shapes.push_back(cur);
    }
    CYTO_CHECK(layers_.back().kind == LayerSpec::Kind::kLinear && layers_.back().size == 1, ConfigError,
               "architecture must end in linear:1");
    return shapes;
  }

  friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;

 private:
  std::vector<LayerSpec> layers_;
};

// VGG11-style network: six 3x3 convolutions (64,128,256,256,512,512) with
// four 2x2 max-pools, then linear 4096, 4096, 1. Every conv and every
// non-final linear is followed by batchnorm and ReLU.
inline ArchitectureDescriptor reference_descriptor() {
  return ArchitectureDescriptor::parse(
      "conv:64,bn,relu,pool,conv:128,bn,relu,pool,conv:256,bn,relu,conv:256,bn,relu,pool,"
      "conv:512,bn,relu,conv:512,bn,relu,pool,linear:4096,bn,relu,linear:4096,bn,relu,linear:1");
}

// Same layout scaled down for desk-sized runs on 32x32 patches.
inline ArchitectureDescriptor desk_descriptor() {
  return ArchitectureDescriptor::parse(
      "conv:8,bn,relu,pool,conv:16,bn,relu,pool,conv:32,bn,relu,pool,linear:64,bn,relu,linear:1");
}

inline ArchitectureDescriptor descriptor_by_name(const std::string& name) {
  if (name == "reference") return reference_descriptor();
  if (name == "desk") return desk_descriptor();
  return ArchitectureDescriptor::parse(name);
}

}  // namespace cyto::nn
