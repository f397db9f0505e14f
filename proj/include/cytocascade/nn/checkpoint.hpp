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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/nn/model.hpp"
#include "cytocascade/nn/sgd.hpp"

namespace cyto::nn {

inline constexpr char kCheckpointMagic[8] = {'C', 'Y', 'T', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named real-valued side data stored with a checkpoint (thresholds, counters).
using Extras = std::map<std::string, std::vector<double>>;

template <class T>
struct Checkpoint {
  ScorerModel<T> model;
  std::vector<Tensor<T>> velocity;  // empty when no optimizer state was saved
  Extras extras;
};

namespace detail {

template <class T>
void put_tensor(BinaryWriter& w, const Tensor<T>& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) w.put<std::int32_t>(d);
  w.put_array<T>(t.values());
}

template <class T>
Tensor<T> get_tensor(BinaryReader& r) {
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw IoError("checkpoint: implausible tensor rank");
  std::vector<int> shape(rank);
  for (auto& d : shape) {
    d = r.get<std::int32_t>();
    if (d < 0) throw IoError("checkpoint: negative dimension");
  }
  Tensor<T> t(shape);
  r.get_array<T>(t.values());
  return t;
}

}  // namespace detail

// Layout (little-endian): magic, version, scalar width, descriptor, input
// (c,h,w), seed, named parameter/buffer tensors, optional optimizer
// velocity, named f64 extras.
template <class T>
void save_checkpoint(const fs::path& path, ScorerModel<T>& model, const std::vector<Tensor<T>>* velocity = nullptr,
                     const Extras& extras = {}) {
  BinaryWriter w;
  w.put_raw(std::string_view(kCheckpointMagic, 8));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(sizeof(T)));
  w.put_string(model.descriptor().to_string());
  for (int d : model.input_shape()) w.put<std::int32_t>(d);
  w.put<std::uint64_t>(model.seed());
  const auto state = model.named_state();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, t] : state) {
    w.put_string(name);
    detail::put_tensor(w, *t);
  }
  const bool has_velocity = velocity && !velocity->empty();
  w.put<std::uint8_t>(has_velocity ? 1 : 0);
  if (has_velocity) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(velocity->size()));
    for (const auto& v : *velocity) detail::put_tensor(w, v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(extras.size()));
  for (const auto& [name, values] : extras) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(values.size()));
    w.put_array<double>(values);
  }
  w.save(path);
}

template <class T>
Checkpoint<T> load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  auto r = BinaryReader::from_file(path);
  if (r.get_raw(8) != std::string_view(kCheckpointMagic, 8)) throw IoError("not a checkpoint: " + path.string());
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  if (r.get<std::uint8_t>() != sizeof(T)) throw IoError("checkpoint scalar width mismatch");
  const auto desc = ArchitectureDescriptor::parse(r.get_string());
  const int c = r.get<std::int32_t>(), h = r.get<std::int32_t>(), w = r.get<std::int32_t>();
  const auto seed = r.get<std::uint64_t>();
  Checkpoint<T> ck{ScorerModel<T>(desc, c, h, w, seed), {}, {}};
  auto state = ck.model.named_state();
  const auto n = r.get<std::uint32_t>();
  if (n != state.size()) throw IoError("checkpoint tensor count does not match descriptor");
  for (auto& [name, t] : state) {
    if (r.get_string() != name) throw IoError("checkpoint tensor order mismatch at " + name);
    auto loaded = detail::get_tensor<T>(r);
    if (loaded.shape() != t->shape()) throw IoError("checkpoint shape mismatch for " + name);
    *t = std::move(loaded);
  }
  if (r.get<std::uint8_t>()) {
    const auto nv = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < nv; ++i) ck.velocity.push_back(detail::get_tensor<T>(r));
  }
  const auto ne = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < ne; ++i) {
    auto name = r.get_string();
    std::vector<double> values(r.get<std::uint32_t>());
    r.get_array<double>(values);
    ck.extras.emplace(std::move(name), std::move(values));
  }
  if (!r.at_end()) throw IoError("trailing bytes in checkpoint");
  ck.model.set_mode(Mode::kEval);
  return ck;
}

}  // namespace cyto::nn
