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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/common/parallel.hpp"
#include "cytocascade/common/rng.hpp"
#include "test_support.hpp"

namespace cyto {
namespace {

TEST(Checksums, Crc32MatchesKnownCheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(Checksums, Fnv1aOfEmptyIsOffsetBasis) { EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL); }

TEST(Checksums, HexFormatting) {
  EXPECT_EQ(hex32(0xCBF43926u), "cbf43926");
  EXPECT_EQ(hex64(0x1ULL), "0000000000000001");
}

TEST(Text, FormatRealRoundTripsExactly) {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-30.0, 30.0));
    EXPECT_EQ(parse_number<double>(format_real(v), "v"), v);
  }
  EXPECT_EQ(parse_number<float>(format_real(0.1f), "v"), 0.1f);
}

TEST(Text, SplitAndTrim) {
  EXPECT_EQ(trim("  a b \t\n"), "a b");
  EXPECT_EQ(split_ws(" a  b\tc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(split_char("a\t\tb", '\t'), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Text, ParseNumberRejectsGarbage) {
  EXPECT_THROW(parse_number<int>("12x", "n"), ConfigError);
  EXPECT_THROW(parse_number<double>("", "n"), ConfigError);
  EXPECT_EQ(parse_number<int>(" 42 ", "n"), 42);
}

TEST(KeyValue, RepeatedKeysKeepOrderAndCommentsAreSkipped) {
  const auto kv = KeyValueText::parse("# header\nname slide 7\ntile 1\ntile 2\n\n  width 10 \n");
  EXPECT_EQ(kv.get("name"), "slide 7");
  EXPECT_EQ(kv.all("tile"), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(kv.get_as<int>("width"), 10);
  EXPECT_FALSE(kv.has("height"));
  EXPECT_THROW(kv.get("height"), IoError);
}

TEST(Binary, RoundTripThroughFile) {
  testing::TempDir dir("binary");
  BinaryWriter w;
  w.put<std::int32_t>(-5);
  w.put<double>(3.25);
  w.put_string("hello");
  const std::vector<float> arr{1.f, -2.f, 0.5f};
  w.put_array<float>(arr);
  w.save(dir / "x.bin");

  auto r = BinaryReader::from_file(dir / "x.bin");
  EXPECT_EQ(r.get<std::int32_t>(), -5);
  EXPECT_EQ(r.get<double>(), 3.25);
  EXPECT_EQ(r.get_string(), "hello");
  std::vector<float> back(3);
  r.get_array<float>(back);
  EXPECT_EQ(back, arr);
  EXPECT_TRUE(r.at_end());
  EXPECT_THROW(r.get<std::uint8_t>(), IoError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng rng(3);
  constexpr int kBins = 7, kDraws = 70000;
  std::array<int, kBins> counts{};
  for (int i = 0; i < kDraws; ++i) {
    const auto v = rng.below(kBins);
    ASSERT_LT(v, static_cast<std::uint64_t>(kBins));
    ++counts[v];
  }
  // Chi-square with 6 dof; 22.46 is the 0.999 quantile.
  double chi2 = 0.0;
  const double expect = static_cast<double>(kDraws) / kBins;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi2, 22.46);
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  double s = 0.0, s2 = 0.0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(sorted, expect);
  EXPECT_NE(v, expect);
}

TEST(Rng, HashValuesSeparatesArguments) {
  EXPECT_NE(hash_values(1, 2), hash_values(2, 1));
  EXPECT_NE(hash_values(1, 2), hash_values(1, 2, 0));
  EXPECT_EQ(hash_values(4, 5, 6), hash_values(4, 5, 6));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = unit_from_bits(mix64(i));
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

std::set<std::pair<std::size_t, std::size_t>> chunks_seen(std::size_t n, std::size_t chunk, int workers) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::mutex m;
  parallel_chunks(n, chunk, workers, [&](std::size_t b, std::size_t e) {
    std::lock_guard lock(m);
    seen.emplace(b, e);
  });
  return seen;
}

TEST(Parallel, ChunkBoundariesDoNotDependOnWorkers) {
  for (std::size_t n : {0u, 1u, 63u, 64u, 65u, 1000u}) {
    const auto ref = chunks_seen(n, 64, 1);
    for (int w : {2, 3, 8}) EXPECT_EQ(chunks_seen(n, 64, w), ref) << "n=" << n << " workers=" << w;
    std::size_t covered = 0;
    for (const auto& [b, e] : ref) covered += e - b;
    EXPECT_EQ(covered, n);
  }
}

TEST(Parallel, IndexWrittenResultsMatchSerial) {
  std::vector<double> serial(777), threaded(777);
  auto fill = [](std::vector<double>& out, int workers) {
    parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = std::sin(static_cast<double>(i)); });
  };
  fill(serial, 1);
  fill(threaded, 8);
  EXPECT_EQ(serial, threaded);
}

TEST(Parallel, ExceptionPropagates) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw IoError("boom");
                            }),
               IoError);
}

TEST(Errors, CheckMacroThrowsRequestedType) {
  EXPECT_THROW(CYTO_CHECK(false, ShapeError, "bad shape"), ShapeError);
  EXPECT_NO_THROW(CYTO_CHECK(true, ShapeError, "fine"));
  try {
    CYTO_CHECK(1 + 1 == 3, ConfigError, "arith");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("arith"), std::string::npos);
  }
}

}  // namespace
}  // namespace cyto
