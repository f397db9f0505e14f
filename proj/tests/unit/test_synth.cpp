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

#include <map>

#include "cytocascade/synth/synth.hpp"
#include "test_support.hpp"

namespace cyto::synth {
namespace {

using testing::TempDir;

SynthSpec small_spec(std::uint64_t seed, int malignant = -1) {
  SynthSpec s;
  s.rng_seed = seed;
  s.slide_w = 256;
  s.slide_h = 192;
  s.n_groups = 4;
  s.malignant = malignant;
  s.tile_size = 128;
  return s;
}

TEST(Labels, SeverityBandsAndTbsThirdsWithoutNoise) {
  for (std::uint64_t seed = 0; seed < 3000; ++seed) {
    const auto l = draw_labels(seed, -1, 0.0);
    if (l.malignant) {
      EXPECT_GE(l.severity, 0.6);
      EXPECT_LT(l.severity, 1.0);
      EXPECT_EQ(l.tbs, 4 + std::min(2, static_cast<int>((l.severity - 0.6) / 0.4 * 3.0)));
    } else {
      EXPECT_GE(l.severity, 0.0);
      EXPECT_LT(l.severity, 0.4);
      EXPECT_EQ(l.tbs, 2 + std::min(2, static_cast<int>(l.severity / 0.4 * 3.0)));
    }
  }
}

TEST(Labels, ForcedClassAndNoiseRate) {
  int moved = 0, n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto clean = draw_labels(static_cast<std::uint64_t>(i), 1, 0.0);
    const auto noisy = draw_labels(static_cast<std::uint64_t>(i), 1, 0.3);
    EXPECT_EQ(noisy.malignant, 1);
    EXPECT_LE(std::abs(noisy.tbs - clean.tbs), 1);
    EXPECT_GE(noisy.tbs, 2);
    EXPECT_LE(noisy.tbs, 6);
    moved += noisy.tbs != clean.tbs;
  }
  // Steps up from TBS 6 are clipped away: expected rate 0.3 * (1 - 1/6).
  EXPECT_NEAR(static_cast<double>(moved) / n, 0.3 * (1.0 - 1.0 / 6.0), 0.015);
}

TEST(SynthSlide, RenderingIsDeterministicAndRegionConsistent) {
  const auto spec = small_spec(42);
  const SynthSlide a(spec), b(spec);
  const auto full = a.render({0, 0, spec.slide_w, spec.slide_h});
  EXPECT_EQ(full, b.render({0, 0, spec.slide_w, spec.slide_h}));
  Rng rng(1);
  for (int i = 0; i < 40; ++i) {
    const int w = 1 + static_cast<int>(rng.below(100)), h = 1 + static_cast<int>(rng.below(80));
    const int x = static_cast<int>(rng.below(spec.slide_w - w + 1));
    const int y = static_cast<int>(rng.below(spec.slide_h - h + 1));
    EXPECT_EQ(a.render({x, y, w, h}), full.crop(x, y, w, h));
  }
  auto other = spec;
  other.rng_seed = 43;
  EXPECT_NE(SynthSlide(other).render({0, 0, 64, 64}), full.crop(0, 0, 64, 64));
}

TEST(SynthSlide, AnnotationsAreBlobBoxesInsideTheSlide) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = small_spec(seed);
    const SynthSlide s(spec);
    const auto ann = s.annotations();
    ASSERT_EQ(ann.size(), static_cast<std::size_t>(spec.n_groups));
    for (const auto& r : ann) {
      EXPECT_GE(r.x, 0);
      EXPECT_GE(r.y, 0);
      EXPECT_LE(r.x + r.w, spec.slide_w);
      EXPECT_LE(r.y + r.h, spec.slide_h);
      // An ellipse fills pi/4 of its bounding box, less pixel rounding.
      EXPECT_GT(s.occupancy(r), 0.6);
    }
    EXPECT_EQ(s.record().annotations, ann);
  }
}

TEST(SynthSlide, NoGroupsMeansNoAnnotations) {
  auto spec = small_spec(3);
  spec.n_groups = 0;
  const SynthSlide s(spec);
  EXPECT_TRUE(s.annotations().empty());
  EXPECT_EQ(s.occupancy({0, 0, spec.slide_w, spec.slide_h}), 0.0);
}

TEST(SynthSlide, ClassSignalControlsAppearance) {
  auto benign = small_spec(10, 0), malignant = small_spec(10, 1);
  EXPECT_LT(SynthSlide(benign).look(), SynthSlide(malignant).look());
  benign.class_signal = malignant.class_signal = 0.0;
  EXPECT_EQ(SynthSlide(benign).look(), 0.5);
  EXPECT_EQ(SynthSlide(malignant).look(), 0.5);
}

// Mean blob pixel intensity: atypical groups are rendered darker.
double mean_blob_intensity(const SynthSpec& spec) {
  const SynthSlide s(spec);
  const auto img = s.render({0, 0, spec.slide_w, spec.slide_h});
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < spec.slide_h; ++y) {
    for (int x = 0; x < spec.slide_w; ++x) {
      if (!s.in_blob(x, y)) continue;
      const auto* p = img.px(x, y);
      sum += p[0] + p[1] + p[2];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

TEST(SynthSlide, MalignantGroupsAreDarker) {
  double benign = 0.0, malignant = 0.0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    benign += mean_blob_intensity(small_spec(seed, 0));
    malignant += mean_blob_intensity(small_spec(seed, 1));
  }
  EXPECT_LT(malignant, benign);
}

TEST(SynthSpec, ValidationAndInfeasiblePlacement) {
  auto s = small_spec(1);
  s.tbs_noise = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec(1);
  s.class_signal = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec(1);
  s.slide_w = s.slide_h = 64;
  s.n_groups = 500;
  EXPECT_THROW(SynthSlide{s}, ConfigError);
}

TEST(Dataset, ClassCountsMatchFractionToRounding) {
  for (std::size_t n : {1u, 7u, 20u, 101u}) {
    for (double f : {0.0, 0.3, 0.5, 1.0}) {
      const auto cls = dataset_classes(5, n, f);
      const auto benign = static_cast<std::size_t>(std::count(cls.begin(), cls.end(), 0));
      EXPECT_EQ(benign, static_cast<std::size_t>(std::llround(n * f)));
      EXPECT_EQ(cls, dataset_classes(5, n, f));
    }
  }
}

TEST(Dataset, GenerationIsIndependentOfWorkers) {
  TempDir dir("synthds");
  const auto spec = small_spec(77);
  const auto a = generate_dataset(spec, 6, 0.5, dir / "a", 1);
  const auto b = generate_dataset(spec, 6, 0.5, dir / "b", 3);
  ASSERT_EQ(a.size(), 6u);
  std::size_t benign = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].slide_id, slide_name(i));
    EXPECT_EQ(a[i].malignant, b[i].malignant);
    EXPECT_EQ(a[i].tbs, b[i].tbs);
    EXPECT_EQ(read_text_file(a[i].container / kSlideManifestName),
              read_text_file(b[i].container / kSlideManifestName));
    EXPECT_EQ(read_text_file(a[i].annotations), read_text_file(b[i].annotations));
    benign += a[i].malignant == 0;
    const auto c = SlideContainer::open(a[i].container);
    EXPECT_EQ(c.width(), spec.slide_w);
    EXPECT_NO_THROW(c.verify());
  }
  EXPECT_EQ(benign, 3u);
  EXPECT_EQ(read_text_file(dir / "a" / "dataset.tsv"), read_text_file(dir / "b" / "dataset.tsv"));
  EXPECT_THROW(generate_dataset(spec, 0, 0.5, dir / "c"), ConfigError);
}

TEST(Dataset, GeneratedSlideMatchesRenderer) {
  TempDir dir("synthone");
  auto spec = small_spec(8);
  const auto g = generate_slide(spec, dir / "s");
  const SynthSlide s(spec);
  EXPECT_EQ(g.container->read_region({0, 0}, spec.slide_w, spec.slide_h), s.render({0, 0, spec.slide_w, spec.slide_h}));
  EXPECT_EQ(load_annotations(g.annotation_file), s.annotations());
  EXPECT_EQ(g.record.tbs, s.labels().tbs);
}

}  // namespace
}  // namespace cyto::synth
