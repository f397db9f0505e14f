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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/common/parallel.hpp"
#include "cytocascade/common/rng.hpp"
#include "cytocascade/slide_store/container.hpp"
#include "cytocascade/slide_store/dataset.hpp"
#include "cytocascade/slide_store/ingest.hpp"

namespace cyto::synth {

// Minimum blob-mask occupancy of an annotated region. Ellipse-in-bounding-box
// occupancy is at least ~0.7 for the aspect ratios generated; anything not
// touching a blob has occupancy 0.
inline constexpr double kAnnotationOccupancy = 0.5;

struct SynthSpec {
  std::uint64_t rng_seed = 1;
  std::string slide_id = "slide";
  int slide_w = 1024;
  int slide_h = 1024;
  int n_groups = 20;
  double class_signal = 0.9;
  double tbs_noise = 0.1;
  int malignant = -1;  // -1 draws the class from the seed
  int tile_size = 256;

  void validate() const {
    CYTO_CHECK(n_groups >= 0, ConfigError, "n_groups must be >= 0");
    CYTO_CHECK(class_signal >= 0.0 && class_signal <= 1.0, ConfigError, "class_signal must be in [0,1]");
    CYTO_CHECK(tbs_noise >= 0.0 && tbs_noise < 0.5, ConfigError, "tbs_noise must be in [0,0.5)");
    CYTO_CHECK(slide_w > 0 && slide_h > 0, ConfigError, "slide size must be positive");
    CYTO_CHECK(malignant >= -1 && malignant <= 1, ConfigError, "malignant must be -1, 0 or 1");
  }
};

struct SlideLabels {
  int malignant = 0;
  int tbs = 2;
  double severity = 0.0;  // latent score in [0,1]; benign < 0.4 <= gap < 0.6 <= malignant
};

// Latent severity is drawn inside the class band and cut into TBS bands
// (benign: 2,3,4; malignant: 4,5,6); with probability tbs_noise the category
// moves one step up or down, clipped to [2,6].
inline SlideLabels draw_labels(std::uint64_t seed, int malignant, double tbs_noise) {
  Rng rng(hash_values(seed, 0x1abe15ULL));
  SlideLabels out;
  out.malignant = malignant >= 0 ? malignant : static_cast<int>(rng.below(2));
  const double t = rng.uniform();  // position inside the class band
  out.severity = out.malignant ? 0.6 + 0.4 * t : 0.4 * t;
  const int band = std::min(2, static_cast<int>(t * 3.0));
  out.tbs = (out.malignant ? 4 : 2) + band;
  if (rng.bernoulli(tbs_noise)) {
    out.tbs += rng.bernoulli(0.5) ? 1 : -1;
    out.tbs = std::clamp(out.tbs, 2, 6);
  }
  return out;
}

struct Blob {
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;  // semi-axes
  double angle = 0;
  double look = 0;  // appearance parameter in [0,1]; higher is more atypical
  Region box;

  bool contains(double px, double py) const {
    const double dx = px - cx, dy = py - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (dx * c + dy * s) / rx;
    const double v = (-dx * s + dy * c) / ry;
    return u * u + v * v <= 1.0;
  }
  double radial(double px, double py) const {
    const double dx = px - cx, dy = py - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (dx * c + dy * s) / rx;
    const double v = (-dx * s + dy * c) / ry;
    return u * u + v * v;
  }
};

struct Dot {
  double cx = 0, cy = 0, r = 0;
  std::array<std::uint8_t, 3> color{};
  bool pale_center = false;
};

using Rgb = std::array<double, 3>;

inline Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Procedural slide: pale textured background with red-cell and lymphocyte
// clutter, plus planted "follicular group" ellipses with nuclei. Every pixel
// is a pure function of (seed, x, y), so any region can be rendered
// independently and rows stream without holding the image.
class SynthSlide final : public ImageSource {
 public:
  static constexpr int kNucleusCell = 6;
  static constexpr int kBucket = 64;

  explicit SynthSlide(const SynthSpec& spec) : spec_(spec) {
    spec.validate();
    labels_ = draw_labels(spec.rng_seed, spec.malignant, spec.tbs_noise);
    look_ = spec.class_signal * labels_.severity + (1.0 - spec.class_signal) * 0.5;
    place_blobs();
    place_clutter();
  }

  int width() const override { return spec_.slide_w; }
  int height() const override { return spec_.slide_h; }
  void read_row(int y, std::uint8_t* out) override { render_row(y, 0, spec_.slide_w, out); }

  const SynthSpec& spec() const { return spec_; }
  const SlideLabels& labels() const { return labels_; }
  double look() const { return look_; }
  const std::vector<Blob>& blobs() const { return blobs_; }

  std::vector<Region> annotations() const {
    std::vector<Region> out;
    for (const auto& b : blobs_) out.push_back(b.box);
    return out;
  }

  SlideRecord record() const {
    return SlideRecord{spec_.slide_id, labels_.malignant, labels_.tbs, annotations()};
  }

  bool in_blob(int x, int y) const {
    for (const auto& b : blobs_) {
      if (b.contains(x + 0.5, y + 0.5)) return true;
    }
    return false;
  }

  // Fraction of pixels of `r` covered by any blob.
  double occupancy(const Region& r) const {
    if (r.area() <= 0) return 0.0;
    long long hit = 0;
    for (const auto& b : blobs_) {
      if (intersection_area(b.box, r) == 0) continue;
      for (int y = std::max(r.y, b.box.y); y < std::min(r.y + r.h, b.box.y + b.box.h); ++y) {
        for (int x = std::max(r.x, b.box.x); x < std::min(r.x + r.w, b.box.x + b.box.w); ++x) {
          if (b.contains(x + 0.5, y + 0.5)) ++hit;
        }
      }
    }
    return static_cast<double>(hit) / static_cast<double>(r.area());
  }

  Image render(const Region& r) const {
    Image img(r.w, r.h, 3);
    for (int y = 0; y < r.h; ++y) render_row(r.y + y, r.x, r.x + r.w, img.px(0, y));
    return img;
  }

  // Renders pixels [x0, x1) of row y into out (3 bytes per pixel).
  void render_row(int y, int x0, int x1, std::uint8_t* out) const {
    const int n = x1 - x0;
    std::vector<Rgb> row(static_cast<std::size_t>(n));
    const double py = y + 0.5;
    for (int i = 0; i < n; ++i) {
      const int x = x0 + i;
      const auto h = hash_values(spec_.rng_seed, 0xb4c6ULL, static_cast<std::uint64_t>(x),
                                 static_cast<std::uint64_t>(y));
      const double n0 = unit_from_bits(h) - 0.5;
      const double n1 = unit_from_bits(mix64(h)) - 0.5;
      row[i] = {236.0 + 12.0 * n0, 218.0 + 12.0 * n0 + 4.0 * n1, 222.0 + 12.0 * n0 - 4.0 * n1};
    }
    const int b_lo = std::max(0, static_cast<int>((py - kMaxDotRadius) / kBucket));
    const int b_hi = std::min(static_cast<int>(buckets_.size()) - 1, static_cast<int>((py + kMaxDotRadius) / kBucket));
    for (int b = b_lo; b <= b_hi; ++b) {
      for (const auto di : buckets_[b]) {
        const Dot& d = dots_[di];
        const double dy = py - d.cy;
        if (std::abs(dy) > d.r) continue;
        const double half = std::sqrt(d.r * d.r - dy * dy);
        const int lo = std::max(x0, static_cast<int>(std::ceil(d.cx - half - 0.5)));
        const int hi = std::min(x1 - 1, static_cast<int>(std::floor(d.cx + half - 0.5)));
        for (int x = lo; x <= hi; ++x) {
          const double dx = x + 0.5 - d.cx;
          const double rr = (dx * dx + dy * dy) / (d.r * d.r);
          if (rr > 1.0) continue;
          Rgb c{static_cast<double>(d.color[0]), static_cast<double>(d.color[1]), static_cast<double>(d.color[2])};
          if (d.pale_center && rr < 0.3) c = lerp(c, Rgb{240, 200, 205}, 0.45);
          row[x - x0] = lerp(row[x - x0], c, 0.9);
        }
      }
    }
    for (std::size_t bi = 0; bi < blobs_.size(); ++bi) {
      const Blob& b = blobs_[bi];
      if (y < b.box.y || y >= b.box.y + b.box.h) continue;
      const int lo = std::max(x0, b.box.x);
      const int hi = std::min(x1, b.box.x + b.box.w);
      const Rgb cyto = lerp(Rgb{214, 184, 222}, Rgb{150, 100, 178}, b.look);
      const Rgb nucleus = lerp(Rgb{110, 72, 150}, Rgb{48, 20, 96}, b.look);
      const double p_nucleus = 0.4 + 0.45 * b.look;
      const double r_nucleus = 1.8 + 1.0 * b.look;
      for (int x = lo; x < hi; ++x) {
        const double px = x + 0.5;
        const double q = b.radial(px, py);
        if (q > 1.0) continue;
        const auto h = hash_values(spec_.rng_seed, 0xc0bbULL, bi, static_cast<std::uint64_t>(x),
                                   static_cast<std::uint64_t>(y));
        const double tex = 14.0 * (unit_from_bits(h) - 0.5);
        Rgb c{cyto[0] + tex, cyto[1] + tex, cyto[2] + tex};
        if (q > 0.75) c = lerp(c, nucleus, 0.25);
        if (near_nucleus(bi, px, py, p_nucleus, r_nucleus)) c = lerp(c, nucleus, 0.85);
        row[x - x0] = c;
      }
    }
    for (int i = 0; i < n; ++i) {
      out[3 * i + 0] = to_byte(row[i][0]);
      out[3 * i + 1] = to_byte(row[i][1]);
      out[3 * i + 2] = to_byte(row[i][2]);
    }
  }

 private:
  static constexpr double kMaxDotRadius = 4.5;

  bool near_nucleus(std::size_t bi, double px, double py, double p_nucleus, double r_nucleus) const {
    const int cx = static_cast<int>(std::floor(px / kNucleusCell));
    const int cy = static_cast<int>(std::floor(py / kNucleusCell));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const auto h = hash_values(spec_.rng_seed, 0x9c1eULL, bi, static_cast<std::uint64_t>(cx + dx + (1 << 30)),
                                   static_cast<std::uint64_t>(cy + dy + (1 << 30)));
        if (unit_from_bits(h) >= p_nucleus) continue;
        const double nx = (cx + dx + 0.2 + 0.6 * unit_from_bits(mix64(h))) * kNucleusCell;
        const double ny = (cy + dy + 0.2 + 0.6 * unit_from_bits(mix64(h + 1))) * kNucleusCell;
        if ((px - nx) * (px - nx) + (py - ny) * (py - ny) <= r_nucleus * r_nucleus) return true;
      }
    }
    return false;
  }

  void place_blobs() {
    Rng rng(hash_values(spec_.rng_seed, 0xb10bULL));
    constexpr int kRetries = 200;
    for (int i = 0; i < spec_.n_groups; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
        Blob b;
        b.look = std::clamp(look_ + 0.03 * rng.normal(), 0.0, 1.0);
        b.rx = (9.0 + 7.0 * b.look) * rng.uniform(0.9, 1.1);
        b.ry = b.rx * rng.uniform(0.65, 0.95);
        b.angle = rng.uniform(0.0, std::numbers::pi);
        const double c = std::cos(b.angle), s = std::sin(b.angle);
        const double ex = std::sqrt(b.rx * b.rx * c * c + b.ry * b.ry * s * s);
        const double ey = std::sqrt(b.rx * b.rx * s * s + b.ry * b.ry * c * c);
        const double margin_x = ex + 2.0, margin_y = ey + 2.0;
        if (spec_.slide_w <= 2 * margin_x || spec_.slide_h <= 2 * margin_y) break;
        b.cx = rng.uniform(margin_x, spec_.slide_w - margin_x);
        b.cy = rng.uniform(margin_y, spec_.slide_h - margin_y);
        bool clash = false;
        for (const auto& o : blobs_) {
          const double dist = std::hypot(b.cx - o.cx, b.cy - o.cy);
          if (dist < b.rx + o.rx + 4.0) {
            clash = true;
            break;
          }
        }
        if (clash) continue;
        const int bx0 = static_cast<int>(std::floor(b.cx - ex));
        const int by0 = static_cast<int>(std::floor(b.cy - ey));
        const int bx1 = static_cast<int>(std::ceil(b.cx + ex));
        const int by1 = static_cast<int>(std::ceil(b.cy + ey));
        b.box = Region{bx0, by0, bx1 - bx0, by1 - by0};
        blobs_.push_back(b);
        placed = true;
      }
      if (!placed) {
        throw ConfigError("cannot place " + std::to_string(spec_.n_groups) + " groups on a " +
                          std::to_string(spec_.slide_w) + "x" + std::to_string(spec_.slide_h) + " slide");
      }
    }
  }

  void place_clutter() {
    Rng rng(hash_values(spec_.rng_seed, 0xc1a77ULL));
    const double area = static_cast<double>(spec_.slide_w) * spec_.slide_h;
    const auto n_red = static_cast<std::size_t>(area / 1800.0);
    const auto n_lymph = static_cast<std::size_t>(area / 12000.0);
    for (std::size_t i = 0; i < n_red + n_lymph; ++i) {
      Dot d;
      d.cx = rng.uniform(0.0, spec_.slide_w);
      d.cy = rng.uniform(0.0, spec_.slide_h);
      if (i < n_red) {
        d.r = rng.uniform(2.5, kMaxDotRadius);
        d.color = {205, 95, 105};
        d.pale_center = true;
      } else {
        d.r = rng.uniform(2.5, 3.5);
        d.color = {100, 70, 140};
      }
      dots_.push_back(d);
    }
    buckets_.assign(static_cast<std::size_t>(spec_.slide_h / kBucket + 1), {});
    for (std::size_t i = 0; i < dots_.size(); ++i) {
      buckets_[static_cast<std::size_t>(dots_[i].cy / kBucket)].push_back(static_cast<std::uint32_t>(i));
    }
  }

  SynthSpec spec_;
  SlideLabels labels_;
  double look_ = 0.5;
  std::vector<Blob> blobs_;
  std::vector<Dot> dots_;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

struct GeneratedSlide {
  std::shared_ptr<const SlideContainer> container;
  SlideRecord record;
  fs::path annotation_file;
};

// Renders the slide into a tiled container at out_dir and writes its
// annotation file next to the manifest.
inline GeneratedSlide generate_slide(const SynthSpec& spec, const fs::path& out_dir,
                                     std::size_t cache_budget = cache_budget_from_env()) {
  SynthSlide slide(spec);
  ingest(slide, out_dir, spec.slide_id, spec.tile_size, 1, cache_budget);
  const auto ann = out_dir / "annotations.txt";
  write_text_file(ann, format_annotations(slide.annotations()));
  return {SlideContainer::open_shared(out_dir, cache_budget), slide.record(), ann};
}

inline std::string slide_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slide_%04zu", i);
  return buf;
}

inline std::uint64_t slide_seed(std::uint64_t base, std::size_t i) { return hash_values(base, 0x5eedULL, i); }

// Class assignment for a dataset: round(n * benign_fraction) benign slides,
// in a seeded random order.
inline std::vector<int> dataset_classes(std::uint64_t seed, std::size_t n_slides, double benign_fraction) {
  const auto n_benign = static_cast<std::size_t>(std::llround(static_cast<double>(n_slides) * benign_fraction));
  std::vector<int> classes(n_slides, 1);
  std::fill(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_benign), 0);
  Rng rng(hash_values(seed, 0xc1a55ULL));
  rng.shuffle(std::span<int>(classes));
  return classes;
}

// Writes n_slides containers under out_dir/slides plus out_dir/dataset.tsv.
// Slide i uses a seed derived from (template seed, i), so the result does
// not depend on the worker count.
inline Dataset generate_dataset(const SynthSpec& tmpl, std::size_t n_slides, double benign_fraction,
                                const fs::path& out_dir, int workers = 1) {
  CYTO_CHECK(n_slides >= 1, ConfigError, "n_slides must be >= 1");
  CYTO_CHECK(benign_fraction >= 0.0 && benign_fraction <= 1.0, ConfigError, "benign_fraction must be in [0,1]");
  tmpl.validate();
  const auto classes = dataset_classes(tmpl.rng_seed, n_slides, benign_fraction);
  std::vector<DatasetEntry> entries(n_slides);
  fs::create_directories(out_dir / "slides");
  parallel_for(n_slides, workers, [&](std::size_t i) {
    SynthSpec spec = tmpl;
    spec.slide_id = slide_name(i);
    spec.rng_seed = slide_seed(tmpl.rng_seed, i);
    spec.malignant = classes[i];
    const auto dir = out_dir / "slides" / spec.slide_id;
    SynthSlide slide(spec);
    ingest(slide, dir, spec.slide_id, spec.tile_size, 1, kDefaultCacheBytes);
    write_text_file(dir / "annotations.txt", format_annotations(slide.annotations()));
    entries[i] = DatasetEntry{spec.slide_id, dir, slide.labels().malignant, slide.labels().tbs,
                              dir / "annotations.txt"};
  });
  Dataset ds(std::move(entries));
  ds.save(out_dir / "dataset.tsv");
  return Dataset::load(out_dir / "dataset.tsv");
}

}  // namespace cyto::synth
