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
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cytocascade/eval/metrics.hpp"
#include "cytocascade/roi/heatmap.hpp"
#include "cytocascade/slide_store/container.hpp"
#include "cytocascade/slide_store/image.hpp"

namespace cyto::eval {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGrey{170, 170, 170};
inline constexpr Rgb kBlue{31, 90, 180};
inline constexpr Rgb kRed{214, 39, 40};
inline constexpr Rgb kGreen{20, 200, 60};

namespace detail {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

inline constexpr Glyph kGlyphs[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {' ', {0, 0, 0, 0, 0, 0, 0}},                        {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
    {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},               {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
    {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},         {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
    {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},                  {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},   {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},
    {'_', {0, 0, 0, 0, 0, 0, 0x1F}},                     {'|', {0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},   {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
    {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},   {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
};

inline const Glyph& glyph_for(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kGlyphs) {
    if (g.c == c) return g;
  }
  return kGlyphs[std::size(kGlyphs) - 1];
}

}  // namespace detail

// RGB raster with clipped drawing primitives.
class Canvas {
 public:
  Canvas(int w, int h, Rgb bg = kWhite) : img_(w, h, 3) { fill_rect(0, 0, w, h, bg); }

  int width() const { return img_.width; }
  int height() const { return img_.height; }
  const Image& image() const { return img_; }
  Image& image() { return img_; }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    auto* p = img_.px(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  void fill_rect(int x, int y, int w, int h, Rgb c) {
    const int x0 = std::max(0, x), y0 = std::max(0, y);
    const int x1 = std::min(img_.width, x + w), y1 = std::min(img_.height, y + h);
    for (int yy = y0; yy < y1; ++yy) {
      for (int xx = x0; xx < x1; ++xx) set(xx, yy, c);
    }
  }

  void rect(int x, int y, int w, int h, Rgb c, int thickness = 1) {
    fill_rect(x, y, w, thickness, c);
    fill_rect(x, y + h - thickness, w, thickness, c);
    fill_rect(x, y, thickness, h, c);
    fill_rect(x + w - thickness, y, thickness, h, c);
  }

  // Bresenham with a square pen.
  void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    const int lo = -(thickness - 1) / 2;
    int err = dx + dy;
    while (true) {
      fill_rect(x0 + lo, y0 + lo, thickness, thickness, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  static int text_width(std::string_view s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }
  static int text_height(int scale = 1) { return 7 * scale; }

  void text(int x, int y, std::string_view s, Rgb c, int scale = 1) {
    for (char ch : s) {
      const auto& g = detail::glyph_for(ch);
      for (int r = 0; r < 7; ++r) {
        for (int col = 0; col < 5; ++col) {
          if (g.rows[r] & (0x10 >> col)) fill_rect(x + col * scale, y + r * scale, scale, scale, c);
        }
      }
      x += 6 * scale;
    }
  }

  // One character per line, top to bottom.
  void text_vertical(int x, int y, std::string_view s, Rgb c, int scale = 1) {
    for (char ch : s) {
      text(x, y, std::string_view(&ch, 1), c, scale);
      y += 9 * scale;
    }
  }

  void blit(const Image& src, int x, int y) {
    CYTO_CHECK(src.channels == 3 || src.channels == 1, ShapeError, "blit needs gray or RGB");
    for (int yy = 0; yy < src.height; ++yy) {
      for (int xx = 0; xx < src.width; ++xx) {
        const auto* p = src.px(xx, yy);
        set(x + xx, y + yy, src.channels == 3 ? Rgb{p[0], p[1], p[2]} : Rgb{p[0], p[0], p[0]});
      }
    }
  }

 private:
  Image img_;
};

inline std::string tick_label(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct CurvePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;  // in [0,1]^2
  bool chance_diagonal = false;
};

inline Image render_curve(const CurvePlot& plot, int size = 440) {
  constexpr int left = 64, right = 20, top = 40, bottom = 56;
  Canvas cv(size, size);
  const int pw = size - left - right, ph = size - top - bottom;
  auto px = [&](double x) { return left + static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * pw)); };
  auto py = [&](double y) { return top + ph - static_cast<int>(std::lround(std::clamp(y, 0.0, 1.0) * ph)); };

  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    cv.line(px(v), top, px(v), top + ph, Rgb{232, 232, 232});
    cv.line(left, py(v), left + pw, py(v), Rgb{232, 232, 232});
    const auto lab = tick_label(v);
    cv.text(px(v) - Canvas::text_width(lab) / 2, top + ph + 8, lab, kBlack);
    cv.text(left - Canvas::text_width(lab) - 6, py(v) - 3, lab, kBlack);
  }
  if (plot.chance_diagonal) cv.line(px(0), py(0), px(1), py(1), kGrey);
  cv.rect(left, top, pw + 1, ph + 1, kBlack);
  for (std::size_t i = 1; i < plot.points.size(); ++i) {
    const auto& a = plot.points[i - 1];
    const auto& b = plot.points[i];
    cv.line(px(a.first), py(a.second), px(b.first), py(b.second), kBlue, 2);
  }
  cv.text((size - Canvas::text_width(plot.title, 2)) / 2, 12, plot.title, kBlack, 2);
  cv.text(left + (pw - Canvas::text_width(plot.x_label)) / 2, size - 22, plot.x_label, kBlack);
  cv.text_vertical(8, top + (ph - 9 * static_cast<int>(plot.y_label.size())) / 2, plot.y_label, kBlack);
  return cv.image();
}

inline Image render_roc(const RocCurve& roc) {
  CurvePlot p{"ROC  AUC " + tick_label(roc.auc), "FALSE POSITIVE RATE", "TPR", {}, true};
  for (std::size_t i = 0; i < roc.fpr.size(); ++i) p.points.emplace_back(roc.fpr[i], roc.tpr[i]);
  return render_curve(p);
}

// Precision drawn as a step function of recall, starting from precision 1.
inline Image render_pr(const PrCurve& pr) {
  CurvePlot p{"PR  AP " + tick_label(pr.ap), "RECALL", "PRECISION", {}, false};
  double r = 0.0, prec = pr.precision.empty() ? 1.0 : pr.precision.front();
  p.points.emplace_back(0.0, prec);
  for (std::size_t i = 0; i < pr.recall.size(); ++i) {
    p.points.emplace_back(r, pr.precision[i]);
    p.points.emplace_back(pr.recall[i], pr.precision[i]);
    r = pr.recall[i];
  }
  return render_curve(p);
}

// Cells shaded by the column-normalized value, annotated with raw counts.
inline Image render_confusion(const ConfusionMatrix& m) {
  constexpr int cell = 64, left = 70, top = 60;
  const int size = left + cell * kTbsCount + 24;
  Canvas cv(size, top + cell * kTbsCount + 48);
  const auto norm = m.column_normalized();
  for (int a = 0; a < kTbsCount; ++a) {
    for (int p = 0; p < kTbsCount; ++p) {
      const double v = norm[a][p];
      const Rgb shade{static_cast<std::uint8_t>(255 - std::lround(v * (255 - kBlue.r))),
                      static_cast<std::uint8_t>(255 - std::lround(v * (255 - kBlue.g))),
                      static_cast<std::uint8_t>(255 - std::lround(v * (255 - kBlue.b)))};
      const int x = left + p * cell, y = top + a * cell;
      cv.fill_rect(x, y, cell, cell, shade);
      cv.rect(x, y, cell + 1, cell + 1, kGrey);
      const auto txt = std::to_string(m.counts[a][p]);
      cv.text(x + (cell - Canvas::text_width(txt, 2)) / 2, y + (cell - 14) / 2, txt, v > 0.5 ? kWhite : kBlack, 2);
    }
    const auto lab = std::to_string(a + kTbsLow);
    cv.text(left - 18, top + a * cell + cell / 2 - 3, lab, kBlack);
    cv.text(left + a * cell + cell / 2 - 3, top - 14, lab, kBlack);
  }
  cv.text(left, 14, "PREDICTED TBS (COLUMNS)", kBlack);
  cv.text(left, 28, "COLUMN NORMALIZED", kGrey);
  cv.text_vertical(10, top + 40, "ASSIGNED", kBlack);
  cv.text(left, top + cell * kTbsCount + 14, "BLOCK MASS " + tick_label(m.block_diagonal_mass()), kBlack);
  return cv.image();
}

// Downsampled slide with detector scores blended in red and selected regions
// outlined in green. Reads one source row per thumbnail row.
inline Image render_heatmap_overlay(const SlideContainer& slide, const roi::HeatMap& hm,
                                    std::span<const roi::SelectedRegion> selected, int max_side = 512) {
  const int step = std::max(1, (std::max(slide.width(), slide.height()) + max_side - 1) / max_side);
  const int tw = std::max(1, slide.width() / step), th = std::max(1, slide.height() / step);
  Canvas cv(tw, th);
  const auto& g = hm.grid;
  for (int ty = 0; ty < th; ++ty) {
    const int sy = ty * step;
    const Image row = slide.read_region({0, sy}, slide.width(), 1);
    for (int tx = 0; tx < tw; ++tx) {
      const int sx = tx * step;
      const auto* p = row.px(sx, 0);
      double a = 0.0;
      if (g.count() > 0 && g.stride() > 0) {
        const int c = sx / g.stride(), r = sy / g.stride();
        if (c < g.cols() && r < g.rows() && sx < c * g.stride() + g.patch_w() && sy < r * g.stride() + g.patch_h()) {
          a = 0.65 * std::clamp(static_cast<double>(hm.scores[static_cast<std::size_t>(r) * g.cols() + c]), 0.0, 1.0);
        }
      }
      auto mix = [&](std::uint8_t v, std::uint8_t t) {
        return static_cast<std::uint8_t>(std::lround((1.0 - a) * v + a * t));
      };
      cv.set(tx, ty, {mix(p[0], kRed.r), mix(p[1], kRed.g), mix(p[2], kRed.b)});
    }
  }
  for (const auto& s : selected) {
    cv.rect(s.origin.x / step, s.origin.y / step, std::max(2, g.patch_w() / step), std::max(2, g.patch_h() / step),
            kGreen);
  }
  return cv.image();
}

// Detected-region crops tiled left to right with their detector scores.
inline Image render_gallery(std::span<const Image> crops, std::span<const float> scores, int columns = 8,
                            int scale = 2) {
  CYTO_CHECK(crops.size() == scores.size(), ShapeError, "gallery crops and scores differ in length");
  if (crops.empty()) {
    Canvas cv(200, 30);
    cv.text(8, 10, "NO REGIONS", kBlack);
    return cv.image();
  }
  const int cw = crops.front().width * scale, ch = crops.front().height * scale;
  const int cell_w = std::max(cw, Canvas::text_width("0.000")) + 8, cell_h = ch + 20;
  const int n = static_cast<int>(crops.size());
  const int cols = std::min(columns, n), rows = (n + cols - 1) / cols;
  Canvas cv(cols * cell_w + 8, rows * cell_h + 8);
  for (int i = 0; i < n; ++i) {
    const int x = 8 + (i % cols) * cell_w, y = 8 + (i / cols) * cell_h;
    const auto& img = crops[static_cast<std::size_t>(i)];
    for (int yy = 0; yy < img.height * scale; ++yy) {
      for (int xx = 0; xx < img.width * scale; ++xx) {
        const auto* p = img.px(xx / scale, yy / scale);
        cv.set(x + xx, y + yy, img.channels == 3 ? Rgb{p[0], p[1], p[2]} : Rgb{p[0], p[0], p[0]});
      }
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(scores[static_cast<std::size_t>(i)]));
    cv.text(x, y + ch + 5, buf, kBlack);
  }
  return cv.image();
}

}  // namespace cyto::eval
