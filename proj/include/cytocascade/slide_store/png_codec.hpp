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

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "cytocascade/common/error.hpp"
#include "cytocascade/slide_store/image.hpp"

namespace cyto {

// Writes an 8-bit gray or RGB image losslessly.
inline void write_png(const std::filesystem::path& path, const Image& img, bool fast = true) {
  if (img.channels != 1 && img.channels != 3) throw IoError("png: unsupported channel count");
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (fast) desc.flags |= PNG_IMAGE_FLAG_FAST;
  if (!png_image_write_to_file(&desc, path.string().c_str(), 0, img.pixels.data(),
                               static_cast<png_int_32>(img.row_bytes()), nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("png write failed for " + path.string() + ": " + msg);
  }
}

// Reads any PNG and converts it to `channels` (1 or 3) 8-bit channels.
inline Image read_png(const std::filesystem::path& path, int channels = 3) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.string().c_str())) {
    throw IoError("png read failed for " + path.string() + ": " + desc.message);
  }
  desc.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(static_cast<int>(desc.width), static_cast<int>(desc.height), channels);
  if (!png_image_finish_read(&desc, nullptr, img.pixels.data(),
                             static_cast<png_int_32>(img.row_bytes()), nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("png decode failed for " + path.string() + ": " + msg);
  }
  return img;
}

// Row-at-a-time PNG decoder producing RGB8, for sources too large to hold.
class PngRowReader {
 public:
  explicit PngRowReader(const std::filesystem::path& path) {
    file_ = std::fopen(path.string().c_str(), "rb");
    if (!file_) throw IoError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file_) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
      std::fclose(file_);
      throw IoError("not a PNG file: " + path.string());
    }
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!info_) {
      cleanup();
      throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png_))) {
      cleanup();
      throw IoError("corrupt PNG header: " + path.string());
    }
    png_init_io(png_, file_);
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
    const auto color = png_get_color_type(png_, info_);
    const auto depth = png_get_bit_depth(png_, info_);
    if (png_get_interlace_type(png_, info_) != PNG_INTERLACE_NONE) {
      cleanup();
      throw IoError("interlaced PNG sources are not supported: " + path.string());
    }
    if (depth == 16) png_set_strip_16(png_);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png_);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png_);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png_);
    if (png_get_valid(png_, info_, PNG_INFO_tRNS)) png_set_strip_alpha(png_);
    png_read_update_info(png_, info_);
    width_ = static_cast<int>(png_get_image_width(png_, info_));
    height_ = static_cast<int>(png_get_image_height(png_, info_));
    if (png_get_rowbytes(png_, info_) != static_cast<std::size_t>(width_) * 3) {
      cleanup();
      throw IoError("PNG did not convert to RGB8: " + path.string());
    }
  }

  PngRowReader(const PngRowReader&) = delete;
  PngRowReader& operator=(const PngRowReader&) = delete;
  ~PngRowReader() { cleanup(); }

  int width() const { return width_; }
  int height() const { return height_; }

  // Decodes the next row into `row` (width*3 bytes).
  void next_row(std::uint8_t* row) {
    if (next_ >= height_) throw IoError("PNG read past last row");
    if (setjmp(png_jmpbuf(png_))) throw IoError("corrupt PNG data");
    png_read_row(png_, row, nullptr);
    ++next_;
  }

 private:
  void cleanup() {
    if (png_) png_destroy_read_struct(&png_, info_ ? &info_ : nullptr, nullptr);
    png_ = nullptr;
    info_ = nullptr;
    if (file_) std::fclose(file_);
    file_ = nullptr;
  }

  std::FILE* file_ = nullptr;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
  int width_ = 0;
  int height_ = 0;
  int next_ = 0;
};

}  // namespace cyto
