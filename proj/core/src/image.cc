// Copyright 2026 The jsdseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jsdseg/image.h"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "jsdseg/errors.h"
#include "jsdseg/ops.h"

namespace jsd {

namespace {

// Pascal-VOC style palette: bit-interleaved, distinct for all 256 labels.
std::array<uint8_t, 3 * 256> Palette() {
  std::array<uint8_t, 3 * 256> p{};
  for (int i = 0; i < 256; ++i) {
    int c = i, r = 0, g = 0, b = 0;
    for (int j = 0; j < 8; ++j) {
      r |= ((c >> 0) & 1) << (7 - j);
      g |= ((c >> 1) & 1) << (7 - j);
      b |= ((c >> 2) & 1) << (7 - j);
      c >>= 3;
    }
    p[3 * i] = uint8_t(r);
    p[3 * i + 1] = uint8_t(g);
    p[3 * i + 2] = uint8_t(b);
  }
  return p;
}

uint8_t ToByte(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

std::vector<uint8_t> Interleave(const Image& image) {
  std::vector<uint8_t> rgb(static_cast<size_t>(3 * image.height * image.width));
  for (int64_t y = 0; y < image.height; ++y)
    for (int64_t x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) rgb[static_cast<size_t>((y * image.width + x) * 3 + c)] = ToByte(image.at(c, y, x));
  return rgb;
}

Image Deinterleave(const uint8_t* rgb, int64_t h, int64_t w) {
  Image out(h, w);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[(y * w + x) * 3 + c] / 255.0f;
  return out;
}

std::vector<uint8_t> ReadPngRgb(const std::string& path, int64_t* h, int64_t* w) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG " + path + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path + ": " + img.message);
  }
  *h = img.height;
  *w = img.width;
  return buf;
}

void WritePngRgb(const std::string& path, const uint8_t* rgb, int64_t h, int64_t w) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb, 0, nullptr)) {
    throw DataError("cannot write PNG " + path + ": " + img.message);
  }
}

// Next whitespace-separated PPM header token, skipping # comments.
std::string PpmToken(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(ch);
    }
  }
  return tok;
}

}  // namespace

Tensor Image::ToTensor() const { return Tensor({1, 3, height, width}, data); }

Image PadToMultiple(const Image& image, int64_t m) {
  const int64_t h = (image.height + m - 1) / m * m, w = (image.width + m - 1) / m * m;
  if (h == image.height && w == image.width) return image;
  Image out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        out.at(c, y, x) = image.at(c, std::min(y, image.height - 1), std::min(x, image.width - 1));
  return out;
}

Mask MaskFromLogits(const Tensor& logits, int64_t height, int64_t width) {
  if (logits.rank() != 4 || logits.dim(0) != 1 || logits.dim(2) < height || logits.dim(3) < width) {
    throw DimensionError("mask: logits " + ShapeString(logits.shape()) + " cannot cover " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  const std::vector<int32_t> arg = ArgmaxChannels(logits);
  const int64_t w_full = logits.dim(3);
  Mask m(height, width);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) m.at(y, x) = static_cast<uint8_t>(arg[static_cast<size_t>(y * w_full + x)] + 1);
  return m;
}

Image ReadImage(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] == 'P' && magic[1] == '6') {
    const std::string ws = PpmToken(in), hs = PpmToken(in), ms = PpmToken(in);
    int64_t w = 0, h = 0, maxval = 0;
    try {
      w = std::stoll(ws);
      h = std::stoll(hs);
      maxval = std::stoll(ms);
    } catch (const std::exception&) {
      throw DataError("malformed PPM header in " + path);
    }
    if (w <= 0 || h <= 0 || maxval != 255 || w * h > (int64_t(1) << 28)) {
      throw DataError("unsupported PPM (need 8-bit, sane size) in " + path);
    }
    std::vector<uint8_t> rgb(static_cast<size_t>(3 * w * h));
    in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(rgb.size())) throw DataError("truncated PPM " + path);
    return Deinterleave(rgb.data(), h, w);
  }
  in.close();
  int64_t h = 0, w = 0;
  const auto rgb = ReadPngRgb(path, &h, &w);
  return Deinterleave(rgb.data(), h, w);
}

void WritePpm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  const auto rgb = Interleave(image);
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw DataError("write failed: " + path);
}

void WritePng(const std::string& path, const Image& image) {
  const auto rgb = Interleave(image);
  WritePngRgb(path, rgb.data(), image.height, image.width);
}

void WriteMaskPng(const std::string& path, const Mask& mask) {
  const auto palette = Palette();
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(mask.width);
  img.height = static_cast<png_uint_32>(mask.height);
  img.format = PNG_FORMAT_RGB_COLORMAP;
  img.colormap_entries = 256;
  if (!png_image_write_to_file(&img, path.c_str(), 0, mask.labels.data(), 0, palette.data())) {
    throw DataError("cannot write PNG " + path + ": " + img.message);
  }
}

Mask ReadMaskPng(const std::string& path) {
  const auto palette = Palette();
  std::map<uint32_t, uint8_t> inverse;
  for (int i = 0; i < 256; ++i) {
    inverse[(uint32_t(palette[3 * i]) << 16) | (uint32_t(palette[3 * i + 1]) << 8) | palette[3 * i + 2]] =
        uint8_t(i);
  }
  int64_t h = 0, w = 0;
  const auto rgb = ReadPngRgb(path, &h, &w);
  Mask m(h, w);
  for (size_t i = 0; i < m.labels.size(); ++i) {
    const uint32_t key = (uint32_t(rgb[3 * i]) << 16) | (uint32_t(rgb[3 * i + 1]) << 8) | rgb[3 * i + 2];
    auto it = inverse.find(key);
    if (it == inverse.end()) throw DataError("mask PNG " + path + " has a colour outside the palette");
    m.labels[i] = it->second;
  }
  return m;
}

}  // namespace jsd
