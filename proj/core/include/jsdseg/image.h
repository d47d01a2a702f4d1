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

// Images and label masks, planar and row-major.

#ifndef JSDSEG_IMAGE_H_
#define JSDSEG_IMAGE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jsdseg/tensor.h"

namespace jsd {

// RGB in [0, 1], channel planes (3, H, W).
struct Image {
  int64_t height = 0, width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int64_t h, int64_t w) : height(h), width(w), data(static_cast<size_t>(3 * h * w), 0.0f) {}
  float& at(int c, int64_t y, int64_t x) { return data[static_cast<size_t>((c * height + y) * width + x)]; }
  float at(int c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((c * height + y) * width + x)];
  }
  Tensor ToTensor() const;  // (1, 3, H, W)
};

// Labels 1..S, 0 = unlabelled.
struct Mask {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> labels;

  Mask() = default;
  Mask(int64_t h, int64_t w) : height(h), width(w), labels(static_cast<size_t>(h * w), 0) {}
  uint8_t& at(int64_t y, int64_t x) { return labels[static_cast<size_t>(y * width + x)]; }
  friend bool operator==(const Mask&, const Mask&) = default;
};

// Replicates the last row/column until both sides are multiples of `m`.
Image PadToMultiple(const Image& image, int64_t m);

// argmax + 1 over the channels of logits (1, S, H', W'), cropped to h x w.
Mask MaskFromLogits(const Tensor& logits, int64_t height, int64_t width);

// Binary PPM (P6) and 8-bit RGB/gray PNG.
Image ReadImage(const std::string& path);
void WritePpm(const std::string& path, const Image& image);
void WritePng(const std::string& path, const Image& image);
// Indexed-palette PNG with one colour per label.
void WriteMaskPng(const std::string& path, const Mask& mask);
// Reads back a mask written by WriteMaskPng (palette indices).
Mask ReadMaskPng(const std::string& path);

}  // namespace jsd

#endif  // JSDSEG_IMAGE_H_
