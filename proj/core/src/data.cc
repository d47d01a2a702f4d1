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

#include "jsdseg/data.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "jsdseg/errors.h"
#include "jsdseg/random.h"

namespace jsd {

namespace {

enum class ShapeKind { kRectangle, kDisk, kTriangle };

ShapeKind KindOf(int label) { return static_cast<ShapeKind>((label - 2) % 3); }

// Evenly spaced hues at full saturation, lightness alternating per class.
void BaseColour(int label, int classes, float rgb[3]) {
  const double hue = double(label - 2) / std::max(1, classes - 1);
  const double v = (label % 2) ? 0.95 : 0.75;
  for (int c = 0; c < 3; ++c) {
    const double phase = hue + c / 3.0;
    const double t = phase - std::floor(phase);
    // Triangle wave: 1 at t = 0, 0 at t = 1/2.
    const double w = std::abs(2.0 * t - 1.0);
    rgb[c] = static_cast<float>(v * (0.15 + 0.85 * w));
  }
}

double Cross(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

SyntheticDataset::SyntheticDataset(int64_t image_size, int classes, double noise_level, uint64_t seed)
    : size_(image_size), classes_(classes), noise_(noise_level), seed_(seed) {
  if (image_size < 16) throw ConfigError("dataset: image size must be >= 16");
  if (classes < 2 || classes > 255) throw ConfigError("dataset: need 2..255 classes");
  if (noise_level < 0) throw ConfigError("dataset: noise level must be >= 0");
}

Sample SyntheticDataset::Get(int64_t index) const {
  Rng rng(seed_ * 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(index) * 0xD1B54A32D192ED03ull + 1);
  const int64_t n = size_;
  const double scale = n / 64.0;
  Sample s{Image(n, n), Mask(n, n)};

  // Background: tinted low-contrast stripes.
  float tint[3];
  for (auto& t : tint) t = static_cast<float>(rng.Uniform(0.25, 0.55));
  const double freq = rng.Uniform(0.15, 0.45) / scale, angle = rng.Uniform(0, std::numbers::pi);
  const double fx = freq * std::cos(angle), fy = freq * std::sin(angle), phase = rng.Uniform(0, 6.3);
  for (int64_t y = 0; y < n; ++y)
    for (int64_t x = 0; x < n; ++x) {
      const float stripe = static_cast<float>(0.08 * std::sin(fx * x + fy * y + phase));
      for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = tint[c] + stripe;
      s.mask.at(y, x) = 1;
    }

  // Distinct foreground classes; the first cycles so every class appears.
  const int foreground = classes_ - 1;
  std::vector<int> labels{2 + static_cast<int>(index % foreground)};
  const int count = 1 + static_cast<int>(rng.UniformInt(0, std::min(2, foreground - 1)));
  while (static_cast<int>(labels.size()) < count) {
    const int l = 2 + static_cast<int>(rng.UniformInt(0, foreground - 1));
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  }

  for (int label : labels) {
    float colour[3];
    BaseColour(label, classes_, colour);
    for (auto& c : colour) c = std::clamp(c + static_cast<float>(rng.Uniform(-0.06, 0.06)), 0.0f, 1.0f);
    const double cx = rng.Uniform(0.2, 0.8) * n, cy = rng.Uniform(0.2, 0.8) * n;
    std::function<bool(double, double)> inside;
    switch (KindOf(label)) {
      case ShapeKind::kRectangle: {
        const double hw = rng.Uniform(10, 22) * scale, hh = rng.Uniform(10, 22) * scale;
        inside = [=](double x, double y) { return std::abs(x - cx) <= hw && std::abs(y - cy) <= hh; };
        break;
      }
      case ShapeKind::kDisk: {
        const double r = rng.Uniform(11, 22) * scale;
        inside = [=](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; };
        break;
      }
      case ShapeKind::kTriangle: {
        const double r = rng.Uniform(16, 28) * scale, rot = rng.Uniform(0, 2 * std::numbers::pi);
        double vx[3], vy[3];
        for (int k = 0; k < 3; ++k) {
          vx[k] = cx + r * std::cos(rot + k * 2 * std::numbers::pi / 3);
          vy[k] = cy + r * std::sin(rot + k * 2 * std::numbers::pi / 3);
        }
        inside = [=](double x, double y) {
          const double a = Cross(vx[0], vy[0], vx[1], vy[1], x, y);
          const double b = Cross(vx[1], vy[1], vx[2], vy[2], x, y);
          const double c = Cross(vx[2], vy[2], vx[0], vy[0], x, y);
          return (a >= 0 && b >= 0 && c >= 0) || (a <= 0 && b <= 0 && c <= 0);
        };
        break;
      }
    }
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x) {
        if (!inside(x + 0.5, y + 0.5)) continue;
        for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = colour[c];
        s.mask.at(y, x) = static_cast<uint8_t>(label);
      }
  }

  for (auto& v : s.image.data) {
    v = std::clamp(v + static_cast<float>(noise_ * rng.Normal()), 0.0f, 1.0f);
  }
  return s;
}

Batch SyntheticDataset::GetBatch(int64_t first, int64_t count) const {
  std::vector<Sample> samples;
  samples.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) samples.push_back(Get(first + i));
  return Collate(samples);
}

Batch Collate(std::span<const Sample> samples) {
  if (samples.empty()) throw ConfigError("empty batch");
  const int64_t h = samples[0].image.height, w = samples[0].image.width;
  std::vector<float> images;
  Batch b;
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w || s.mask.height != h || s.mask.width != w) {
      throw DimensionError("batch samples differ in size");
    }
    images.insert(images.end(), s.image.data.begin(), s.image.data.end());
    b.labels.insert(b.labels.end(), s.mask.labels.begin(), s.mask.labels.end());
  }
  b.images = Tensor({static_cast<int64_t>(samples.size()), 3, h, w}, std::move(images));
  return b;
}

}  // namespace jsd
