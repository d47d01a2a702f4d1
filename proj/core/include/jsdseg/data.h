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

// Seeded synthetic segmentation data.
//
// Label 1 is the textured background. Each foreground class s in 2..S has a
// fixed shape kind (rectangle, disk, triangle, cycling with s) and a fixed
// base colour, jittered per instance. An image holds one to three shapes of
// distinct classes; later shapes occlude earlier ones. Sample i depends only
// on (seed, i).

#ifndef JSDSEG_DATA_H_
#define JSDSEG_DATA_H_

#include <cstdint>
#include <span>
#include <vector>

#include "jsdseg/image.h"

namespace jsd {

struct Sample {
  Image image;
  Mask mask;
};

struct Batch {
  Tensor images;                // (N, 3, H, W)
  std::vector<int32_t> labels;  // N * H * W, 1..S
};

class SyntheticDataset {
 public:
  SyntheticDataset(int64_t image_size, int classes, double noise_level, uint64_t seed);

  Sample Get(int64_t index) const;
  Batch GetBatch(int64_t first, int64_t count) const;

  int64_t image_size() const { return size_; }
  int classes() const { return classes_; }
  uint64_t seed() const { return seed_; }

 private:
  int64_t size_;
  int classes_;
  double noise_;
  uint64_t seed_;
};

Batch Collate(std::span<const Sample> samples);

}  // namespace jsd

#endif  // JSDSEG_DATA_H_
