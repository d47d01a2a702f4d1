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

// Weight checkpoint file.
//
// Little-endian layout:
//   "JSDW"                 magic
//   u8  version            currently 1
//   u8  flags              bit 0: fused (inference-only) model
//   u32 metadata length, then that many bytes of UTF-8 metadata (the
//       canonical model configuration dump)
//   u32 array count, then per array:
//       u16 name length, UTF-8 name
//       u8  rank, rank x u32 extents
//       float32 values, row-major
//   u32 CRC-32 (IEEE) of every preceding byte

#ifndef JSDSEG_CHECKPOINT_H_
#define JSDSEG_CHECKPOINT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jsdseg/tensor.h"

namespace jsd {

inline constexpr uint8_t kCheckpointVersion = 1;
inline constexpr uint8_t kCheckpointFusedFlag = 0x01;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  uint8_t flags = 0;
  std::string metadata;
  std::vector<NamedArray> arrays;

  bool fused() const { return (flags & kCheckpointFusedFlag) != 0; }
  const NamedArray* Find(const std::string& name) const;
  const NamedArray& Get(const std::string& name) const;  // throws DataError
  void Put(std::string name, const Tensor& t);
  void Put(NamedArray array);
};

std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& checkpoint);
Checkpoint ParseCheckpoint(std::span<const uint8_t> bytes);

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace jsd

#endif  // JSDSEG_CHECKPOINT_H_
