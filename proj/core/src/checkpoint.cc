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

#include "jsdseg/checkpoint.h"

#include <algorithm>

#include "jsdseg/bytes.h"
#include "jsdseg/errors.h"

namespace jsd {

namespace {
constexpr char kMagic[4] = {'J', 'S', 'D', 'W'};
}  // namespace

const NamedArray* Checkpoint::Find(const std::string& name) const {
  auto it = std::find_if(arrays.begin(), arrays.end(),
                         [&](const NamedArray& a) { return a.name == name; });
  return it == arrays.end() ? nullptr : &*it;
}

const NamedArray& Checkpoint::Get(const std::string& name) const {
  const NamedArray* a = Find(name);
  if (a == nullptr) throw DataError("checkpoint has no array named '" + name + "'");
  return *a;
}

void Checkpoint::Put(std::string name, const Tensor& t) {
  Put(NamedArray{std::move(name), t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
}

void Checkpoint::Put(NamedArray array) {
  if (Find(array.name) != nullptr) throw StateError("duplicate checkpoint array " + array.name);
  arrays.push_back(std::move(array));
}

std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& checkpoint) {
  ByteWriter w(Endian::kLittle);
  w.Raw(std::string_view(kMagic, 4));
  w.U8(kCheckpointVersion);
  w.U8(checkpoint.flags);
  w.U32(static_cast<uint32_t>(checkpoint.metadata.size()));
  w.Raw(checkpoint.metadata);
  w.U32(static_cast<uint32_t>(checkpoint.arrays.size()));
  for (const auto& a : checkpoint.arrays) {
    if (a.name.size() > 0xFFFF) throw DataError("array name too long: " + a.name);
    if (a.shape.size() > 0xFF) throw DataError("array rank too large: " + a.name);
    if (NumElements(a.shape) != static_cast<int64_t>(a.values.size())) {
      throw DimensionError("array " + a.name + " does not match its shape");
    }
    w.U16(static_cast<uint16_t>(a.name.size()));
    w.Raw(a.name);
    w.U8(static_cast<uint8_t>(a.shape.size()));
    for (int64_t e : a.shape) w.U32(static_cast<uint32_t>(e));
    for (float v : a.values) w.F32(v);
  }
  const uint32_t crc = Crc32(w.bytes());
  w.U32(crc);
  return w.Take();
}

Checkpoint ParseCheckpoint(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 4 + 4 + 4) throw DataError("checkpoint too short");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader trailer(bytes.last(4), Endian::kLittle, ErrorKind::kData);
  if (Crc32(body) != trailer.U32()) throw DataError("checkpoint CRC mismatch");

  ByteReader r(body, Endian::kLittle, ErrorKind::kData);
  if (r.String(4) != std::string(kMagic, 4)) throw DataError("not a checkpoint (bad magic)");
  const uint8_t version = r.U8();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.flags = r.U8();
  ckpt.metadata = r.String(r.U32());
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.String(r.U16());
    const uint8_t rank = r.U8();
    for (uint8_t d = 0; d < rank; ++d) a.shape.push_back(r.U32());
    const int64_t n = NumElements(a.shape);
    if (static_cast<uint64_t>(n) * 4 > r.remaining()) {
      throw DataError("checkpoint array " + a.name + " truncated");
    }
    a.values.resize(static_cast<size_t>(n));
    for (auto& v : a.values) v = r.F32();
    ckpt.Put(std::move(a));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
  return ckpt;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  WriteFileBytes(path, SerializeCheckpoint(checkpoint));
}

Checkpoint LoadCheckpoint(const std::string& path) { return ParseCheckpoint(ReadFileBytes(path)); }

}  // namespace jsd
