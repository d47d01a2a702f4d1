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

// Fixed-width integer (de)serialization with explicit byte order.

#ifndef JSDSEG_BYTES_H_
#define JSDSEG_BYTES_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jsdseg/errors.h"

namespace jsd {

enum class Endian { kLittle, kBig };

uint32_t Crc32(std::span<const uint8_t> bytes);

class ByteWriter {
 public:
  explicit ByteWriter(Endian endian) : endian_(endian) {}

  void U8(uint8_t v) { bytes_.push_back(v); }
  void U16(uint16_t v) { Put(v, 2); }
  void U32(uint32_t v) { Put(v, 4); }
  void F32(float v) { U32(std::bit_cast<uint32_t>(v)); }
  void Raw(std::span<const uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void Raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  size_t size() const { return bytes_.size(); }
  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> Take() { return std::move(bytes_); }

 private:
  void Put(uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
      const int shift = endian_ == Endian::kLittle ? 8 * i : 8 * (width - 1 - i);
      bytes_.push_back(static_cast<uint8_t>(v >> shift));
    }
  }

  Endian endian_;
  std::vector<uint8_t> bytes_;
};

// Bounds-checked reader; running past the end throws Error(kind).
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> bytes, Endian endian, ErrorKind kind = ErrorKind::kDecode)
      : bytes_(bytes), endian_(endian), kind_(kind) {}

  uint8_t U8() { return static_cast<uint8_t>(Get(1)); }
  uint16_t U16() { return static_cast<uint16_t>(Get(2)); }
  uint32_t U32() { return static_cast<uint32_t>(Get(4)); }
  float F32() { return std::bit_cast<float>(U32()); }

  std::span<const uint8_t> Raw(size_t n) {
    Need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string String(size_t n) {
    auto raw = Raw(n);
    return std::string(raw.begin(), raw.end());
  }

  size_t position() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw Error(kind_, "truncated input: need " + std::to_string(n) + " bytes at offset " +
                             std::to_string(pos_) + ", have " +
                             std::to_string(bytes_.size() - pos_));
    }
  }
  uint64_t Get(int width) {
    Need(static_cast<size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      const int shift = endian_ == Endian::kLittle ? 8 * i : 8 * (width - 1 - i);
      v |= static_cast<uint64_t>(bytes_[pos_ + i]) << shift;
    }
    pos_ += static_cast<size_t>(width);
    return v;
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  Endian endian_;
  ErrorKind kind_;
};

std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace jsd

#endif  // JSDSEG_BYTES_H_
