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

// Carry-less 32-bit range coder over static integer CDF tables.
//
// The coder keeps a 32-bit (low, range) pair, renormalizes one byte at a
// time and never propagates carries: when the range becomes too small while
// the top bytes of low and low + range still differ, the range is cut down
// to the next 2^16 boundary. Probabilities are 16-bit integer counts.
//
// The encoder flushes only as many bytes as the decoder needs to land inside
// the final interval; the decoder treats bytes past the end of the payload
// as zero. A payload missing more than those flush bytes is reported as
// truncated. Decoding with a different table sequence than the one used for
// encoding cannot be detected and yields garbage symbols.

#ifndef JSDSEG_RANGE_CODER_H_
#define JSDSEG_RANGE_CODER_H_

#include <cstdint>
#include <span>
#include <vector>

namespace jsd {

inline constexpr int kCdfPrecision = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfPrecision;

// Quantized cumulative distribution over the contiguous value range
// [offset, offset + num_symbols()). Every symbol has a count of at least one.
class CdfTable {
 public:
  CdfTable() = default;
  // `cumulative` has num_symbols + 1 entries, starts at 0, ends at 2^16 and
  // is strictly increasing.
  CdfTable(std::vector<uint32_t> cumulative, int32_t offset);

  // Quantizes a probability mass function. Masses are renormalized, rounded
  // to counts out of 2^16, floored at one count, and the rounding surplus
  // or deficit is settled on the largest bins.
  static CdfTable FromPmf(std::span<const double> pmf, int32_t offset);

  int32_t offset() const { return offset_; }
  int32_t min_value() const { return offset_; }
  int32_t max_value() const { return offset_ + static_cast<int32_t>(num_symbols()) - 1; }
  size_t num_symbols() const { return cumulative_.empty() ? 0 : cumulative_.size() - 1; }
  const std::vector<uint32_t>& cumulative() const { return cumulative_; }

  bool Contains(int32_t value) const { return value >= min_value() && value <= max_value(); }
  // Maps a value into the support; out-of-range values land in the edge bins.
  int32_t Clamp(int32_t value) const;

  uint32_t Low(size_t symbol) const { return cumulative_[symbol]; }
  uint32_t Frequency(size_t symbol) const { return cumulative_[symbol + 1] - cumulative_[symbol]; }
  double Probability(int32_t value) const;
  // Symbol whose interval contains `target` in [0, 2^16).
  size_t Find(uint32_t target) const;

  friend bool operator==(const CdfTable&, const CdfTable&) = default;

 private:
  std::vector<uint32_t> cumulative_;
  int32_t offset_ = 0;
};

class RangeEncoder {
 public:
  // Throws CodingError if `value` lies outside the table's support.
  void Encode(int32_t value, const CdfTable& table);
  // Flushes and returns the payload. The encoder is spent afterwards.
  std::vector<uint8_t> Finish();

 private:
  void Normalize();

  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  std::vector<uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> payload);
  // Throws DecodeError on truncated or inconsistent input.
  int32_t Decode(const CdfTable& table);

 private:
  uint8_t NextByte();
  void Normalize();

  std::span<const uint8_t> payload_;
  size_t pos_ = 0;
  size_t overrun_ = 0;
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

struct CodedBuffer {
  std::vector<uint8_t> bytes;
  size_t symbol_count = 0;
};

// values[i] is coded with *tables[i].
CodedBuffer RangeEncode(std::span<const int32_t> values, std::span<const CdfTable* const> tables);
std::vector<int32_t> RangeDecode(std::span<const uint8_t> payload,
                                 std::span<const CdfTable* const> tables, size_t count);

}  // namespace jsd

#endif  // JSDSEG_RANGE_CODER_H_
