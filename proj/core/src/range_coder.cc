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

#include "jsdseg/range_coder.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "jsdseg/errors.h"

namespace jsd {

namespace {
constexpr uint64_t kTop = 1u << 24;
constexpr uint32_t kBottom = 1u << 16;
constexpr size_t kMaxFlushBytes = 4;
}  // namespace

CdfTable::CdfTable(std::vector<uint32_t> cumulative, int32_t offset)
    : cumulative_(std::move(cumulative)), offset_(offset) {
  if (cumulative_.size() < 2) throw CodingError("CDF table needs at least one symbol");
  if (cumulative_.front() != 0 || cumulative_.back() != kCdfTotal) {
    throw CodingError("CDF table must span [0, 2^16]");
  }
  for (size_t i = 1; i < cumulative_.size(); ++i) {
    if (cumulative_[i] <= cumulative_[i - 1]) {
      throw CodingError("CDF table is not strictly increasing at symbol " + std::to_string(i - 1));
    }
  }
}

CdfTable CdfTable::FromPmf(std::span<const double> pmf, int32_t offset) {
  const size_t n = pmf.size();
  if (n == 0 || n > kCdfTotal) throw CodingError("pmf size out of range");
  double mass = 0;
  for (double p : pmf) {
    if (!(p >= 0) || !std::isfinite(p)) throw CodingError("pmf has invalid mass");
    mass += p;
  }
  if (!(mass > 0)) throw CodingError("pmf has zero total mass");

  std::vector<int64_t> freq(n);
  int64_t total = 0;
  for (size_t i = 0; i < n; ++i) {
    freq[i] = std::max<int64_t>(1, std::llround(pmf[i] / mass * kCdfTotal));
    total += freq[i];
  }
  int64_t diff = static_cast<int64_t>(kCdfTotal) - total;
  if (diff > 0) {
    freq[std::max_element(freq.begin(), freq.end()) - freq.begin()] += diff;
  } else if (diff < 0) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return freq[a] > freq[b]; });
    while (diff < 0) {
      for (size_t idx : order) {
        if (diff == 0) break;
        const int64_t spare = freq[idx] - 1;
        if (spare <= 0) continue;
        // Take proportionally from large bins, at least one count each.
        const int64_t take = std::min<int64_t>(-diff, std::max<int64_t>(1, spare / 2));
        freq[idx] -= take;
        diff += take;
      }
    }
  }
  std::vector<uint32_t> cumulative(n + 1, 0);
  for (size_t i = 0; i < n; ++i) cumulative[i + 1] = cumulative[i] + static_cast<uint32_t>(freq[i]);
  return CdfTable(std::move(cumulative), offset);
}

int32_t CdfTable::Clamp(int32_t value) const {
  return std::clamp(value, min_value(), max_value());
}

double CdfTable::Probability(int32_t value) const {
  if (!Contains(value)) return 0.0;
  return static_cast<double>(Frequency(static_cast<size_t>(value - offset_))) / kCdfTotal;
}

size_t CdfTable::Find(uint32_t target) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  return static_cast<size_t>(it - cumulative_.begin()) - 1;
}

void RangeEncoder::Encode(int32_t value, const CdfTable& table) {
  if (finished_) throw StateError("range encoder already finished");
  if (!table.Contains(value)) {
    throw CodingError("value " + std::to_string(value) + " outside table support [" +
                      std::to_string(table.min_value()) + ", " +
                      std::to_string(table.max_value()) + "]");
  }
  const size_t symbol = static_cast<size_t>(value - table.offset());
  const uint32_t r = range_ >> kCdfPrecision;
  low_ += r * table.Low(symbol);
  range_ = r * table.Frequency(symbol);
  Normalize();
}

void RangeEncoder::Normalize() {
  for (;;) {
    const uint64_t high = static_cast<uint64_t>(low_) + range_;
    if ((static_cast<uint64_t>(low_) ^ high) >= kTop) {
      if (range_ >= kBottom) break;
      range_ = (0u - low_) & (kBottom - 1);
    }
    out_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::vector<uint8_t> RangeEncoder::Finish() {
  if (finished_) throw StateError("range encoder already finished");
  finished_ = true;
  // Shortest prefix of a value inside [low, low + range) followed by zeros.
  const uint64_t low = low_;
  const uint64_t high = low + range_;
  for (size_t k = 0; k <= kMaxFlushBytes; ++k) {
    const int shift = 32 - 8 * static_cast<int>(k);
    const uint64_t mask = shift >= 64 ? ~uint64_t{0} : (uint64_t{1} << shift) - 1;
    const uint64_t v = (low + mask) & ~mask;
    if (v < high) {
      for (size_t i = 0; i < k; ++i) out_.push_back(static_cast<uint8_t>(v >> (24 - 8 * i)));
      break;
    }
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> payload) : payload_(payload) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | NextByte();
}

uint8_t RangeDecoder::NextByte() {
  if (pos_ < payload_.size()) return payload_[pos_++];
  if (++overrun_ > kMaxFlushBytes) throw DecodeError("range decoder: truncated payload");
  return 0;
}

int32_t RangeDecoder::Decode(const CdfTable& table) {
  const uint32_t r = range_ >> kCdfPrecision;
  const uint32_t target = (code_ - low_) / r;
  if (target >= kCdfTotal) throw DecodeError("range decoder: code outside interval");
  const size_t symbol = table.Find(target);
  low_ += r * table.Low(symbol);
  range_ = r * table.Frequency(symbol);
  Normalize();
  return table.offset() + static_cast<int32_t>(symbol);
}

void RangeDecoder::Normalize() {
  for (;;) {
    const uint64_t high = static_cast<uint64_t>(low_) + range_;
    if ((static_cast<uint64_t>(low_) ^ high) >= kTop) {
      if (range_ >= kBottom) break;
      range_ = (0u - low_) & (kBottom - 1);
    }
    code_ = (code_ << 8) | NextByte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

CodedBuffer RangeEncode(std::span<const int32_t> values, std::span<const CdfTable* const> tables) {
  if (values.size() != tables.size()) throw UsageError("one CDF table per value required");
  RangeEncoder enc;
  for (size_t i = 0; i < values.size(); ++i) enc.Encode(values[i], *tables[i]);
  return CodedBuffer{enc.Finish(), values.size()};
}

std::vector<int32_t> RangeDecode(std::span<const uint8_t> payload,
                                 std::span<const CdfTable* const> tables, size_t count) {
  if (tables.size() < count) throw UsageError("one CDF table per value required");
  RangeDecoder dec(payload);
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = dec.Decode(*tables[i]);
  return out;
}

}  // namespace jsd
