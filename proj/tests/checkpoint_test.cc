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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "jsdseg/checkpoint.h"
#include "jsdseg/errors.h"

namespace jsd {
namespace {

Checkpoint Sample() {
  Checkpoint c;
  c.flags = kCheckpointFusedFlag;
  c.metadata = "feature_maps = 64\nclasses = 6\n";
  c.Put("jd.head.weight", Tensor({2, 3, 1, 1}, {1, -2, 3.5f, 4, 5, 6}));
  c.Put("scalar", Tensor::Scalar(0.25f));
  return c;
}

TEST(CheckpointTest, RoundTrip) {
  const Checkpoint c = Sample();
  const auto bytes = SerializeCheckpoint(c);
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "JSDW");
  EXPECT_EQ(bytes[4], kCheckpointVersion);
  const Checkpoint back = ParseCheckpoint(bytes);
  EXPECT_TRUE(back.fused());
  EXPECT_EQ(back.metadata, c.metadata);
  ASSERT_EQ(back.arrays.size(), 2u);
  EXPECT_EQ(back.Get("jd.head.weight").shape, (Shape{2, 3, 1, 1}));
  EXPECT_EQ(back.Get("jd.head.weight").values[2], 3.5f);
  EXPECT_TRUE(back.Get("scalar").shape.empty());
  EXPECT_THROW(back.Get("missing"), DataError);
}

TEST(CheckpointTest, LittleEndianLayout) {
  Checkpoint c;
  c.Put("a", Tensor({1}, {1.0f}));
  const auto b = SerializeCheckpoint(c);
  // magic, version, flags, metadata length 0, count 1, name length 1, "a",
  // rank 1, extent 1, float 1.0, crc.
  ASSERT_EQ(b.size(), 4u + 1 + 1 + 4 + 4 + 2 + 1 + 1 + 4 + 4 + 4);
  EXPECT_EQ(b[10], 1);
  EXPECT_EQ(b[11], 0);
  EXPECT_EQ(b[14], 1);
  EXPECT_EQ(b[16], 'a');
  // 1.0f = 0x3F800000 little-endian.
  EXPECT_EQ(b[22], 0x00);
  EXPECT_EQ(b[25], 0x3F);
}

TEST(CheckpointTest, CorruptionDetected) {
  auto bytes = SerializeCheckpoint(Sample());
  auto flipped = bytes;
  flipped[20] ^= 0x40;
  EXPECT_THROW(ParseCheckpoint(flipped), DataError);
  auto cut = bytes;
  cut.resize(cut.size() - 7);
  EXPECT_THROW(ParseCheckpoint(cut), DataError);
}

TEST(CheckpointTest, DuplicateNameRejected) {
  Checkpoint c;
  c.Put("w", Tensor::Scalar(1.0f));
  EXPECT_THROW(c.Put("w", Tensor::Scalar(2.0f)), StateError);
}

TEST(CheckpointTest, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "jsdseg_checkpoint_test.jsdw";
  SaveCheckpoint(path.string(), Sample());
  const Checkpoint back = LoadCheckpoint(path.string());
  EXPECT_EQ(back.arrays.size(), 2u);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadCheckpoint(path.string()), DataError);
}

}  // namespace
}  // namespace jsd
