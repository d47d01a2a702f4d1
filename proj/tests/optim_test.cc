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

#include <cmath>

#include "jsdseg/errors.h"
#include "jsdseg/ops.h"
#include "jsdseg/optim.h"

namespace jsd {
namespace {

TEST(PolyLrTest, Endpoints) {
  EXPECT_DOUBLE_EQ(PolyLr(0, 0.01, 1000), 0.01);
  EXPECT_DOUBLE_EQ(PolyLr(1000, 0.01, 1000), 0.0);
  EXPECT_NEAR(PolyLr(500, 1.0, 1000), 0.535886731268146, 1e-12);
  EXPECT_NEAR(PolyLr(500, 0.01, 1000) / (0.01 * std::pow(0.5, 0.9)), 1.0, 1e-12);
}

TEST(PolyLrTest, PastEndClampsAndFlags) {
  bool clamped = false;
  EXPECT_EQ(PolyLr(1001, 0.01, 1000, 0.9, &clamped), 0.0);
  EXPECT_TRUE(clamped);
  PolyLr(10, 0.01, 1000, 0.9, &clamped);
  EXPECT_FALSE(clamped);
  EXPECT_THROW(PolyLr(0, 0.01, 0), ConfigError);
}

TEST(ClipTest, RescalesToMaxNorm) {
  Tensor a({2}), b({1});
  a.mutable_grad()[0] = 6;
  a.mutable_grad()[1] = 0;
  b.mutable_grad()[0] = 8;
  std::vector<Tensor*> ps{&a, &b};
  EXPECT_DOUBLE_EQ(ClipGradNorm(ps, 1.0), 10.0);
  EXPECT_NEAR(GlobalGradNorm(ps), 1.0, 1e-7);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-7);
  // Below the threshold nothing changes.
  EXPECT_NEAR(ClipGradNorm(ps, 1.0), 1.0, 1e-7);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-7);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Tensor w({2}, {1.0f, -1.0f});
  w.mutable_grad()[0] = 0.3f;
  w.mutable_grad()[1] = -42.0f;
  Adam opt({&w});
  ASSERT_TRUE(opt.Step(0.01));
  EXPECT_NEAR(w.data()[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(w.data()[1], -1.0 + 0.01, 1e-6);
}

TEST(AdamTest, ZeroGradientLeavesParameter) {
  Tensor w({1}, {2.5f});
  w.mutable_grad()[0] = 0.0f;
  Adam opt({&w});
  opt.Step(0.1);
  EXPECT_EQ(w.data()[0], 2.5f);
}

TEST(AdamTest, MinimizesQuadratic) {
  Tensor w = Tensor::Full({1}, 0.0f);
  w.set_requires_grad();
  Adam opt({&w});
  for (int i = 0; i < 200; ++i) {
    opt.ZeroGrad();
    Tensor d = AddScalar(w, -3.0f);
    Sum(Mul(d, d)).Backward();
    opt.Step(0.1);
  }
  EXPECT_LT(std::abs(w.data()[0] - 3.0f), 0.1f);
}

TEST(AdamTest, NonFiniteGradientRejected) {
  Tensor w({2}, {1.0f, 2.0f});
  w.mutable_grad()[0] = 1.0f;
  w.mutable_grad()[1] = std::nanf("");
  Adam opt({&w});
  EXPECT_FALSE(opt.Step(0.1));
  EXPECT_EQ(opt.rejected_steps(), 1);
  EXPECT_EQ(opt.steps(), 0);
  EXPECT_EQ(w.data()[0], 1.0f);
}

}  // namespace
}  // namespace jsd
