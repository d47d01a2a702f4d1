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

#include "jsdseg/errors.h"
#include "jsdseg/ops.h"
#include "jsdseg/tensor.h"

namespace jsd {
namespace {

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
  Tensor t({2, 3}, std::vector<float>(6, 1.0f));
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(TensorTest, SquareDerivative) {
  Tensor x = Tensor::Scalar(3.0f);
  x.set_requires_grad();
  Mul(x, x).Backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 6.0f);
}

TEST(TensorTest, GradientsAccumulateAcrossBackwardCalls) {
  Tensor x = Tensor::Scalar(3.0f);
  x.set_requires_grad();
  Mul(x, x).Backward();
  Mul(x, x).Backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 12.0f);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(TensorTest, NonScalarBackwardIsUsageError) {
  Tensor x = Tensor::Full({2}, 1.0f);
  x.set_requires_grad();
  EXPECT_THROW(Scale(x, 2.0f).Backward(), UsageError);
}

TEST(TensorTest, SharedSubexpressionVisitedOnce) {
  // y = a * a with a = 2x reused; dy/dx = 8x.
  Tensor x = Tensor::Scalar(1.5f);
  x.set_requires_grad();
  Tensor a = Scale(x, 2.0f);
  Tensor y = Add(Mul(a, a), a);
  y.Backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 8.0f * 1.5f + 2.0f);
}

TEST(TensorTest, NoGradGuardSuppressesRecording) {
  Tensor x = Tensor::Scalar(2.0f);
  x.set_requires_grad();
  Tensor y;
  {
    NoGradGuard guard;
    y = Mul(x, x);
  }
  EXPECT_FALSE(y.requires_grad());
}

TEST(TensorTest, ReshapeKeepsGradientFlow) {
  Tensor x({2, 2}, {1, 2, 3, 4});
  x.set_requires_grad();
  Sum(Mul(x.Reshape({4}), x.Reshape({4}))).Backward();
  EXPECT_FLOAT_EQ(x.grad()[3], 8.0f);
  EXPECT_THROW(x.Reshape({3}), DimensionError);
}

}  // namespace
}  // namespace jsd
