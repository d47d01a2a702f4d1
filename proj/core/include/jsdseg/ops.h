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

// Differentiable operations on NCHW tensors. Every op is instantiated for
// float (compute precision) and double (gradient checking).

#ifndef JSDSEG_OPS_H_
#define JSDSEG_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "jsdseg/tensor.h"

namespace jsd {

// Elementwise, same-shape operands.
template <typename T> BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> Sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> Scale(const BasicTensor<T>& a, T factor);
template <typename T> BasicTensor<T> AddScalar(const BasicTensor<T>& a, T value);
template <typename T> BasicTensor<T> Relu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> Abs(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> Softplus(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> Log(const BasicTensor<T>& x);

// max(x, bound). The gradient passes where x >= bound, and also below the
// bound when it points towards increasing x, so clamped values can recover.
template <typename T> BasicTensor<T> LowerBound(const BasicTensor<T>& x, T bound);

// Forward rounds to the nearest integer (halves away from zero); backward is
// the identity.
template <typename T> BasicTensor<T> RoundStraightThrough(const BasicTensor<T>& x);

template <typename T> BasicTensor<T> Sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> Mean(const BasicTensor<T>& x);

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int groups = 1;
  int padding = -1;  // -1: "same", i.e. dilation * (k - 1) / 2
};

// weight: (F, C_in / groups, kh, kw). bias may be undefined.
template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& options);

struct ConvTranspose2dOptions {
  int stride = 1;
  int groups = 1;
  int dilation = 1;
  int padding = -1;         // -1: dilation * (k - 1) / 2
  int output_padding = -1;  // -1: stride - 1, so H_out = stride * H_in
};

// weight: (C_in, F / groups, kh, kw).
template <typename T>
BasicTensor<T> ConvTranspose2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias,
                               const ConvTranspose2dOptions& options);

struct ConvGeometry {
  int64_t out_h = 0;
  int64_t out_w = 0;
};
ConvGeometry Conv2dOutputSize(int64_t h, int64_t w, int64_t kh, int64_t kw,
                              const Conv2dOptions& options);
ConvGeometry ConvTranspose2dOutputSize(int64_t h, int64_t w, int64_t kh, int64_t kw,
                                       const ConvTranspose2dOptions& options);

// Batch normalization over (N, H, W) per channel. In training mode the
// running statistics are updated in place with
//   running = (1 - momentum) * running + momentum * batch_stat
// where the variance statistic is the unbiased batch variance.
template <typename T>
BasicTensor<T> BatchNorm2d(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                           BasicTensor<T>& running_var, T eps, T momentum, bool training);

template <typename T> BasicTensor<T> GlobalAvgPool(const BasicTensor<T>& x);

// Half-pixel-center bilinear resampling (no corner alignment).
template <typename T>
BasicTensor<T> UpsampleBilinear(const BasicTensor<T>& x, int64_t out_h, int64_t out_w);

template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts);

template <typename T> BasicTensor<T> SoftmaxChannels(const BasicTensor<T>& logits);

// Per pixel index of the largest channel; ties resolve to the lowest index.
// Result is N * H * W, row-major.
template <typename T> std::vector<int32_t> ArgmaxChannels(const BasicTensor<T>& logits);

// Mean over images of the per-image mean pixel cross-entropy (natural log)
// between softmax(logits) and a one-hot target of the same shape.
template <typename T>
BasicTensor<T> CrossEntropyOneHot(const BasicTensor<T>& logits, const BasicTensor<T>& one_hot);

// Same loss with class labels in 1..C (label 0 is ignored). Images without a
// labelled pixel do not contribute.
template <typename T>
BasicTensor<T> CrossEntropyLabels(const BasicTensor<T>& logits, std::span<const int32_t> labels);

}  // namespace jsd

#endif  // JSDSEG_OPS_H_
