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

// Parameterized layers shared by the four networks, plus the static cost
// accounting that mirrors their forward passes.

#ifndef JSDSEG_LAYERS_H_
#define JSDSEG_LAYERS_H_

#include <cstdint>
#include <functional>
#include <string>

#include "jsdseg/ops.h"
#include "jsdseg/random.h"
#include "jsdseg/tensor.h"

namespace jsd {

enum class ParamKind { kWeight, kBuffer };

// Called once per named tensor. Weights are trained; buffers (batch-norm
// running statistics) are state that travels with checkpoints.
using ParamVisitor = std::function<void(const std::string& name, Tensor& t, ParamKind kind)>;

// Static cost of a forward pass. One multiply-accumulate counts as two
// FLOPs; elementwise work is charged per element: batch norm 2, ReLU and
// softplus 1, residual add 1, bilinear resampling 7 per output, global
// average pooling 1 per input. Parameters exclude batch-norm running
// statistics.
struct Meter {
  int64_t params = 0;
  int64_t macs = 0;
  int64_t flops = 0;

  void AddMacs(int64_t n) {
    macs += n;
    flops += 2 * n;
  }
  Meter& operator+=(const Meter& o) {
    params += o.params;
    macs += o.macs;
    flops += o.flops;
    return *this;
  }
};

struct Conv {
  Tensor weight;  // (F, C_in / G, k, k)
  Tensor bias;    // (F) or undefined
  Conv2dOptions options;

  // Kaiming-normal weights (fan-in, ReLU gain), zero bias.
  static Conv Make(int64_t in_channels, int64_t out_channels, int kernel, Conv2dOptions options,
                   bool with_bias, Rng& rng);

  int64_t out_channels() const { return weight.dim(0); }
  int kernel() const { return static_cast<int>(weight.dim(2)); }
  Tensor Forward(const Tensor& x) const { return Conv2d(x, weight, bias, options); }
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;
};

struct ConvT {
  Tensor weight;  // (C_in, F / G, k, k)
  Tensor bias;
  ConvTranspose2dOptions options;

  static ConvT Make(int64_t in_channels, int64_t out_channels, int kernel,
                    ConvTranspose2dOptions options, bool with_bias, Rng& rng);

  int64_t out_channels() const { return weight.dim(1) * options.groups; }
  Tensor Forward(const Tensor& x) const { return ConvTranspose2d(x, weight, bias, options); }
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;
};

inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.1f;

struct BatchNorm {
  Tensor gamma, beta, running_mean, running_var;

  static BatchNorm Make(int64_t channels);
  Tensor Forward(const Tensor& x, bool training);
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;
  // Per-channel scale gamma / sqrt(var + eps) and shift beta - scale * mean.
  void Folded(std::vector<float>& scale, std::vector<float>& shift) const;
};

// Conv without bias followed by batch norm.
struct ConvBn {
  Conv conv;
  BatchNorm bn;

  static ConvBn Make(int64_t in_channels, int64_t out_channels, int kernel, Conv2dOptions options,
                     Rng& rng);
  Tensor Forward(const Tensor& x, bool training) { return bn.Forward(conv.Forward(x), training); }
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;
};

// Elementwise costs for accounting.
void AccountElementwise(const Shape& s, int64_t flops_per_element, Meter& meter);

}  // namespace jsd

#endif  // JSDSEG_LAYERS_H_
