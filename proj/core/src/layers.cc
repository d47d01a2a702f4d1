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

#include "jsdseg/layers.h"

#include <cmath>

#include "jsdseg/errors.h"

namespace jsd {

namespace {

Tensor KaimingNormal(const Shape& shape, int64_t fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<float> v(static_cast<size_t>(NumElements(shape)));
  for (auto& x : v) x = static_cast<float>(rng.Normal(0.0, sd));
  return Tensor(shape, std::move(v));
}

}  // namespace

void AccountElementwise(const Shape& s, int64_t flops_per_element, Meter& meter) {
  meter.flops += NumElements(s) * flops_per_element;
}

Conv Conv::Make(int64_t in_channels, int64_t out_channels, int kernel, Conv2dOptions options,
                bool with_bias, Rng& rng) {
  if (options.groups <= 0 || in_channels % options.groups || out_channels % options.groups) {
    throw ConfigError("conv: groups=" + std::to_string(options.groups) + " must divide " +
                      std::to_string(in_channels) + " and " + std::to_string(out_channels));
  }
  Conv c;
  const int64_t cg = in_channels / options.groups;
  c.weight = KaimingNormal({out_channels, cg, kernel, kernel}, cg * kernel * kernel, rng);
  if (with_bias) c.bias = Tensor::Zeros({out_channels});
  c.options = options;
  return c;
}

void Conv::Visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight, ParamKind::kWeight);
  if (bias.defined()) fn(prefix + ".bias", bias, ParamKind::kWeight);
}

Shape Conv::Account(const Shape& in, Meter& meter) const {
  const auto g = Conv2dOutputSize(in[2], in[3], weight.dim(2), weight.dim(3), options);
  const Shape out{in[0], weight.dim(0), g.out_h, g.out_w};
  meter.params += weight.numel() + (bias.defined() ? bias.numel() : 0);
  meter.AddMacs(in[0] * g.out_h * g.out_w * weight.numel());
  if (bias.defined()) AccountElementwise(out, 1, meter);
  return out;
}

ConvT ConvT::Make(int64_t in_channels, int64_t out_channels, int kernel,
                  ConvTranspose2dOptions options, bool with_bias, Rng& rng) {
  if (options.groups <= 0 || in_channels % options.groups || out_channels % options.groups) {
    throw ConfigError("conv_transpose: groups=" + std::to_string(options.groups) +
                      " must divide " + std::to_string(in_channels) + " and " +
                      std::to_string(out_channels));
  }
  ConvT c;
  const int64_t fg = out_channels / options.groups;
  c.weight = KaimingNormal({in_channels, fg, kernel, kernel}, fg * kernel * kernel, rng);
  if (with_bias) c.bias = Tensor::Zeros({out_channels});
  c.options = options;
  return c;
}

void ConvT::Visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight, ParamKind::kWeight);
  if (bias.defined()) fn(prefix + ".bias", bias, ParamKind::kWeight);
}

Shape ConvT::Account(const Shape& in, Meter& meter) const {
  const auto g = ConvTranspose2dOutputSize(in[2], in[3], weight.dim(2), weight.dim(3), options);
  const Shape out{in[0], out_channels(), g.out_h, g.out_w};
  meter.params += weight.numel() + (bias.defined() ? bias.numel() : 0);
  // Every input pixel scatters its full kernel slice.
  meter.AddMacs(in[0] * in[2] * in[3] * weight.numel());
  if (bias.defined()) AccountElementwise(out, 1, meter);
  return out;
}

BatchNorm BatchNorm::Make(int64_t channels) {
  BatchNorm b;
  b.gamma = Tensor::Full({channels}, 1.0f);
  b.beta = Tensor::Zeros({channels});
  b.running_mean = Tensor::Zeros({channels});
  b.running_var = Tensor::Full({channels}, 1.0f);
  return b;
}

Tensor BatchNorm::Forward(const Tensor& x, bool training) {
  return BatchNorm2d(x, gamma, beta, running_mean, running_var, kBatchNormEps, kBatchNormMomentum,
                     training);
}

void BatchNorm::Visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", gamma, ParamKind::kWeight);
  fn(prefix + ".beta", beta, ParamKind::kWeight);
  fn(prefix + ".running_mean", running_mean, ParamKind::kBuffer);
  fn(prefix + ".running_var", running_var, ParamKind::kBuffer);
}

Shape BatchNorm::Account(const Shape& in, Meter& meter) const {
  meter.params += gamma.numel() + beta.numel();
  AccountElementwise(in, 2, meter);
  return in;
}

void BatchNorm::Folded(std::vector<float>& scale, std::vector<float>& shift) const {
  const size_t c = static_cast<size_t>(gamma.numel());
  scale.resize(c);
  shift.resize(c);
  for (size_t i = 0; i < c; ++i) {
    const double s = gamma.data()[i] / std::sqrt(double(running_var.data()[i]) + kBatchNormEps);
    scale[i] = static_cast<float>(s);
    shift[i] = static_cast<float>(beta.data()[i] - s * running_mean.data()[i]);
  }
}

ConvBn ConvBn::Make(int64_t in_channels, int64_t out_channels, int kernel, Conv2dOptions options,
                    Rng& rng) {
  return ConvBn{Conv::Make(in_channels, out_channels, kernel, options, false, rng),
                BatchNorm::Make(out_channels)};
}

void ConvBn::Visit(const std::string& prefix, const ParamVisitor& fn) {
  conv.Visit(prefix + ".conv", fn);
  bn.Visit(prefix + ".bn", fn);
}

Shape ConvBn::Account(const Shape& in, Meter& meter) const {
  return bn.Account(conv.Account(in, meter), meter);
}

}  // namespace jsd
