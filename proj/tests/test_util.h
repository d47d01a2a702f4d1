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

// Shared helpers for the test binaries: random tensors, direct-loop
// reference implementations and a central-difference gradient checker.

#ifndef JSDSEG_TESTS_TEST_UTIL_H_
#define JSDSEG_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jsdseg/ops.h"
#include "jsdseg/random.h"
#include "jsdseg/tensor.h"

namespace jsd::testing {

template <typename T = float>
BasicTensor<T> RandomTensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(static_cast<size_t>(NumElements(shape)));
  for (auto& x : v) x = static_cast<T>(rng.Uniform(lo, hi));
  return BasicTensor<T>(shape, std::move(v));
}

inline double MaxAbsDiff(std::span<const float> a, std::span<const float> b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// out[n][f][y][x] = b[f] + sum over the group's channels and taps.
template <typename T>
std::vector<T> ReferenceConv2d(const BasicTensor<T>& in, const BasicTensor<T>& w,
                               const std::vector<T>& bias, int stride, int dilation, int groups,
                               int pad, int64_t* out_h, int64_t* out_w) {
  const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const int64_t f = w.dim(0), cg = w.dim(1), k = w.dim(2);
  const int64_t ho = (h + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  const int64_t wo = (wd + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  *out_h = ho;
  *out_w = wo;
  const int64_t fg = f / groups;
  std::vector<T> out(static_cast<size_t>(n * f * ho * wo));
  auto X = in.data();
  auto W = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < f; ++o) {
      const int64_t g = o / fg;
      for (int64_t y = 0; y < ho; ++y)
        for (int64_t x = 0; x < wo; ++x) {
          double acc = bias.empty() ? 0.0 : double(bias[o]);
          for (int64_t ci = 0; ci < cg; ++ci)
            for (int64_t ky = 0; ky < k; ++ky)
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t iy = y * stride - pad + ky * dilation;
                const int64_t ix = x * stride - pad + kx * dilation;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                const int64_t ch = g * cg + ci;
                acc += double(X[((b * c + ch) * h + iy) * wd + ix]) *
                       double(W[((o * cg + ci) * k + ky) * k + kx]);
              }
          out[((b * f + o) * ho + y) * wo + x] = static_cast<T>(acc);
        }
    }
  return out;
}

// Scatter definition: every input pixel adds weight-scaled copies of the
// kernel into the (stride-spaced) output grid.
template <typename T>
std::vector<T> ReferenceConvTranspose2d(const BasicTensor<T>& in, const BasicTensor<T>& w,
                                        int stride, int groups, int pad, int out_pad,
                                        int64_t* out_h, int64_t* out_w) {
  const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const int64_t fg = w.dim(1), k = w.dim(2);
  const int64_t f = fg * groups, cg = c / groups;
  const int64_t ho = (h - 1) * stride - 2 * pad + (k - 1) + out_pad + 1;
  const int64_t wo = (wd - 1) * stride - 2 * pad + (k - 1) + out_pad + 1;
  *out_h = ho;
  *out_w = wo;
  std::vector<double> acc(static_cast<size_t>(n * f * ho * wo), 0.0);
  auto X = in.data();
  auto W = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ci = 0; ci < c; ++ci) {
      const int64_t g = ci / cg;
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < wd; ++x) {
          const double v = X[((b * c + ci) * h + y) * wd + x];
          for (int64_t fo = 0; fo < fg; ++fo)
            for (int64_t ky = 0; ky < k; ++ky)
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t oy = y * stride - pad + ky;
                const int64_t ox = x * stride - pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                const int64_t o = g * fg + fo;
                acc[((b * f + o) * ho + oy) * wo + ox] +=
                    v * double(W[((ci * fg + fo) * k + ky) * k + kx]);
              }
        }
    }
  return std::vector<T>(acc.begin(), acc.end());
}

// Largest relative disagreement between the analytic gradient of
// sum(f(inputs) * R), R a fixed random tensor, and its central differences.
// Relative error is |a - n| / max(|a|, |n|, floor).
inline double GradCheck(const std::function<Tensor64(const std::vector<Tensor64>&)>& f,
                        std::vector<Tensor64> inputs, uint64_t seed = 7, double step = 1e-5,
                        double floor = 1e-6) {
  Rng rng(seed);
  Tensor64 probe;
  auto loss = [&](const std::vector<Tensor64>& xs) {
    Tensor64 y = f(xs);
    if (!probe.defined()) probe = RandomTensor<double>(y.shape(), rng, 0.5, 1.5);
    return Sum(Mul(y, probe));
  };
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss(inputs).Backward();
  double worst = 0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<size_t>(t.numel()), 0.0);
    auto x = t.mutable_data();
    for (size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      double plus, minus;
      {
        NoGradGuard ng;
        x[i] = saved + step;
        plus = loss(inputs).item();
        x[i] = saved - step;
        minus = loss(inputs).item();
      }
      x[i] = saved;
      const double numeric = (plus - minus) / (2 * step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
  }
  return worst;
}

}  // namespace jsd::testing

#endif  // JSDSEG_TESTS_TEST_UTIL_H_
