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

// Probability models for the two latents and the differentiable rate.
//
// The hyper-latent uses a per-channel factorized prior: a monotone
// cumulative c(v) = sigmoid(L(v)) where L is a tiny network
//   x <- softplus(M_k) x + b_k,  x <- x + tanh(a_k) * tanh(x)  (hidden layers)
// of widths 1 -> 3 -> 3 -> 3 -> 1. Softplus keeps every matrix positive, so L
// is non-decreasing in v. Three learned quantiles per channel locate the
// lower tail, the median and the upper tail.
//
// The main latent uses a zero-mean Gaussian conditional whose scales come
// from the hyperprior decoder. Coding snaps each scale to the nearest
// not-smaller entry of a fixed geometric table.

#ifndef JSDSEG_ENTROPY_H_
#define JSDSEG_ENTROPY_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jsdseg/random.h"
#include "jsdseg/range_coder.h"
#include "jsdseg/tensor.h"

namespace jsd {

inline constexpr double kLikelihoodFloor = 0x1p-24;
inline constexpr double kTailMass = 1e-9;
inline constexpr double kScaleMin = 0.11;
inline constexpr double kScaleMax = 256.0;
inline constexpr int kScaleLevels = 64;

enum class QuantizerMode { kNoiseProxy, kRound };

// kNoiseProxy adds i.i.d. uniform noise from (-1/2, 1/2) drawn from `rng`;
// kRound rounds to the nearest integer. Both pass gradients through
// unchanged. Non-finite input is a NumericError.
template <typename T>
BasicTensor<T> Quantize(const BasicTensor<T>& x, QuantizerMode mode, Rng& rng);

double StdNormalCdf(double x);

// P(k | sigma) = Phi((k + 1/2) / sigma) - Phi((k - 1/2) / sigma), evaluated
// on the upper tail for accuracy and floored at 2^-24. Scales must be
// positive (clamp them to kScaleMin first).
template <typename T>
BasicTensor<T> GaussianLikelihood(const BasicTensor<T>& values, const BasicTensor<T>& scales);

// Bits per input pixel: mean over the batch of
// (sum -log2 p_r + sum -log2 p_h) / (H * W). The batch size is dim 0 of p_r.
template <typename T>
BasicTensor<T> RateLoss(const BasicTensor<T>& p_r, const BasicTensor<T>& p_h, int64_t height,
                        int64_t width);

// The Gaussian conditional: fixed scale table and one CDF per table entry.
class GaussianConditional {
 public:
  GaussianConditional();
  explicit GaussianConditional(std::vector<double> scale_table, double tail_mass = kTailMass);

  static std::vector<double> DefaultScaleTable();
  // Symbols -b..b with b = ceil(z * sigma - 1/2), where Phi(-z) = tail_mass
  // bounds the mass cut off on each side. Edge bins absorb the tails.
  static int32_t HalfWidth(double sigma, double tail_mass);
  static CdfTable BuildTable(double sigma, double tail_mass);

  const std::vector<double>& scale_table() const { return scales_; }
  double tail_mass() const { return tail_mass_; }
  // Index of the smallest table scale >= sigma (the last one if none).
  size_t ScaleIndex(double sigma) const;
  const std::vector<CdfTable>& tables() const { return tables_; }
  void set_tables(std::vector<CdfTable> tables);

 private:
  std::vector<double> scales_;
  double tail_mass_;
  std::vector<CdfTable> tables_;
};

// Parameters of the factorized cumulative, per channel C:
//   matrices[k] (C, d_out, d_in), biases[k] (C, d_out), factors[k] (C, d_out)
// for the layer widths in kFactorizedWidths.
template <typename T>
struct FactorizedParams {
  std::array<BasicTensor<T>, 4> matrices;
  std::array<BasicTensor<T>, 4> biases;
  std::array<BasicTensor<T>, 3> factors;

  int64_t channels() const { return matrices[0].dim(0); }
};

inline constexpr std::array<int, 5> kFactorizedWidths{1, 3, 3, 3, 1};

// c(k + 1/2) - c(k - 1/2) per element of `values` (N, C, H, W), floored at
// 2^-24. Differentiable in values and every parameter.
template <typename T>
BasicTensor<T> FactorizedLikelihood(const BasicTensor<T>& values, const FactorizedParams<T>& params);

// Sum over channels of |c(q_lo) - t/2| + |c(q_med) - 1/2| + |c(q_hi) - (1 - t/2)|
// with quantiles shaped (C, 3) as (lower, median, upper). The density is held fixed: only the
// quantiles receive gradients. The upper term is evaluated as
// |sigmoid(-L(q_hi)) - t/2|, which is the same number without cancellation.
template <typename T>
BasicTensor<T> FactorizedAuxLoss(const BasicTensor<T>& quantiles, const FactorizedParams<T>& params,
                                 double tail_mass);

class FactorizedPrior {
 public:
  FactorizedPrior() = default;
  FactorizedPrior(int64_t channels, Rng& rng, double init_scale = 10.0,
                  double tail_mass = kTailMass);

  int64_t channels() const { return quantiles_.dim(0); }
  double tail_mass() const { return tail_mass_; }

  Tensor Likelihood(const Tensor& values) const { return FactorizedLikelihood(values, params_); }
  Tensor AuxLoss() const { return FactorizedAuxLoss(quantiles_, params_, tail_mass_); }

  // L(v) and c(v) for one channel, in double precision.
  double Logit(int64_t channel, double v) const;
  double Cdf(int64_t channel, double v) const;

  // Solves c(q) = (t/2, 1/2, 1 - t/2) per channel by bisection; the exact
  // fixed point of the auxiliary loss for the current density.
  void FitQuantiles();
  // Throws StateError unless the quantiles bracket the declared tails.
  void CheckQuantiles() const;

  // One table per channel over [floor(q_lo), ceil(q_hi)]; edge bins absorb
  // the tails.
  std::vector<CdfTable> BuildTables() const;

  FactorizedParams<float>& params() { return params_; }
  const FactorizedParams<float>& params() const { return params_; }
  Tensor& quantiles() { return quantiles_; }
  const Tensor& quantiles() const { return quantiles_; }

  // Density parameters, owned by the main optimizer. The quantiles belong to
  // the auxiliary optimizer and are not listed here.
  std::vector<std::pair<std::string, Tensor*>> NamedDensityParameters();

 private:
  FactorizedParams<float> params_;
  Tensor quantiles_;
  double tail_mass_ = kTailMass;
};

}  // namespace jsd

#endif  // JSDSEG_ENTROPY_H_
