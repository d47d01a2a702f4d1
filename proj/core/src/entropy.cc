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

#include "jsdseg/entropy.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "jsdseg/errors.h"
#include "jsdseg/ops.h"

namespace jsd {

namespace {

template <typename T>
T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

double StdNormalPdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Probability of the integer bin around |k| under N(0, sigma^2), computed
// from the upper tail so small masses keep their relative precision.
double GaussianBinMass(double k, double sigma) {
  const double v = std::abs(k);
  return StdNormalCdf((0.5 - v) / sigma) - StdNormalCdf((-0.5 - v) / sigma);
}

}  // namespace

double StdNormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

template <typename T>
BasicTensor<T> Quantize(const BasicTensor<T>& x, QuantizerMode mode, Rng& rng) {
  for (T v : x.data()) {
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("quantize: non-finite input");
  }
  if (mode == QuantizerMode::kRound) return RoundStraightThrough(x);
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) {
    double u;
    do {
      u = rng.Uniform() - 0.5;
    } while (u == -0.5);
    v += static_cast<T>(u);
  }
  return MakeResult<T>(x.shape(), std::move(out), {x}, "noise_quantize",
                       [x](std::span<const T> g) {
                         auto sink = GradSink(x);
                         for (size_t i = 0; i < g.size(); ++i) sink[i] += g[i];
                       });
}

template <typename T>
BasicTensor<T> GaussianLikelihood(const BasicTensor<T>& values, const BasicTensor<T>& scales) {
  if (values.shape() != scales.shape()) {
    throw DimensionError("gaussian likelihood: values " + ShapeString(values.shape()) +
                         " vs scales " + ShapeString(scales.shape()));
  }
  const size_t n = static_cast<size_t>(values.numel());
  auto v = values.data();
  auto s = scales.data();
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) {
    if (!(s[i] > T(0))) throw NumericError("gaussian likelihood: non-positive scale");
    const double p = GaussianBinMass(static_cast<double>(v[i]), static_cast<double>(s[i]));
    out[i] = static_cast<T>(std::max(p, kLikelihoodFloor));
  }
  return MakeResult<T>(
      values.shape(), std::move(out), {values, scales}, "gaussian_likelihood",
      [values, scales](std::span<const T> g) {
        auto gv = GradSink(values);
        auto gs = GradSink(scales);
        auto v = values.data();
        auto s = scales.data();
        for (size_t i = 0; i < g.size(); ++i) {
          const double sigma = s[i];
          const double av = std::abs(static_cast<double>(v[i]));
          const double a = (0.5 - av) / sigma, b = (-0.5 - av) / sigma;
          const double p = StdNormalCdf(a) - StdNormalCdf(b);
          if (p < kLikelihoodFloor && g[i] >= T(0)) continue;
          const double pa = StdNormalPdf(a), pb = StdNormalPdf(b);
          if (!gv.empty()) {
            const double sign = v[i] > T(0) ? 1.0 : (v[i] < T(0) ? -1.0 : 0.0);
            gv[i] += static_cast<T>(g[i] * sign * (pb - pa) / sigma);
          }
          if (!gs.empty()) gs[i] += static_cast<T>(g[i] * (b * pb - a * pa) / sigma);
        }
      });
}

template <typename T>
BasicTensor<T> RateLoss(const BasicTensor<T>& p_r, const BasicTensor<T>& p_h, int64_t height,
                        int64_t width) {
  if (p_r.rank() == 0 || height <= 0 || width <= 0) {
    throw DimensionError("rate loss: need batched likelihoods and a positive image size");
  }
  for (const auto* p : {&p_r, &p_h}) {
    for (T v : p->data()) {
      if (!(v > T(0))) throw NumericError("rate loss: non-positive probability");
    }
  }
  const double denom = std::numbers::ln2 * static_cast<double>(p_r.dim(0)) *
                       static_cast<double>(height) * static_cast<double>(width);
  BasicTensor<T> nats = Add(Sum(Log(p_r)), Sum(Log(p_h)));
  return Scale(nats, static_cast<T>(-1.0 / denom));
}

GaussianConditional::GaussianConditional() : GaussianConditional(DefaultScaleTable()) {}

GaussianConditional::GaussianConditional(std::vector<double> scale_table, double tail_mass)
    : scales_(std::move(scale_table)), tail_mass_(tail_mass) {
  if (scales_.empty()) throw ConfigError("gaussian conditional: empty scale table");
  if (!(tail_mass_ > 0 && tail_mass_ < 0.5)) throw ConfigError("tail mass must lie in (0, 1/2)");
  for (size_t i = 0; i < scales_.size(); ++i) {
    if (!(scales_[i] > 0) || (i > 0 && scales_[i] <= scales_[i - 1])) {
      throw ConfigError("scale table must be positive and strictly increasing");
    }
  }
  tables_.reserve(scales_.size());
  for (double s : scales_) tables_.push_back(BuildTable(s, tail_mass_));
}

std::vector<double> GaussianConditional::DefaultScaleTable() {
  std::vector<double> t(kScaleLevels);
  const double lo = std::log(kScaleMin), hi = std::log(kScaleMax);
  for (int i = 0; i < kScaleLevels; ++i) {
    t[i] = std::exp(lo + (hi - lo) * i / (kScaleLevels - 1));
  }
  t.front() = kScaleMin;
  t.back() = kScaleMax;
  return t;
}

int32_t GaussianConditional::HalfWidth(double sigma, double tail_mass) {
  // z with Phi(-z) = tail_mass, by bisection on the tail.
  double lo = 0, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (StdNormalCdf(-mid) > tail_mass ? lo : hi) = mid;
  }
  return std::max<int32_t>(0, static_cast<int32_t>(std::ceil(hi * sigma - 0.5)));
}

CdfTable GaussianConditional::BuildTable(double sigma, double tail_mass) {
  const int32_t b = HalfWidth(sigma, tail_mass);
  std::vector<double> pmf(static_cast<size_t>(2 * b + 1));
  for (int32_t k = -b; k <= b; ++k) pmf[static_cast<size_t>(k + b)] = GaussianBinMass(k, sigma);
  if (b > 0) {
    const double edge = StdNormalCdf((0.5 - b) / sigma);
    pmf.front() = edge;
    pmf.back() = edge;
  } else {
    pmf.front() = 1.0;
  }
  return CdfTable::FromPmf(pmf, -b);
}

size_t GaussianConditional::ScaleIndex(double sigma) const {
  auto it = std::lower_bound(scales_.begin(), scales_.end(), sigma);
  if (it == scales_.end()) return scales_.size() - 1;
  return static_cast<size_t>(it - scales_.begin());
}

void GaussianConditional::set_tables(std::vector<CdfTable> tables) {
  if (tables.size() != scales_.size()) {
    throw DataError("gaussian conditional: expected " + std::to_string(scales_.size()) +
                    " tables, got " + std::to_string(tables.size()));
  }
  tables_ = std::move(tables);
}

namespace {

// One channel of the factorized cumulative with its derived constants.
template <typename T>
struct ChannelNet {
  T sp[4][3][3];   // softplus(M)
  T dsp[4][3][3];  // sigmoid(M), the derivative of softplus
  T bias[4][3];
  T gate[3][3];    // tanh(a)
};

template <typename T>
struct ChannelGrad {
  T m[4][3][3] = {};
  T bias[4][3] = {};
  T gate[3][3] = {};
};

template <typename T>
struct Trace {
  T in[4][3];   // layer inputs
  T pre[4][3];  // affine outputs before gating
};

template <typename T>
T Softplus1(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
ChannelNet<T> LoadChannel(const FactorizedParams<T>& p, int64_t c) {
  ChannelNet<T> net{};
  for (int k = 0; k < 4; ++k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    auto m = p.matrices[k].data();
    auto b = p.biases[k].data();
    for (int j = 0; j < dout; ++j) {
      for (int i = 0; i < din; ++i) {
        const T raw = m[(c * dout + j) * din + i];
        net.sp[k][j][i] = Softplus1(raw);
        net.dsp[k][j][i] = Sigmoid(raw);
      }
      net.bias[k][j] = b[c * dout + j];
      if (k < 3) net.gate[k][j] = std::tanh(p.factors[k].data()[c * dout + j]);
    }
  }
  return net;
}

template <typename T>
T Forward(const ChannelNet<T>& net, T v, Trace<T>& tr) {
  T x[3] = {v, 0, 0};
  for (int k = 0; k < 4; ++k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    T y[3];
    for (int i = 0; i < din; ++i) tr.in[k][i] = x[i];
    for (int j = 0; j < dout; ++j) {
      T acc = net.bias[k][j];
      for (int i = 0; i < din; ++i) acc += net.sp[k][j][i] * x[i];
      tr.pre[k][j] = acc;
      y[j] = k < 3 ? acc + net.gate[k][j] * std::tanh(acc) : acc;
    }
    for (int j = 0; j < dout; ++j) x[j] = y[j];
  }
  return x[0];
}

// Returns dL/dv; accumulates parameter gradients scaled by g when `grad` is set.
template <typename T>
T BackwardNet(const ChannelNet<T>& net, const Trace<T>& tr, T g, ChannelGrad<T>* grad) {
  T gout[3] = {g, 0, 0};
  for (int k = 3; k >= 0; --k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    T gpre[3];
    for (int j = 0; j < dout; ++j) {
      if (k < 3) {
        const T t = std::tanh(tr.pre[k][j]);
        gpre[j] = gout[j] * (T(1) + net.gate[k][j] * (T(1) - t * t));
        if (grad) {
          const T a = net.gate[k][j];
          grad->gate[k][j] += gout[j] * (T(1) - a * a) * t;
        }
      } else {
        gpre[j] = gout[j];
      }
    }
    T gin[3] = {0, 0, 0};
    for (int j = 0; j < dout; ++j) {
      if (grad) grad->bias[k][j] += gpre[j];
      for (int i = 0; i < din; ++i) {
        if (grad) grad->m[k][j][i] += gpre[j] * tr.in[k][i] * net.dsp[k][j][i];
        gin[i] += gpre[j] * net.sp[k][j][i];
      }
    }
    for (int i = 0; i < din; ++i) gout[i] = gin[i];
  }
  return gout[0];
}

template <typename T>
void ValidateParams(const FactorizedParams<T>& p) {
  const int64_t c = p.matrices[0].defined() ? p.matrices[0].dim(0) : 0;
  if (c <= 0) throw StateError("factorized prior is not built");
  for (int k = 0; k < 4; ++k) {
    const Shape m{c, kFactorizedWidths[k + 1], kFactorizedWidths[k]};
    const Shape v{c, kFactorizedWidths[k + 1]};
    if (p.matrices[k].shape() != m || p.biases[k].shape() != v ||
        (k < 3 && p.factors[k].shape() != v)) {
      throw DimensionError("factorized prior: malformed parameters in layer " + std::to_string(k));
    }
  }
}

template <typename T>
std::vector<BasicTensor<T>> ParamList(const FactorizedParams<T>& p) {
  std::vector<BasicTensor<T>> v(p.matrices.begin(), p.matrices.end());
  v.insert(v.end(), p.biases.begin(), p.biases.end());
  v.insert(v.end(), p.factors.begin(), p.factors.end());
  return v;
}

template <typename T>
void ScatterChannelGrad(const FactorizedParams<T>& p, int64_t c, const ChannelGrad<T>& g) {
  for (int k = 0; k < 4; ++k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    auto gm = GradSink(p.matrices[k]);
    auto gb = GradSink(p.biases[k]);
    for (int j = 0; j < dout; ++j) {
      if (!gm.empty())
        for (int i = 0; i < din; ++i) gm[(c * dout + j) * din + i] += g.m[k][j][i];
      if (!gb.empty()) gb[c * dout + j] += g.bias[k][j];
      if (k < 3) {
        auto ga = GradSink(p.factors[k]);
        if (!ga.empty()) ga[c * dout + j] += g.gate[k][j];
      }
    }
  }
}

// Bin probability from the two logits with the sign trick that keeps the
// subtraction on the small side of the sigmoid.
template <typename T>
T BinProbability(T lower, T upper) {
  const T s = (lower + upper) > T(0) ? T(-1) : T(1);
  return std::abs(Sigmoid(s * upper) - Sigmoid(s * lower));
}

}  // namespace

template <typename T>
BasicTensor<T> FactorizedLikelihood(const BasicTensor<T>& values, const FactorizedParams<T>& params) {
  ValidateParams(params);
  if (values.rank() != 4 || values.dim(1) != params.channels()) {
    throw DimensionError("factorized likelihood: values " + ShapeString(values.shape()) +
                         " do not match " + std::to_string(params.channels()) + " channels");
  }
  const int64_t n = values.dim(0), c = values.dim(1), plane = values.dim(2) * values.dim(3);
  std::vector<T> out(static_cast<size_t>(values.numel()));
  auto v = values.data();
  Trace<T> tr;
  for (int64_t ch = 0; ch < c; ++ch) {
    const ChannelNet<T> net = LoadChannel(params, ch);
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t i = 0; i < plane; ++i) {
        const size_t idx = static_cast<size_t>((b * c + ch) * plane + i);
        const T lo = Forward(net, v[idx] - T(0.5), tr);
        const T up = Forward(net, v[idx] + T(0.5), tr);
        out[idx] = std::max(BinProbability(lo, up), static_cast<T>(kLikelihoodFloor));
      }
    }
  }
  std::vector<BasicTensor<T>> inputs = ParamList(params);
  inputs.insert(inputs.begin(), values);
  return MakeResult<T>(
      values.shape(), std::move(out), inputs, "factorized_likelihood",
      [values, params, n, c, plane](std::span<const T> g) {
        auto gv = GradSink(values);
        auto v = values.data();
        bool param_grads = false;
        for (const auto& t : ParamList(params)) param_grads = param_grads || t.requires_grad();
        Trace<T> tl, tu;
        for (int64_t ch = 0; ch < c; ++ch) {
          const ChannelNet<T> net = LoadChannel(params, ch);
          ChannelGrad<T> acc;
          for (int64_t b = 0; b < n; ++b) {
            for (int64_t i = 0; i < plane; ++i) {
              const size_t idx = static_cast<size_t>((b * c + ch) * plane + i);
              const T lo = Forward(net, v[idx] - T(0.5), tl);
              const T up = Forward(net, v[idx] + T(0.5), tu);
              const T p = BinProbability(lo, up);
              if (p < static_cast<T>(kLikelihoodFloor) && g[idx] >= T(0)) continue;
              // d|sig(s u) - sig(s l)| = sig'(u) du - sig'(l) dl for either sign.
              const T su = Sigmoid(up), sl = Sigmoid(lo);
              const T gu = g[idx] * su * (T(1) - su);
              const T gl = -g[idx] * sl * (T(1) - sl);
              ChannelGrad<T>* pg = param_grads ? &acc : nullptr;
              const T dv = BackwardNet(net, tu, gu, pg) + BackwardNet(net, tl, gl, pg);
              if (!gv.empty()) gv[idx] += dv;
            }
          }
          if (param_grads) ScatterChannelGrad(params, ch, acc);
        }
      });
}

template <typename T>
BasicTensor<T> FactorizedAuxLoss(const BasicTensor<T>& quantiles, const FactorizedParams<T>& params,
                                 double tail_mass) {
  ValidateParams(params);
  const int64_t c = params.channels();
  if (quantiles.shape() != Shape{c, 3}) {
    throw DimensionError("aux loss: quantiles must be (" + std::to_string(c) + ", 3)");
  }
  const T half_tail = static_cast<T>(tail_mass / 2);
  auto q = quantiles.data();
  // Per quantile: the signed residual and dResidual/dq.
  std::vector<T> residual(static_cast<size_t>(3 * c)), slope(static_cast<size_t>(3 * c));
  Trace<T> tr;
  T total = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const ChannelNet<T> net = LoadChannel(params, ch);
    for (int j = 0; j < 3; ++j) {
      const size_t idx = static_cast<size_t>(ch * 3 + j);
      const T logit = Forward(net, q[idx], tr);
      const T dlogit = BackwardNet<T>(net, tr, T(1), nullptr);
      T r, d;
      if (j == 0) {
        const T s = Sigmoid(logit);
        r = s - half_tail;
        d = s * (T(1) - s) * dlogit;
      } else if (j == 1) {
        const T s = Sigmoid(logit);
        r = s - T(0.5);
        d = s * (T(1) - s) * dlogit;
      } else {
        const T s = Sigmoid(-logit);
        r = s - half_tail;
        d = -s * (T(1) - s) * dlogit;
      }
      residual[idx] = r;
      slope[idx] = d;
      total += std::abs(r);
    }
  }
  return MakeResult<T>({}, {total}, {quantiles}, "factorized_aux_loss",
                       [quantiles, residual = std::move(residual),
                        slope = std::move(slope)](std::span<const T> g) {
                         auto gq = GradSink(quantiles);
                         for (size_t i = 0; i < gq.size(); ++i) {
                           const T sign = residual[i] > T(0) ? T(1) : (residual[i] < T(0) ? T(-1) : T(0));
                           gq[i] += g[0] * sign * slope[i];
                         }
                       });
}

FactorizedPrior::FactorizedPrior(int64_t channels, Rng& rng, double init_scale, double tail_mass)
    : tail_mass_(tail_mass) {
  if (channels <= 0) throw ConfigError("factorized prior needs at least one channel");
  if (!(tail_mass > 0 && tail_mass < 0.5)) throw ConfigError("tail mass must lie in (0, 1/2)");
  const double scale = std::pow(init_scale, 1.0 / 4.0);
  for (int k = 0; k < 4; ++k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    const float init = static_cast<float>(std::log(std::expm1(1.0 / scale / dout)));
    params_.matrices[k] = Tensor::Full({channels, dout, din}, init);
    std::vector<float> b(static_cast<size_t>(channels * dout));
    for (auto& x : b) x = static_cast<float>(rng.Uniform(-0.5, 0.5));
    params_.biases[k] = Tensor({channels, dout}, std::move(b));
    if (k < 3) params_.factors[k] = Tensor::Zeros({channels, dout});
  }
  std::vector<float> q(static_cast<size_t>(channels * 3));
  for (int64_t c = 0; c < channels; ++c) {
    q[c * 3] = static_cast<float>(-init_scale);
    q[c * 3 + 1] = 0.0f;
    q[c * 3 + 2] = static_cast<float>(init_scale);
  }
  quantiles_ = Tensor({channels, 3}, std::move(q));
}

double FactorizedPrior::Logit(int64_t channel, double v) const {
  FactorizedParams<double> p;
  // Cast only the requested channel's parameters.
  for (int k = 0; k < 4; ++k) {
    const int dout = kFactorizedWidths[k + 1], din = kFactorizedWidths[k];
    auto m = params_.matrices[k].data().subspan(static_cast<size_t>(channel * dout * din),
                                                static_cast<size_t>(dout * din));
    auto b = params_.biases[k].data().subspan(static_cast<size_t>(channel * dout),
                                              static_cast<size_t>(dout));
    p.matrices[k] = Tensor64({1, dout, din}, std::vector<double>(m.begin(), m.end()));
    p.biases[k] = Tensor64({1, dout}, std::vector<double>(b.begin(), b.end()));
    if (k < 3) {
      auto a = params_.factors[k].data().subspan(static_cast<size_t>(channel * dout),
                                                 static_cast<size_t>(dout));
      p.factors[k] = Tensor64({1, dout}, std::vector<double>(a.begin(), a.end()));
    }
  }
  Trace<double> tr;
  return Forward(LoadChannel(p, 0), v, tr);
}

double FactorizedPrior::Cdf(int64_t channel, double v) const { return Sigmoid(Logit(channel, v)); }

void FactorizedPrior::FitQuantiles() {
  ValidateParams(params_);
  const double targets[3] = {tail_mass_ / 2, 0.5, 1 - tail_mass_ / 2};
  auto q = quantiles_.mutable_data();
  for (int64_t c = 0; c < channels(); ++c) {
    for (int j = 0; j < 3; ++j) {
      const double goal = std::log(targets[j] / (1 - targets[j]));
      double lo = -1, hi = 1;
      while (Logit(c, lo) > goal) {
        lo *= 2;
        if (lo < -1e7) throw NumericError("factorized prior: lower tail not reachable");
      }
      while (Logit(c, hi) < goal) {
        hi *= 2;
        if (hi > 1e7) throw NumericError("factorized prior: upper tail not reachable");
      }
      for (int it = 0; it < 200 && hi - lo > 1e-7; ++it) {
        const double mid = 0.5 * (lo + hi);
        (Logit(c, mid) < goal ? lo : hi) = mid;
      }
      q[c * 3 + j] = static_cast<float>(0.5 * (lo + hi));
    }
  }
}

void FactorizedPrior::CheckQuantiles() const {
  ValidateParams(params_);
  const double slack = 1e3 * tail_mass_;
  auto q = quantiles_.data();
  for (int64_t c = 0; c < channels(); ++c) {
    const double lo = q[c * 3], med = q[c * 3 + 1], hi = q[c * 3 + 2];
    if (!(lo < med && med < hi) || Cdf(c, lo) > slack || Sigmoid(-Logit(c, hi)) > slack) {
      throw StateError("factorized prior: quantiles of channel " + std::to_string(c) +
                       " do not bracket the tails; fit them first");
    }
    if (hi - lo > 8192) throw StateError("factorized prior: support of channel " +
                                         std::to_string(c) + " is too wide");
  }
}

std::vector<CdfTable> FactorizedPrior::BuildTables() const {
  CheckQuantiles();
  std::vector<CdfTable> tables;
  auto q = quantiles_.data();
  for (int64_t c = 0; c < channels(); ++c) {
    const int32_t kmin = static_cast<int32_t>(std::floor(q[c * 3]));
    const int32_t kmax = static_cast<int32_t>(std::ceil(q[c * 3 + 2]));
    std::vector<double> pmf(static_cast<size_t>(kmax - kmin + 1));
    for (int32_t k = kmin; k <= kmax; ++k) {
      pmf[static_cast<size_t>(k - kmin)] = BinProbability(Logit(c, k - 0.5), Logit(c, k + 0.5));
    }
    if (kmax > kmin) {
      pmf.front() = Sigmoid(Logit(c, kmin + 0.5));
      pmf.back() = Sigmoid(-Logit(c, kmax - 0.5));
    } else {
      pmf.front() = 1.0;
    }
    tables.push_back(CdfTable::FromPmf(pmf, kmin));
  }
  return tables;
}

std::vector<std::pair<std::string, Tensor*>> FactorizedPrior::NamedDensityParameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (int k = 0; k < 4; ++k) {
    out.emplace_back("matrix" + std::to_string(k), &params_.matrices[k]);
    out.emplace_back("bias" + std::to_string(k), &params_.biases[k]);
    if (k < 3) out.emplace_back("factor" + std::to_string(k), &params_.factors[k]);
  }
  return out;
}

#define JSD_INSTANTIATE(T)                                                                       \
  template BasicTensor<T> Quantize(const BasicTensor<T>&, QuantizerMode, Rng&);                 \
  template BasicTensor<T> GaussianLikelihood(const BasicTensor<T>&, const BasicTensor<T>&);     \
  template BasicTensor<T> RateLoss(const BasicTensor<T>&, const BasicTensor<T>&, int64_t,       \
                                   int64_t);                                                     \
  template BasicTensor<T> FactorizedLikelihood(const BasicTensor<T>&, const FactorizedParams<T>&); \
  template BasicTensor<T> FactorizedAuxLoss(const BasicTensor<T>&, const FactorizedParams<T>&,  \
                                            double);

JSD_INSTANTIATE(float)
JSD_INSTANTIATE(double)
#undef JSD_INSTANTIATE

}  // namespace jsd
