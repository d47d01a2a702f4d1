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

#include "jsdseg/optim.h"

#include <cmath>

#include "jsdseg/errors.h"

namespace jsd {

double PolyLr(int64_t step, double eta0, int64_t max_steps, double power, bool* clamped) {
  if (max_steps <= 0) throw ConfigError("poly lr: max_steps must be positive");
  if (step < 0) throw ConfigError("poly lr: negative step");
  if (clamped) *clamped = step > max_steps;
  if (step >= max_steps) return 0.0;
  return eta0 * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(max_steps), power);
}

double GlobalGradNorm(const std::vector<Tensor*>& params) {
  double sq = 0;
  for (const Tensor* p : params) {
    if (!p->has_grad()) continue;
    for (float g : p->grad()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double ClipGradNorm(const std::vector<Tensor*>& params, double max_norm) {
  const double norm = GlobalGradNorm(params);
  if (norm > max_norm && std::isfinite(norm)) {
    const float factor = static_cast<float>(max_norm / norm);
    for (Tensor* p : params) {
      if (!p->has_grad()) continue;
      for (float& g : p->mutable_grad()) g *= factor;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (Tensor* p : params_) {
    m_.emplace_back(static_cast<size_t>(p->numel()), 0.0f);
    v_.emplace_back(static_cast<size_t>(p->numel()), 0.0f);
  }
}

bool Adam::Step(double lr) {
  for (const Tensor* p : params_) {
    if (!p->has_grad()) continue;
    for (float g : p->grad()) {
      if (!std::isfinite(g)) {
        ++rejected_;
        return false;
      }
    }
  }
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor* p = params_[k];
    if (!p->has_grad()) continue;
    auto w = p->mutable_data();
    auto g = p->grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + options_.weight_decay * w[i];
      m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * gi);
      v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * gi * gi);
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + options_.eps));
    }
  }
  return true;
}

void Adam::ZeroGrad() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace jsd
