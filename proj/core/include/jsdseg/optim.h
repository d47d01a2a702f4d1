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

// Optimizer pieces shared by training and model fitting: Adam with bias
// correction, the polynomial learning-rate schedule and global-norm
// gradient clipping.

#ifndef JSDSEG_OPTIM_H_
#define JSDSEG_OPTIM_H_

#include <cstdint>
#include <vector>

#include "jsdseg/tensor.h"

namespace jsd {

// eta0 * (1 - step / max_steps)^power. Steps past max_steps give 0 and set
// *clamped so the caller can warn.
double PolyLr(int64_t step, double eta0, int64_t max_steps, double power = 0.9,
              bool* clamped = nullptr);

// Euclidean norm over every gradient buffer; parameters without a gradient
// count as zero.
double GlobalGradNorm(const std::vector<Tensor*>& params);

// Rescales all gradients so their global norm is at most max_norm. Returns
// the norm before clipping.
double ClipGradNorm(const std::vector<Tensor*>& params, double max_norm);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor*> params, AdamOptions options = {});

  // Applies one update at learning rate lr. If any gradient is NaN or
  // infinite nothing changes, the rejection counter grows and false is
  // returned.
  bool Step(double lr);
  void ZeroGrad();

  const std::vector<Tensor*>& params() const { return params_; }
  int64_t steps() const { return steps_; }
  int64_t rejected_steps() const { return rejected_; }

 private:
  std::vector<Tensor*> params_;
  AdamOptions options_;
  std::vector<std::vector<float>> m_, v_;
  int64_t steps_ = 0;
  int64_t rejected_ = 0;
};

}  // namespace jsd

#endif  // JSDSEG_OPTIM_H_
