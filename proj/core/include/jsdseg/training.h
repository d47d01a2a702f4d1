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

// End-to-end rate-distortion training.

#ifndef JSDSEG_TRAINING_H_
#define JSDSEG_TRAINING_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "jsdseg/config.h"
#include "jsdseg/data.h"
#include "jsdseg/model.h"
#include "jsdseg/optim.h"

namespace jsd {

struct LossReport {
  int64_t step = 0;      // tau before the update
  double loss = 0;       // J = alpha * J_dist + (1 - alpha) * J_rate
  double distortion = 0; // cross-entropy, nats per pixel
  double rate = 0;       // estimated bits per pixel
  double alpha = 0;
  double lr = 0;         // main learning rate used
  double grad_norm = 0;  // global norm before clipping
  double aux_loss = 0;
  bool rejected = false; // main step skipped (non-finite gradient)
};

// alpha * dist + (1 - alpha) * rate; ConfigError unless 0 < alpha < 1.
double RdObjective(double distortion, double rate, double alpha);
Tensor RdObjective(const Tensor& distortion, const Tensor& rate, double alpha);

class Trainer {
 public:
  // The model must outlive the trainer and stay at the same address.
  Trainer(Model& model, const TrainConfig& config);

  // One step of both optimizers. Throws NumericError if J is not finite.
  LossReport Step(const Batch& batch);

  int64_t step() const { return step_; }
  Adam& main_optimizer() { return main_; }
  Adam& aux_optimizer() { return aux_; }

 private:
  Model& model_;
  TrainConfig config_;
  Adam main_, aux_;
  Rng rng_;
  int64_t step_ = 0;
  bool warned_past_schedule_ = false;
};

struct EvalResult {
  double miou = 0;
  double bpp = 0;            // from coded payload bytes
  double estimated_bpp = 0;  // Eq. 1 estimate under the noise proxy
  std::vector<double> image_bpp, image_estimated_bpp;
  std::vector<double> class_iou;  // NaN for classes absent from ground truth
};

// Codes every image through the real container path, decodes it and scores
// the masks. Images [first, first + count) of the dataset.
EvalResult Evaluate(Model& model, const SyntheticDataset& data, int64_t first, int64_t count,
                    uint64_t noise_seed = 7);

struct TrainResult {
  std::vector<LossReport> log;
};

// Runs config.max_steps steps on batches drawn in order from `data`.
// `on_step` (optional) sees every report.
TrainResult Train(Model& model, const TrainConfig& config, const SyntheticDataset& data,
                  const std::function<void(const LossReport&)>& on_step = {});

std::string FormatLossReport(const LossReport& r);

struct RdPoint {
  double alpha = 0, bpp = 0, miou = 0;
};

// Drops every point that another point dominates (bpp <= and mIoU >=, one
// strictly), then sorts by bpp.
std::vector<RdPoint> ParetoFrontier(std::vector<RdPoint> points);
// Spearman rank correlation with average ranks for ties.
double Spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace jsd

#endif  // JSDSEG_TRAINING_H_
