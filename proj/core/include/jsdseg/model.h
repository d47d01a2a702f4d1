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

// The full codec + task model: E, SE, HD, JD and both entropy models.
//
// Training runs Forward() with the noise proxy. Inference is split into the
// steps the edge and the cloud each perform, so that the in-process pipeline
// and the wire pipeline execute the same code on the same integers:
//
//   edge:  Analyze -> QuantizeHyper -> HyperScales -> ScaleIndices -> QuantizeLatent
//   cloud: (decode h) -> HyperScales -> ScaleIndices -> (decode r) -> Segment

#ifndef JSDSEG_MODEL_H_
#define JSDSEG_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "jsdseg/checkpoint.h"
#include "jsdseg/config.h"
#include "jsdseg/entropy.h"
#include "jsdseg/networks.h"

namespace jsd {

struct ForwardPass {
  Tensor z, r, h;           // continuous
  Tensor r_hat, h_hat;      // quantized (noisy or rounded)
  Tensor sigma, p_r, p_h;   // scales and per-element likelihoods
  Tensor logits;            // (N, S, H, W)
};

// Integer latents of one image as they travel on the wire.
struct QuantizedLatents {
  Shape h_shape, r_shape;  // (1, F, h, w) each
  std::vector<int32_t> h, r;
  std::vector<uint32_t> r_tables;  // scale-table index per r element
};

class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Batch-norm mode of every network.
  void set_training(bool on);
  bool training() const { return training_; }

  // x (N, 3, H, W) in [0, 1], H and W multiples of 64.
  ForwardPass Forward(const Tensor& x, QuantizerMode mode, Rng& rng);

  // Every tensor: networks under "e.", "se.", "hd.", "jd.", the factorized
  // density under "prior.", its quantiles as "prior.quantiles" (a weight).
  void Visit(const ParamVisitor& fn);
  std::vector<Tensor*> MainParameters();  // all weights except the quantiles
  std::vector<Tensor*> AuxParameters();   // the quantiles only

  void Fuse();  // JD ASPP fusion; evaluation mode required
  bool fused() const { return jd_.fused(); }

  // Fits the quantiles and rebuilds the hyper-latent CDF tables. Needed
  // before any inference step below.
  void UpdateEntropyTables();
  bool tables_ready() const { return !hyper_tables_.empty(); }
  const std::vector<CdfTable>& hyper_tables() const;
  const GaussianConditional& conditional() const { return conditional_; }

  // Inference steps. All run without recording a graph and require
  // evaluation mode. Images go in one at a time (N = 1).
  void Analyze(const Tensor& x, Tensor* r, Tensor* h);
  // Rounds and clamps into each channel's table support.
  std::vector<int32_t> QuantizeHyper(const Tensor& h) const;
  Tensor HyperScales(const std::vector<int32_t>& h_hat, const Shape& h_shape);
  std::vector<uint32_t> ScaleIndices(const Tensor& sigma) const;
  std::vector<int32_t> QuantizeLatent(const Tensor& r, const std::vector<uint32_t>& tables) const;
  Tensor Segment(const std::vector<int32_t>& r_hat, const Shape& r_shape, int64_t height,
                 int64_t width);
  QuantizedLatents Quantize(const Tensor& x);

  // Estimated bits of r_hat and h_hat under the noise proxy (Eq. 1 style),
  // per image of the batch, in evaluation mode.
  std::vector<double> EstimateBits(const Tensor& x, Rng& rng);

  Checkpoint ToCheckpoint() const;
  static Model FromCheckpoint(const Checkpoint& checkpoint);

  // Const accessors for accounting.
  const Encoder& encoder() const { return e_; }
  const SourceEncoder& source_encoder() const { return se_; }
  const HyperDecoder& hyper_decoder() const { return hd_; }
  const JointDecoder& joint_decoder() const { return jd_; }
  JointDecoder& joint_decoder() { return jd_; }
  const FactorizedPrior& prior() const { return prior_; }
  FactorizedPrior& prior() { return prior_; }

 private:
  void RequireInference() const;
  void MarkTrainable();

  ModelConfig config_;
  Encoder e_;
  SourceEncoder se_;
  HyperDecoder hd_;
  JointDecoder jd_;
  FactorizedPrior prior_;
  GaussianConditional conditional_;
  std::vector<CdfTable> hyper_tables_;
  bool training_ = true;
};

}  // namespace jsd

#endif  // JSDSEG_MODEL_H_
