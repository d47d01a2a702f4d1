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

// The four networks of the split pipeline.
//
//   edge:   x --E--> z --SE--> (r, h)
//   cloud:  h_hat --HD--> sigma,   r_hat --JD--> logits --argmax--> mask
//
// E is a reduced residual backbone with output stride 16. SE keeps r at
// stride 16 and derives the hyper-latent h at stride 64 from |r|. HD maps
// h_hat back to per-element scales for r_hat. JD is an ASPP decoder that
// consumes r_hat directly; no pixel reconstruction exists anywhere.
//
// Every network carries a training flag that selects batch statistics
// (training) or running statistics (evaluation) in its batch norms.

#ifndef JSDSEG_NETWORKS_H_
#define JSDSEG_NETWORKS_H_

#include <string>
#include <vector>

#include "jsdseg/config.h"
#include "jsdseg/layers.h"

namespace jsd {

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, Rng& rng);

  // x (N, 3, H, W) with H, W multiples of 16 -> z (N, C_z, H/16, W/16).
  Tensor Forward(const Tensor& x);
  void set_training(bool on) { training_ = on; }
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;

 private:
  struct Block {
    ConvBn a, b;
    bool project = false;
    ConvBn shortcut;
  };
  static Block MakeBlock(int64_t in, int64_t out, int stride, int dilation, Rng& rng);

  ConvBn stem1_, stem2_;
  std::vector<Block> blocks_;
  bool training_ = true;
};

class SourceEncoder {
 public:
  SourceEncoder() = default;
  SourceEncoder(const ModelConfig& config, Rng& rng);

  // z -> r: grouped 5x5 conv + ReLU, then 1x1 conv. Same spatial size as z.
  Tensor Latent(const Tensor& z) const;
  // r -> h: |r| through two stride-2 grouped 5x5 convs with a ReLU between.
  Tensor Hyper(const Tensor& r) const;
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape AccountLatent(const Shape& z, Meter& meter) const;
  Shape AccountHyper(const Shape& r, Meter& meter) const;

 private:
  Conv latent_grouped_, latent_pointwise_, hyper1_, hyper2_;
};

class HyperDecoder {
 public:
  HyperDecoder() = default;
  HyperDecoder(const ModelConfig& config, Rng& rng);

  // h_hat (N, F, h, w) -> sigma (N, F, 4h, 4w), sigma >= kScaleMin.
  Tensor Forward(const Tensor& h_hat);
  void set_training(bool on) { training_ = on; }
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;

 private:
  ConvT up1_, up2_;
  BatchNorm bn1_, bn2_;
  bool training_ = true;
};

// One ASPP subblock. A pointwise block starts as [1x1 conv + BN] and a
// dilated block as [3x3 dilated conv + BN]; both end in a ReLU.
// Over-parameterization turns a dilated block into K dilated branches plus
// one 1x1 branch and a pointwise block into K 1x1 branches, all summed
// before the ReLU. Fusion folds every branch's batch norm into its kernel
// and sums the kernels (1x1 kernels land on the centre tap) into a single
// biased conv.
class AsppBlock {
 public:
  AsppBlock() = default;
  static AsppBlock Pointwise(int64_t in, int64_t out, Rng& rng);
  static AsppBlock Dilated(int64_t in, int64_t out, int dilation, Rng& rng);

  // StateError if already over-parameterized or fused.
  void Overparameterize(int k, Rng& rng);
  // StateError if already fused. Uses the running statistics.
  void Fuse();
  // Replaces the branches by a zero fused conv of the right shape, to be
  // filled from a fused checkpoint.
  void MakeFusedShell();

  Tensor Forward(const Tensor& x, bool training);
  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, Meter& meter) const;

  bool pointwise() const { return dilation_ == 0; }
  int dilation() const { return dilation_; }
  bool fused() const { return fused_; }
  bool overparameterized() const { return overparameterized_; }
  std::vector<ConvBn>& branches() { return branches_; }
  const Conv& fused_conv() const { return fused_conv_; }

 private:
  int dilation_ = 0;  // 0 marks a pointwise block
  int64_t in_ = 0, out_ = 0;
  std::vector<ConvBn> branches_;
  Conv fused_conv_;
  bool fused_ = false;
  bool overparameterized_ = false;
};

class JointDecoder {
 public:
  JointDecoder() = default;
  JointDecoder(const ModelConfig& config, Rng& rng);

  // r_hat (N, F, h, w) -> logits (N, S, out_h, out_w) before the argmax.
  Tensor Forward(const Tensor& r_hat, int64_t out_h, int64_t out_w);
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  void Overparameterize(int k, Rng& rng);
  // StateError in training mode or when already fused.
  void Fuse();
  void MakeFusedShell();
  bool fused() const { return pointwise_.fused(); }
  bool overparameterized() const { return pointwise_.overparameterized(); }

  void Visit(const std::string& prefix, const ParamVisitor& fn);
  Shape Account(const Shape& in, int64_t out_h, int64_t out_w, Meter& meter) const;

  AsppBlock& pointwise_block() { return pointwise_; }
  std::vector<AsppBlock>& dilated_blocks() { return dilated_; }

 private:
  int64_t features_ = 0;
  AsppBlock pointwise_;
  std::vector<AsppBlock> dilated_;
  ConvBn pool_, project_, refine_;
  ConvT up_;
  BatchNorm up_bn_;
  ConvBn head_;
  bool training_ = true;
};

}  // namespace jsd

#endif  // JSDSEG_NETWORKS_H_
