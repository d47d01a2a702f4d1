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

#include "jsdseg/networks.h"

#include "jsdseg/entropy.h"
#include "jsdseg/errors.h"

namespace jsd {

namespace {

void RequireImage(const Tensor& x, int64_t channels, const char* what) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw DimensionError(std::string(what) + ": expected (N, " + std::to_string(channels) +
                         ", H, W), got " + ShapeString(x.shape()));
  }
}

Shape AccountRelu(const Shape& s, Meter& meter) {
  AccountElementwise(s, 1, meter);
  return s;
}

}  // namespace

// ---------------------------------------------------------------- Encoder

Encoder::Block Encoder::MakeBlock(int64_t in, int64_t out, int stride, int dilation, Rng& rng) {
  Block b;
  b.a = ConvBn::Make(in, out, 3, {stride, dilation, 1, -1}, rng);
  b.b = ConvBn::Make(out, out, 3, {1, dilation, 1, -1}, rng);
  b.project = stride != 1 || in != out;
  if (b.project) b.shortcut = ConvBn::Make(in, out, 1, {stride, 1, 1, -1}, rng);
  return b;
}

Encoder::Encoder(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const int64_t w = config.encoder_width;
  stem1_ = ConvBn::Make(3, w, 3, {2, 1, 1, -1}, rng);
  stem2_ = ConvBn::Make(w, 2 * w, 3, {2, 1, 1, -1}, rng);
  const int64_t widths[3] = {2 * w, 4 * w, config.latent_channels};
  const int strides[3] = {2, 2, 1};
  const int dilations[3] = {1, 1, 2};
  int64_t in = 2 * w;
  for (int s = 0; s < 3; ++s) {
    blocks_.push_back(MakeBlock(in, widths[s], strides[s], dilations[s], rng));
    blocks_.push_back(MakeBlock(widths[s], widths[s], 1, dilations[s], rng));
    in = widths[s];
  }
}

Tensor Encoder::Forward(const Tensor& x) {
  RequireImage(x, 3, "encoder input");
  if (x.dim(2) % ModelConfig::kStride || x.dim(3) % ModelConfig::kStride) {
    throw ConfigError("encoder: image " + std::to_string(x.dim(2)) + "x" +
                      std::to_string(x.dim(3)) + " is not a multiple of 16; pad it first");
  }
  Tensor y = Relu(stem1_.Forward(x, training_));
  y = Relu(stem2_.Forward(y, training_));
  for (auto& b : blocks_) {
    Tensor t = Relu(b.a.Forward(y, training_));
    t = b.b.Forward(t, training_);
    Tensor skip = b.project ? b.shortcut.Forward(y, training_) : y;
    y = Relu(Add(t, skip));
  }
  return y;
}

void Encoder::Visit(const std::string& prefix, const ParamVisitor& fn) {
  stem1_.Visit(prefix + ".stem1", fn);
  stem2_.Visit(prefix + ".stem2", fn);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    blocks_[i].a.Visit(p + ".a", fn);
    blocks_[i].b.Visit(p + ".b", fn);
    if (blocks_[i].project) blocks_[i].shortcut.Visit(p + ".shortcut", fn);
  }
}

Shape Encoder::Account(const Shape& in, Meter& meter) const {
  Shape s = AccountRelu(stem1_.Account(in, meter), meter);
  s = AccountRelu(stem2_.Account(s, meter), meter);
  for (const auto& b : blocks_) {
    Shape t = AccountRelu(b.a.Account(s, meter), meter);
    t = b.b.Account(t, meter);
    if (b.project) b.shortcut.Account(s, meter);
    AccountElementwise(t, 2, meter);  // add + ReLU
    s = t;
  }
  return s;
}

// ---------------------------------------------------------- SourceEncoder

SourceEncoder::SourceEncoder(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const int64_t f = config.feature_maps;
  const int g = config.groups;
  latent_grouped_ = Conv::Make(config.latent_channels, f, 5, {1, 1, g, -1}, true, rng);
  latent_pointwise_ = Conv::Make(f, f, 1, {}, true, rng);
  hyper1_ = Conv::Make(f, f, 5, {2, 1, g, -1}, true, rng);
  hyper2_ = Conv::Make(f, f, 5, {2, 1, g, -1}, true, rng);
}

Tensor SourceEncoder::Latent(const Tensor& z) const {
  RequireImage(z, latent_grouped_.weight.dim(1) * latent_grouped_.options.groups, "source encoder input");
  return latent_pointwise_.Forward(Relu(latent_grouped_.Forward(z)));
}

Tensor SourceEncoder::Hyper(const Tensor& r) const {
  return hyper2_.Forward(Relu(hyper1_.Forward(Abs(r))));
}

void SourceEncoder::Visit(const std::string& prefix, const ParamVisitor& fn) {
  latent_grouped_.Visit(prefix + ".latent_grouped", fn);
  latent_pointwise_.Visit(prefix + ".latent_pointwise", fn);
  hyper1_.Visit(prefix + ".hyper1", fn);
  hyper2_.Visit(prefix + ".hyper2", fn);
}

Shape SourceEncoder::AccountLatent(const Shape& z, Meter& meter) const {
  return latent_pointwise_.Account(AccountRelu(latent_grouped_.Account(z, meter), meter), meter);
}

Shape SourceEncoder::AccountHyper(const Shape& r, Meter& meter) const {
  AccountElementwise(r, 1, meter);  // |r|
  return hyper2_.Account(AccountRelu(hyper1_.Account(r, meter), meter), meter);
}

// ----------------------------------------------------------- HyperDecoder

HyperDecoder::HyperDecoder(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const int64_t f = config.feature_maps;
  ConvTranspose2dOptions up;
  up.stride = 2;
  up1_ = ConvT::Make(f, f, 1, up, false, rng);
  up2_ = ConvT::Make(f, f, 3, up, false, rng);
  bn1_ = BatchNorm::Make(f);
  bn2_ = BatchNorm::Make(f);
}

Tensor HyperDecoder::Forward(const Tensor& h_hat) {
  RequireImage(h_hat, up1_.weight.dim(0), "hyperprior decoder input");
  Tensor y = Relu(bn1_.Forward(up1_.Forward(h_hat), training_));
  y = Softplus(bn2_.Forward(up2_.Forward(y), training_));
  return LowerBound(y, static_cast<float>(kScaleMin));
}

void HyperDecoder::Visit(const std::string& prefix, const ParamVisitor& fn) {
  up1_.Visit(prefix + ".up1", fn);
  bn1_.Visit(prefix + ".bn1", fn);
  up2_.Visit(prefix + ".up2", fn);
  bn2_.Visit(prefix + ".bn2", fn);
}

Shape HyperDecoder::Account(const Shape& in, Meter& meter) const {
  Shape s = AccountRelu(bn1_.Account(up1_.Account(in, meter), meter), meter);
  s = bn2_.Account(up2_.Account(s, meter), meter);
  AccountElementwise(s, 2, meter);  // softplus + lower bound
  return s;
}

// -------------------------------------------------------------- AsppBlock

AsppBlock AsppBlock::Pointwise(int64_t in, int64_t out, Rng& rng) {
  AsppBlock b;
  b.in_ = in;
  b.out_ = out;
  b.branches_.push_back(ConvBn::Make(in, out, 1, {}, rng));
  return b;
}

AsppBlock AsppBlock::Dilated(int64_t in, int64_t out, int dilation, Rng& rng) {
  if (dilation < 1) throw ConfigError("aspp: dilation must be positive");
  AsppBlock b;
  b.dilation_ = dilation;
  b.in_ = in;
  b.out_ = out;
  b.branches_.push_back(ConvBn::Make(in, out, 3, {1, dilation, 1, -1}, rng));
  return b;
}

void AsppBlock::Overparameterize(int k, Rng& rng) {
  if (overparameterized_) throw StateError("aspp: block is already over-parameterized");
  if (fused_) throw StateError("aspp: cannot over-parameterize a fused block");
  if (k < 1) throw ConfigError("aspp: K must be >= 1");
  for (int i = 1; i < k; ++i) {
    branches_.push_back(pointwise() ? ConvBn::Make(in_, out_, 1, {}, rng)
                                    : ConvBn::Make(in_, out_, 3, {1, dilation_, 1, -1}, rng));
  }
  if (!pointwise()) branches_.push_back(ConvBn::Make(in_, out_, 1, {}, rng));
  overparameterized_ = true;
}

void AsppBlock::Fuse() {
  if (fused_) throw StateError("aspp: block is already fused");
  const int k = pointwise() ? 1 : 3;
  std::vector<double> w(static_cast<size_t>(out_ * in_ * k * k), 0.0), b(static_cast<size_t>(out_), 0.0);
  std::vector<float> scale, shift;
  for (const auto& br : branches_) {
    br.bn.Folded(scale, shift);
    const int kb = br.conv.kernel();
    const int off = (k - kb) / 2;
    auto src = br.conv.weight.data();
    for (int64_t o = 0; o < out_; ++o) {
      b[o] += shift[o];
      for (int64_t c = 0; c < in_; ++c)
        for (int y = 0; y < kb; ++y)
          for (int x = 0; x < kb; ++x) {
            w[((o * in_ + c) * k + y + off) * k + x + off] +=
                double(src[((o * in_ + c) * kb + y) * kb + x]) * scale[o];
          }
    }
  }
  fused_conv_.weight = Tensor({out_, in_, k, k}, std::vector<float>(w.begin(), w.end()));
  fused_conv_.bias = Tensor({out_}, std::vector<float>(b.begin(), b.end()));
  fused_conv_.options = {1, pointwise() ? 1 : dilation_, 1, -1};
  branches_.clear();
  fused_ = true;
}

void AsppBlock::MakeFusedShell() {
  const int k = pointwise() ? 1 : 3;
  fused_conv_.weight = Tensor::Zeros({out_, in_, k, k});
  fused_conv_.bias = Tensor::Zeros({out_});
  fused_conv_.options = {1, pointwise() ? 1 : dilation_, 1, -1};
  branches_.clear();
  fused_ = true;
}

Tensor AsppBlock::Forward(const Tensor& x, bool training) {
  if (fused_) return Relu(fused_conv_.Forward(x));
  Tensor sum = branches_[0].Forward(x, training);
  for (size_t i = 1; i < branches_.size(); ++i) sum = Add(sum, branches_[i].Forward(x, training));
  return Relu(sum);
}

void AsppBlock::Visit(const std::string& prefix, const ParamVisitor& fn) {
  if (fused_) {
    fused_conv_.Visit(prefix + ".fused", fn);
    return;
  }
  for (size_t i = 0; i < branches_.size(); ++i) {
    branches_[i].Visit(prefix + ".branch" + std::to_string(i), fn);
  }
}

Shape AsppBlock::Account(const Shape& in, Meter& meter) const {
  if (fused_) return AccountRelu(fused_conv_.Account(in, meter), meter);
  Shape out;
  for (const auto& br : branches_) out = br.Account(in, meter);
  AccountElementwise(out, static_cast<int64_t>(branches_.size()) - 1, meter);  // branch sum
  return AccountRelu(out, meter);
}

// ----------------------------------------------------------- JointDecoder

JointDecoder::JointDecoder(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const int64_t f = config.feature_maps;
  features_ = f;
  pointwise_ = AsppBlock::Pointwise(f, f, rng);
  for (int d : config.dilations) dilated_.push_back(AsppBlock::Dilated(f, f, d, rng));
  pool_ = ConvBn::Make(f, f, 1, {}, rng);
  const int64_t concat = f * static_cast<int64_t>(dilated_.size() + 2);
  project_ = ConvBn::Make(concat, f, 1, {}, rng);
  refine_ = ConvBn::Make(f, f, 3, {}, rng);
  ConvTranspose2dOptions up;
  up.stride = 2;
  up.groups = config.groups;
  up_ = ConvT::Make(f, f, 5, up, false, rng);
  up_bn_ = BatchNorm::Make(f);
  head_ = ConvBn::Make(f, config.classes, 1, {}, rng);
}

Tensor JointDecoder::Forward(const Tensor& r_hat, int64_t out_h, int64_t out_w) {
  RequireImage(r_hat, features_, "joint decoder input");
  const int64_t h = r_hat.dim(2), w = r_hat.dim(3);
  std::vector<Tensor> parts;
  parts.push_back(pointwise_.Forward(r_hat, training_));
  for (auto& b : dilated_) parts.push_back(b.Forward(r_hat, training_));
  Tensor pooled = Relu(pool_.Forward(GlobalAvgPool(r_hat), training_));
  parts.push_back(UpsampleBilinear(pooled, h, w));
  Tensor y = Relu(project_.Forward(ConcatChannels(parts), training_));
  y = Relu(refine_.Forward(y, training_));
  y = Relu(up_bn_.Forward(up_.Forward(y), training_));
  y = Relu(head_.Forward(y, training_));
  return UpsampleBilinear(y, out_h, out_w);
}

void JointDecoder::Overparameterize(int k, Rng& rng) {
  if (overparameterized()) throw StateError("joint decoder is already over-parameterized");
  pointwise_.Overparameterize(k, rng);
  for (auto& b : dilated_) b.Overparameterize(k, rng);
}

void JointDecoder::Fuse() {
  if (training_) throw StateError("fuse needs evaluation mode (frozen batch-norm statistics)");
  if (fused()) throw StateError("joint decoder is already fused");
  pointwise_.Fuse();
  for (auto& b : dilated_) b.Fuse();
}

void JointDecoder::MakeFusedShell() {
  pointwise_.MakeFusedShell();
  for (auto& b : dilated_) b.MakeFusedShell();
}

void JointDecoder::Visit(const std::string& prefix, const ParamVisitor& fn) {
  pointwise_.Visit(prefix + ".aspp0", fn);
  for (size_t i = 0; i < dilated_.size(); ++i) {
    dilated_[i].Visit(prefix + ".aspp" + std::to_string(i + 1), fn);
  }
  pool_.Visit(prefix + ".pool", fn);
  project_.Visit(prefix + ".project", fn);
  refine_.Visit(prefix + ".refine", fn);
  up_.Visit(prefix + ".up", fn);
  up_bn_.Visit(prefix + ".up_bn", fn);
  head_.Visit(prefix + ".head", fn);
}

Shape JointDecoder::Account(const Shape& in, int64_t out_h, int64_t out_w, Meter& meter) const {
  Shape branch = pointwise_.Account(in, meter);
  for (const auto& b : dilated_) b.Account(in, meter);
  AccountElementwise(in, 1, meter);  // global average pool
  Shape pooled{in[0], in[1], 1, 1};
  AccountRelu(pool_.Account(pooled, meter), meter);
  AccountElementwise(branch, 7, meter);  // resample the pooled branch
  Shape cat{in[0], features_ * static_cast<int64_t>(dilated_.size() + 2), in[2], in[3]};
  Shape s = AccountRelu(project_.Account(cat, meter), meter);
  s = AccountRelu(refine_.Account(s, meter), meter);
  s = AccountRelu(up_bn_.Account(up_.Account(s, meter), meter), meter);
  s = AccountRelu(head_.Account(s, meter), meter);
  Shape out{s[0], s[1], out_h, out_w};
  AccountElementwise(out, 7, meter);
  return out;
}

}  // namespace jsd
