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

#include "jsdseg/model.h"

#include <cmath>
#include <numbers>
#include <set>

#include "jsdseg/errors.h"
#include "jsdseg/ops.h"

namespace jsd {

namespace {

void RequireImageBatch(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != 3) {
    throw DimensionError("model input must be (N, 3, H, W), got " + ShapeString(x.shape()));
  }
  if (x.dim(2) % ModelConfig::kHyperStride || x.dim(3) % ModelConfig::kHyperStride) {
    throw ConfigError("model input " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                      " must be padded to a multiple of 64");
  }
}

NamedArray TableArray(std::string name, const CdfTable& table) {
  NamedArray a;
  a.name = std::move(name);
  a.values.push_back(static_cast<float>(table.offset()));
  for (uint32_t c : table.cumulative()) a.values.push_back(static_cast<float>(c));
  a.shape = {static_cast<int64_t>(a.values.size())};
  return a;
}

CdfTable ArrayTable(const NamedArray& a) {
  if (a.values.size() < 3) throw DataError("checkpoint: CDF array " + a.name + " is too short");
  std::vector<uint32_t> cumulative;
  for (size_t i = 1; i < a.values.size(); ++i) {
    const float v = a.values[i];
    if (!(v >= 0 && v <= float(kCdfTotal)) || v != std::floor(v)) {
      throw DataError("checkpoint: CDF array " + a.name + " holds a non-integer count");
    }
    cumulative.push_back(static_cast<uint32_t>(v));
  }
  try {
    return CdfTable(std::move(cumulative), static_cast<int32_t>(a.values[0]));
  } catch (const Error& e) {
    throw DataError("checkpoint: CDF array " + a.name + ": " + e.what());
  }
}

}  // namespace

Model::Model(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  Rng rng(seed);
  e_ = Encoder(config_, rng);
  se_ = SourceEncoder(config_, rng);
  hd_ = HyperDecoder(config_, rng);
  jd_ = JointDecoder(config_, rng);
  jd_.Overparameterize(config_.overparam_k, rng);
  prior_ = FactorizedPrior(config_.feature_maps, rng);
  MarkTrainable();
}

void Model::MarkTrainable() {
  Visit([](const std::string&, Tensor& t, ParamKind kind) {
    if (kind == ParamKind::kWeight) t.set_requires_grad(true);
  });
}

void Model::set_training(bool on) {
  training_ = on;
  e_.set_training(on);
  hd_.set_training(on);
  jd_.set_training(on);
}

ForwardPass Model::Forward(const Tensor& x, QuantizerMode mode, Rng& rng) {
  RequireImageBatch(x);
  ForwardPass f;
  f.z = e_.Forward(x);
  f.r = se_.Latent(f.z);
  f.h = se_.Hyper(f.r);
  f.h_hat = jsd::Quantize(f.h, mode, rng);
  f.p_h = prior_.Likelihood(f.h_hat);
  f.sigma = hd_.Forward(f.h_hat);
  f.r_hat = jsd::Quantize(f.r, mode, rng);
  f.p_r = GaussianLikelihood(f.r_hat, f.sigma);
  f.logits = jd_.Forward(f.r_hat, x.dim(2), x.dim(3));
  return f;
}

void Model::Visit(const ParamVisitor& fn) {
  e_.Visit("e", fn);
  se_.Visit("se", fn);
  hd_.Visit("hd", fn);
  jd_.Visit("jd", fn);
  for (auto& [name, t] : prior_.NamedDensityParameters()) fn("prior." + name, *t, ParamKind::kWeight);
  fn("prior.quantiles", prior_.quantiles(), ParamKind::kWeight);
}

std::vector<Tensor*> Model::MainParameters() {
  std::vector<Tensor*> out;
  Tensor* quantiles = &prior_.quantiles();
  Visit([&](const std::string&, Tensor& t, ParamKind kind) {
    if (kind == ParamKind::kWeight && &t != quantiles) out.push_back(&t);
  });
  return out;
}

std::vector<Tensor*> Model::AuxParameters() { return {&prior_.quantiles()}; }

void Model::Fuse() {
  if (training_) throw StateError("fuse needs evaluation mode");
  jd_.Fuse();
  MarkTrainable();
}

void Model::UpdateEntropyTables() {
  prior_.FitQuantiles();
  prior_.CheckQuantiles();
  hyper_tables_ = prior_.BuildTables();
}

const std::vector<CdfTable>& Model::hyper_tables() const {
  if (hyper_tables_.empty()) throw StateError("entropy tables are not built (no trained model loaded)");
  return hyper_tables_;
}

void Model::RequireInference() const {
  if (training_) throw StateError("inference needs evaluation mode");
  if (hyper_tables_.empty()) throw StateError("entropy tables are not built (no trained model loaded)");
}

void Model::Analyze(const Tensor& x, Tensor* r, Tensor* h) {
  RequireInference();
  RequireImageBatch(x);
  if (x.dim(0) != 1) throw DimensionError("inference takes one image at a time");
  NoGradGuard no_grad;
  *r = se_.Latent(e_.Forward(x));
  *h = se_.Hyper(*r);
}

std::vector<int32_t> Model::QuantizeHyper(const Tensor& h) const {
  RequireInference();
  const int64_t c = h.dim(1), plane = h.dim(2) * h.dim(3);
  std::vector<int32_t> out(static_cast<size_t>(h.numel()));
  auto v = h.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    const CdfTable& t = hyper_tables_[static_cast<size_t>(ch)];
    for (int64_t i = 0; i < plane; ++i) {
      const size_t k = static_cast<size_t>(ch * plane + i);
      if (!std::isfinite(v[k])) throw NumericError("non-finite hyper-latent");
      out[k] = t.Clamp(static_cast<int32_t>(std::lround(v[k])));
    }
  }
  return out;
}

Tensor Model::HyperScales(const std::vector<int32_t>& h_hat, const Shape& h_shape) {
  RequireInference();
  if (NumElements(h_shape) != static_cast<int64_t>(h_hat.size())) {
    throw DimensionError("hyper-latent size does not match its shape");
  }
  std::vector<float> v(h_hat.begin(), h_hat.end());
  NoGradGuard no_grad;
  return hd_.Forward(Tensor(h_shape, std::move(v)));
}

std::vector<uint32_t> Model::ScaleIndices(const Tensor& sigma) const {
  std::vector<uint32_t> out;
  out.reserve(static_cast<size_t>(sigma.numel()));
  for (float s : sigma.data()) out.push_back(static_cast<uint32_t>(conditional_.ScaleIndex(s)));
  return out;
}

std::vector<int32_t> Model::QuantizeLatent(const Tensor& r, const std::vector<uint32_t>& tables) const {
  if (tables.size() != static_cast<size_t>(r.numel())) {
    throw DimensionError("latent and scale grids differ: " + std::to_string(r.numel()) + " vs " +
                         std::to_string(tables.size()));
  }
  std::vector<int32_t> out(tables.size());
  auto v = r.data();
  const auto& t = conditional_.tables();
  for (size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(v[i])) throw NumericError("non-finite latent");
    out[i] = t[tables[i]].Clamp(static_cast<int32_t>(std::lround(v[i])));
  }
  return out;
}

Tensor Model::Segment(const std::vector<int32_t>& r_hat, const Shape& r_shape, int64_t height,
                      int64_t width) {
  RequireInference();
  if (NumElements(r_shape) != static_cast<int64_t>(r_hat.size())) {
    throw DimensionError("latent size does not match its shape");
  }
  std::vector<float> v(r_hat.begin(), r_hat.end());
  NoGradGuard no_grad;
  return jd_.Forward(Tensor(r_shape, std::move(v)), height, width);
}

QuantizedLatents Model::Quantize(const Tensor& x) {
  Tensor r, h;
  Analyze(x, &r, &h);
  QuantizedLatents q;
  q.h_shape = h.shape();
  q.r_shape = r.shape();
  q.h = QuantizeHyper(h);
  const Tensor sigma = HyperScales(q.h, q.h_shape);
  if (sigma.shape() != q.r_shape) {
    throw DimensionError("scale grid " + ShapeString(sigma.shape()) + " does not match latent " +
                         ShapeString(q.r_shape));
  }
  q.r_tables = ScaleIndices(sigma);
  q.r = QuantizeLatent(r, q.r_tables);
  return q;
}

std::vector<double> Model::EstimateBits(const Tensor& x, Rng& rng) {
  if (training_) throw StateError("rate estimate needs evaluation mode");
  NoGradGuard no_grad;
  const ForwardPass f = Forward(x, QuantizerMode::kNoiseProxy, rng);
  const int64_t n = x.dim(0);
  std::vector<double> bits(static_cast<size_t>(n), 0.0);
  for (const Tensor* p : {&f.p_r, &f.p_h}) {
    const int64_t per = p->numel() / n;
    auto v = p->data();
    for (int64_t i = 0; i < p->numel(); ++i) bits[static_cast<size_t>(i / per)] -= std::log2(double(v[i]));
  }
  return bits;
}

Checkpoint Model::ToCheckpoint() const {
  Checkpoint ck;
  ck.flags = fused() ? kCheckpointFusedFlag : 0;
  ck.metadata = DumpModelConfig(config_);
  const_cast<Model*>(this)->Visit(
      [&](const std::string& name, Tensor& t, ParamKind) { ck.Put(name, t); });
  for (size_t c = 0; c < hyper_tables_.size(); ++c) {
    ck.Put(TableArray("cdf.h." + std::to_string(c), hyper_tables_[c]));
  }
  const auto& tables = conditional_.tables();
  for (size_t i = 0; i < tables.size(); ++i) {
    ck.Put(TableArray("cdf.r." + std::to_string(i), tables[i]));
  }
  return ck;
}

Model Model::FromCheckpoint(const Checkpoint& ck) {
  Model m(ParseModelConfig(ck.metadata), 0);
  if (ck.fused()) {
    m.jd_.MakeFusedShell();
    m.MarkTrainable();
  }
  std::set<std::string> used;
  m.Visit([&](const std::string& name, Tensor& t, ParamKind) {
    const NamedArray& a = ck.Get(name);
    if (a.shape != t.shape()) {
      throw DataError("checkpoint: " + name + " has shape " + ShapeString(a.shape) + ", model expects " +
                      ShapeString(t.shape()));
    }
    std::copy(a.values.begin(), a.values.end(), t.mutable_data().begin());
    used.insert(name);
  });
  std::vector<CdfTable> hyper;
  for (int64_t c = 0; c < m.config_.feature_maps; ++c) {
    const NamedArray* a = ck.Find("cdf.h." + std::to_string(c));
    if (!a) break;
    hyper.push_back(ArrayTable(*a));
    used.insert(a->name);
  }
  if (!hyper.empty() && static_cast<int64_t>(hyper.size()) != m.config_.feature_maps) {
    throw DataError("checkpoint: incomplete hyper-latent CDF tables");
  }
  std::vector<CdfTable> gaussian;
  for (size_t i = 0; i < m.conditional_.scale_table().size(); ++i) {
    const NamedArray* a = ck.Find("cdf.r." + std::to_string(i));
    if (!a) break;
    gaussian.push_back(ArrayTable(*a));
    used.insert(a->name);
  }
  if (!gaussian.empty()) m.conditional_.set_tables(std::move(gaussian));
  for (const auto& a : ck.arrays) {
    if (!used.count(a.name)) throw DataError("checkpoint: unexpected array " + a.name);
  }
  m.hyper_tables_ = std::move(hyper);
  m.set_training(false);
  return m;
}

}  // namespace jsd
