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

// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0
// once every criterion has been evaluated (the report is the result); with
// --strict it is 1 if any criterion failed. Flags:
//   --only 1,5,9     run a subset
//   --steps N        training steps per sweep run (default 3000)
//   --keep DIR       write the sweep table and checkpoints to DIR

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jsdseg/checkpoint.h"
#include "jsdseg/config.h"
#include "jsdseg/data.h"
#include "jsdseg/entropy.h"
#include "jsdseg/errors.h"
#include "jsdseg/metrics.h"
#include "jsdseg/model.h"
#include "jsdseg/networks.h"
#include "jsdseg/ops.h"
#include "jsdseg/optim.h"
#include "jsdseg/range_coder.h"
#include "jsdseg/sweep.h"
#include "jsdseg/training.h"
#include "jsdseg/wire.h"
#include "test_util.h"

namespace jsd {
namespace {

using testing::GradCheck;
using testing::MaxAbsDiff;
using testing::RandomTensor;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

double Seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ------------------------------------------------------------------ 1

Outcome RangeCoderLossless() {
  const auto t0 = Clock::now();
  Rng rng(20261015);
  constexpr int kSequences = 10000;
  constexpr int64_t kMaxLen = 100000;
  int64_t symbols = 0, long_runs = 0, mismatches = 0, over_bound = 0;
  double worst_excess = -1e300;  // coded bits - (1.02 * ideal + 64), long runs
  for (int s = 0; s < kSequences; ++s) {
    // Random tables: 1..64 symbols, skewed masses, random offsets.
    std::vector<CdfTable> pool(static_cast<size_t>(rng.UniformInt(1, 6)));
    for (auto& t : pool) {
      std::vector<double> pmf(static_cast<size_t>(rng.UniformInt(1, 64)));
      const double skew = rng.Uniform(0.5, 4.0);
      for (auto& p : pmf) p = std::pow(rng.Uniform(), skew) + 1e-9;
      t = CdfTable::FromPmf(pmf, static_cast<int32_t>(rng.UniformInt(-40, 10)));
    }
    // Lengths: the two ends of the range, otherwise log-uniform over it.
    int64_t n;
    if (s == 0) n = 0;
    else if (s == 1) n = kMaxLen;
    else n = std::min<int64_t>(kMaxLen, int64_t(std::exp(rng.Uniform(0, std::log(double(kMaxLen + 1))))) - 1);
    n = std::max<int64_t>(n, 0);
    std::vector<int32_t> v(static_cast<size_t>(n));
    std::vector<const CdfTable*> tables(static_cast<size_t>(n));
    double ideal = 0;
    for (int64_t i = 0; i < n; ++i) {
      const CdfTable* t = &pool[static_cast<size_t>(rng.UniformInt(0, int64_t(pool.size()) - 1))];
      const uint32_t u = static_cast<uint32_t>(rng.UniformInt(0, kCdfTotal - 1));
      tables[i] = t;
      v[i] = t->offset() + static_cast<int32_t>(t->Find(u));
      ideal -= std::log2(double(t->Frequency(t->Find(u))) / double(kCdfTotal));
    }
    const CodedBuffer buf = RangeEncode(v, tables);
    if (RangeDecode(buf.bytes, tables, size_t(n)) != v) ++mismatches;
    symbols += n;
    if (n >= 10000) {
      ++long_runs;
      const double excess = 8.0 * double(buf.bytes.size()) - (1.02 * ideal + 64);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 0) ++over_bound;
    }
  }
  const double secs = Seconds(t0);
  Outcome o;
  o.pass = mismatches == 0 && over_bound == 0 && long_runs > 0 && secs < 60;
  o.detail = Fmt("%d sequences, %lld symbols, %lld mismatches; %lld runs with n>=1e4, %lld over 2%%+64 bits "
                 "(worst margin %.1f bits); %.1f s (limit 60)",
                 kSequences, (long long)symbols, (long long)mismatches, (long long)long_runs,
                 (long long)over_bound, -worst_excess, secs);
  return o;
}

// ------------------------------------------------------------------ 2

template <typename Net>
void RandomizeBatchNorms(Net& net, Rng& rng) {
  net.Visit("n", [&](const std::string& name, Tensor& t, ParamKind) {
    auto v = t.mutable_data();
    if (name.ends_with(".gamma")) for (auto& x : v) x = float(rng.Uniform(0.5, 1.5));
    if (name.ends_with(".beta")) for (auto& x : v) x = float(rng.Uniform(-0.5, 0.5));
    if (name.ends_with(".running_mean")) for (auto& x : v) x = float(rng.Uniform(-0.3, 0.3));
    if (name.ends_with(".running_var")) for (auto& x : v) x = float(rng.Uniform(0.5, 2.0));
  });
}

Outcome FusionEquivalence() {
  const auto t0 = Clock::now();
  ModelConfig c;  // F = 64, S = 6, G = 4, dilations 5/10/15
  constexpr int kInputs = 100;
  double worst_block = 0, worst_decoder = 0;
  std::vector<std::string> cost_mismatch;

  // Decoder without over-parameterization, fused: the reference cost.
  Meter reference;
  {
    Rng rng(1);
    JointDecoder plain(c, rng);
    plain.set_training(false);
    plain.Fuse();
    plain.Account({1, c.feature_maps, 4, 4}, 64, 64, reference);
  }
  for (int k = 1; k <= 4; ++k) {
    // Single dilated subblocks at each rate.
    for (int d : {5, 10, 15}) {
      Rng rng(1000 * k + d);
      AsppBlock b = AsppBlock::Dilated(c.feature_maps, c.feature_maps, d, rng);
      b.Overparameterize(k, rng);
      for (int i = 0; i < 3; ++i) b.Forward(RandomTensor({4, c.feature_maps, 16, 16}, rng), true);
      RandomizeBatchNorms(b, rng);
      AsppBlock fused = b;
      fused.Fuse();
      for (int i = 0; i < kInputs; ++i) {
        const Tensor x = RandomTensor({1, c.feature_maps, 20, 20}, rng, -2, 2);
        worst_block = std::max(worst_block, MaxAbsDiff(b.Forward(x, false).data(), fused.Forward(x, false).data()));
      }
    }
    // The whole joint decoder with all its ASPP subblocks over-parameterized.
    Rng rng(77 + k);
    JointDecoder jd(c, rng);
    jd.Overparameterize(k, rng);
    for (int i = 0; i < 3; ++i) jd.Forward(RandomTensor({4, c.feature_maps, 4, 4}, rng, -3, 3), 64, 64);
    RandomizeBatchNorms(jd, rng);
    jd.set_training(false);
    JointDecoder fused = jd;
    fused.Fuse();
    for (int i = 0; i < kInputs; ++i) {
      const int64_t side = i % 2 ? 4 : 8;
      Tensor x = RandomTensor({1, c.feature_maps, side, side}, rng, -4, 4);
      if (i % 3 == 0) for (auto& v : x.mutable_data()) v = std::round(v);  // integer latents
      worst_decoder = std::max(worst_decoder, MaxAbsDiff(jd.Forward(x, 16 * side, 16 * side).data(),
                                                         fused.Forward(x, 16 * side, 16 * side).data()));
    }
    Meter m;
    fused.Account({1, c.feature_maps, 4, 4}, 64, 64, m);
    if (m.params != reference.params || m.flops != reference.flops) {
      cost_mismatch.push_back(Fmt("K=%d: %lld params / %lld FLOPs", k, (long long)m.params, (long long)m.flops));
    }
  }
  const double secs = Seconds(t0);
  Outcome o;
  o.pass = worst_block <= 1e-4 && worst_decoder <= 1e-4 && cost_mismatch.empty() && secs < 120;
  o.detail = Fmt("max |fused - unfused| %.2e per block (12 K,d pairs x %d inputs), %.2e whole decoder "
                 "(4 K x %d inputs), tol 1e-4; fused cost %lld params / %lld FLOPs for every K%s; %.1f s (limit 120)",
                 worst_block, kInputs, worst_decoder, kInputs, (long long)reference.params,
                 (long long)reference.flops, cost_mismatch.empty() ? "" : " MISMATCH", secs);
  for (const auto& s : cost_mismatch) o.detail += "; " + s;
  return o;
}

// ------------------------------------------------------------------ 3

using T64 = Tensor64;
using Inputs = std::vector<T64>;

T64 AwayFromZero(const Shape& s, Rng& rng) {
  T64 t = RandomTensor<double>(s, rng, 0.1, 1.0);
  for (auto& v : t.mutable_data())
    if (rng.Uniform() < 0.5) v = -v;
  return t;
}

Shape RandomShape(Rng& rng) {
  return {rng.UniformInt(1, 2), rng.UniformInt(1, 3), rng.UniformInt(1, 4), rng.UniformInt(1, 4)};
}

Outcome GradientCorrectness() {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-3;
  constexpr int kTrials = 4;
  std::map<std::string, double> worst;
  Rng rng(31337);
  auto record = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };

  for (int trial = 0; trial < kTrials; ++trial) {
    const Shape s = RandomShape(rng);
    auto R = [&](double lo = -1, double hi = 1) { return RandomTensor<double>(s, rng, lo, hi); };
    record("add", GradCheck([](const Inputs& x) { return Add(x[0], x[1]); }, {R(), R()}));
    record("sub", GradCheck([](const Inputs& x) { return Sub(x[0], x[1]); }, {R(), R()}));
    record("mul", GradCheck([](const Inputs& x) { return Mul(x[0], x[1]); }, {R(), R()}));
    const double f = rng.Uniform(-2, 2);
    record("scale", GradCheck([f](const Inputs& x) { return Scale(x[0], f); }, {R()}));
    record("add_scalar", GradCheck([f](const Inputs& x) { return AddScalar(x[0], f); }, {R()}));
    record("relu", GradCheck([](const Inputs& x) { return Relu(x[0]); }, {AwayFromZero(s, rng)}));
    record("abs", GradCheck([](const Inputs& x) { return Abs(x[0]); }, {AwayFromZero(s, rng)}));
    record("softplus", GradCheck([](const Inputs& x) { return Softplus(x[0]); }, {R(-5, 5)}));
    record("log", GradCheck([](const Inputs& x) { return Log(x[0]); }, {R(0.2, 4)}));
    // Values well clear of the bound on both sides.
    T64 lb = R(0.2, 2);
    for (auto& v : lb.mutable_data())
      if (rng.Uniform() < 0.3) v = rng.Uniform(-1, 0.05);
    record("lower_bound", GradCheck([](const Inputs& x) { return LowerBound(x[0], 0.11); }, {lb}));
    record("reshape", GradCheck([](const Inputs& x) { return x[0].Reshape({x[0].numel()}); }, {R()}));
    record("sum", GradCheck([](const Inputs& x) { return Sum(x[0]); }, {R()}));
    record("mean", GradCheck([](const Inputs& x) { return Mean(x[0]); }, {R()}));
    record("global_avg_pool", GradCheck([](const Inputs& x) { return GlobalAvgPool(x[0]); }, {R()}));

    // Convolutions over random geometry.
    {
      const int groups = int(rng.UniformInt(1, 2));
      const int64_t cin = groups * rng.UniformInt(1, 2), fout = groups * rng.UniformInt(1, 2);
      const int64_t k = rng.UniformInt(0, 2) * 2 + 1;
      Conv2dOptions o{int(rng.UniformInt(1, 2)), int(rng.UniformInt(1, 2)), groups, -1};
      const int64_t h = rng.UniformInt(3, 6), w = rng.UniformInt(3, 6);
      record("conv2d", GradCheck([o](const Inputs& x) { return Conv2d(x[0], x[1], x[2], o); },
                                 {RandomTensor<double>({2, cin, h, w}, rng),
                                  RandomTensor<double>({fout, cin / groups, k, k}, rng),
                                  RandomTensor<double>({fout}, rng)}));
      ConvTranspose2dOptions t;
      t.stride = int(rng.UniformInt(1, 2));
      t.groups = groups;
      t.dilation = int(rng.UniformInt(1, 2));
      record("conv_transpose2d",
             GradCheck([t](const Inputs& x) { return ConvTranspose2d(x[0], x[1], x[2], t); },
                       {RandomTensor<double>({2, cin, rng.UniformInt(2, 4), rng.UniformInt(2, 4)}, rng),
                        RandomTensor<double>({cin, fout / groups, k, k}, rng),
                        RandomTensor<double>({fout}, rng)}));
    }
    for (bool training : {true, false}) {
      const int64_t ch = rng.UniformInt(1, 3);
      T64 mean = RandomTensor<double>({ch}, rng), var = RandomTensor<double>({ch}, rng, 0.5, 2);
      record(training ? "batch_norm_train" : "batch_norm_eval",
             GradCheck([&](const Inputs& x) { return BatchNorm2d(x[0], x[1], x[2], mean, var, 1e-5, 0.1, training); },
                       {RandomTensor<double>({2, ch, rng.UniformInt(2, 3), rng.UniformInt(2, 3)}, rng),
                        RandomTensor<double>({ch}, rng, 0.5, 2), RandomTensor<double>({ch}, rng)}));
    }
    {
      const int64_t oh = rng.UniformInt(1, 9), ow = rng.UniformInt(1, 9);
      record("upsample_bilinear",
             GradCheck([oh, ow](const Inputs& x) { return UpsampleBilinear(x[0], oh, ow); }, {R()}));
      T64 other = RandomTensor<double>({s[0], rng.UniformInt(1, 3), s[2], s[3]}, rng);
      record("concat_channels", GradCheck([](const Inputs& x) { return ConcatChannels<double>({x[0], x[1]}); },
                                          {R(), other}));
      record("softmax_channels", GradCheck([](const Inputs& x) { return SoftmaxChannels(x[0]); }, {R(-3, 3)}));
      std::vector<int32_t> labels(static_cast<size_t>(s[0] * s[2] * s[3]));
      for (auto& l : labels) l = int32_t(rng.UniformInt(0, s[1]));  // 0 = ignored
      record("cross_entropy_labels",
             GradCheck([&](const Inputs& x) { return CrossEntropyLabels(x[0], labels); }, {R(-2, 2)}));
      T64 onehot = T64::Zeros(s);
      const int64_t hw = s[2] * s[3];
      for (int64_t n = 0; n < s[0]; ++n)
        for (int64_t i = 0; i < hw; ++i) onehot.mutable_data()[(n * s[1] + rng.UniformInt(0, s[1] - 1)) * hw + i] = 1;
      record("cross_entropy_one_hot",
             GradCheck([&](const Inputs& x) { return CrossEntropyOneHot(x[0], onehot); }, {R(-2, 2)}));
    }
    {
      T64 v = AwayFromZero(s, rng);
      for (auto& x : v.mutable_data()) x *= 3;
      record("gaussian_likelihood",
             GradCheck([](const Inputs& x) { return GaussianLikelihood(x[0], x[1]); }, {v, R(0.3, 3)}));
      const Shape sh{s[0], rng.UniformInt(1, 2), rng.UniformInt(1, 2), rng.UniformInt(1, 2)};
      record("rate_loss", GradCheck([&](const Inputs& x) { return RateLoss(x[0], x[1], 8, 8); },
                                    {R(0.05, 1), RandomTensor<double>(sh, rng, 0.05, 1)}));
    }
    {
      const int64_t ch = rng.UniformInt(1, 3);
      Inputs in{RandomTensor<double>({rng.UniformInt(1, 2), ch, 2, 2}, rng, -2, 2)};
      for (int k = 0; k < 4; ++k)
        in.push_back(RandomTensor<double>({ch, kFactorizedWidths[k + 1], kFactorizedWidths[k]}, rng));
      for (int k = 0; k < 4; ++k) in.push_back(RandomTensor<double>({ch, kFactorizedWidths[k + 1]}, rng, -0.5, 0.5));
      for (int k = 0; k < 3; ++k) in.push_back(RandomTensor<double>({ch, kFactorizedWidths[k + 1]}, rng));
      auto params = [](const Inputs& x) {
        FactorizedParams<double> p;
        for (int k = 0; k < 4; ++k) {
          p.matrices[k] = x[1 + k];
          p.biases[k] = x[5 + k];
          if (k < 3) p.factors[k] = x[9 + k];
        }
        return p;
      };
      record("factorized_likelihood",
             GradCheck([&](const Inputs& x) { return FactorizedLikelihood(x[0], params(x)); }, in));
      const FactorizedParams<double> fixed = params(in);
      T64 q({ch, 3});
      for (int64_t i = 0; i < ch; ++i) {
        q.mutable_data()[i * 3 + 0] = rng.Uniform(-6, -2);
        q.mutable_data()[i * 3 + 1] = rng.Uniform(-0.5, 0.5);
        q.mutable_data()[i * 3 + 2] = rng.Uniform(2, 6);
      }
      record("factorized_aux_loss",
             GradCheck([&](const Inputs& x) { return FactorizedAuxLoss(x[0], fixed, 1e-3); }, {q}));
    }
  }

  // Straight-through ops have no finite-difference derivative; their
  // backward must be exactly the identity.
  {
    T64 x = RandomTensor<double>({2, 3, 2, 2}, rng, -3, 3);
    T64 g = RandomTensor<double>({2, 3, 2, 2}, rng, 0.5, 1.5);
    double err = 0;
    for (int mode = 0; mode < 3; ++mode) {
      x.set_requires_grad(true);
      x.zero_grad();
      Rng noise(mode);
      T64 y = mode == 0 ? RoundStraightThrough(x)
                        : Quantize(x, mode == 1 ? QuantizerMode::kNoiseProxy : QuantizerMode::kRound, noise);
      Sum(Mul(y, g)).Backward();
      for (size_t i = 0; i < g.data().size(); ++i) err = std::max(err, std::abs(x.grad()[i] - g.data()[i]));
    }
    record("straight_through(round,noise)", err);
  }

  double overall = 0;
  std::string names, failing;
  for (const auto& [name, err] : worst) {
    overall = std::max(overall, err);
    if (err > kTol) failing += " " + name + Fmt("=%.2e", err);
  }
  const double secs = Seconds(t0);
  Outcome o;
  o.pass = failing.empty() && secs < 120;
  o.detail = Fmt("%zu ops x %d random shapes, max relative error %.2e (tol 1e-3)%s; %.1f s (limit 120)",
                 worst.size(), kTrials, overall, failing.empty() ? "" : (", failing:" + failing).c_str(), secs);
  return o;
}

// ------------------------------------------------------------------ sweep

struct SweepState {
  std::vector<RdRow> rows;
  std::vector<std::shared_ptr<Model>> models;
  double seconds = 0;
  std::string error;
};

// The four alpha values span the rate range of the desk model; the largest
// one is the quality point criterion 6 (i) asks about.
const std::vector<double> kSweepAlphas{0.5, 0.9, 0.97, 0.99};

RunConfig SweepBase(int64_t steps) {
  RunConfig c = PresetConfig("desk");
  c.train.max_steps = steps;
  c.train.batch_size = 16;
  c.train.lr_main = 5e-3;
  c.train.checkpoint_every = 0;
  return c;
}

SweepState RunSweep(int64_t steps, const std::string& keep) {
  SweepState s;
  const auto t0 = Clock::now();
  try {
    SweepGrid grid;
    grid.alphas = kSweepAlphas;
    const auto configs = ExpandGrid(SweepBase(steps), grid);
    for (size_t i = 0; i < configs.size(); ++i) {
      const auto ti = Clock::now();
      SweepRun run = RunSweepPoint(configs[i]);
      std::fprintf(stderr, "  sweep alpha=%g: bpp %.5f (estimate %.5f) mIoU %.4f, %.0f s\n", run.row.alpha,
                   run.row.bpp, run.row.estimated_bpp, run.row.miou, Seconds(ti));
      s.rows.push_back(run.row);
      s.models.push_back(std::make_shared<Model>(std::move(run.model)));
      if (!keep.empty()) {
        std::filesystem::create_directories(keep);
        SaveCheckpoint(keep + Fmt("/alpha_%g.ckpt", run.row.alpha), s.models.back()->ToCheckpoint());
      }
    }
    if (!keep.empty()) {
      std::FILE* f = std::fopen((keep + "/rd.csv").c_str(), "w");
      if (f) {
        std::fputs(FormatRdTable(s.rows).c_str(), f);
        std::fclose(f);
      }
    }
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  s.seconds = Seconds(t0);
  return s;
}

// ------------------------------------------------------------------ 4

Outcome RateConsistency(const SweepState& sweep) {
  if (!sweep.error.empty()) return {false, "sweep failed: " + sweep.error};
  // Highest-alpha model, fresh evaluation over the 50 held-out images.
  const RunConfig c = SweepBase(1);
  Model& model = *sweep.models.back();
  const SyntheticDataset held_out(c.data.image_size, c.model.classes, c.data.noise_level, c.data.eval_seed);
  const EvalResult ev = Evaluate(model, held_out, 0, 50);
  const double rel = std::abs(ev.estimated_bpp - ev.bpp) / ev.bpp;
  double per_image = 0;
  for (size_t i = 0; i < ev.image_bpp.size(); ++i) {
    per_image += std::abs(ev.image_estimated_bpp[i] - ev.image_bpp[i]) / ev.image_bpp[i] / double(ev.image_bpp.size());
  }
  Outcome o;
  o.pass = rel <= 0.10;
  o.detail = Fmt("alpha=%g model, 50 images: estimated %.5f bpp vs coded %.5f bpp, relative gap %.2f%% "
                 "(limit 10%%); mean per-image gap %.2f%%",
                 model.config().alpha, ev.estimated_bpp, ev.bpp, 100 * rel, 100 * per_image);
  return o;
}

// ------------------------------------------------------------------ 5

Image RandomImage(Rng& rng, int index, const SyntheticDataset& synth) {
  if (index % 2 == 0) {
    // Synthetic scene, cropped to a random size (exercises edge padding).
    const Sample s = synth.Get(index);
    const int64_t h = rng.UniformInt(33, s.image.height), w = rng.UniformInt(33, s.image.width);
    Image img(h, w);
    for (int c = 0; c < 3; ++c)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) img.at(c, y, x) = s.image.at(c, y, x);
    return img;
  }
  Image img(rng.UniformInt(16, 150), rng.UniformInt(16, 150));
  for (auto& v : img.data) v = float(rng.Uniform());
  return img;
}

Outcome SplitEqualsMonolith(const SweepState& sweep) {
  if (!sweep.error.empty()) return {false, "sweep failed: " + sweep.error};
  // Highest-alpha model; the sweep models all share model_id 1.
  auto registry = std::make_shared<ModelRegistry>();
  std::shared_ptr<Model> model = sweep.models.back();
  registry->Add(model);
  ServeConfig sc;
  sc.listen = "127.0.0.1:0";
  sc.workers = 4;
  Server server(registry, sc);
  server.Start();
  const std::string addr = "127.0.0.1:" + std::to_string(server.port());

  Rng rng(5150);
  const SyntheticDataset synth(128, model->config().classes, 0.03, 4242);
  int equal = 0, local_equal = 0;
  {
    Client client(addr);
    for (int i = 0; i < 50; ++i) {
      const Image img = RandomImage(rng, i, synth);
      const Mask monolith = SegmentImage(*model, img);
      const Container c = EdgeEncode(*model, img);
      const Response r = client.Segment(ParseContainer(SerializeContainer(c)));
      if (r.status == ResponseStatus::kOk && r.mask == monolith) ++equal;
      if (CloudDecode(*model, c) == monolith) ++local_equal;
    }
  }

  // Error paths, each on a fresh connection after the previous one.
  const Image probe = RandomImage(rng, 0, synth);
  const Container good = EdgeEncode(*model, probe);
  std::vector<uint8_t> bytes = SerializeContainer(good);
  std::vector<std::string> problems;
  auto expect = [&](const std::string& what, std::span<const uint8_t> frame, ResponseStatus want) {
    Client client(addr);
    const Response r = ParseResponse(client.Exchange(frame));
    if (r.status != want) problems.push_back(what + Fmt(": status %d", int(r.status)));
  };
  std::vector<uint8_t> corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x5A;  // payload byte, CRC now wrong
  expect("corrupted payload", corrupt, ResponseStatus::kMalformed);
  std::vector<uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  expect("bad magic", bad_magic, ResponseStatus::kMalformed);
  expect("truncated", std::span<const uint8_t>(bytes).first(bytes.size() - 7), ResponseStatus::kMalformed);
  expect("empty frame", std::span<const uint8_t>(), ResponseStatus::kMalformed);
  Container unknown = good;
  unknown.model_id = 4321;
  expect("unknown model", SerializeContainer(unknown), ResponseStatus::kUnknownModel);
  // Still serving afterwards.
  {
    Client client(addr);
    const Response r = client.Segment(good);
    if (r.status != ResponseStatus::kOk || !(r.mask == SegmentImage(*model, probe))) {
      problems.push_back("server unusable after error requests");
    }
  }
  server.Stop();

  Outcome o;
  o.pass = equal == 50 && local_equal == 50 && problems.empty();
  o.detail = Fmt("%d/50 server masks and %d/50 in-process split masks bitwise equal to the monolith; "
                 "corrupted, bad-magic, truncated, empty and unknown-model requests %s",
                 equal, local_equal, problems.empty() ? "all answered with protocol errors, server kept serving" : "FAILED:");
  for (const auto& p : problems) o.detail += " " + p + ";";
  return o;
}

// ------------------------------------------------------------------ 6

Outcome SweepBehaviour(const SweepState& sweep, int64_t steps) {
  if (!sweep.error.empty()) return {false, "sweep failed: " + sweep.error};
  const RdRow& top = sweep.rows.back();
  const auto front = ParetoFrontier(ToRdPoints(sweep.rows));
  bool monotone = !front.empty();
  for (size_t i = 1; i < front.size(); ++i) {
    monotone = monotone && front[i].bpp > front[i - 1].bpp && front[i].miou >= front[i - 1].miou;
  }
  std::vector<double> bpp, miou;
  std::string table;
  for (const auto& r : sweep.rows) {
    bpp.push_back(r.bpp);
    miou.push_back(r.miou);
    table += Fmt(" (%g: %.4f bpp, %.4f)", r.alpha, r.bpp, r.miou);
  }
  const double rho = Spearman(bpp, miou);
  const bool budget = steps <= 3000 && sweep.seconds < 3600;
  Outcome o;
  o.pass = top.miou >= 0.90 && monotone && rho >= 0.7 && budget;
  o.detail = Fmt("(i) alpha=%g mIoU %.4f (>= 0.90); (ii) Pareto front %zu of %zu points, bpp strictly "
                 "increasing and mIoU non-decreasing: %s; (iii) Spearman %.3f (>= 0.7); %lld steps/run, %.1f min "
                 "(limit 60);",
                 top.alpha, top.miou, front.size(), sweep.rows.size(), monotone ? "yes" : "no", rho,
                 (long long)steps, sweep.seconds / 60);
  o.detail += table;
  return o;
}

// ------------------------------------------------------------------ 7

Outcome ComplexityAnchors() {
  auto measure = [](const std::string& preset) {
    Model m(PresetConfig(preset).model, 1);
    m.set_training(false);
    m.Fuse();
    return MeasureComplexity(m, 513, 513);
  };
  const ComplexityReport coco = measure("paper-coco");
  const ComplexityReport city = measure("paper-cityscapes");
  const double coco_params = double(coco.CloudParams()), city_params = double(city.CloudParams());
  const double flops = double(coco.CloudFlops());
  const bool p1 = std::abs(coco_params / 1.66e6 - 1) <= 0.15;
  const bool p2 = std::abs(city_params / 4.92e6 - 1) <= 0.15;
  const bool f1 = flops >= 10e9 / 2 && flops <= 10e9 * 2;
  Outcome o;
  o.pass = p1 && p2 && f1;
  o.detail = Fmt("paper-coco cloud params %.3fM vs 1.66M (%+.1f%%, limit 15%%: %s) [HD %.3fM, JD %.3fM, "
                 "entropy %.4fM]; FLOPs at 513x513 %.2fG vs 10G (factor 2: %s); paper-cityscapes %.3fM vs "
                 "4.92M (%+.1f%%: %s)",
                 coco_params / 1e6, 100 * (coco_params / 1.66e6 - 1), p1 ? "ok" : "out",
                 coco.Row("HD").params / 1e6, coco.Row("JD").params / 1e6, coco.Row("entropy").params / 1e6,
                 flops / 1e9, f1 ? "ok" : "out", city_params / 1e6, 100 * (city_params / 4.92e6 - 1),
                 p2 ? "ok" : "out");
  return o;
}

// ------------------------------------------------------------------ 8

Outcome ScheduleAndOptimizers() {
  std::vector<std::string> problems;
  // poly lr against a long-double evaluation of eta0 (1 - tau/tau_max)^0.9.
  double worst_rel = 0;
  for (int64_t tau_max : {1000, 3000, 80000, 310506}) {
    for (double eta0 : {1e-3, 5e-3, 1e-2}) {
      for (int64_t tau : {int64_t(0), tau_max / 2, tau_max}) {
        const long double want = (long double)eta0 * std::pow(1.0L - (long double)tau / (long double)tau_max, 0.9L);
        const double got = PolyLr(tau, eta0, tau_max);
        const double rel = want == 0 ? (got == 0 ? 0.0 : INFINITY) : double(std::fabs((got - want) / want));
        worst_rel = std::max(worst_rel, rel);
      }
    }
  }
  if (worst_rel > 1e-12) problems.push_back(Fmt("poly lr off by %.2e", worst_rel));

  // Clipping on a synthetic gradient of norm 10.
  Tensor a({3}), b({1});
  a.mutable_grad()[0] = 6;
  b.mutable_grad()[0] = 8;
  std::vector<Tensor*> ab{&a, &b};
  const double pre = ClipGradNorm(ab, 1.0);
  const double post = GlobalGradNorm(ab);
  if (std::abs(pre - 10) > 1e-12 || std::abs(post - 1) > 1e-6) problems.push_back("clip of norm-10 gradient");

  // Inside the trainer: gradients left after a step carry the clipped norm.
  RunConfig rc = SweepBase(10);
  rc.model.feature_maps = 16;
  rc.model.latent_channels = 32;
  rc.model.encoder_width = 8;
  const SyntheticDataset data(64, rc.model.classes, 0.03, 11);
  const Batch batch = data.GetBatch(0, 4);
  Model m(rc.model, 3);
  double trainer_pre = 0, trainer_post = 0;
  {
    Trainer t(m, rc.train);
    if (rc.train.clip_norm != 1.0) problems.push_back("default clip norm is not 1.0");
    const LossReport r = t.Step(batch);
    trainer_pre = r.grad_norm;
    trainer_post = GlobalGradNorm(t.main_optimizer().params());
    if (!(trainer_pre > 1.0) || std::abs(trainer_post - 1.0) > 1e-4) problems.push_back("trainer clip");
  }

  // Partition: aux owns exactly the quantiles, main everything else that is a weight.
  const std::vector<Tensor*> main_list = m.MainParameters(), aux_list = m.AuxParameters();
  std::set<const Tensor*> main(main_list.begin(), main_list.end());
  std::set<const Tensor*> aux(aux_list.begin(), aux_list.end());
  std::set<const Tensor*> weights;
  const Tensor* quantiles = nullptr;
  m.Visit([&](const std::string& name, Tensor& t, ParamKind kind) {
    if (kind == ParamKind::kWeight) weights.insert(&t);
    if (name == "prior.quantiles") quantiles = &t;
  });
  std::set<const Tensor*> both;
  for (auto* p : main) if (aux.count(p)) both.insert(p);
  std::set<const Tensor*> all = main;
  all.insert(aux.begin(), aux.end());
  if (!both.empty() || all != weights || aux.size() != 1 || *aux.begin() != quantiles) {
    problems.push_back("parameter sets");
  }
  // Each optimizer alone moves only its own tensors.
  auto snapshot = [&] {
    std::map<const Tensor*, std::vector<float>> s;
    for (auto* p : all) s[p] = std::vector<float>(p->data().begin(), p->data().end());
    return s;
  };
  auto moved = [&](const std::map<const Tensor*, std::vector<float>>& before, const std::set<const Tensor*>& set) {
    int64_t n = 0;
    for (auto* p : set) n += !std::equal(before.at(p).begin(), before.at(p).end(), p->data().begin());
    return n;
  };
  int64_t main_moved_aux_only = 0, aux_moved_aux_only = 0, main_moved_main_only = 0, aux_moved_main_only = 0;
  {
    TrainConfig tc = rc.train;
    tc.lr_main = 1e-30;  // below float resolution of every weight
    Trainer t(m, tc);
    const auto before = snapshot();
    t.Step(batch);
    main_moved_aux_only = moved(before, main);
    aux_moved_aux_only = moved(before, aux);
  }
  {
    TrainConfig tc = rc.train;
    tc.lr_aux = 1e-30;
    Trainer t(m, tc);
    const auto before = snapshot();
    t.Step(batch);
    main_moved_main_only = moved(before, main);
    aux_moved_main_only = moved(before, aux);
  }
  if (main_moved_aux_only != 0 || aux_moved_aux_only != 1 || aux_moved_main_only != 0 ||
      main_moved_main_only < int64_t(main.size()) / 2) {
    problems.push_back("optimizer partition");
  }

  Outcome o;
  o.pass = problems.empty();
  o.detail = Fmt("poly lr max relative error %.1e (tol 1e-12) at tau in {0, max/2, max}; clip 10 -> %.6f; "
                 "trainer step norm %.3f -> %.6f; %zu main / %zu aux tensors, disjoint, aux = prior.quantiles; "
                 "aux-only step moved %lld main + %lld aux, main-only step moved %lld main + %lld aux",
                 worst_rel, post, trainer_pre, trainer_post, main.size(), aux.size(),
                 (long long)main_moved_aux_only, (long long)aux_moved_aux_only, (long long)main_moved_main_only,
                 (long long)aux_moved_main_only);
  for (const auto& p : problems) o.detail += "; FAILED " + p;
  return o;
}

// ------------------------------------------------------------------ 9

// Set-based IoU: for each class present in the (non-ignored) ground truth,
// |{i : gt=s} n {i : pred=s}| / |{i : gt=s} u {i : pred=s}|, ignored pixels removed
// from both sets; mean over those classes.
double OracleMeanIou(const std::vector<uint8_t>& gt, const std::vector<uint8_t>& pred, int classes) {
  double sum = 0;
  int count = 0;
  for (int s = 1; s <= classes; ++s) {
    std::set<size_t> g, p;
    for (size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == 0) continue;
      if (gt[i] == s) g.insert(i);
      if (pred[i] == s) p.insert(i);
    }
    if (g.empty()) continue;
    std::set<size_t> inter, uni;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::inserter(inter, inter.begin()));
    std::set_union(g.begin(), g.end(), p.begin(), p.end(), std::inserter(uni, uni.begin()));
    sum += double(inter.size()) / double(uni.size());
    ++count;
  }
  return count ? sum / count : 0.0;
}

Outcome MiouOracle() {
  Rng rng(909);
  constexpr int kCases = 10000;
  double worst = 0;
  int64_t disagreements = 0;
  for (int t = 0; t < kCases; ++t) {
    const int classes = int(rng.UniformInt(1, 4));
    std::vector<uint8_t> gt(64), pred(64);
    // Mix of regimes: uniform noise, near-copies, constant masks, ignored pixels.
    const int regime = t % 4;
    const double ignore = regime == 3 ? 0.2 : 0.0;
    for (size_t i = 0; i < 64; ++i) {
      gt[i] = rng.Uniform() < ignore ? 0 : uint8_t(rng.UniformInt(1, classes));
      if (regime == 1) pred[i] = rng.Uniform() < 0.8 ? std::max<uint8_t>(gt[i], 1) : uint8_t(rng.UniformInt(1, classes));
      else pred[i] = uint8_t(rng.UniformInt(1, classes));
    }
    if (regime == 2) std::fill(pred.begin(), pred.end(), uint8_t(rng.UniformInt(1, classes)));
    ConfusionMatrix cm(classes + 1, 0);
    cm.Add(gt, pred);
    const double d = std::abs(cm.MeanIou() - OracleMeanIou(gt, pred, classes));
    worst = std::max(worst, d);
    if (d > 1e-12) ++disagreements;
  }
  Outcome o;
  o.pass = disagreements == 0;
  o.detail = Fmt("%d random 8x8 mask pairs with S in 1..4: %lld disagreements, max |diff| %.1e (tol 1e-12)",
                 kCases, (long long)disagreements, worst);
  return o;
}

}  // namespace
}  // namespace jsd

int main(int argc, char** argv) {
  using namespace jsd;
  std::set<int> only;
  int64_t steps = 3000;
  std::string keep;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::string list = argv[++i];
      for (size_t p = 0; p < list.size();) {
        const size_t q = list.find(',', p);
        only.insert(std::atoi(list.substr(p, q - p).c_str()));
        p = q == std::string::npos ? list.size() : q + 1;
      }
    } else if (a == "--steps" && i + 1 < argc) {
      steps = std::atoll(argv[++i]);
    } else if (a == "--strict") {
      strict = true;
    } else if (a == "--keep" && i + 1 < argc) {
      keep = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...] [--steps N] [--keep DIR] [--strict]\n", argv[0]);
      return 2;
    }
  }
  auto wanted = [&](int c) { return only.empty() || only.count(c); };

  const char* names[] = {"",
                         "range-coder losslessness",
                         "fusion equivalence",
                         "gradient correctness",
                         "rate-model consistency",
                         "split equals monolith",
                         "desk-scale RD behavior",
                         "complexity anchors",
                         "schedule/optimizer conformance",
                         "mIoU oracle equivalence"};
  std::map<int, Outcome> results;
  auto run = [&](int c, const std::function<Outcome()>& fn) {
    if (!wanted(c)) return;
    std::fprintf(stderr, "running criterion %d (%s)\n", c, names[c]);
    try {
      results[c] = fn();
    } catch (const std::exception& e) {
      results[c] = {false, std::string("exception: ") + e.what()};
    }
    std::fprintf(stderr, "  %s\n", results[c].pass ? "pass" : "FAIL");
  };
  run(1, RangeCoderLossless);
  run(2, FusionEquivalence);
  run(3, GradientCorrectness);
  run(7, ComplexityAnchors);
  run(8, ScheduleAndOptimizers);
  run(9, MiouOracle);
  if (wanted(4) || wanted(5) || wanted(6)) {
    std::fprintf(stderr, "training %zu models for criteria 4-6 (%lld steps each)\n", kSweepAlphas.size(),
                 (long long)steps);
    const SweepState sweep = RunSweep(steps, keep);
    run(4, [&] { return RateConsistency(sweep); });
    run(5, [&] { return SplitEqualsMonolith(sweep); });
    run(6, [&] { return SweepBehaviour(sweep, steps); });
  }

  int failed = 0;
  for (const auto& [c, o] : results) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c, names[c], o.detail.c_str());
    failed += !o.pass;
  }
  std::printf("%zu criteria run, %d failed\n", results.size(), failed);
  return strict && failed ? 1 : 0;
}
