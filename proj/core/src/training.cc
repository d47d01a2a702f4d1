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

#include "jsdseg/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "jsdseg/entropy.h"
#include "jsdseg/errors.h"
#include "jsdseg/metrics.h"
#include "jsdseg/ops.h"
#include "jsdseg/wire.h"

namespace jsd {

namespace {

void RequireAlpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
}

AdamOptions OptionsFrom(const TrainConfig& c) {
  AdamOptions o;
  o.beta1 = c.beta1;
  o.beta2 = c.beta2;
  o.weight_decay = c.weight_decay;
  return o;
}

std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double RdObjective(double distortion, double rate, double alpha) {
  RequireAlpha(alpha);
  return alpha * distortion + (1 - alpha) * rate;
}

Tensor RdObjective(const Tensor& distortion, const Tensor& rate, double alpha) {
  RequireAlpha(alpha);
  return Add(Scale(distortion, static_cast<float>(alpha)), Scale(rate, static_cast<float>(1 - alpha)));
}

Trainer::Trainer(Model& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      main_(model.MainParameters(), OptionsFrom(config)),
      aux_(model.AuxParameters(), OptionsFrom(config)),
      rng_(config.seed * 0x2545F4914F6CDD1Dull + 17) {
  config_.Validate();
  RequireAlpha(model.config().alpha);
}

LossReport Trainer::Step(const Batch& batch) {
  model_.set_training(true);
  const double alpha = model_.config().alpha;
  const int64_t h = batch.images.dim(2), w = batch.images.dim(3);

  ForwardPass f = model_.Forward(batch.images, QuantizerMode::kNoiseProxy, rng_);
  Tensor dist = CrossEntropyLabels(f.logits, batch.labels);
  Tensor rate = RateLoss(f.p_r, f.p_h, h, w);
  Tensor loss = RdObjective(dist, rate, alpha);

  LossReport r;
  r.step = step_;
  r.alpha = alpha;
  r.distortion = dist.item();
  r.rate = rate.item();
  r.loss = loss.item();
  if (!std::isfinite(r.loss)) {
    char msg[256];
    std::snprintf(msg, sizeof msg, "training diverged at step %lld: J=%g J_dist=%g J_rate=%g",
                  (long long)step_, r.loss, r.distortion, r.rate);
    throw NumericError(msg);
  }

  main_.ZeroGrad();
  aux_.ZeroGrad();
  loss.Backward();
  r.grad_norm = ClipGradNorm(main_.params(), config_.clip_norm);
  bool clamped = false;
  r.lr = PolyLr(step_, config_.lr_main, config_.max_steps, 0.9, &clamped);
  if (clamped && !warned_past_schedule_) {
    std::fprintf(stderr, "warning: step %lld is past train.max_steps; main learning rate clamped to 0\n",
                 (long long)step_);
    warned_past_schedule_ = true;
  }
  r.rejected = !main_.Step(r.lr);

  Tensor aux = model_.prior().AuxLoss();
  r.aux_loss = aux.item();
  aux_.ZeroGrad();
  aux.Backward();
  aux_.Step(config_.lr_aux);
  ++step_;
  return r;
}

TrainResult Train(Model& model, const TrainConfig& config, const SyntheticDataset& data,
                  const std::function<void(const LossReport&)>& on_step) {
  Trainer trainer(model, config);
  TrainResult out;
  out.log.reserve(static_cast<size_t>(config.max_steps));
  for (int64_t s = 0; s < config.max_steps; ++s) {
    const Batch b = data.GetBatch(s * config.batch_size, config.batch_size);
    out.log.push_back(trainer.Step(b));
    if (on_step) on_step(out.log.back());
  }
  model.set_training(false);
  model.UpdateEntropyTables();
  return out;
}

EvalResult Evaluate(Model& model, const SyntheticDataset& data, int64_t first, int64_t count,
                    uint64_t noise_seed) {
  model.set_training(false);
  if (!model.tables_ready()) model.UpdateEntropyTables();
  ConfusionMatrix cm(data.classes() + 1, 0);
  EvalResult res;
  Rng rng(noise_seed);
  for (int64_t i = 0; i < count; ++i) {
    const Sample s = data.Get(first + i);
    const Container c = EdgeEncode(model, s.image);
    const Mask m = CloudDecode(model, c);
    cm.Add(s.mask.labels, m.labels);
    const double pixels = double(s.image.height) * double(s.image.width);
    res.image_bpp.push_back(c.bpp());
    res.image_estimated_bpp.push_back(model.EstimateBits(s.image.ToTensor(), rng)[0] / pixels);
  }
  res.miou = cm.MeanIou();
  res.class_iou = cm.ClassIou();
  res.class_iou.erase(res.class_iou.begin());  // label 0 is the ignore label
  for (size_t i = 0; i < res.image_bpp.size(); ++i) {
    res.bpp += res.image_bpp[i] / double(count);
    res.estimated_bpp += res.image_estimated_bpp[i] / double(count);
  }
  return res;
}

std::string FormatLossReport(const LossReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "step=%lld J=%.6f J_dist=%.6f J_rate=%.6f lr=%.6g grad_norm=%.4f aux=%.4g%s",
                (long long)r.step, r.loss, r.distortion, r.rate, r.lr, r.grad_norm, r.aux_loss,
                r.rejected ? " rejected" : "");
  return line;
}

std::vector<RdPoint> ParetoFrontier(std::vector<RdPoint> points) {
  std::vector<RdPoint> keep;
  for (size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < points.size() && !dominated; ++j) {
      if (i == j) continue;
      const auto &a = points[j], &b = points[i];
      const bool no_worse = a.bpp <= b.bpp && a.miou >= b.miou;
      const bool better = a.bpp < b.bpp || a.miou > b.miou;
      // Exact duplicates: keep the first.
      dominated = no_worse && (better || j < i);
    }
    if (!dominated) keep.push_back(points[i]);
  }
  std::sort(keep.begin(), keep.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return keep;
}

double Spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman needs two equal-length series");
  const auto ra = Ranks(a), rb = Ranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace jsd
