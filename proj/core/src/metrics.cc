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

#include "jsdseg/metrics.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "jsdseg/errors.h"
#include "jsdseg/model.h"

namespace jsd {

ConfusionMatrix::ConfusionMatrix(int num_labels, int ignore_label)
    : n_(num_labels), ignore_(ignore_label), counts_(static_cast<size_t>(num_labels * num_labels), 0) {
  if (num_labels < 1 || num_labels > 256) throw ConfigError("confusion matrix: 1..256 labels");
}

void ConfusionMatrix::Add(std::span<const uint8_t> truth, std::span<const uint8_t> prediction) {
  if (truth.size() != prediction.size()) {
    throw ValidationError("mask sizes differ: " + std::to_string(truth.size()) + " vs " +
                          std::to_string(prediction.size()));
  }
  for (size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = prediction[i];
    if (t == ignore_) continue;
    if (t >= n_ || p >= n_) {
      throw ValidationError("label " + std::to_string(std::max(t, p)) + " outside 0.." + std::to_string(n_ - 1));
    }
    ++counts_[static_cast<size_t>(t * n_ + p)];
  }
}

void ConfusionMatrix::Merge(const ConfusionMatrix& other) {
  if (other.n_ != n_ || other.ignore_ != ignore_) throw ValidationError("merging unlike confusion matrices");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts_) t += c;
  return t;
}

std::vector<double> ConfusionMatrix::ClassIou() const {
  std::vector<double> iou(static_cast<size_t>(n_), std::numeric_limits<double>::quiet_NaN());
  for (int s = 0; s < n_; ++s) {
    int64_t row = 0, col = 0;
    for (int j = 0; j < n_; ++j) {
      row += at(s, j);
      col += at(j, s);
    }
    if (row == 0) continue;
    const int64_t tp = at(s, s);
    iou[static_cast<size_t>(s)] = double(tp) / double(row + col - tp);
  }
  return iou;
}

double ConfusionMatrix::MeanIou() const {
  double sum = 0;
  int n = 0;
  for (double v : ClassIou()) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / n : 0.0;
}

const NetworkCost& ComplexityReport::Row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ConfigError("complexity report has no row " + name);
}

int64_t ComplexityReport::CloudParams() const {
  return Row("HD").params + Row("JD").params + Row("entropy").params;
}
int64_t ComplexityReport::CloudFlops() const { return Row("HD").flops + Row("JD").flops; }
int64_t ComplexityReport::EdgeParams() const {
  return Row("E").params + Row("SE").params + Row("HD").params + Row("entropy").params;
}
int64_t ComplexityReport::EdgeFlops() const {
  return Row("E").flops + Row("SE").flops + Row("HD").flops;
}

ComplexityReport MeasureComplexity(const Model& model, int64_t height, int64_t width) {
  ComplexityReport rep;
  rep.height = height;
  rep.width = width;
  rep.convention =
      "1 MAC = 2 FLOPs; conv bias 1 FLOP/output; BN 2, ReLU/softplus/abs/add 1 FLOP per element; "
      "bilinear 7 FLOPs per output; global average pool 1 FLOP per input; BN running stats are not "
      "parameters";
  Meter e, se, hd, jd;
  const Shape z = model.encoder().Account({1, 3, height, width}, e);
  const Shape r = model.source_encoder().AccountLatent(z, se);
  const Shape h = model.source_encoder().AccountHyper(r, se);
  model.hyper_decoder().Account(h, hd);
  model.joint_decoder().Account(r, height, width, jd);
  auto row = [](std::string name, const Meter& m) { return NetworkCost{std::move(name), m.params, m.macs, m.flops}; };
  rep.rows = {row("E", e), row("SE", se), row("HD", hd), row("JD", jd)};

  NetworkCost entropy{"entropy", 0, 0, 0};
  auto& prior = const_cast<Model&>(model).prior();
  for (auto& [name, t] : prior.NamedDensityParameters()) entropy.params += t->numel();
  entropy.params += prior.quantiles().numel();
  rep.rows.push_back(entropy);

  NetworkCost tables{"cdf-tables", 0, 0, 0};
  if (model.tables_ready()) {
    for (const auto& t : model.hyper_tables()) tables.params += static_cast<int64_t>(t.cumulative().size());
  }
  for (const auto& t : model.conditional().tables()) tables.params += static_cast<int64_t>(t.cumulative().size());
  rep.rows.push_back(tables);
  return rep;
}

std::string FormatComplexity(const ComplexityReport& rep) {
  std::ostringstream out;
  char line[160];
  out << "complexity at " << rep.height << "x" << rep.width << "\n";
  std::snprintf(line, sizeof line, "%-12s %14s %16s %16s\n", "network", "params", "MACs", "FLOPs");
  out << line;
  for (const auto& r : rep.rows) {
    std::snprintf(line, sizeof line, "%-12s %14lld %16lld %16lld\n", r.name.c_str(), (long long)r.params,
                  (long long)r.macs, (long long)r.flops);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-12s %14lld %16s %16lld   (HD + JD + entropy models)\n", "cloud",
                (long long)rep.CloudParams(), "", (long long)rep.CloudFlops());
  out << line;
  std::snprintf(line, sizeof line, "%-12s %14.3f M %14s %14.3f G\n", "cloud", rep.CloudParams() / 1e6, "",
                rep.CloudFlops() / 1e9);
  out << line;
  out << "convention: " << rep.convention << "\n";
  return out.str();
}

std::string ComplexityCsv(const ComplexityReport& rep) {
  std::ostringstream out;
  out << "network,params,macs,flops,height,width\n";
  for (const auto& r : rep.rows) {
    out << r.name << "," << r.params << "," << r.macs << "," << r.flops << "," << rep.height << "," << rep.width
        << "\n";
  }
  out << "cloud," << rep.CloudParams() << ",," << rep.CloudFlops() << "," << rep.height << "," << rep.width << "\n";
  return out.str();
}

}  // namespace jsd
