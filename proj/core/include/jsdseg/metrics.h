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

// Segmentation scores and static model accounting.

#ifndef JSDSEG_METRICS_H_
#define JSDSEG_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace jsd {

class Model;

// Counts over label values 0..num_labels-1; rows are ground truth, columns
// prediction. Pixels whose ground truth equals `ignore_label` are skipped
// (pass -1 to score every pixel).
class ConfusionMatrix {
 public:
  ConfusionMatrix(int num_labels, int ignore_label);

  // ValidationError on a size mismatch or a label outside the range.
  void Add(std::span<const uint8_t> truth, std::span<const uint8_t> prediction);
  void Merge(const ConfusionMatrix& other);

  int num_labels() const { return n_; }
  int64_t at(int truth, int prediction) const { return counts_[static_cast<size_t>(truth * n_ + prediction)]; }
  int64_t total() const;

  // TP / (TP + FP + FN) per label; NaN where the label never occurs in the
  // ground truth.
  std::vector<double> ClassIou() const;
  // Mean of the defined class IoUs (0 if none is defined).
  double MeanIou() const;

 private:
  int n_;
  int ignore_;
  std::vector<int64_t> counts_;
};

struct NetworkCost {
  std::string name;
  int64_t params = 0, macs = 0, flops = 0;
};

struct ComplexityReport {
  int64_t height = 0, width = 0;
  std::vector<NetworkCost> rows;  // E, SE, HD, JD, entropy, cdf-tables
  std::string convention;

  const NetworkCost& Row(const std::string& name) const;
  // HD + JD + entropy-model parameters (the CDF tables are derived data and
  // listed separately).
  int64_t CloudParams() const;
  int64_t CloudFlops() const;
  int64_t EdgeParams() const;
  int64_t EdgeFlops() const;
};

ComplexityReport MeasureComplexity(const Model& model, int64_t height, int64_t width);
std::string FormatComplexity(const ComplexityReport& report);
std::string ComplexityCsv(const ComplexityReport& report);

}  // namespace jsd

#endif  // JSDSEG_METRICS_H_
