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

// Rate-distortion sweeps: one training run plus held-out evaluation per grid
// point, and the CSV table the plot command reads.

#ifndef JSDSEG_SWEEP_H_
#define JSDSEG_SWEEP_H_

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "jsdseg/config.h"
#include "jsdseg/model.h"
#include "jsdseg/training.h"

namespace jsd {

struct SweepGrid {
  std::vector<double> alphas;
  // Empty lists mean "the base config's value".
  std::vector<int> ks, feature_maps;
  std::vector<std::vector<int>> dilation_sets;
};

struct RdRow {
  double alpha = 0;
  int k = 1;
  int feature_maps = 0;
  std::vector<int> dilations;
  double bpp = 0;
  double estimated_bpp = 0;
  double miou = 0;
  int64_t steps = 0;
  double seconds = 0;
};

// Cartesian product, alpha varying fastest. Each config is validated.
std::vector<RunConfig> ExpandGrid(const RunConfig& base, const SweepGrid& grid);

struct SweepRun {
  RdRow row;
  Model model;  // trained, evaluation mode, tables built
};

// Trains from config.train.seed on the training stream and evaluates on the
// first data.eval_images images of the held-out stream.
SweepRun RunSweepPoint(const RunConfig& config,
                       const std::function<void(const LossReport&)>& on_step = {});

std::string FormatRdTable(const std::vector<RdRow>& rows);
// DataError on a malformed table.
std::vector<RdRow> ParseRdTable(std::string_view text);

std::vector<RdPoint> ToRdPoints(const std::vector<RdRow>& rows);

}  // namespace jsd

#endif  // JSDSEG_SWEEP_H_
