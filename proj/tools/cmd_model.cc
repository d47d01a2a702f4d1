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

// fuse, bench.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "common.h"
#include "jsdseg/checkpoint.h"
#include "jsdseg/errors.h"
#include "jsdseg/metrics.h"
#include "jsdseg/random.h"

namespace jsd::cli {

void AddFuse(CLI::App& app) {
  struct Opts {
    std::string in, out;
    int trials = 8;
    int size = 64;
    uint64_t seed = 1;
    double tolerance = 1e-4;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("fuse", "fold the over-parameterized ASPP branches into single convolutions");
  cmd->add_option("in", o->in, "over-parameterized checkpoint")->required();
  cmd->add_option("out", o->out, "fused checkpoint")->required();
  cmd->add_option("--trials", o->trials, "random images for the equivalence check")->capture_default_str();
  cmd->add_option("--size", o->size, "side of the check images (multiple of 64)")->capture_default_str();
  cmd->add_option("--seed", o->seed, "seed of the check images")->capture_default_str();
  cmd->add_option("--tolerance", o->tolerance, "max abs logit difference allowed")->capture_default_str();
  cmd->callback([o] {
    if (o->trials < 1 || o->size < 64 || o->size % 64) throw ConfigError("fuse: bad --trials or --size");
    const Checkpoint ck = LoadCheckpoint(o->in);
    if (ck.fused()) throw UsageError(o->in + " is already fused");
    Model reference = Model::FromCheckpoint(ck);
    Model fused = Model::FromCheckpoint(ck);
    if (!reference.tables_ready()) {
      reference.UpdateEntropyTables();
      fused.UpdateEntropyTables();
    }
    fused.Fuse();

    // Both models share E, SE and HD, so the quantized latents are common;
    // only the joint decoder differs.
    Rng rng(o->seed);
    double worst = 0;
    for (int t = 0; t < o->trials; ++t) {
      std::vector<float> px(static_cast<size_t>(3 * o->size * o->size));
      for (auto& v : px) v = float(rng.Uniform());
      const Tensor x({1, 3, o->size, o->size}, std::move(px));
      const QuantizedLatents q = reference.Quantize(x);
      const Tensor a = reference.Segment(q.r, q.r_shape, o->size, o->size);
      const Tensor b = fused.Segment(q.r, q.r_shape, o->size, o->size);
      for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = std::fabs(double(a.data()[i]) - double(b.data()[i]));
        worst = std::isfinite(d) ? std::max(worst, d) : INFINITY;
      }
    }
    std::printf("equivalence: max abs logit difference %.3g over %d images (tolerance %.3g)\n", worst,
                o->trials, o->tolerance);
    if (!(worst <= o->tolerance)) {
      throw NumericError("fused decoder differs by " + std::to_string(worst) + "; not writing " + o->out);
    }
    SaveCheckpoint(o->out, fused.ToCheckpoint());
    std::printf("wrote %s\n", o->out.c_str());
  });
}

void AddBench(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    std::string model, csv;
    int64_t height = 513, width = 513;
    bool unfused = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("bench", "print parameter and FLOP counts per network");
  AddConfigOptions(cmd, &o->cfg, true);
  cmd->add_option("--model,-m", o->model, "measure this checkpoint instead of a fresh model");
  cmd->add_option("--height", o->height, "input height")->capture_default_str();
  cmd->add_option("--width", o->width, "input width")->capture_default_str();
  cmd->add_flag("--unfused", o->unfused, "report the training-time (over-parameterized) decoder");
  cmd->add_option("--csv", o->csv, "also write the report as CSV");
  cmd->callback([o] {
    if (o->height < 1 || o->width < 1) throw ConfigError("bench: bad input size");
    Model model = o->model.empty() ? Model(ResolveConfig(o->cfg).model, 1) : LoadModel(o->model);
    model.set_training(false);
    if (!o->unfused && !model.fused()) model.Fuse();
    const ComplexityReport rep = MeasureComplexity(model, o->height, o->width);
    std::printf("%s", FormatComplexity(rep).c_str());
    if (!o->csv.empty()) WriteFileText(o->csv, ComplexityCsv(rep));
  });
}

}  // namespace jsd::cli
