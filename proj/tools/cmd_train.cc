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

// gen-data, train, sweep, config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "common.h"
#include "jsdseg/checkpoint.h"
#include "jsdseg/data.h"
#include "jsdseg/errors.h"
#include "jsdseg/image.h"
#include "jsdseg/sweep.h"
#include "jsdseg/training.h"

namespace jsd::cli {

namespace fs = std::filesystem;

namespace {

std::string EvalLine(const EvalResult& ev) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "eval miou=%.4f bpp=%.5f estimated_bpp=%.5f", ev.miou, ev.bpp,
                ev.estimated_bpp);
  return buf;
}

// Copy of a training model in evaluation mode with fresh entropy tables.
Model Snapshot(const Model& model) {
  Model m = Model::FromCheckpoint(model.ToCheckpoint());
  m.UpdateEntropyTables();
  return m;
}

std::string StepCheckpointPath(const std::string& out, int64_t step) {
  fs::path p(out);
  const std::string stem = p.stem().string() + ".step" + std::to_string(step);
  return (p.parent_path() / (stem + p.extension().string())).string();
}

void PrintRows(const std::vector<RdRow>& rows) {
  std::printf("%8s %3s %5s %10s %10s %10s %8s\n", "alpha", "K", "F", "dilations", "bpp", "est_bpp", "miou");
  for (const auto& r : rows) {
    std::string d;
    for (size_t i = 0; i < r.dilations.size(); ++i) d += (i ? "/" : "") + std::to_string(r.dilations[i]);
    std::printf("%8.4g %3d %5d %10s %10.5f %10.5f %8.4f\n", r.alpha, r.k, r.feature_maps, d.c_str(), r.bpp,
                r.estimated_bpp, r.miou);
  }
}

}  // namespace

void AddGenData(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    std::string out;
    int64_t count = 16;
    int64_t first = 0;
    std::string split = "train";
    std::string format = "png";
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-data", "write a seeded synthetic dataset directory");
  AddConfigOptions(cmd, &o->cfg, false);
  cmd->add_option("--out,-o", o->out, "output directory")->required();
  cmd->add_option("--count,-n", o->count, "number of samples")->capture_default_str();
  cmd->add_option("--first", o->first, "index of the first sample")->capture_default_str();
  cmd->add_option("--split", o->split, "train (data.seed) or eval (data.eval_seed)")
      ->check(CLI::IsMember({"train", "eval"}))
      ->capture_default_str();
  cmd->add_option("--format", o->format, "image format")->check(CLI::IsMember({"png", "ppm"}))
      ->capture_default_str();
  cmd->callback([o] {
    const RunConfig c = ResolveConfig(o->cfg);
    if (o->count < 1 || o->first < 0) throw ConfigError("gen-data: --count must be >= 1 and --first >= 0");
    const uint64_t seed = o->split == "train" ? c.data.seed : c.data.eval_seed;
    const SyntheticDataset data(c.data.image_size, c.model.classes, c.data.noise_level, seed);
    fs::create_directories(o->out);
    for (int64_t i = o->first; i < o->first + o->count; ++i) {
      const Sample s = data.Get(i);
      char name[64];
      std::snprintf(name, sizeof name, "image_%06lld.%s", (long long)i, o->format.c_str());
      const std::string img = (fs::path(o->out) / name).string();
      if (o->format == "png") WritePng(img, s.image); else WritePpm(img, s.image);
      std::snprintf(name, sizeof name, "mask_%06lld.png", (long long)i);
      WriteMaskPng((fs::path(o->out) / name).string(), s.mask);
    }
    WriteFileText((fs::path(o->out) / "dataset.cfg").string(),
                  "# split=" + o->split + " first=" + std::to_string(o->first) +
                      " count=" + std::to_string(o->count) + "\n" + DumpRunConfig(c));
    std::printf("wrote %lld samples to %s\n", (long long)o->count, o->out.c_str());
  });
}

void AddTrain(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    std::string out;
    std::string log;
    bool no_eval = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("train", "train one model and write its checkpoint and metrics log");
  AddConfigOptions(cmd, &o->cfg, true);
  cmd->add_option("--out,-o", o->out, "final checkpoint path")->required();
  cmd->add_option("--log", o->log, "metrics log path (default: <out>.log)");
  cmd->add_flag("--no-eval", o->no_eval, "skip the held-out evaluation");
  cmd->callback([o] {
    const RunConfig c = ResolveConfig(o->cfg);
    const std::string log_path = o->log.empty() ? o->out + ".log" : o->log;
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write " + log_path);
    std::stringstream dump(DumpRunConfig(c));
    for (std::string line; std::getline(dump, line);) log << "# " << line << '\n';

    Model model(c.model, c.train.seed);
    const SyntheticDataset data(c.data.image_size, c.model.classes, c.data.noise_level, c.data.seed);
    const int64_t last = c.train.max_steps - 1;
    Train(model, c.train, data, [&](const LossReport& r) {
      if (r.step % c.train.log_every == 0 || r.step == last) {
        const std::string line = FormatLossReport(r);
        log << line << '\n';
        log.flush();
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
      }
      const int64_t done = r.step + 1;
      if (c.train.checkpoint_every > 0 && done % c.train.checkpoint_every == 0 && done < c.train.max_steps) {
        SaveCheckpoint(StepCheckpointPath(o->out, done), Snapshot(model).ToCheckpoint());
      }
    });
    SaveCheckpoint(o->out, model.ToCheckpoint());
    std::printf("wrote %s\n", o->out.c_str());
    if (!o->no_eval) {
      const SyntheticDataset held_out(c.data.image_size, c.model.classes, c.data.noise_level,
                                      c.data.eval_seed);
      const std::string line = EvalLine(Evaluate(model, held_out, 0, c.data.eval_images));
      log << line << '\n';
      std::printf("%s\n", line.c_str());
    }
  });
}

void AddSweep(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    std::string alphas, ks, fs, dilation_sets;
    std::string out = "rd.csv";
    std::string models_dir;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("sweep", "train and evaluate one model per grid point, write the RD table");
  AddConfigOptions(cmd, &o->cfg, true);
  cmd->add_option("--alphas", o->alphas, "comma-separated alpha values")->required();
  cmd->add_option("--ks", o->ks, "comma-separated K grid");
  cmd->add_option("--feature-maps-grid", o->fs, "comma-separated F grid");
  cmd->add_option("--dilation-sets", o->dilation_sets, "dilation sets separated by ';', e.g. 5,10,15;2,4,6");
  cmd->add_option("--out,-o", o->out, "RD table (CSV)")->capture_default_str();
  cmd->add_option("--models-dir", o->models_dir, "also keep every trained checkpoint here");
  cmd->callback([o] {
    const RunConfig base = ResolveConfig(o->cfg);
    SweepGrid grid;
    grid.alphas = ParseDoubleList("--alphas", o->alphas);
    if (!o->ks.empty()) grid.ks = ParseIntList("--ks", o->ks);
    if (!o->fs.empty()) grid.feature_maps = ParseIntList("--feature-maps-grid", o->fs);
    if (!o->dilation_sets.empty()) {
      std::stringstream ss(o->dilation_sets);
      std::string set;
      while (std::getline(ss, set, ';')) grid.dilation_sets.push_back(ParseIntList("--dilation-sets", set));
    }
    const auto configs = ExpandGrid(base, grid);
    if (!o->models_dir.empty()) fs::create_directories(o->models_dir);
    std::vector<RdRow> rows;
    for (size_t i = 0; i < configs.size(); ++i) {
      const RunConfig& c = configs[i];
      std::printf("[%zu/%zu] alpha=%g K=%d F=%d\n", i + 1, configs.size(), c.model.alpha, c.model.overparam_k,
                  c.model.feature_maps);
      std::fflush(stdout);
      SweepRun run = RunSweepPoint(c);
      rows.push_back(run.row);
      if (!o->models_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "run_%03zu.ckpt", i);
        SaveCheckpoint((fs::path(o->models_dir) / name).string(), run.model.ToCheckpoint());
      }
      // Rewritten after every run so a long sweep leaves a usable partial table.
      WriteFileText(o->out, FormatRdTable(rows));
    }
    PrintRows(rows);
    const auto front = ParetoFrontier(ToRdPoints(rows));
    std::vector<double> bpp, miou;
    for (const auto& r : rows) {
      bpp.push_back(r.bpp);
      miou.push_back(r.miou);
    }
    std::printf("pareto points: %zu of %zu\n", front.size(), rows.size());
    if (rows.size() >= 2) std::printf("spearman(bpp, miou) = %.4f\n", Spearman(bpp, miou));
    std::printf("wrote %s\n", o->out.c_str());
  });
}

void AddConfig(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    bool keys = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("config", "print the resolved config as a canonical dump");
  AddConfigOptions(cmd, &o->cfg, true);
  cmd->add_flag("--keys", o->keys, "list every key with its description");
  cmd->callback([o] {
    if (o->keys) {
      for (const auto& k : ConfigKeys()) std::printf("%-24s %s\n", k.name.c_str(), k.doc.c_str());
      return;
    }
    std::printf("%s", DumpRunConfig(ResolveConfig(o->cfg)).c_str());
  });
}

}  // namespace jsd::cli
