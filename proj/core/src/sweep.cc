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

#include "jsdseg/sweep.h"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "jsdseg/data.h"
#include "jsdseg/errors.h"

namespace jsd {

namespace {

std::string JoinInts(const std::vector<int>& v, char sep) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::string> Split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double ToDouble(const std::string& s, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("rd table line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

constexpr const char* kHeader = "alpha,k,feature_maps,dilations,bpp,estimated_bpp,miou,steps,seconds";

}  // namespace

std::vector<RunConfig> ExpandGrid(const RunConfig& base, const SweepGrid& grid) {
  if (grid.alphas.empty()) throw ConfigError("sweep needs at least one alpha");
  const std::vector<int> ks = grid.ks.empty() ? std::vector<int>{base.model.overparam_k} : grid.ks;
  const std::vector<int> fs =
      grid.feature_maps.empty() ? std::vector<int>{base.model.feature_maps} : grid.feature_maps;
  const std::vector<std::vector<int>> ds =
      grid.dilation_sets.empty() ? std::vector<std::vector<int>>{base.model.dilations} : grid.dilation_sets;
  std::vector<RunConfig> out;
  for (const auto& d : ds) {
    for (int f : fs) {
      for (int k : ks) {
        for (double a : grid.alphas) {
          RunConfig c = base;
          c.model.alpha = a;
          c.model.overparam_k = k;
          c.model.feature_maps = f;
          c.model.dilations = d;
          c.Validate();
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

SweepRun RunSweepPoint(const RunConfig& config, const std::function<void(const LossReport&)>& on_step) {
  config.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  SweepRun run{{}, Model(config.model, config.train.seed)};
  const SyntheticDataset train(config.data.image_size, config.model.classes, config.data.noise_level,
                               config.data.seed);
  const SyntheticDataset held_out(config.data.image_size, config.model.classes,
                                  config.data.noise_level, config.data.eval_seed);
  Train(run.model, config.train, train, on_step);
  const EvalResult ev = Evaluate(run.model, held_out, 0, config.data.eval_images);
  const auto t1 = std::chrono::steady_clock::now();

  RdRow& r = run.row;
  r.alpha = config.model.alpha;
  r.k = config.model.overparam_k;
  r.feature_maps = config.model.feature_maps;
  r.dilations = config.model.dilations;
  r.bpp = ev.bpp;
  r.estimated_bpp = ev.estimated_bpp;
  r.miou = ev.miou;
  r.steps = config.train.max_steps;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  return run;
}

std::string FormatRdTable(const std::vector<RdRow>& rows) {
  std::ostringstream os;
  os << kHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%s,%.17g,%.17g,%.17g,%lld,%.3f\n", r.alpha, r.k,
                  r.feature_maps, JoinInts(r.dilations, ' ').c_str(), r.bpp, r.estimated_bpp, r.miou,
                  (long long)r.steps, r.seconds);
    os << buf;
  }
  return os.str();
}

std::vector<RdRow> ParseRdTable(std::string_view text) {
  std::vector<RdRow> rows;
  int line_no = 0;
  bool header = false;
  for (std::string line : Split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kHeader) throw DataError("rd table: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = Split(line, ',');
    if (f.size() != 9) throw DataError("rd table line " + std::to_string(line_no) + ": expected 9 fields");
    RdRow r;
    r.alpha = ToDouble(f[0], line_no);
    r.k = int(ToDouble(f[1], line_no));
    r.feature_maps = int(ToDouble(f[2], line_no));
    for (const auto& d : Split(f[3], ' ')) {
      if (!d.empty()) r.dilations.push_back(int(ToDouble(d, line_no)));
    }
    r.bpp = ToDouble(f[4], line_no);
    r.estimated_bpp = ToDouble(f[5], line_no);
    r.miou = ToDouble(f[6], line_no);
    r.steps = int64_t(ToDouble(f[7], line_no));
    r.seconds = ToDouble(f[8], line_no);
    rows.push_back(std::move(r));
  }
  if (!header) throw DataError("rd table: missing header");
  return rows;
}

std::vector<RdPoint> ToRdPoints(const std::vector<RdRow>& rows) {
  std::vector<RdPoint> pts;
  for (const auto& r : rows) pts.push_back({r.alpha, r.bpp, r.miou});
  return pts;
}

}  // namespace jsd
