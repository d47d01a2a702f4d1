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

#ifndef JSDSEG_TOOLS_COMMON_H_
#define JSDSEG_TOOLS_COMMON_H_

#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jsdseg/config.h"
#include "jsdseg/model.h"

namespace jsd::cli {

// Config sources shared by every subcommand, applied in this order:
// preset, config file, --set assignments, then the dedicated flags.
struct ConfigOptions {
  std::string preset = "desk";
  std::string file;
  std::vector<std::string> sets;
  std::string seed, alpha, k, dilations, feature_maps;
};

void AddConfigOptions(CLI::App* app, ConfigOptions* opts, bool model_flags);
RunConfig ResolveConfig(const ConfigOptions& opts);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
std::string ReadFileText(const std::string& path);
// Writes via a temporary file and rename.
void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes);
void WriteFileText(const std::string& path, const std::string& text);

Model LoadModel(const std::string& path);

// Comma-separated lists for grid flags. ConfigError on junk.
std::vector<double> ParseDoubleList(const std::string& flag, const std::string& text);
std::vector<int> ParseIntList(const std::string& flag, const std::string& text);

// Subcommand registration; the callbacks throw jsd::Error on failure.
void AddGenData(CLI::App& app);
void AddTrain(CLI::App& app);
void AddSweep(CLI::App& app);
void AddEncode(CLI::App& app);
void AddSegment(CLI::App& app);
void AddServe(CLI::App& app);
void AddFuse(CLI::App& app);
void AddBench(CLI::App& app);
void AddPlot(CLI::App& app);
void AddConfig(CLI::App& app);

}  // namespace jsd::cli

#endif  // JSDSEG_TOOLS_COMMON_H_
