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

#include "common.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "jsdseg/checkpoint.h"
#include "jsdseg/errors.h"

namespace jsd::cli {

void AddConfigOptions(CLI::App* app, ConfigOptions* o, bool model_flags) {
  app->add_option("--preset", o->preset, "base preset: desk, paper-coco, paper-cityscapes")
      ->capture_default_str();
  app->add_option("--config", o->file, "key = value config file");
  app->add_option("--set", o->sets, "extra key=value assignment (repeatable)");
  if (!model_flags) return;
  app->add_option("--seed", o->seed, "train.seed");
  app->add_option("--alpha", o->alpha, "model.alpha");
  app->add_option("--k", o->k, "model.overparam_k");
  app->add_option("--dilations", o->dilations, "model.dilations, e.g. 5,10,15");
  app->add_option("--feature-maps", o->feature_maps, "model.feature_maps");
}

RunConfig ResolveConfig(const ConfigOptions& o) {
  RunConfig c = PresetConfig(o.preset);
  if (!o.file.empty()) c = ParseRunConfig(ReadFileText(o.file), c);
  for (const auto& s : o.sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    SetConfigValue(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.seed.empty()) SetConfigValue(c, "train.seed", o.seed);
  if (!o.alpha.empty()) SetConfigValue(c, "model.alpha", o.alpha);
  if (!o.k.empty()) SetConfigValue(c, "model.overparam_k", o.k);
  if (!o.dilations.empty()) SetConfigValue(c, "model.dilations", o.dilations);
  if (!o.feature_maps.empty()) SetConfigValue(c, "model.feature_maps", o.feature_maps);
  c.Validate();
  return c;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string ReadFileText(const std::string& path) {
  const auto b = ReadFileBytes(path);
  return {b.begin(), b.end()};
}

void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw DataError("short write to " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + ": " + ec.message());
}

void WriteFileText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

Model LoadModel(const std::string& path) { return Model::FromCheckpoint(LoadCheckpoint(path)); }

std::vector<double> ParseDoubleList(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": bad number '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::vector<int> ParseIntList(const std::string& flag, const std::string& text) {
  std::vector<int> out;
  for (double v : ParseDoubleList(flag, text)) {
    if (v != double(int(v))) throw ConfigError(flag + ": expected integers");
    out.push_back(int(v));
  }
  return out;
}

}  // namespace jsd::cli
