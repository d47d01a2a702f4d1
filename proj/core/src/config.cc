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

#include "jsdseg/config.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "jsdseg/errors.h"

namespace jsd {

namespace {

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

template <typename T>
std::string FormatNumber(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<int> ParseIntList(std::string_view key, std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(ParseNumber<int>(key, Trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list for " + std::string(key));
  return out;
}

std::string FormatIntList(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Entry {
  const char* name;
  const char* doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define JSD_NUM(key, field, type, doc)                                                      \
  Entry {                                                                                   \
    key, doc, [](RunConfig& c, std::string_view v) { c.field = ParseNumber<type>(key, v); }, \
        [](const RunConfig& c) { return FormatNumber<type>(c.field); }                      \
  }

const std::vector<Entry>& Entries() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e{
        JSD_NUM("data.eval_images", data.eval_images, int, "held-out images per evaluation"),
        JSD_NUM("data.eval_seed", data.eval_seed, uint64_t, "seed of the held-out split"),
        JSD_NUM("data.image_size", data.image_size, int, "synthetic image height and width (multiple of 64)"),
        JSD_NUM("data.noise_level", data.noise_level, double, "std of additive pixel noise"),
        JSD_NUM("data.seed", data.seed, uint64_t, "seed of the training stream"),
        JSD_NUM("model.alpha", model.alpha, double, "rate-distortion trade-off alpha in (0, 1)"),
        JSD_NUM("model.classes", model.classes, int, "number of classes S"),
        Entry{"model.dilations", "ASPP dilation rates, comma separated",
              [](RunConfig& c, std::string_view v) { c.model.dilations = ParseIntList("model.dilations", v); },
              [](const RunConfig& c) { return FormatIntList(c.model.dilations); }},
        JSD_NUM("model.encoder_width", model.encoder_width, int, "stem width of the image encoder"),
        JSD_NUM("model.feature_maps", model.feature_maps, int, "latent and ASPP width F"),
        JSD_NUM("model.groups", model.groups, int, "group count G of grouped convolutions"),
        JSD_NUM("model.latent_channels", model.latent_channels, int, "channels C_z of the bottleneck z"),
        JSD_NUM("model.model_id", model.model_id, int, "identifier carried in containers (1..65535)"),
        JSD_NUM("model.overparam_k", model.overparam_k, int, "parallel branches K per ASPP subblock during training"),
        Entry{"serve.listen", "host:port of the cloud server",
              [](RunConfig& c, std::string_view v) { c.serve.listen = std::string(v); },
              [](const RunConfig& c) { return c.serve.listen; }},
        JSD_NUM("serve.idle_timeout_ms", serve.idle_timeout_ms, int, "idle connection timeout"),
        JSD_NUM("serve.workers", serve.workers, int, "maximum concurrent connections"),
        JSD_NUM("train.batch_size", train.batch_size, int, "images per step"),
        JSD_NUM("train.beta1", train.beta1, double, "Adam beta1"),
        JSD_NUM("train.beta2", train.beta2, double, "Adam beta2"),
        JSD_NUM("train.checkpoint_every", train.checkpoint_every, int64_t, "steps between periodic checkpoints, 0 = off"),
        JSD_NUM("train.clip_norm", train.clip_norm, double, "global gradient-norm clip"),
        JSD_NUM("train.log_every", train.log_every, int64_t, "steps between metrics log lines"),
        JSD_NUM("train.lr_aux", train.lr_aux, double, "initial learning rate of the quantile optimizer"),
        JSD_NUM("train.lr_main", train.lr_main, double, "initial learning rate of the main optimizer"),
        JSD_NUM("train.max_steps", train.max_steps, int64_t, "schedule length tau_max"),
        JSD_NUM("train.seed", train.seed, uint64_t, "seed for initialization and noise"),
        JSD_NUM("train.weight_decay", train.weight_decay, double, "Adam weight decay"),
    };
    std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) {
      return std::string_view(a.name) < std::string_view(b.name);
    });
    return e;
  }();
  return entries;
}

#undef JSD_NUM

const Entry& FindEntry(std::string_view key) {
  for (const auto& e : Entries()) {
    if (key == e.name) return e;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void ModelConfig::Validate() const {
  if (classes < 1 || classes > 255) throw ConfigError("model.classes must be in 1..255");
  if (feature_maps < 1) throw ConfigError("model.feature_maps must be positive");
  if (groups < 1 || feature_maps % groups) {
    throw ConfigError("model.groups=" + std::to_string(groups) + " must divide model.feature_maps=" +
                      std::to_string(feature_maps));
  }
  if (latent_channels < 1 || latent_channels % groups) {
    throw ConfigError("model.groups must divide model.latent_channels");
  }
  if (dilations.empty()) throw ConfigError("model.dilations must not be empty");
  std::set<int> seen;
  for (int d : dilations) {
    if (d < 1 || !seen.insert(d).second) {
      throw ConfigError("model.dilations must be distinct positive integers");
    }
  }
  if (overparam_k < 1) throw ConfigError("model.overparam_k must be >= 1");
  if (encoder_width < 1) throw ConfigError("model.encoder_width must be positive");
  if (model_id < 1 || model_id > 65535) throw ConfigError("model.model_id must be in 1..65535");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("model.alpha must lie in (0, 1)");
}

void TrainConfig::Validate() const {
  if (!(lr_main > 0) || !(lr_aux > 0)) throw ConfigError("learning rates must be positive");
  if (max_steps < 1) throw ConfigError("train.max_steps must be positive");
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2 (batch norm)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (!(clip_norm > 0)) throw ConfigError("train.clip_norm must be positive");
  if (log_every < 1) throw ConfigError("train.log_every must be positive");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

void DataConfig::Validate() const {
  if (image_size < 64 || image_size % 64) throw ConfigError("data.image_size must be a positive multiple of 64");
  if (noise_level < 0) throw ConfigError("data.noise_level must be >= 0");
  if (eval_images < 1) throw ConfigError("data.eval_images must be positive");
}

void ServeConfig::Validate() const {
  if (listen.find(':') == std::string::npos) throw ConfigError("serve.listen must be host:port");
  if (workers < 1) throw ConfigError("serve.workers must be positive");
  if (idle_timeout_ms < 1) throw ConfigError("serve.idle_timeout_ms must be positive");
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  data.Validate();
  serve.Validate();
}

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : Entries()) k.push_back({e.name, e.doc});
    return k;
  }();
  return keys;
}

void SetConfigValue(RunConfig& config, std::string_view key, std::string_view value) {
  FindEntry(key).set(config, Trim(value));
}

std::string GetConfigValue(const RunConfig& config, std::string_view key) {
  return FindEntry(key).get(config);
}

RunConfig ParseRunConfig(std::string_view text, const RunConfig& base) {
  RunConfig config = base;
  std::set<std::string> assigned;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(Trim(line.substr(0, eq)));
    if (!assigned.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      SetConfigValue(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.Validate();
  return config;
}

std::string DumpRunConfig(const RunConfig& config) {
  std::string out;
  for (const auto& e : Entries()) out += std::string(e.name) + " = " + e.get(config) + "\n";
  return out;
}

std::string DumpModelConfig(const ModelConfig& config) {
  RunConfig rc;
  rc.model = config;
  std::string out;
  for (const auto& e : Entries()) {
    if (std::string_view(e.name).starts_with("model.")) {
      out += std::string(e.name) + " = " + e.get(rc) + "\n";
    }
  }
  return out;
}

ModelConfig ParseModelConfig(std::string_view text) {
  RunConfig rc = ParseRunConfig(text);
  return rc.model;
}

std::vector<std::string> PresetNames() { return {"desk", "paper-cityscapes", "paper-coco"}; }

RunConfig PresetConfig(std::string_view name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "paper-coco") {
    c.model.classes = 21;
    c.model.feature_maps = 256;
    c.model.overparam_k = 1;
    c.train.lr_main = 0.01;
    c.train.lr_aux = 0.001;
    c.train.batch_size = 16;
    c.train.max_steps = 310506;  // 42 epochs of 118,287 images at batch 16
    c.data.image_size = 512;
    return c;
  }
  if (name == "paper-cityscapes") {
    c.model.classes = 19;
    c.model.feature_maps = 512;
    c.model.overparam_k = 3;
    c.train.lr_main = 0.001;
    c.train.lr_aux = 0.001;
    c.train.batch_size = 8;
    c.train.max_steps = 80000;
    c.data.image_size = 512;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace jsd
