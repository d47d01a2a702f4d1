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

// Run configuration: a flat UTF-8 file of `key = value` lines with `#`
// comments. Every key has a default; unknown keys are rejected. Dumps are
// canonical (sorted keys, one per line) so parse(dump(c)) == c.

#ifndef JSDSEG_CONFIG_H_
#define JSDSEG_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace jsd {

struct ModelConfig {
  int classes = 6;                      // S, labels 1..S
  int feature_maps = 64;                // F
  int groups = 4;                       // G
  std::vector<int> dilations{5, 10, 15};
  int overparam_k = 1;                  // K
  int latent_channels = 128;            // C_z
  int encoder_width = 16;
  int model_id = 1;
  double alpha = 0.9;                   // quality point the weights were trained for

  // Throws ConfigError.
  void Validate() const;

  static constexpr int kStride = 16;       // z and r relative to the image
  static constexpr int kHyperStride = 64;  // h relative to the image

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  double lr_main = 5e-3;
  double lr_aux = 1e-2;
  int64_t max_steps = 3000;
  int batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  uint64_t seed = 1;
  int64_t log_every = 100;
  int64_t checkpoint_every = 1000;  // 0 disables periodic checkpoints

  void Validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct DataConfig {
  int image_size = 64;
  double noise_level = 0.03;
  uint64_t seed = 1000;
  uint64_t eval_seed = 900000;
  int eval_images = 50;

  void Validate() const;
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ServeConfig {
  std::string listen = "127.0.0.1:7878";
  int workers = 8;
  int idle_timeout_ms = 30000;

  void Validate() const;
  friend bool operator==(const ServeConfig&, const ServeConfig&) = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  ServeConfig serve;

  void Validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

// Every recognised key with its one-line description, sorted by name.
const std::vector<ConfigKey>& ConfigKeys();

// Applies `key = value` lines on top of `base`. Throws ConfigError with the
// line number on syntax errors, unknown keys and invalid values.
RunConfig ParseRunConfig(std::string_view text, const RunConfig& base = {});
// Applies one assignment.
void SetConfigValue(RunConfig& config, std::string_view key, std::string_view value);
std::string GetConfigValue(const RunConfig& config, std::string_view key);

std::string DumpRunConfig(const RunConfig& config);
// Only the model.* keys, used as checkpoint metadata.
std::string DumpModelConfig(const ModelConfig& config);
ModelConfig ParseModelConfig(std::string_view text);

// "desk" (defaults), "paper-coco", "paper-cityscapes".
RunConfig PresetConfig(std::string_view name);
std::vector<std::string> PresetNames();

}  // namespace jsd

#endif  // JSDSEG_CONFIG_H_
