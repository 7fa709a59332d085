// Copyright 2026 The hyperhier Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run configuration. Every section is optional and every key has a
// default; unknown keys anywhere are rejected so typos surface early.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hyperhier/loss.hpp"
#include "hyperhier/mining.hpp"
#include "hyperhier/model.hpp"
#include "hyperhier/proxy.hpp"

namespace hyperhier {

// Reads keys out of a JSON object and remembers which ones were used.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string path);

  template <typename T>
  void get(const char* key, T& out);
  // Section reader for a nested object; absent sections read as {}.
  ConfigReader section(const char* key);
  bool has(const char* key) const;
  // Marks `key` used and returns it, or nullptr when absent.
  const nlohmann::json* raw(const char* key);
  // Throws UsageError naming the first unused key.
  void finish() const;

 private:
  const nlohmann::json* obj_;
  nlohmann::json empty_;
  std::string path_;
  std::vector<std::string> used_;
};

struct UnknownClassSpec {
  std::string name;
  std::string parent;  // existing level-1 node
};

struct SyntheticSpec {
  std::size_t feature_dim = 32;
  std::size_t samples_per_class = 200;
  std::size_t eval_per_class = 100;
  double class_std = 0.6;
  // Offset scale for each level below the root, indexed by the level of
  // the child (0 = leaves). Length depth - 1.
  std::vector<double> level_spread{4.0, 6.0, 10.0};
  std::vector<UnknownClassSpec> unknown_classes{
      {"bicycle", "vehicle"}, {"bear", "animal"}, {"skater", "human"}};
  std::size_t unknown_per_class = 100;
  double unknown_offset = 1.0;  // in units of class_std, at most 2
  std::size_t background_count = 300;
  double background_radius = 3.0;  // times the largest class-mean norm
  double background_std = 2.0;
};

struct TrainConfig {
  std::int64_t steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  double ce_weight = 1.0;
  std::int64_t eval_every = 100;
  CentroidWeighting weighting = CentroidWeighting::kUniform;
  bool leaf_only = false;  // drop ancestor proxies from the loss
};

struct GradCheckConfig {
  double step = 1e-5;
  std::size_t coords = 200;
  std::size_t batch_size = 16;
  std::size_t seeds = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string hierarchy_path;  // empty: built-in toy taxonomy
  SyntheticSpec data;
  ModelInit model{.feature_dim = 0, .embed_dim = 16, .num_classes = 0,
                  .encoder_scale = 0.1, .head_scale = 0.1, .proxy_scale = 0.1};
  TrainConfig train;
  LossHyper loss;
  MiningHyper mining;
  GradCheckConfig gradcheck;

  // Throws UsageError on out-of-range values.
  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

// Reads a JSON document; UsageError on missing file or parse failure.
nlohmann::json read_json_file(const std::string& path);

}  // namespace hyperhier
