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

#include "hyperhier/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hyperhier/errors.hpp"

namespace hyperhier {

ConfigReader::ConfigReader(const nlohmann::json& obj, std::string path)
    : obj_(&obj), empty_(nlohmann::json::object()), path_(std::move(path)) {
  if (!obj.is_object()) throw UsageError("config: '" + path_ + "' must be an object");
}

bool ConfigReader::has(const char* key) const { return obj_->contains(key); }

const nlohmann::json* ConfigReader::raw(const char* key) {
  used_.emplace_back(key);
  return obj_->contains(key) ? &(*obj_)[key] : nullptr;
}

template <typename T>
void ConfigReader::get(const char* key, T& out) {
  used_.emplace_back(key);
  if (!obj_->contains(key)) return;
  const nlohmann::json& v = (*obj_)[key];
  const std::string where = path_.empty() ? key : path_ + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw UsageError("config: '" + where + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw UsageError("config: '" + where + "' must be an integer");
    if (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0) {
      throw UsageError("config: '" + where + "' must be non-negative");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw UsageError("config: '" + where + "' must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw UsageError("config: '" + where + "' must be a string");
  } else {
    if (!v.is_array()) throw UsageError("config: '" + where + "' must be an array");
    for (const auto& x : v) {
      if (!x.is_number()) throw UsageError("config: '" + where + "' must hold numbers");
    }
  }
  out = v.get<T>();
}

template void ConfigReader::get<bool>(const char*, bool&);
template void ConfigReader::get<std::int64_t>(const char*, std::int64_t&);
template void ConfigReader::get<std::uint64_t>(const char*, std::uint64_t&);
template void ConfigReader::get<double>(const char*, double&);
template void ConfigReader::get<std::string>(const char*, std::string&);
template void ConfigReader::get<std::vector<double>>(const char*, std::vector<double>&);

ConfigReader ConfigReader::section(const char* key) {
  used_.emplace_back(key);
  const std::string where = path_.empty() ? key : path_ + "." + key;
  if (!obj_->contains(key)) return ConfigReader(empty_, where);
  return ConfigReader((*obj_)[key], where);
}

void ConfigReader::finish() const {
  for (const auto& [key, value] : obj_->items()) {
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
      throw UsageError("config: unknown key '" + (path_.empty() ? key : path_ + "." + key) +
                       "'");
    }
  }
}

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw UsageError("config: " + what);
}

const char* weighting_name(CentroidWeighting w) {
  return w == CentroidWeighting::kUniform ? "uniform" : "subtree_size";
}

}  // namespace

void RunConfig::validate() const {
  check(data.feature_dim >= 1, "data.feature_dim must be >= 1");
  check(data.samples_per_class >= 1, "data.samples_per_class must be >= 1");
  check(data.class_std > 0.0, "data.class_std must be positive");
  check(data.unknown_offset >= 0.0 && data.unknown_offset <= 2.0,
        "data.unknown_offset must lie in [0, 2]");
  check(data.background_radius >= 0.0 && data.background_std >= 0.0,
        "data.background_radius and background_std must be >= 0");
  for (double s : data.level_spread) check(s >= 0.0, "data.level_spread entries must be >= 0");
  check(model.embed_dim >= 2, "model.embed_dim must be >= 2");
  check(model.encoder_scale >= 0.0 && model.head_scale >= 0.0 && model.proxy_scale >= 0.0,
        "model scales must be >= 0");
  check(train.steps >= 1, "train.steps must be >= 1");
  check(train.batch_size >= 2, "train.batch_size must be >= 2");
  check(train.learning_rate >= 0.0 && std::isfinite(train.learning_rate),
        "train.learning_rate must be >= 0");
  check(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 && train.beta2 < 1.0,
        "train.beta1 and beta2 must lie in [0, 1)");
  check(train.epsilon > 0.0, "train.epsilon must be positive");
  check(train.weight_decay >= 0.0, "train.weight_decay must be >= 0");
  check(train.ce_weight >= 0.0, "train.ce_weight must be >= 0");
  check(train.eval_every >= 1, "train.eval_every must be >= 1");
  loss.validate();
  check(gradcheck.step >= 1e-6 && gradcheck.step <= 1e-4,
        "gradcheck.step must lie in [1e-6, 1e-4]");
  check(gradcheck.batch_size >= 1 && gradcheck.seeds >= 1,
        "gradcheck.batch_size and seeds must be >= 1");
}

RunConfig config_from_json(const nlohmann::json& doc) {
  RunConfig cfg;
  ConfigReader top(doc, "");
  top.get("seed", cfg.seed);
  top.get("hierarchy", cfg.hierarchy_path);

  ConfigReader data = top.section("data");
  data.get("feature_dim", cfg.data.feature_dim);
  data.get("samples_per_class", cfg.data.samples_per_class);
  data.get("eval_per_class", cfg.data.eval_per_class);
  data.get("class_std", cfg.data.class_std);
  data.get("level_spread", cfg.data.level_spread);
  data.get("unknown_per_class", cfg.data.unknown_per_class);
  data.get("unknown_offset", cfg.data.unknown_offset);
  data.get("background_count", cfg.data.background_count);
  data.get("background_radius", cfg.data.background_radius);
  data.get("background_std", cfg.data.background_std);
  if (const nlohmann::json* list = data.raw("unknown_classes")) {
    check(list->is_array(), "data.unknown_classes must be an array");
    cfg.data.unknown_classes.clear();
    for (const nlohmann::json& u : *list) {
      ConfigReader r(u, "data.unknown_classes[]");
      UnknownClassSpec s;
      r.get("name", s.name);
      r.get("parent", s.parent);
      r.finish();
      check(!s.name.empty() && !s.parent.empty(), "unknown classes need a name and a parent");
      cfg.data.unknown_classes.push_back(s);
    }
  }
  data.finish();

  ConfigReader model = top.section("model");
  model.get("embed_dim", cfg.model.embed_dim);
  model.get("encoder_scale", cfg.model.encoder_scale);
  model.get("head_scale", cfg.model.head_scale);
  model.get("proxy_scale", cfg.model.proxy_scale);
  model.finish();

  ConfigReader train = top.section("train");
  train.get("steps", cfg.train.steps);
  train.get("batch_size", cfg.train.batch_size);
  train.get("learning_rate", cfg.train.learning_rate);
  train.get("beta1", cfg.train.beta1);
  train.get("beta2", cfg.train.beta2);
  train.get("epsilon", cfg.train.epsilon);
  train.get("weight_decay", cfg.train.weight_decay);
  train.get("ce_weight", cfg.train.ce_weight);
  train.get("eval_every", cfg.train.eval_every);
  train.get("leaf_only", cfg.train.leaf_only);
  std::string weighting = weighting_name(cfg.train.weighting);
  train.get("centroid_weighting", weighting);
  if (weighting == "uniform") {
    cfg.train.weighting = CentroidWeighting::kUniform;
  } else if (weighting == "subtree_size") {
    cfg.train.weighting = CentroidWeighting::kSubtreeSize;
  } else {
    throw UsageError("config: train.centroid_weighting must be 'uniform' or 'subtree_size'");
  }
  train.finish();

  ConfigReader loss = top.section("loss");
  loss.get("alpha_leaf", cfg.loss.alpha_leaf);
  loss.get("alpha_anc", cfg.loss.alpha_anc);
  loss.get("delta", cfg.loss.delta);
  loss.get("lambda", cfg.loss.lambda);
  loss.get("curvature", cfg.loss.curvature);
  loss.finish();

  ConfigReader mining = top.section("mining");
  mining.get("level_weights", cfg.mining.level_weights);
  mining.get("divergence_weights", cfg.mining.divergence_weights);
  mining.get("beta", cfg.mining.beta);
  mining.get("epsilon", cfg.mining.epsilon);
  mining.get("k", cfg.mining.k);
  mining.get("known_threshold", cfg.mining.known_threshold);
  mining.finish();

  ConfigReader gc = top.section("gradcheck");
  gc.get("step", cfg.gradcheck.step);
  gc.get("coords", cfg.gradcheck.coords);
  gc.get("batch_size", cfg.gradcheck.batch_size);
  gc.get("seeds", cfg.gradcheck.seeds);
  gc.finish();

  top.finish();
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json unknown = nlohmann::json::array();
  for (const UnknownClassSpec& u : cfg.data.unknown_classes) {
    unknown.push_back({{"name", u.name}, {"parent", u.parent}});
  }
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["hierarchy"] = cfg.hierarchy_path;
  j["data"] = {{"feature_dim", cfg.data.feature_dim},
               {"samples_per_class", cfg.data.samples_per_class},
               {"eval_per_class", cfg.data.eval_per_class},
               {"class_std", cfg.data.class_std},
               {"level_spread", cfg.data.level_spread},
               {"unknown_classes", unknown},
               {"unknown_per_class", cfg.data.unknown_per_class},
               {"unknown_offset", cfg.data.unknown_offset},
               {"background_count", cfg.data.background_count},
               {"background_radius", cfg.data.background_radius},
               {"background_std", cfg.data.background_std}};
  j["model"] = {{"embed_dim", cfg.model.embed_dim},
                {"encoder_scale", cfg.model.encoder_scale},
                {"head_scale", cfg.model.head_scale},
                {"proxy_scale", cfg.model.proxy_scale}};
  j["train"] = {{"steps", cfg.train.steps},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"epsilon", cfg.train.epsilon},
                {"weight_decay", cfg.train.weight_decay},
                {"ce_weight", cfg.train.ce_weight},
                {"eval_every", cfg.train.eval_every},
                {"centroid_weighting", weighting_name(cfg.train.weighting)},
                {"leaf_only", cfg.train.leaf_only}};
  j["loss"] = {{"alpha_leaf", cfg.loss.alpha_leaf},
               {"alpha_anc", cfg.loss.alpha_anc},
               {"delta", cfg.loss.delta},
               {"lambda", cfg.loss.lambda},
               {"curvature", cfg.loss.curvature}};
  j["mining"] = {{"level_weights", cfg.mining.level_weights},
                 {"divergence_weights", cfg.mining.divergence_weights},
                 {"beta", cfg.mining.beta},
                 {"epsilon", cfg.mining.epsilon},
                 {"k", cfg.mining.k},
                 {"known_threshold", cfg.mining.known_threshold}};
  j["gradcheck"] = {{"step", cfg.gradcheck.step},
                    {"coords", cfg.gradcheck.coords},
                    {"batch_size", cfg.gradcheck.batch_size},
                    {"seeds", cfg.gradcheck.seeds}};
  return j;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

RunConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace hyperhier
