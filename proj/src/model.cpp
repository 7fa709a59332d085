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

#include "hyperhier/model.hpp"

#include <cmath>
#include <random>

#include "hyperhier/errors.hpp"

namespace hyperhier {

Vec Encoder::apply(std::span<const double> x) const {
  if (x.size() != weight.rows) throw UsageError("encoder: feature dimension mismatch");
  Vec v = bias;
  for (std::size_t i = 0; i < weight.rows; ++i) {
    const double xi = x[i];
    std::span<const double> w = weight.row(i);
    for (std::size_t j = 0; j < weight.cols; ++j) v[j] += xi * w[j];
  }
  return v;
}

Vec ClassifierHead::apply(std::span<const double> v) const {
  if (v.size() != weight.cols) throw UsageError("classifier head: embedding dimension mismatch");
  Vec z = bias;
  for (std::size_t k = 0; k < weight.rows; ++k) {
    std::span<const double> w = weight.row(k);
    double acc = 0.0;
    for (std::size_t j = 0; j < weight.cols; ++j) acc += w[j] * v[j];
    z[k] += acc;
  }
  return z;
}

Model init_model(const Hierarchy& h, const ModelInit& init, std::uint64_t seed) {
  if (init.feature_dim == 0 || init.embed_dim < 2) {
    throw UsageError("init_model: need feature_dim >= 1 and embed_dim >= 2");
  }
  Model m;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double enc_std = init.encoder_scale / std::sqrt(static_cast<double>(init.feature_dim));
  m.encoder.weight = Matrix(init.feature_dim, init.embed_dim);
  for (double& w : m.encoder.weight.data) w = enc_std * normal(rng);
  m.encoder.bias.assign(init.embed_dim, 0.0);
  const std::size_t k = init.num_classes ? init.num_classes : h.num_classes();
  const double head_std = init.head_scale / std::sqrt(static_cast<double>(init.embed_dim));
  m.head.weight = Matrix(k, init.embed_dim);
  for (double& w : m.head.weight.data) w = head_std * normal(rng);
  m.head.bias.assign(k, 0.0);
  // Separate stream so proxy init matches init_proxies for the derived seed.
  m.proxies = init_proxies(h, init.embed_dim, rng(), init.proxy_scale);
  return m;
}

void for_each_parameter(Model& m, const std::function<void(double&)>& fn) {
  for (double& w : m.encoder.weight.data) fn(w);
  for (double& b : m.encoder.bias) fn(b);
  for (double& w : m.head.weight.data) fn(w);
  for (double& b : m.head.bias) fn(b);
  for (Vec& t : m.proxies.leaf_tangents) {
    for (double& x : t) fn(x);
  }
}

std::size_t parameter_count(const Model& m) {
  std::size_t n = m.encoder.weight.data.size() + m.encoder.bias.size() +
                  m.head.weight.data.size() + m.head.bias.size();
  for (const Vec& t : m.proxies.leaf_tangents) n += t.size();
  return n;
}

Vec flatten(const Model& m) {
  Vec out;
  out.reserve(parameter_count(m));
  auto append = [&](std::span<const double> xs) { out.insert(out.end(), xs.begin(), xs.end()); };
  append(m.encoder.weight.data);
  append(m.encoder.bias);
  append(m.head.weight.data);
  append(m.head.bias);
  for (const Vec& t : m.proxies.leaf_tangents) append(t);
  return out;
}

void unflatten(std::span<const double> flat, Model& m) {
  if (flat.size() != parameter_count(m)) throw UsageError("unflatten: size mismatch");
  std::size_t k = 0;
  for_each_parameter(m, [&](double& x) { x = flat[k++]; });
}

}  // namespace hyperhier
