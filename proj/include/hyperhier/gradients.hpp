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

// Hand-derived reverse pass for the composite objective
//
//   L = ce_weight * CE(head(v)) + lambda * L_hyp(exp(v), refresh(proxies))
//
// with v = encoder(x). Gradients flow through the proxy refresh: leaf
// tangents -> exp map -> ancestor centroids -> distances -> loss.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperhier/hierarchy.hpp"
#include "hyperhier/kernels.hpp"
#include "hyperhier/loss.hpp"
#include "hyperhier/model.hpp"

namespace hyperhier {

struct ForwardOptions {
  ProxyMask mask;  // empty means every node is a proxy
  CentroidWeighting weighting = CentroidWeighting::kUniform;
  Exec exec = Exec::kParallel;
};

struct GradBundle {
  LossBreakdown loss;
  std::vector<Vec> d_embeddings;    // dL/dv per sample
  std::vector<Vec> d_leaf_proxies;  // per class
  Matrix d_encoder_weight;
  Vec d_encoder_bias;
  Matrix d_head_weight;
  Vec d_head_bias;

  // Same order as flatten(Model).
  Vec flat() const;
};

// Loss only. `distances` (optional) receives the sample-by-node distance matrix.
LossBreakdown forward_loss(std::span<const Sample> batch, const Model& model,
                           const Hierarchy& h, const LossHyper& hp, double ce_weight,
                           const ForwardOptions& opts = {}, Matrix* distances = nullptr);

// Throws NumericError naming the first parameter with a non-finite gradient.
GradBundle backward(std::span<const Sample> batch, const Model& model, const Hierarchy& h,
                    const LossHyper& hp, double ce_weight, const ForwardOptions& opts = {});

struct GradCheckOptions {
  double step = 1e-5;          // must lie in [1e-6, 1e-4]
  std::size_t coords = 200;    // checks every coordinate when there are fewer
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<std::size_t> excluded;  // coordinates touching a clamped distance
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences on a random subsample of coordinates, relative error
// |g - g_fd| / max(|g|, |g_fd|, 1e-8). `exclude` (optional) skips coordinates.
GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               const GradCheckOptions& opts,
                               const std::function<bool(std::size_t)>& exclude = nullptr);

// Full-objective check over all model parameters. Coordinates that move a
// distance sitting in the acosh clamp band are excluded and reported.
GradCheckReport gradient_check(const Model& model, std::span<const Sample> batch,
                               const Hierarchy& h, const LossHyper& hp, double ce_weight,
                               const GradCheckOptions& opts, const ForwardOptions& fwd = {});

// Human-readable name of a flattened parameter index, e.g. "encoder.weight[2,7]".
std::string parameter_name(const Model& model, std::size_t index);

}  // namespace hyperhier
