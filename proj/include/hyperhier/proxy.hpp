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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hyperhier/geometry.hpp"
#include "hyperhier/hierarchy.hpp"

namespace hyperhier {

// Trainable leaf proxies, one origin-tangent vector per leaf class.
struct ProxyParams {
  std::vector<Vec> leaf_tangents;  // [class id][n]

  std::size_t dim() const { return leaf_tangents.empty() ? 0 : leaf_tangents.front().size(); }
};

enum class CentroidWeighting { kUniform, kSubtreeSize };

// On-manifold proxy points for every node of a hierarchy.
struct ProxySet {
  std::vector<LorentzPoint> points;     // [node id]
  std::vector<std::vector<int>> level_index;
  std::uint64_t generation = 0;
};

// Leaf tangents drawn i.i.d. from N(0, scale^2). Requires n >= 2.
ProxyParams init_proxies(const Hierarchy& h, std::size_t n, std::uint64_t seed, double scale);

// Weights used for the centroid of `node`'s children.
std::vector<double> child_weights(const Hierarchy& h, int node, CentroidWeighting weighting);

// Bottom-up rebuild: leaves through the exp map, ancestors as centroids of
// their children. The result carries previous_generation + 1.
ProxySet refresh(const ProxyParams& params, const Hierarchy& h, Curvature c,
                 std::uint64_t previous_generation = 0,
                 CentroidWeighting weighting = CentroidWeighting::kUniform);

struct NearestProxy {
  int node = -1;
  double distance = 0.0;
};

// Argmin of the geodesic distance over `restrict` (all nodes when absent);
// ties go to the smaller node id. Throws UsageError on an empty restriction.
NearestProxy nearest_proxy(const LorentzPoint& e, const ProxySet& ps, Curvature c,
                           std::optional<std::span<const int>> restrict = std::nullopt);

// One JSON record per node: {node_id, name, level, space, time}.
void write_proxy_dump(std::ostream& out, const ProxySet& ps, const Hierarchy& h);

}  // namespace hyperhier
