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

#include "hyperhier/proxy.hpp"

#include <ostream>
#include <random>

#include "hyperhier/errors.hpp"
#include "json.hpp"

namespace hyperhier {

ProxyParams init_proxies(const Hierarchy& h, std::size_t n, std::uint64_t seed, double scale) {
  if (n < 2) throw UsageError("init_proxies: embedding dimension must be >= 2");
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw UsageError("init_proxies: scale must be nonnegative and finite");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProxyParams p;
  p.leaf_tangents.assign(h.num_classes(), Vec(n));
  for (Vec& t : p.leaf_tangents) {
    for (double& x : t) x = scale * normal(rng);
  }
  return p;
}

namespace {

int leaf_count(const Hierarchy& h, int node) {
  const HierarchyNode& u = h.node(node);
  if (u.children.empty()) return 1;
  int total = 0;
  for (int c : u.children) total += leaf_count(h, c);
  return total;
}

}  // namespace

std::vector<double> child_weights(const Hierarchy& h, int node, CentroidWeighting weighting) {
  const HierarchyNode& u = h.node(node);
  std::vector<double> w(u.children.size(), 1.0);
  if (weighting == CentroidWeighting::kSubtreeSize) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = leaf_count(h, u.children[k]);
  }
  return w;
}

ProxySet refresh(const ProxyParams& params, const Hierarchy& h, Curvature c,
                 std::uint64_t previous_generation, CentroidWeighting weighting) {
  if (params.leaf_tangents.size() != static_cast<std::size_t>(h.num_classes())) {
    throw UsageError("refresh: proxy parameters do not match the hierarchy's leaf count");
  }
  ProxySet ps;
  ps.points.resize(h.node_count());
  ps.level_index.resize(h.depth());
  for (int level = 0; level < h.depth(); ++level) {
    std::span<const int> ids = h.level_nodes(level);
    ps.level_index[level].assign(ids.begin(), ids.end());
  }
  for (int k = 0; k < h.num_classes(); ++k) {
    ps.points[h.leaf_of(k)] = exp_map_origin(params.leaf_tangents[k], c);
  }
  std::vector<LorentzPoint> kids;
  for (int level = 1; level < h.depth(); ++level) {
    for (int id : h.level_nodes(level)) {
      const HierarchyNode& node = h.node(id);
      kids.clear();
      for (int ch : node.children) kids.push_back(ps.points[ch]);
      const std::vector<double> w = child_weights(h, id, weighting);
      ps.points[id] = lorentz_centroid(kids, w, c);
    }
  }
  ps.generation = previous_generation + 1;
  return ps;
}

NearestProxy nearest_proxy(const LorentzPoint& e, const ProxySet& ps, Curvature c,
                           std::optional<std::span<const int>> restrict) {
  NearestProxy best;
  auto consider = [&](int id) {
    const double d = geodesic_distance(e, ps.points.at(id), c);
    if (best.node < 0 || d < best.distance || (d == best.distance && id < best.node)) {
      best.node = id;
      best.distance = d;
    }
  };
  if (restrict) {
    if (restrict->empty()) throw UsageError("nearest_proxy: empty restriction set");
    for (int id : *restrict) consider(id);
  } else {
    if (ps.points.empty()) throw UsageError("nearest_proxy: empty proxy set");
    for (int id = 0; id < static_cast<int>(ps.points.size()); ++id) consider(id);
  }
  return best;
}

void write_proxy_dump(std::ostream& out, const ProxySet& ps, const Hierarchy& h) {
  for (const HierarchyNode& node : h.nodes()) {
    nlohmann::json rec;
    rec["node_id"] = node.id;
    rec["name"] = node.name;
    rec["level"] = node.level;
    rec["space"] = ps.points.at(node.id).space;
    rec["time"] = ps.points.at(node.id).time;
    out << rec.dump() << '\n';
  }
}

}  // namespace hyperhier
