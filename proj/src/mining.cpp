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

#include "hyperhier/mining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hyperhier/errors.hpp"

namespace hyperhier {

void MiningHyper::validate(const Hierarchy& h) const {
  const std::size_t levels = static_cast<std::size_t>(h.depth() - 1);
  if (level_weights.size() != levels) {
    throw UsageError("mining: level_weights has " + std::to_string(level_weights.size()) +
                     " entries, hierarchy needs " + std::to_string(levels));
  }
  if (divergence_weights.size() != levels + 1) {
    throw UsageError("mining: divergence_weights has " +
                     std::to_string(divergence_weights.size()) + " entries, hierarchy needs " +
                     std::to_string(levels + 1));
  }
  if (!(epsilon > 0.0)) throw UsageError("mining: epsilon must be positive");
  if (!std::isfinite(beta)) throw UsageError("mining: beta must be finite");
  if (!(known_threshold >= 0.0 && known_threshold <= 1.0)) {
    throw UsageError("mining: known_threshold must lie in [0, 1]");
  }
  const auto sets = scoring_sets(h);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].size() < 2) {
      throw UsageError("mining: scoring set " + std::to_string(i) + " has fewer than 2 proxies");
    }
  }
}

std::vector<std::vector<int>> scoring_sets(const Hierarchy& h) {
  std::vector<std::vector<int>> sets;
  std::vector<int> object;
  for (const HierarchyNode& node : h.nodes()) {
    if (node.id != h.root() && node.tag == SubtreeTag::kObject) object.push_back(node.id);
  }
  sets.push_back(std::move(object));
  for (int level = 0; level + 1 < h.depth(); ++level) {
    std::span<const int> ids = h.level_nodes(level);
    sets.emplace_back(ids.begin(), ids.end());
  }
  return sets;
}

double divergence_term(std::span<const double> d, double epsilon) {
  if (d.size() < 2) throw UsageError("divergence: need at least two distances");
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = d1;
  double mean = 0.0;
  for (double x : d) {
    mean += x;
    if (x < d1) {
      d2 = d1;
      d1 = x;
    } else if (x < d2) {
      d2 = x;
    }
  }
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(d.size());
  return (d2 - d1) / (std::sqrt(var) + epsilon);
}

NearestProxy nearest_non_root(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                              Curvature c) {
  NearestProxy best;
  best.distance = std::numeric_limits<double>::infinity();
  for (const HierarchyNode& node : h.nodes()) {
    if (node.id == h.root()) continue;
    const double d = geodesic_distance(e, ps.points.at(node.id), c);
    if (d < best.distance) best = {node.id, d};
  }
  return best;
}

bool object_consistent(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                       Curvature c) {
  return h.tag(nearest_non_root(e, ps, h, c).node) == SubtreeTag::kObject;
}

namespace {

double level_score(const Hierarchy& h, int node, const MiningHyper& mh) {
  const int level = h.node(node).level;
  if (level < 0 || static_cast<std::size_t>(level) >= mh.level_weights.size()) {
    throw UsageError("mining: no level weight for level " + std::to_string(level));
  }
  return mh.level_weights[level];
}

}  // namespace

double hierarchy_score(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                       Curvature c, const MiningHyper& mh) {
  const NearestProxy nn = nearest_non_root(e, ps, h, c);
  if (h.tag(nn.node) != SubtreeTag::kObject) {
    throw UsageError("hierarchy_score: candidate is not object-consistent");
  }
  return level_score(h, nn.node, mh);
}

double divergence_score(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                        Curvature c, const MiningHyper& mh) {
  return score_candidate(0, e, ps, h, c, mh).s_div;
}

MiningScore score_candidate(std::int64_t id, const LorentzPoint& e, const ProxySet& ps,
                            const Hierarchy& h, Curvature c, const MiningHyper& mh) {
  const auto sets = scoring_sets(h);
  if (mh.divergence_weights.size() != sets.size()) {
    throw UsageError("mining: divergence_weights does not match the scoring sets");
  }
  MiningScore s;
  s.id = id;
  const NearestProxy nn = nearest_non_root(e, ps, h, c);
  s.nearest_node = nn.node;
  s.object_consistent = h.tag(nn.node) == SubtreeTag::kObject;

  std::vector<double> dist;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    dist.clear();
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int id_node : sets[i]) {
      const double d = geodesic_distance(e, ps.points.at(id_node), c);
      dist.push_back(d);
      if (d < best_d) {
        best_d = d;
        best = id_node;
      }
    }
    s.set_nearest.push_back(best);
    const double di = divergence_term(dist, mh.epsilon);
    s.set_divergence.push_back(di);
    s.s_div += mh.divergence_weights[i] * di;
  }
  if (s.object_consistent) {
    s.s_hier = level_score(h, nn.node, mh);
    s.objectness = s.s_div + mh.beta * s.s_hier;
  } else {
    s.s_div = 0.0;
  }
  return s;
}

std::vector<MiningScore> mine_unknowns(std::span<const Candidate> candidates, const ProxySet& ps,
                                       const Hierarchy& h, Curvature c, const MiningHyper& mh) {
  mh.validate(h);
  std::vector<MiningScore> kept;
  if (mh.k == 0) return kept;
  for (const Candidate& cand : candidates) {
    MiningScore s = score_candidate(cand.id, cand.point, ps, h, c, mh);
    if (s.object_consistent) kept.push_back(std::move(s));
  }
  std::sort(kept.begin(), kept.end(), [](const MiningScore& a, const MiningScore& b) {
    if (a.objectness != b.objectness) return a.objectness > b.objectness;
    return a.id < b.id;
  });
  if (kept.size() > mh.k) kept.resize(mh.k);
  return kept;
}

ConfidenceSplit known_confidence_filter(std::span<const Vec> probabilities, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw UsageError("known_confidence_filter: threshold must lie in [0, 1]");
  }
  ConfidenceSplit out;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const Vec& p = probabilities[i];
    if (p.empty()) throw UsageError("known_confidence_filter: empty distribution");
    double sum = 0.0;
    double top = 0.0;
    for (double x : p) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw UsageError("known_confidence_filter: negative or non-finite probability at row " +
                         std::to_string(i));
      }
      sum += x;
      top = std::max(top, x);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw UsageError("known_confidence_filter: row " + std::to_string(i) +
                       " does not sum to 1");
    }
    (top > threshold ? out.known : out.candidates).push_back(i);
  }
  return out;
}

nlohmann::json to_json(const MiningScore& s, const Hierarchy& h) {
  nlohmann::json nearest = nlohmann::json::array();
  for (int id : s.set_nearest) nearest.push_back(h.node(id).name);
  return {{"id", s.id},
          {"object_consistent", s.object_consistent},
          {"nearest_node", s.nearest_node},
          {"nearest_name", h.node(s.nearest_node).name},
          {"s_hier", s.s_hier},
          {"s_div", s.s_div},
          {"objectness", s.objectness},
          {"set_nearest", nearest},
          {"set_divergence", s.set_divergence}};
}

nlohmann::json mining_report(std::span<const MiningScore> scores, const Hierarchy& h) {
  nlohmann::json out = nlohmann::json::array();
  for (const MiningScore& s : scores) out.push_back(to_json(s, h));
  return out;
}

}  // namespace hyperhier
