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

// Hierarchy-guided unknown mining.
//
// A candidate is object-consistent when its nearest non-root proxy lies in
// the object subtree. Consistent candidates are scored as
//
//   objectness = S_div + beta * S_hier
//
// where S_hier is the weight of the level holding the nearest non-root
// proxy and S_div = sum_i w_i (d2_i - d1_i) / (sigma_i + eps) over the
// scoring sets {object subtree, level 0, level 1, ..., level L-2}.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "hyperhier/geometry.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/proxy.hpp"

namespace hyperhier {

struct MiningHyper {
  std::vector<double> level_weights{2.0, 4.0, 2.0};               // levels 0..L-2
  std::vector<double> divergence_weights{2.0, 3.0, 3.0, 0.5};    // object set, then levels
  double beta = 4.0;
  double epsilon = 1e-8;
  std::size_t k = 5;
  double known_threshold = 0.8;

  // Throws UsageError when the weight vectors do not fit `h` or a scoring
  // set holds fewer than two proxies.
  void validate(const Hierarchy& h) const;
};

// Scoring sets in divergence-weight order: object-subtree nodes (root
// excluded), then the nodes of each level 0..L-2.
std::vector<std::vector<int>> scoring_sets(const Hierarchy& h);

struct MiningScore {
  std::int64_t id = 0;
  bool object_consistent = false;
  int nearest_node = -1;               // nearest non-root proxy
  double s_hier = 0.0;
  double s_div = 0.0;
  double objectness = 0.0;
  std::vector<int> set_nearest;        // nearest node per scoring set
  std::vector<double> set_divergence;  // D_i per scoring set
};

// Margin between the two smallest distances over the population standard
// deviation of all of them. Needs at least two distances.
double divergence_term(std::span<const double> distances, double epsilon);

NearestProxy nearest_non_root(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                              Curvature c);
bool object_consistent(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                       Curvature c);
// Throws UsageError for candidates that are not object-consistent.
double hierarchy_score(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                       Curvature c, const MiningHyper& mh);
double divergence_score(const LorentzPoint& e, const ProxySet& ps, const Hierarchy& h,
                        Curvature c, const MiningHyper& mh);

// Full record for one candidate. Scores stay 0 when it is not consistent.
MiningScore score_candidate(std::int64_t id, const LorentzPoint& e, const ProxySet& ps,
                            const Hierarchy& h, Curvature c, const MiningHyper& mh);

struct Candidate {
  std::int64_t id = 0;
  LorentzPoint point;
};

// Filter to object-consistent candidates, sort by objectness (descending,
// ties by ascending id) and keep the first K.
std::vector<MiningScore> mine_unknowns(std::span<const Candidate> candidates, const ProxySet& ps,
                                       const Hierarchy& h, Curvature c, const MiningHyper& mh);

struct ConfidenceSplit {
  std::vector<std::size_t> known;       // indices with max prob > threshold
  std::vector<std::size_t> candidates;  // the rest
};

// Each row must be a probability distribution (non-negative, sums to 1
// within 1e-6).
ConfidenceSplit known_confidence_filter(std::span<const Vec> probabilities, double threshold);

nlohmann::json to_json(const MiningScore& s, const Hierarchy& h);
nlohmann::json mining_report(std::span<const MiningScore> scores, const Hierarchy& h);

}  // namespace hyperhier
