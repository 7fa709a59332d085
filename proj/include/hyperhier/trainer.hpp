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

// Synthetic taxonomic data, the training loop and evaluation probes.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hyperhier/config.hpp"
#include "hyperhier/gradients.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/model.hpp"

namespace hyperhier {

// Label values for samples outside the known classes.
inline constexpr int kUnknownLabel = -1;
inline constexpr int kBackgroundLabel = -2;

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> known_eval;
  std::vector<Sample> unknown_eval;      // label kUnknownLabel
  std::vector<int> unknown_source;       // index into SyntheticSpec::unknown_classes
  std::vector<Sample> background;        // label kBackgroundLabel
  std::vector<Vec> node_means;           // generating mean per hierarchy node
  std::vector<Vec> unknown_means;
};

// Node means are laid out top-down: each child sits at its parent's mean
// plus a Gaussian offset of size level_spread[child level]; passthrough
// nodes reuse the parent's mean. Unknown classes are centred within
// unknown_offset * class_std of their parent's child-mean centroid.
// Background samples lie on a shell well outside every class mean.
Dataset generate_dataset(const SyntheticSpec& spec, const Hierarchy& h, std::uint64_t seed);

struct HistoryRow {
  std::int64_t step = 0;
  double ce = 0.0;
  double hyp = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<HistoryRow> history;
  std::int64_t steps = 0;
};

// Adam with decoupled weight decay over the flattened parameters.
class AdamW {
 public:
  AdamW(std::size_t n, const TrainConfig& cfg);
  void step(Vec& params, const Vec& grads);

 private:
  TrainConfig cfg_;
  Vec m_;
  Vec v_;
  std::int64_t t_ = 0;
};

ForwardOptions forward_options(const RunConfig& cfg, const Hierarchy& h);

// Fresh model for cfg (seeded from cfg.seed).
Model initial_model(const RunConfig& cfg, const Hierarchy& h);

// Throws NumericError naming the step and loss components when the loss or
// a gradient turns non-finite.
TrainResult train(const RunConfig& cfg, const Dataset& data, const Hierarchy& h);
TrainResult train(const RunConfig& cfg, const Dataset& data, const Hierarchy& h, Model init);

struct MiningStats {
  double unknown_mean = 0.0;
  double background_mean = 0.0;
  double auroc = 0.0;
  std::size_t unknown_count = 0;
  std::size_t background_count = 0;
};

struct EvalReport {
  double leaf_accuracy = 0.0;          // nearest leaf proxy, known eval
  double classifier_accuracy = 0.0;    // head argmax, known eval
  std::vector<double> level_accuracy;  // per level, nearest proxy in that level
  std::optional<double> unknown_consistency;  // absent when there are no unknowns
  double sibling_fraction = 0.0;
  std::size_t sibling_triplets = 0;
  MiningStats mining;
  Matrix proxy_distances;    // node x node
  Matrix cluster_distances;  // class x class mean pairwise distance, known eval
};

// Mean pairwise geodesic distance between the embeddings of every pair of
// classes (diagonal over distinct pairs).
Matrix cluster_distance_matrix(const std::vector<LorentzPoint>& points,
                               const std::vector<int>& labels, int num_classes, Curvature c,
                               Exec exec = Exec::kParallel);

// Fraction of triplets (a, b, z) with b a sibling leaf of a (same level-1
// parent) and z a leaf under a different level-2 node, for which
// M(a, b) < M(a, z).
double sibling_fraction(const Matrix& cluster, const Hierarchy& h, std::size_t* triplets);

// Probability that a random positive outscores a random negative; ties
// count half.
double auroc(const std::vector<double>& positive, const std::vector<double>& negative);

EvalReport evaluate(const Model& model, const RunConfig& cfg, const Dataset& data,
                    const Hierarchy& h);
EvalReport evaluate_split(const Model& model, const RunConfig& cfg,
                          const std::vector<Sample>& known, const Dataset& data,
                          const Hierarchy& h);

nlohmann::json to_json(const EvalReport& r, const Hierarchy& h);

// Persistence. All writers produce byte-identical output for equal inputs.
nlohmann::json checkpoint_json(const Model& m, const RunConfig& cfg, const Hierarchy& h,
                               std::int64_t step);
struct Checkpoint {
  Model model;
  RunConfig config;
  nlohmann::json hierarchy;
  std::int64_t step = 0;
};
// Throws UsageError on malformed or inconsistent checkpoints.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);
void write_embedding_dump(std::ostream& out, const Model& m, const Dataset& data,
                          const Hierarchy& h, const RunConfig& cfg);

}  // namespace hyperhier
