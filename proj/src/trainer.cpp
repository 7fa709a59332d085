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

#include "hyperhier/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>
#include <random>

#include "hyperhier/errors.hpp"
#include "hyperhier/mining.hpp"

namespace hyperhier {

namespace {

// Independent seeds for the different random streams of one run.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vec gaussian(std::mt19937_64& rng, std::size_t d, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(d);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

Vec unit_vector(std::mt19937_64& rng, std::size_t d) {
  Vec u = gaussian(rng, d, 1.0);
  double norm = 0.0;
  for (double x : u) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : u) x /= norm;
  return u;
}

void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<LorentzPoint> embed(const Model& m, const std::vector<Sample>& samples, Curvature c,
                                Exec exec) {
  std::vector<Vec> tangents;
  tangents.reserve(samples.size());
  for (const Sample& s : samples) tangents.push_back(m.encoder.apply(s.features));
  return project_batch(tangents, c, exec);
}

}  // namespace

Dataset generate_dataset(const SyntheticSpec& spec, const Hierarchy& h, std::uint64_t seed) {
  if (h.num_classes() < 2) throw UsageError("generate_dataset: need at least 2 known leaves");
  if (spec.level_spread.size() < static_cast<std::size_t>(h.depth() - 1)) {
    throw UsageError("generate_dataset: level_spread needs " + std::to_string(h.depth() - 1) +
                     " entries");
  }
  if (spec.unknown_offset > 2.0) {
    throw UsageError("generate_dataset: unknown_offset must be at most 2 class std");
  }
  const std::size_t d = spec.feature_dim;
  std::mt19937_64 rng(stream_seed(seed, 0));
  Dataset out;
  out.node_means.assign(h.node_count(), Vec(d, 0.0));

  std::deque<int> queue{h.root()};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    const HierarchyNode& node = h.node(id);
    if (node.parent >= 0) {
      out.node_means[id] = out.node_means[node.parent];
      if (!node.passthrough) {
        const double spread = spec.level_spread[node.level];
        axpy(1.0 / std::sqrt(static_cast<double>(d)), gaussian(rng, d, spread),
             out.node_means[id]);
      }
    }
    for (int ch : node.children) queue.push_back(ch);
  }

  for (const UnknownClassSpec& u : spec.unknown_classes) {
    const int parent = h.find_node(u.parent);
    if (parent < 0) throw UsageError("unknown class '" + u.name + "': no node '" + u.parent + "'");
    if (h.node(parent).level != 1) {
      throw UsageError("unknown class '" + u.name + "': parent must be a level-1 node");
    }
    if (h.find_node(u.name) >= 0) {
      throw UsageError("unknown class '" + u.name + "' clashes with a hierarchy node");
    }
    Vec centroid(d, 0.0);
    const auto& kids = h.node(parent).children;
    for (int ch : kids) axpy(1.0 / static_cast<double>(kids.size()), out.node_means[ch], centroid);
    axpy(spec.unknown_offset * spec.class_std, unit_vector(rng, d), centroid);
    out.unknown_means.push_back(std::move(centroid));
  }

  auto draw = [&](const Vec& mean, double std_dev, int label) {
    Sample s;
    s.features = mean;
    axpy(1.0, gaussian(rng, d, std_dev), s.features);
    s.label = label;
    return s;
  };
  for (int k = 0; k < h.num_classes(); ++k) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      out.train.push_back(draw(out.node_means[h.leaf_of(k)], spec.class_std, k));
    }
  }
  for (int k = 0; k < h.num_classes(); ++k) {
    for (std::size_t i = 0; i < spec.eval_per_class; ++i) {
      out.known_eval.push_back(draw(out.node_means[h.leaf_of(k)], spec.class_std, k));
    }
  }
  for (std::size_t u = 0; u < out.unknown_means.size(); ++u) {
    for (std::size_t i = 0; i < spec.unknown_per_class; ++i) {
      out.unknown_eval.push_back(draw(out.unknown_means[u], spec.class_std, kUnknownLabel));
      out.unknown_source.push_back(static_cast<int>(u));
    }
  }
  double max_norm = 0.0;
  for (int k = 0; k < h.num_classes(); ++k) {
    max_norm = std::max(max_norm, norm2(out.node_means[h.leaf_of(k)]));
  }
  const double radius = spec.background_radius * max_norm;
  for (std::size_t i = 0; i < spec.background_count; ++i) {
    Vec centre = unit_vector(rng, d);
    for (double& x : centre) x *= radius;
    out.background.push_back(draw(centre, spec.background_std, kBackgroundLabel));
  }
  return out;
}

AdamW::AdamW(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(Vec& params, const Vec& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw UsageError("AdamW: parameter count changed");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * params[i]);
  }
}

ForwardOptions forward_options(const RunConfig& cfg, const Hierarchy& h) {
  ForwardOptions opts;
  opts.weighting = cfg.train.weighting;
  if (cfg.train.leaf_only) opts.mask = leaf_proxies(h);
  return opts;
}

Model initial_model(const RunConfig& cfg, const Hierarchy& h) {
  ModelInit init = cfg.model;
  init.feature_dim = cfg.data.feature_dim;
  init.num_classes = h.num_classes();
  return init_model(h, init, stream_seed(cfg.seed, 1));
}

TrainResult train(const RunConfig& cfg, const Dataset& data, const Hierarchy& h) {
  return train(cfg, data, h, initial_model(cfg, h));
}

TrainResult train(const RunConfig& cfg, const Dataset& data, const Hierarchy& h, Model init) {
  cfg.validate();
  if (data.train.empty()) throw UsageError("train: empty training set");
  TrainResult result;
  result.model = std::move(init);
  const ForwardOptions opts = forward_options(cfg, h);
  std::mt19937_64 rng(stream_seed(cfg.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
  Vec params = flatten(result.model);
  AdamW opt(params.size(), cfg.train);
  std::vector<Sample> batch(cfg.train.batch_size);

  for (std::int64_t step = 1; step <= cfg.train.steps; ++step) {
    for (Sample& s : batch) s = data.train[pick(rng)];
    GradBundle g;
    try {
      g = backward(batch, result.model, h, cfg.loss, cfg.train.ce_weight, opts);
    } catch (const NumericError& e) {
      std::string parts = "loss unavailable";
      try {
        const LossBreakdown l =
            forward_loss(batch, result.model, h, cfg.loss, cfg.train.ce_weight, opts);
        parts = "ce=" + fmt(l.ce) + ", hyp=" + fmt(l.hyp) + ", total=" + fmt(l.total);
      } catch (const NumericError&) {
      }
      throw NumericError("step " + std::to_string(step) + ": " + e.what() + " (" + parts + ")");
    }
    if (!std::isfinite(g.loss.total)) {
      throw NumericError("step " + std::to_string(step) + ": non-finite loss (ce=" +
                         fmt(g.loss.ce) + ", hyp=" + fmt(g.loss.hyp) + ", total=" +
                         fmt(g.loss.total) + ")");
    }
    if (step % cfg.train.eval_every == 0 || step == cfg.train.steps) {
      result.history.push_back({step, g.loss.ce, g.loss.hyp, g.loss.total});
    }
    opt.step(params, g.flat());
    unflatten(params, result.model);
  }
  result.steps = cfg.train.steps;
  return result;
}

Matrix cluster_distance_matrix(const std::vector<LorentzPoint>& points,
                               const std::vector<int>& labels, int num_classes, Curvature c,
                               Exec exec) {
  if (points.size() != labels.size()) throw UsageError("cluster distances: size mismatch");
  const Matrix d = distance_matrix(points, points, c, exec);
  Matrix sum(num_classes, num_classes);
  Matrix count(num_classes, num_classes);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      sum(labels[i], labels[j]) += d(i, j);
      count(labels[i], labels[j]) += 1.0;
    }
  }
  for (std::size_t k = 0; k < sum.data.size(); ++k) {
    sum.data[k] = count.data[k] > 0.0 ? sum.data[k] / count.data[k] : 0.0;
  }
  return sum;
}

double sibling_fraction(const Matrix& m, const Hierarchy& h, std::size_t* triplets) {
  std::size_t total = 0;
  std::size_t good = 0;
  const int k = h.num_classes();
  if (h.depth() >= 3) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        if (b == a || h.ancestor(a, 1) != h.ancestor(b, 1)) continue;
        for (int z = 0; z < k; ++z) {
          if (h.ancestor(z, 2) == h.ancestor(a, 2)) continue;
          ++total;
          if (m(a, b) < m(a, z)) ++good;
        }
      }
    }
  }
  if (triplets != nullptr) *triplets = total;
  return total > 0 ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
}

double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) return 0.0;
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

EvalReport evaluate(const Model& model, const RunConfig& cfg, const Dataset& data,
                    const Hierarchy& h) {
  return evaluate_split(model, cfg, data.known_eval, data, h);
}

EvalReport evaluate_split(const Model& model, const RunConfig& cfg,
                          const std::vector<Sample>& known, const Dataset& data,
                          const Hierarchy& h) {
  cfg.mining.validate(h);
  const Curvature c = cfg.loss.c();
  const Exec exec = Exec::kParallel;
  const ProxySet ps = refresh(model.proxies, h, c, 0, cfg.train.weighting);
  EvalReport r;

  const std::vector<LorentzPoint> pts = embed(model, known, c, exec);
  std::vector<int> labels;
  for (const Sample& s : known) labels.push_back(s.label);
  if (!known.empty()) {
    const double n = static_cast<double>(known.size());
    std::size_t head_hits = 0;
    for (std::size_t i = 0; i < known.size(); ++i) {
      const Vec z = model.head.apply(model.encoder.apply(known[i].features));
      const auto top = std::max_element(z.begin(), z.end()) - z.begin();
      if (top == labels[i]) ++head_hits;
    }
    r.classifier_accuracy = static_cast<double>(head_hits) / n;
    for (int level = 0; level < h.depth(); ++level) {
      const auto nn = nearest_batch(pts, ps, c, h.level_nodes(level), exec);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < nn.size(); ++i) {
        if (nn[i].node == h.ancestor(labels[i], level)) ++hits;
      }
      r.level_accuracy.push_back(static_cast<double>(hits) / n);
    }
    r.leaf_accuracy = r.level_accuracy.front();
    r.cluster_distances = cluster_distance_matrix(pts, labels, h.num_classes(), c, exec);
    r.sibling_fraction = sibling_fraction(r.cluster_distances, h, &r.sibling_triplets);
  }

  const std::vector<LorentzPoint> unk = embed(model, data.unknown_eval, c, exec);
  const std::vector<LorentzPoint> bg = embed(model, data.background, c, exec);
  if (!unk.empty()) {
    std::size_t consistent = 0;
    for (const LorentzPoint& e : unk) consistent += object_consistent(e, ps, h, c) ? 1 : 0;
    r.unknown_consistency = static_cast<double>(consistent) / static_cast<double>(unk.size());
  }
  auto objectness = [&](const std::vector<LorentzPoint>& e) {
    std::vector<double> out;
    for (std::size_t i = 0; i < e.size(); ++i) {
      out.push_back(score_candidate(static_cast<std::int64_t>(i), e[i], ps, h, c, cfg.mining)
                        .objectness);
    }
    return out;
  };
  const std::vector<double> su = objectness(unk);
  const std::vector<double> sb = objectness(bg);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  r.mining = {mean(su), mean(sb), auroc(su, sb), su.size(), sb.size()};
  r.proxy_distances = distance_matrix(ps.points, ps.points, c, exec);
  return r;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::span<const double> r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw UsageError("checkpoint: '" + what + "' must be a non-empty array of rows");
  }
  Matrix m(j.size(), j[0].size());
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (!j[i].is_array() || j[i].size() != m.cols) {
      throw UsageError("checkpoint: '" + what + "' has ragged rows");
    }
    for (std::size_t k = 0; k < m.cols; ++k) {
      if (!j[i][k].is_number()) throw UsageError("checkpoint: '" + what + "' holds non-numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

Vec vec_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw UsageError("checkpoint: '" + what + "' must be an array");
  Vec v;
  for (const auto& x : j) {
    if (!x.is_number()) throw UsageError("checkpoint: '" + what + "' holds non-numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw UsageError(std::string("checkpoint: missing '") + key + "'");
  }
  return j[key];
}

}  // namespace

nlohmann::json to_json(const EvalReport& r, const Hierarchy& h) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < r.level_accuracy.size(); ++l) levels.push_back(r.level_accuracy[l]);
  nlohmann::json names = nlohmann::json::array();
  for (const HierarchyNode& n : h.nodes()) names.push_back(n.name);
  nlohmann::json classes = nlohmann::json::array();
  for (int k = 0; k < h.num_classes(); ++k) classes.push_back(h.class_name(k));
  nlohmann::json j;
  j["leaf_accuracy"] = r.leaf_accuracy;
  j["classifier_accuracy"] = r.classifier_accuracy;
  j["level_accuracy"] = levels;
  j["unknown_consistency"] =
      r.unknown_consistency ? nlohmann::json(*r.unknown_consistency) : nlohmann::json("n/a");
  j["sibling_fraction"] = r.sibling_fraction;
  j["sibling_triplets"] = r.sibling_triplets;
  j["mining"] = {{"unknown_mean_objectness", r.mining.unknown_mean},
                 {"background_mean_objectness", r.mining.background_mean},
                 {"auroc", r.mining.auroc},
                 {"unknown_count", r.mining.unknown_count},
                 {"background_count", r.mining.background_count}};
  j["proxy_distances"] = {{"nodes", names}, {"matrix", matrix_json(r.proxy_distances)}};
  j["cluster_distances"] = {{"classes", classes}, {"matrix", matrix_json(r.cluster_distances)}};
  return j;
}

nlohmann::json checkpoint_json(const Model& m, const RunConfig& cfg, const Hierarchy& h,
                               std::int64_t step) {
  nlohmann::json tangents = nlohmann::json::array();
  for (const Vec& t : m.proxies.leaf_tangents) tangents.push_back(t);
  nlohmann::json j;
  j["format"] = "hyperhier-checkpoint";
  j["version"] = 1;
  j["step"] = step;
  j["config"] = to_json(cfg);
  j["hierarchy"] = h.to_json();
  j["encoder"] = {{"weight", matrix_json(m.encoder.weight)}, {"bias", m.encoder.bias}};
  j["head"] = {{"weight", matrix_json(m.head.weight)}, {"bias", m.head.bias}};
  j["leaf_tangents"] = tangents;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (field(doc, "format") != "hyperhier-checkpoint") {
    throw UsageError("checkpoint: not a hyperhier checkpoint");
  }
  Checkpoint ck;
  ck.step = field(doc, "step").get<std::int64_t>();
  ck.config = config_from_json(field(doc, "config"));
  ck.hierarchy = field(doc, "hierarchy");
  const nlohmann::json& enc = field(doc, "encoder");
  ck.model.encoder.weight = matrix_from_json(field(enc, "weight"), "encoder.weight");
  ck.model.encoder.bias = vec_from_json(field(enc, "bias"), "encoder.bias");
  const nlohmann::json& head = field(doc, "head");
  ck.model.head.weight = matrix_from_json(field(head, "weight"), "head.weight");
  ck.model.head.bias = vec_from_json(field(head, "bias"), "head.bias");
  const nlohmann::json& tangents = field(doc, "leaf_tangents");
  if (!tangents.is_array()) throw UsageError("checkpoint: 'leaf_tangents' must be an array");
  for (const auto& t : tangents) {
    ck.model.proxies.leaf_tangents.push_back(vec_from_json(t, "leaf_tangents"));
  }
  const std::size_t n = ck.model.encoder.weight.cols;
  bool ok = ck.model.encoder.bias.size() == n && ck.model.head.weight.cols == n &&
            ck.model.head.bias.size() == ck.model.head.weight.rows &&
            ck.model.head.weight.rows == ck.model.proxies.leaf_tangents.size();
  for (const Vec& t : ck.model.proxies.leaf_tangents) ok = ok && t.size() == n;
  if (!ok) throw UsageError("checkpoint: parameter shapes are inconsistent");
  return ck;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "step,ce,hyp,total\n";
  for (const HistoryRow& r : history) {
    out << r.step << ',' << fmt(r.ce) << ',' << fmt(r.hyp) << ',' << fmt(r.total) << '\n';
  }
}

void write_embedding_dump(std::ostream& out, const Model& m, const Dataset& data,
                          const Hierarchy& h, const RunConfig& cfg) {
  const Curvature c = cfg.loss.c();
  const ProxySet ps = refresh(m.proxies, h, c, 0, cfg.train.weighting);
  std::int64_t id = 0;
  auto dump = [&](const std::vector<Sample>& samples, const char* split) {
    const std::vector<LorentzPoint> pts = embed(m, samples, c, Exec::kParallel);
    const auto nn = nearest_batch(pts, ps, c, std::nullopt, Exec::kParallel);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      nlohmann::json j = {{"sample_id", id++},          {"label", samples[i].label},
                          {"split", split},             {"space", pts[i].space},
                          {"time", pts[i].time},        {"nearest_node", nn[i].node},
                          {"nearest_name", h.node(nn[i].node).name},
                          {"distance", nn[i].distance}};
      out << j.dump() << '\n';
    }
  };
  dump(data.train, "train");
  dump(data.known_eval, "known_eval");
  dump(data.unknown_eval, "unknown_eval");
  dump(data.background, "background");
}

}  // namespace hyperhier
