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

#include "hyperhier/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hyperhier/errors.hpp"

namespace hyperhier {

namespace {

std::ptrdiff_t ssize(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

// Forward state shared by forward_loss and backward.
struct Forward {
  std::vector<Vec> tangents;
  std::vector<LorentzPoint> points;
  std::vector<int> labels;
  Matrix logits;
  ProxySet proxies;
  Matrix distances;
  ProxyMask mask;
};

Forward run_forward(std::span<const Sample> batch, const Model& model, const Hierarchy& h,
                    const LossHyper& hp, const ForwardOptions& opts) {
  if (batch.empty()) throw UsageError("forward: empty batch");
  const Curvature c = hp.c();
  Forward f;
  const std::size_t b = batch.size();
  f.tangents.resize(b);
  f.labels.resize(b);
  f.logits = Matrix(b, model.head.weight.rows);
  for (std::size_t i = 0; i < b; ++i) {
    f.tangents[i] = model.encoder.apply(batch[i].features);
    f.labels[i] = batch[i].label;
    const Vec z = model.head.apply(f.tangents[i]);
    std::copy(z.begin(), z.end(), f.logits.row(i).begin());
  }
  f.points = project_batch(f.tangents, c, opts.exec);
  f.proxies = refresh(model.proxies, h, c, 0, opts.weighting);
  f.distances = distance_matrix(f.points, f.proxies.points, c, opts.exec);
  f.mask = opts.mask.empty() ? all_proxies(h) : opts.mask;
  return f;
}

void require_finite(std::span<const double> flat, const Model& model) {
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (!std::isfinite(flat[k])) {
      throw NumericError("backward: non-finite gradient for " + parameter_name(model, k));
    }
  }
}

}  // namespace

Vec GradBundle::flat() const {
  Vec out;
  auto append = [&](std::span<const double> xs) { out.insert(out.end(), xs.begin(), xs.end()); };
  append(d_encoder_weight.data);
  append(d_encoder_bias);
  append(d_head_weight.data);
  append(d_head_bias);
  for (const Vec& g : d_leaf_proxies) append(g);
  return out;
}

LossBreakdown forward_loss(std::span<const Sample> batch, const Model& model,
                           const Hierarchy& h, const LossHyper& hp, double ce_weight,
                           const ForwardOptions& opts, Matrix* distances) {
  Forward f = run_forward(batch, model, h, hp, opts);
  LossBreakdown out;
  out.ce = cross_entropy(f.logits, f.labels);
  out.hyp = batch_loss_from_distances(f.distances, f.labels, h, hp, f.mask).value;
  out.total = ce_weight * out.ce + hp.lambda * out.hyp;
  if (distances != nullptr) *distances = std::move(f.distances);
  return out;
}

GradBundle backward(std::span<const Sample> batch, const Model& model, const Hierarchy& h,
                    const LossHyper& hp, double ce_weight, const ForwardOptions& opts) {
  const Curvature c = hp.c();
  Forward f = run_forward(batch, model, h, hp, opts);
  const std::size_t b = batch.size();
  const std::size_t n = model.encoder.embed_dim();
  const std::size_t d = model.encoder.feature_dim();
  const std::size_t k_classes = model.head.weight.rows;

  GradBundle g;
  Matrix d_dist;
  const BatchLossParts parts =
      batch_loss_from_distances(f.distances, f.labels, h, hp, f.mask, &d_dist);
  Matrix d_logits;
  g.loss.ce = cross_entropy(f.logits, f.labels, &d_logits);
  g.loss.hyp = parts.value;
  g.loss.total = ce_weight * g.loss.ce + hp.lambda * g.loss.hyp;
  for (double& x : d_dist.data) x *= hp.lambda;
  for (double& x : d_logits.data) x *= ce_weight;

  DistanceGrads dg = distance_matrix_vjp(f.points, f.proxies.points, c, d_dist, opts.exec);

  // Ancestor centroids, top-down, so every node's gradient is complete
  // before it is pushed to its children.
  std::vector<LorentzPoint> kids;
  for (int level = h.depth() - 1; level >= 1; --level) {
    for (int id : h.level_nodes(level)) {
      const HierarchyNode& node = h.node(id);
      kids.clear();
      for (int ch : node.children) kids.push_back(f.proxies.points[ch]);
      const std::vector<double> w = child_weights(h, id, opts.weighting);
      std::vector<AmbientGrad> kid_grads(kids.size(), AmbientGrad(n));
      lorentz_centroid_vjp(kids, w, c, dg.cols[id], kid_grads);
      for (std::size_t k = 0; k < kids.size(); ++k) dg.cols[node.children[k]].add(kid_grads[k]);
    }
  }

  g.d_leaf_proxies.resize(h.num_classes());
  for (int k = 0; k < h.num_classes(); ++k) {
    g.d_leaf_proxies[k] =
        exp_map_origin_vjp(model.proxies.leaf_tangents[k], c, dg.cols[h.leaf_of(k)]);
  }

  g.d_embeddings.resize(b);
#pragma omp parallel for schedule(static) if (opts.exec == Exec::kParallel)
  for (std::ptrdiff_t i = 0; i < ssize(b); ++i) {
    Vec gv = exp_map_origin_vjp(f.tangents[i], c, dg.rows[i]);
    for (std::size_t k = 0; k < k_classes; ++k) {
      const double dz = d_logits(i, k);
      std::span<const double> hw = model.head.weight.row(k);
      for (std::size_t j = 0; j < n; ++j) gv[j] += dz * hw[j];
    }
    g.d_embeddings[i] = std::move(gv);
  }

  g.d_encoder_weight = Matrix(d, n);
  g.d_encoder_bias.assign(n, 0.0);
  g.d_head_weight = Matrix(k_classes, n);
  g.d_head_bias.assign(k_classes, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const Vec& x = batch[i].features;
    const Vec& gv = g.d_embeddings[i];
    for (std::size_t a = 0; a < d; ++a) {
      std::span<double> row = g.d_encoder_weight.row(a);
      for (std::size_t j = 0; j < n; ++j) row[j] += x[a] * gv[j];
    }
    for (std::size_t j = 0; j < n; ++j) g.d_encoder_bias[j] += gv[j];
    for (std::size_t k = 0; k < k_classes; ++k) {
      const double dz = d_logits(i, k);
      std::span<double> row = g.d_head_weight.row(k);
      for (std::size_t j = 0; j < n; ++j) row[j] += dz * f.tangents[i][j];
      g.d_head_bias[k] += dz;
    }
  }
  require_finite(g.flat(), model);
  return g;
}

GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               const GradCheckOptions& opts,
                               const std::function<bool(std::size_t)>& exclude) {
  if (!(opts.step >= 1e-6 && opts.step <= 1e-4)) {
    throw UsageError("gradient_check: step must lie in [1e-6, 1e-4]");
  }
  if (x.size() != analytic.size()) throw UsageError("gradient_check: gradient size mismatch");
  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > opts.coords) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.coords);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckReport report;
  Vec probe(x.begin(), x.end());
  for (std::size_t k : coords) {
    if (exclude && exclude(k)) {
      report.excluded.push_back(k);
      continue;
    }
    probe[k] = x[k] + opts.step;
    const double up = f(probe);
    probe[k] = x[k] - opts.step;
    const double down = f(probe);
    probe[k] = x[k];
    const double numeric = (up - down) / (2.0 * opts.step);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[k] - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        report.worst_index = k;
        report.worst_analytic = analytic[k];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradCheckReport gradient_check(const Model& model, std::span<const Sample> batch,
                               const Hierarchy& h, const LossHyper& hp, double ce_weight,
                               const GradCheckOptions& opts, const ForwardOptions& fwd) {
  const GradBundle g = backward(batch, model, h, hp, ce_weight, fwd);
  const Vec analytic = g.flat();
  const Vec x0 = flatten(model);
  Model scratch = model;

  auto eval = [&](std::span<const double> x, Matrix* dist) {
    unflatten(x, scratch);
    return forward_loss(batch, scratch, h, hp, ce_weight, fwd, dist).total;
  };

  Matrix base;
  eval(x0, &base);
  const double band =
      std::acosh(1.0 + kAcoshClampBand) / hp.c().sqrt_c();
  std::vector<std::size_t> clamped;
  for (std::size_t e = 0; e < base.data.size(); ++e) {
    if (base.data[e] <= band) clamped.push_back(e);
  }
  std::function<bool(std::size_t)> exclude;
  if (!clamped.empty()) {
    exclude = [&](std::size_t k) {
      Vec probe = x0;
      for (double sign : {1.0, -1.0}) {
        probe[k] = x0[k] + sign * opts.step;
        Matrix moved;
        eval(probe, &moved);
        for (std::size_t e : clamped) {
          if (moved.data[e] != base.data[e]) return true;
        }
      }
      return false;
    };
  }
  return check_gradient([&](std::span<const double> x) { return eval(x, nullptr); }, x0,
                        analytic, opts, exclude);
}

std::string parameter_name(const Model& model, std::size_t index) {
  const std::size_t n = model.encoder.embed_dim();
  auto pair = [](std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "," + std::to_string(c) + "]";
  };
  std::size_t k = index;
  if (k < model.encoder.weight.data.size()) return "encoder.weight" + pair(k / n, k % n);
  k -= model.encoder.weight.data.size();
  if (k < model.encoder.bias.size()) return "encoder.bias[" + std::to_string(k) + "]";
  k -= model.encoder.bias.size();
  if (k < model.head.weight.data.size()) return "head.weight" + pair(k / n, k % n);
  k -= model.head.weight.data.size();
  if (k < model.head.bias.size()) return "head.bias[" + std::to_string(k) + "]";
  k -= model.head.bias.size();
  return "proxy.leaf" + pair(k / std::max<std::size_t>(n, 1), k % std::max<std::size_t>(n, 1));
}

}  // namespace hyperhier
