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

#include "hyperhier/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperhier/errors.hpp"

namespace hyperhier {

void LossHyper::validate() const {
  if (!(alpha_leaf > 0.0) || !(alpha_anc > 0.0)) {
    throw UsageError("loss: alpha_leaf and alpha_anc must be positive");
  }
  if (!(alpha_anc < alpha_leaf)) throw UsageError("loss: alpha_anc must be below alpha_leaf");
  if (!(delta > 0.0)) throw UsageError("loss: delta must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("loss: lambda must be >= 0");
  (void)c();
}

ProxyMask all_proxies(const Hierarchy& h) { return ProxyMask(h.node_count(), true); }

ProxyMask leaf_proxies(const Hierarchy& h) {
  ProxyMask m(h.node_count(), false);
  for (int id : h.level_nodes(0)) m[id] = true;
  return m;
}

ProxyMask non_passthrough_proxies(const Hierarchy& h) {
  ProxyMask m(h.node_count(), true);
  for (const HierarchyNode& node : h.nodes()) {
    if (node.passthrough) m[node.id] = false;
  }
  return m;
}

double similarity(const LorentzPoint& x, const LorentzPoint& p, Curvature c) {
  return -geodesic_distance(x, p, c);
}

double log1p_sum_exp(std::span<const double> exponents) {
  double top = 0.0;
  for (double a : exponents) top = std::max(top, a);
  if (top > 30.0) {
    double acc = std::exp(-top);
    for (double a : exponents) acc += std::exp(a - top);
    return top + std::log(acc);
  }
  double acc = 0.0;
  for (double a : exponents) acc += std::exp(a);
  return std::log1p(acc);
}

double proxy_anchor_sample(std::span<const ProxyTerm> positives,
                           std::span<const ProxyTerm> negatives, double delta) {
  std::vector<double> a;
  a.reserve(std::max(positives.size(), negatives.size()));
  for (const ProxyTerm& t : positives) a.push_back(t.alpha * (t.distance + delta));
  const double pull = log1p_sum_exp(a);
  a.clear();
  for (const ProxyTerm& t : negatives) a.push_back(t.alpha * (delta - t.distance));
  return pull + log1p_sum_exp(a);
}

double hyp_loss_sample(const LabeledEmbedding& e, const ProxySet& ps, const Hierarchy& h,
                       const LossHyper& hp) {
  return hyp_loss_sample(e, ps, h, hp, all_proxies(h));
}

double hyp_loss_sample(const LabeledEmbedding& e, const ProxySet& ps, const Hierarchy& h,
                       const LossHyper& hp, const ProxyMask& mask) {
  const Curvature c = hp.c();
  const LorentzPoint x = exp_map_origin(e.tangent, c);
  std::span<const int> pos = h.positive_set(e.label);
  std::vector<ProxyTerm> positives;
  std::vector<ProxyTerm> negatives;
  for (const HierarchyNode& node : h.nodes()) {
    if (!mask.at(node.id)) continue;
    const ProxyTerm term{geodesic_distance(x, ps.points.at(node.id), c), hp.alpha(node.level)};
    if (std::find(pos.begin(), pos.end(), node.id) != pos.end()) {
      positives.push_back(term);
    } else {
      negatives.push_back(term);
    }
  }
  return proxy_anchor_sample(positives, negatives, hp.delta);
}

BatchLossParts batch_loss_from_distances(const Matrix& distances, std::span<const int> labels,
                                         const Hierarchy& h, const LossHyper& hp,
                                         const ProxyMask& mask, Matrix* grad) {
  if (labels.empty()) throw UsageError("hyp_loss_batch: empty batch");
  if (distances.rows != labels.size() ||
      distances.cols != static_cast<std::size_t>(h.node_count()) ||
      mask.size() != distances.cols) {
    throw UsageError("hyp_loss_batch: distance matrix shape does not match batch/hierarchy");
  }
  const std::size_t batch = labels.size();
  if (grad != nullptr) *grad = Matrix(batch, distances.cols);

  BatchLossParts parts;
  std::vector<double> pos_exp, neg_exp;
  std::vector<std::size_t> pos_idx, neg_idx;
  for (const HierarchyNode& node : h.nodes()) {
    if (!mask[node.id]) continue;
    ++parts.proxies;
    const double alpha = hp.alpha(node.level);
    pos_exp.clear();
    neg_exp.clear();
    pos_idx.clear();
    neg_idx.clear();
    for (std::size_t i = 0; i < batch; ++i) {
      const double d = distances(i, node.id);
      if (h.ancestor(labels[i], node.level) == node.id) {
        pos_exp.push_back(alpha * (d + hp.delta));
        pos_idx.push_back(i);
      } else {
        neg_exp.push_back(alpha * (hp.delta - d));
        neg_idx.push_back(i);
      }
    }
    if (!pos_exp.empty()) {
      ++parts.positive_proxies;
      const double term = log1p_sum_exp(pos_exp);
      parts.pull += term;
      if (grad != nullptr) {
        for (std::size_t k = 0; k < pos_idx.size(); ++k) {
          (*grad)(pos_idx[k], node.id) = alpha * std::exp(pos_exp[k] - term);
        }
      }
    }
    if (!neg_exp.empty()) {
      const double term = log1p_sum_exp(neg_exp);
      parts.push += term;
      if (grad != nullptr) {
        for (std::size_t k = 0; k < neg_idx.size(); ++k) {
          (*grad)(neg_idx[k], node.id) = -alpha * std::exp(neg_exp[k] - term);
        }
      }
    }
  }
  if (parts.proxies == 0) throw UsageError("hyp_loss_batch: proxy mask selects no proxies");

  // Normalize; the gradient entries for positives share the pull factor.
  const double pull_scale = parts.positive_proxies > 0 ? 1.0 / parts.positive_proxies : 0.0;
  const double push_scale = 1.0 / parts.proxies;
  if (grad != nullptr) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (const HierarchyNode& node : h.nodes()) {
        if (!mask[node.id]) continue;
        const bool positive = h.ancestor(labels[i], node.level) == node.id;
        (*grad)(i, node.id) *= positive ? pull_scale : push_scale;
      }
    }
  }
  parts.pull *= pull_scale;
  parts.push *= push_scale;
  parts.value = parts.pull + parts.push;
  return parts;
}

double hyp_loss_batch(std::span<const LabeledEmbedding> batch, const ProxySet& ps,
                      const Hierarchy& h, const LossHyper& hp, Exec exec) {
  return hyp_loss_batch(batch, ps, h, hp, all_proxies(h), exec);
}

double hyp_loss_batch(std::span<const LabeledEmbedding> batch, const ProxySet& ps,
                      const Hierarchy& h, const LossHyper& hp, const ProxyMask& mask,
                      Exec exec) {
  if (batch.empty()) throw UsageError("hyp_loss_batch: empty batch");
  const Curvature c = hp.c();
  std::vector<Vec> tangents;
  std::vector<int> labels;
  tangents.reserve(batch.size());
  for (const LabeledEmbedding& e : batch) {
    tangents.push_back(e.tangent);
    labels.push_back(e.label);
  }
  const std::vector<LorentzPoint> points = project_batch(tangents, c, exec);
  const Matrix d = distance_matrix(points, ps.points, c, exec);
  return batch_loss_from_distances(d, labels, h, hp, mask).value;
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  if (labels.empty() || logits.rows != labels.size()) {
    throw UsageError("cross_entropy: logits/labels shape mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  if (grad != nullptr) *grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw UsageError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    std::span<const double> row = logits.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double z : row) acc += std::exp(z - top);
    const double lse = top + std::log(acc);
    total += lse - row[y];
    if (grad != nullptr) {
      for (std::size_t k = 0; k < logits.cols; ++k) {
        (*grad)(i, k) = (std::exp(row[k] - lse) - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_b;
      }
    }
  }
  return total * inv_b;
}

LossBreakdown total_loss(std::span<const LabeledEmbedding> batch, const Matrix& logits,
                         const ProxySet& ps, const Hierarchy& h, const LossHyper& hp,
                         double ce_weight, const ProxyMask& mask, Exec exec) {
  std::vector<int> labels;
  for (const LabeledEmbedding& e : batch) labels.push_back(e.label);
  LossBreakdown out;
  out.ce = cross_entropy(logits, labels);
  out.hyp = hyp_loss_batch(batch, ps, h, hp, mask, exec);
  out.total = ce_weight * out.ce + hp.lambda * out.hyp;
  return out;
}

}  // namespace hyperhier
