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

// Hierarchical proxy-anchor loss on the Lorentz model.
//
// Similarity is the negative geodesic distance. For an embedding x with
// class y the positive proxies are y's ancestors at every level and the
// negatives are all other proxies:
//
//   pull = log(1 + sum_{l} exp(alpha_l (d(x, p_l) + delta)))
//   push = log(1 + sum_{p neg} exp(alpha_{level(p)} (delta - d(x, p))))
//
// with alpha_0 = alpha_leaf and alpha_l = alpha_anc above the leaves. The
// batch form sums per proxy over the samples for which it is positive
// (resp. negative), divides the pull total by the number of proxies that
// were positive for some sample and the push total by the proxy count.

#pragma once

#include <span>
#include <vector>

#include "hyperhier/geometry.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/kernels.hpp"
#include "hyperhier/proxy.hpp"

namespace hyperhier {

struct LossHyper {
  double alpha_leaf = 5.0;
  double alpha_anc = 2.5;
  double delta = 0.5;
  double lambda = 0.5;
  double curvature = 0.1;

  // Throws UsageError unless all scales are positive, alpha_anc < alpha_leaf,
  // lambda >= 0 and the curvature is valid.
  void validate() const;
  double alpha(int level) const { return level == 0 ? alpha_leaf : alpha_anc; }
  Curvature c() const { return Curvature(curvature); }
};

struct LabeledEmbedding {
  Vec tangent;
  int label = -1;
};

// Which nodes act as proxies. Nodes outside the mask are dropped from both
// the positive and negative sets and from the proxy count.
using ProxyMask = std::vector<bool>;
ProxyMask all_proxies(const Hierarchy& h);
// Leaf proxies only: the leaf-only ablation.
ProxyMask leaf_proxies(const Hierarchy& h);
ProxyMask non_passthrough_proxies(const Hierarchy& h);

double similarity(const LorentzPoint& x, const LorentzPoint& p, Curvature c);

// log(1 + sum_k exp(a_k)); shifts by the maximum exponent once it exceeds 30.
double log1p_sum_exp(std::span<const double> exponents);

struct ProxyTerm {
  double distance = 0.0;
  double alpha = 0.0;
};

// Per-sample loss from precomputed distances.
double proxy_anchor_sample(std::span<const ProxyTerm> positives,
                           std::span<const ProxyTerm> negatives, double delta);

double hyp_loss_sample(const LabeledEmbedding& e, const ProxySet& ps, const Hierarchy& h,
                       const LossHyper& hp);
double hyp_loss_sample(const LabeledEmbedding& e, const ProxySet& ps, const Hierarchy& h,
                       const LossHyper& hp, const ProxyMask& mask);

struct BatchLossParts {
  double pull = 0.0;
  double push = 0.0;
  double value = 0.0;
  int positive_proxies = 0;
  int proxies = 0;
};

// Batch loss from D(i, node) distances. When grad is non-null it receives
// dvalue/dD with D's shape.
BatchLossParts batch_loss_from_distances(const Matrix& distances, std::span<const int> labels,
                                         const Hierarchy& h, const LossHyper& hp,
                                         const ProxyMask& mask, Matrix* grad = nullptr);

// Throws UsageError on an empty batch.
double hyp_loss_batch(std::span<const LabeledEmbedding> batch, const ProxySet& ps,
                      const Hierarchy& h, const LossHyper& hp, Exec exec = Exec::kParallel);
double hyp_loss_batch(std::span<const LabeledEmbedding> batch, const ProxySet& ps,
                      const Hierarchy& h, const LossHyper& hp, const ProxyMask& mask,
                      Exec exec = Exec::kParallel);

// Mean softmax cross-entropy over leaf classes; grad (optional) receives
// dCE/dlogits with the logits' shape.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad = nullptr);

struct LossBreakdown {
  double ce = 0.0;
  double hyp = 0.0;
  double total = 0.0;
};

// ce_weight * CE(logits) + lambda * hyp_loss_batch.
LossBreakdown total_loss(std::span<const LabeledEmbedding> batch, const Matrix& logits,
                         const ProxySet& ps, const Hierarchy& h, const LossHyper& hp,
                         double ce_weight, const ProxyMask& mask, Exec exec = Exec::kParallel);

}  // namespace hyperhier
