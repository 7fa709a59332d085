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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hyperhier/errors.hpp"
#include "hyperhier/loss.hpp"
#include "oracles.hpp"

namespace hyperhier {
namespace {

Hierarchy two_leaves() {
  return Hierarchy::parse(R"({
    "nodes": [{"name": "root", "children": [{"name": "a"}, {"name": "b"}]}],
    "leaf_classes": ["a", "b"], "subtrees": {"object": ["a"], "background": ["b"]}})");
}

std::vector<LabeledEmbedding> random_batch(std::mt19937_64& rng, const Hierarchy& h,
                                           std::size_t n, std::size_t dim, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_int_distribution<int> label(0, h.num_classes() - 1);
  std::vector<LabeledEmbedding> batch(n);
  for (auto& e : batch) {
    e.tangent.resize(dim);
    for (double& x : e.tangent) x = normal(rng);
    e.label = label(rng);
  }
  return batch;
}

std::vector<std::vector<double>> tangents_of(const std::vector<LabeledEmbedding>& b) {
  std::vector<std::vector<double>> out;
  for (const auto& e : b) out.push_back(e.tangent);
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledEmbedding>& b) {
  std::vector<int> out;
  for (const auto& e : b) out.push_back(e.label);
  return out;
}

TEST(Hyper, Validation) {
  LossHyper hp;
  EXPECT_NO_THROW(hp.validate());
  EXPECT_EQ(hp.alpha(0), 5.0);
  EXPECT_EQ(hp.alpha(2), 2.5);
  LossHyper bad = hp;
  bad.alpha_anc = 5.0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = hp;
  bad.delta = 0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = hp;
  bad.lambda = -1;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = hp;
  bad.curvature = 0;
  EXPECT_THROW(bad.validate(), UsageError);
}

TEST(Similarity, NegatedDistance) {
  const Curvature c(0.1);
  const LorentzPoint x = exp_map_origin(Vec{0.3, -1.0}, c);
  const LorentzPoint y = exp_map_origin(Vec{2.0, 0.5}, c);
  const LorentzPoint z = exp_map_origin(Vec{4.0, 1.0}, c);
  EXPECT_EQ(similarity(x, x, c), 0.0);
  EXPECT_EQ(similarity(x, y, c), -geodesic_distance(x, y, c));
  EXPECT_NEAR(similarity(x, y, c), similarity(y, x, c), 1e-12);
  EXPECT_GT(similarity(x, y, c), similarity(x, z, c));
}

TEST(LogSumExp, ShiftedBranchAgrees) {
  const std::vector<double> small{1.0, -2.0, 29.0};
  EXPECT_NEAR(log1p_sum_exp(small), static_cast<double>(oracle::log1p_sum({1.0L, -2.0L, 29.0L})),
              1e-12);
  const std::vector<double> big{31.0, 29.5, -4.0};
  EXPECT_NEAR(log1p_sum_exp(big), static_cast<double>(oracle::log1p_sum({31.0L, 29.5L, -4.0L})),
              1e-12);
  const std::vector<double> huge{800.0, 799.0};
  EXPECT_NEAR(log1p_sum_exp(huge), 800.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_EQ(log1p_sum_exp(std::vector<double>{}), 0.0);
}

TEST(Sample, SingleNegativeClosedForm) {
  const ProxyTerm pos[] = {{0.0, 5.0}};
  const ProxyTerm neg[] = {{3.0, 5.0}};
  EXPECT_NEAR(proxy_anchor_sample(pos, neg, 0.5), oracle::kLossSingleNegative, 1e-3);
  EXPECT_NEAR(proxy_anchor_sample(pos, neg, 0.5), oracle::kLossSingleNegative, 1e-12);

  // The same configuration through the hierarchy: leaf proxies only.
  const Hierarchy h = two_leaves();
  const Curvature c(0.1);
  ProxyParams params;
  params.leaf_tangents = {{0.0, 0.0}, {3.0, 0.0}};
  const ProxySet ps = refresh(params, h, c);
  LossHyper hp;
  const LabeledEmbedding e{{0.0, 0.0}, 0};
  // d(x, x) comes out near sqrt(2 eps / c) rather than 0 after the acosh clamp.
  EXPECT_NEAR(hyp_loss_sample(e, ps, h, hp, leaf_proxies(h)), oracle::kLossSingleNegative, 1e-3);
}

TEST(Sample, MatchesStraightLineOracle) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(3);
  LossHyper hp;
  for (int trial = 0; trial < 50; ++trial) {
    const ProxyParams params = init_proxies(h, 6, trial, 1.5);
    const ProxySet ps = refresh(params, h, c);
    const auto px = oracle::proxies(h, params.leaf_tangents, 0.1);
    for (const auto& e : random_batch(rng, h, 4, 6, 2.0)) {
      const double got = hyp_loss_sample(e, ps, h, hp);
      const long double ref = oracle::sample_loss(e.tangent, e.label, h, px, {});
      EXPECT_NEAR(got, static_cast<double>(ref), 1e-10);
      EXPECT_GT(got, 0.0);
    }
  }
}

TEST(Sample, CloserToPositivesIsLower) {
  double prev = -1;
  for (double r : {0.0, 0.5, 1.0, 2.0}) {
    const ProxyTerm pos[] = {{r, 5.0}, {r, 2.5}};
    const ProxyTerm neg[] = {{4.0, 5.0}};
    const double v = proxy_anchor_sample(pos, neg, 0.5);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Batch, MatchesOracleOnToy) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(5);
  const LossHyper hp;
  for (int trial = 0; trial < 40; ++trial) {
    const ProxyParams params = init_proxies(h, 6, 100 + trial, 1.0);
    const ProxySet ps = refresh(params, h, c);
    const auto px = oracle::proxies(h, params.leaf_tangents, 0.1);
    const auto batch = random_batch(rng, h, 1 + trial % 9, 6, 1.5);
    for (const ProxyMask& mask : {all_proxies(h), leaf_proxies(h), non_passthrough_proxies(h)}) {
      const double got = hyp_loss_batch(batch, ps, h, hp, mask);
      const long double ref = oracle::batch_loss(tangents_of(batch), labels_of(batch), h, px, {}, mask);
      EXPECT_NEAR(got, static_cast<double>(ref), 1e-10);
    }
  }
}

TEST(Batch, EmptyBatchIsUsageError) {
  const Hierarchy h = toy_h4();
  const ProxySet ps = refresh(init_proxies(h, 4, 0, 0.1), h, Curvature(0.1));
  EXPECT_THROW(hyp_loss_batch({}, ps, h, LossHyper{}), UsageError);
}

TEST(Batch, DuplicationDoublesInnerSums) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(6);
  const ProxyParams params = init_proxies(h, 5, 1, 1.0);
  const ProxySet ps = refresh(params, h, c);
  const auto batch = random_batch(rng, h, 6, 5, 1.0);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  const auto points = project_batch_serial(tangents_of(batch), c);
  const Matrix d = distance_matrix_serial(points, ps.points, c);
  const LossHyper hp;
  const auto labels = labels_of(batch);
  BatchLossParts once = batch_loss_from_distances(d, labels, h, hp, all_proxies(h));
  // Formula with every inner sum doubled: log(1 + 2 S).
  double pull = 0, push = 0;
  int npos = 0;
  for (int p = 0; p < h.node_count(); ++p) {
    const double a = hp.alpha(h.node(p).level);
    double sp = 0, sn = 0;
    bool any = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (h.is_ancestor_or_self(p, h.leaf_of(labels[i]))) {
        sp += 2 * std::exp(a * (d(i, p) + hp.delta));
        any = true;
      } else {
        sn += 2 * std::exp(a * (hp.delta - d(i, p)));
      }
    }
    if (any) {
      ++npos;
      pull += std::log1p(sp);
    }
    push += std::log1p(sn);
  }
  const double expected = pull / npos + push / h.node_count();
  const double got = hyp_loss_batch(doubled, ps, h, hp);
  EXPECT_NEAR(got, expected, 1e-10);
  EXPECT_EQ(once.positive_proxies, npos);
  EXPECT_NE(got, once.value);
}

TEST(Batch, TwoLeafHandExpansion) {
  const Hierarchy h = two_leaves();
  const Curvature c(0.1);
  ProxyParams params;
  params.leaf_tangents = {{1.0, 0.0}, {0.0, 1.0}};
  const ProxySet ps = refresh(params, h, c);
  const std::vector<LabeledEmbedding> batch{{{0.8, 0.1}, 0}, {{-0.2, 1.3}, 1}};
  const LossHyper hp;
  const auto d = [&](int i, int p) {
    return geodesic_distance(exp_map_origin(batch[i].tangent, c), ps.points[p], c);
  };
  const int a = h.find_node("a"), b = h.find_node("b"), r = h.root();
  // a: positive for sample 0, negative for sample 1; b the reverse; root positive for both.
  const double pull = std::log1p(std::exp(5 * (d(0, a) + 0.5))) +
                      std::log1p(std::exp(5 * (d(1, b) + 0.5))) +
                      std::log1p(std::exp(2.5 * (d(0, r) + 0.5)) + std::exp(2.5 * (d(1, r) + 0.5)));
  const double push = std::log1p(std::exp(5 * (0.5 - d(1, a)))) +
                      std::log1p(std::exp(5 * (0.5 - d(0, b))));
  EXPECT_NEAR(hyp_loss_batch(batch, ps, h, hp), pull / 3 + push / 3, 1e-10);
}

TEST(Batch, SingleSampleSingleClassIsFlatProxyAnchor) {
  const Hierarchy h = two_leaves();
  const Curvature c(0.1);
  ProxyParams params;
  params.leaf_tangents = {{0.4, -0.3}, {-1.0, 0.7}};
  const ProxySet ps = refresh(params, h, c);
  const std::vector<LabeledEmbedding> batch{{{0.1, 0.2}, 0}};
  const double flat = static_cast<double>(oracle::flat_proxy_anchor(
      tangents_of(batch), labels_of(batch), params.leaf_tangents, 5.0, 0.5, 0.1));
  EXPECT_NEAR(hyp_loss_batch(batch, ps, h, LossHyper{}, leaf_proxies(h)), flat, 1e-10);
}

TEST(Batch, PermutationInvariant) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(7);
  const ProxySet ps = refresh(init_proxies(h, 6, 2, 1.0), h, c);
  auto batch = random_batch(rng, h, 20, 6, 1.5);
  const double base = hyp_loss_batch(batch, ps, h, LossHyper{});
  for (int k = 0; k < 10; ++k) {
    std::shuffle(batch.begin(), batch.end(), rng);
    EXPECT_NEAR(hyp_loss_batch(batch, ps, h, LossHyper{}), base, 1e-12);
  }
}

TEST(Batch, InvariantUnderRotation) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(8);
  const std::size_t n = 5;
  ProxyParams params = init_proxies(h, n, 3, 1.0);
  auto batch = random_batch(rng, h, 12, n, 1.5);
  const double base = hyp_loss_batch(batch, refresh(params, h, c), h, LossHyper{});

  // Random orthogonal matrix by Gram-Schmidt.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> q(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : q[i]) x = normal(rng);
    for (std::size_t j = 0; j < i; ++j) {
      const double dot = std::inner_product(q[i].begin(), q[i].end(), q[j].begin(), 0.0);
      for (std::size_t k = 0; k < n; ++k) q[i][k] -= dot * q[j][k];
    }
    const double nrm = std::sqrt(std::inner_product(q[i].begin(), q[i].end(), q[i].begin(), 0.0));
    for (double& x : q[i]) x /= nrm;
  }
  auto rotate = [&](Vec& v) {
    Vec out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) out[i] += q[i][k] * v[k];
    }
    v = out;
  };
  for (Vec& t : params.leaf_tangents) rotate(t);
  for (auto& e : batch) rotate(e.tangent);
  EXPECT_NEAR(hyp_loss_batch(batch, refresh(params, h, c), h, LossHyper{}), base, 1e-10);
}

TEST(Batch, LeafOnlyOnPassthroughTaxonomyIsFlat) {
  // Level-1 nodes are passthrough copies of the leaves.
  const Hierarchy h = Hierarchy::parse(R"({
    "nodes": [{"name": "root", "children": [
      {"name": "pa", "passthrough": true, "children": [{"name": "a"}]},
      {"name": "pb", "passthrough": true, "children": [{"name": "b"}]},
      {"name": "pc", "passthrough": true, "children": [{"name": "c"}]}]}],
    "leaf_classes": ["a", "b", "c"],
    "subtrees": {"object": ["pa", "pb"], "background": ["pc"]}})");
  const Curvature c(0.1);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const ProxyParams params = init_proxies(h, 4, trial, 1.0);
    const ProxySet ps = refresh(params, h, c);
    const auto batch = random_batch(rng, h, 6, 4, 1.0);
    const double flat = static_cast<double>(oracle::flat_proxy_anchor(
        tangents_of(batch), labels_of(batch), params.leaf_tangents, 5.0, 0.5, 0.1));
    EXPECT_NEAR(hyp_loss_batch(batch, ps, h, LossHyper{}, leaf_proxies(h)), flat, 1e-10);
    EXPECT_NE(hyp_loss_batch(batch, ps, h, LossHyper{}), flat);
  }
}

TEST(CrossEntropy, ValueAndGradient) {
  Matrix logits(2, 3);
  logits.data = {1.0, 2.0, 0.5, -1.0, 0.0, 3.0};
  const std::vector<int> labels{1, 2};
  Matrix grad;
  const double ce = cross_entropy(logits, labels, &grad);
  auto lse = [](double a, double b, double cc) { return std::log(std::exp(a) + std::exp(b) + std::exp(cc)); };
  const double expected = 0.5 * ((lse(1, 2, 0.5) - 2.0) + (lse(-1, 0, 3) - 3.0));
  EXPECT_NEAR(ce, expected, 1e-12);
  for (std::size_t k = 0; k < logits.data.size(); ++k) {
    Matrix up = logits, dn = logits;
    up.data[k] += 1e-6;
    dn.data[k] -= 1e-6;
    EXPECT_NEAR(grad.data[k], (cross_entropy(up, labels) - cross_entropy(dn, labels)) / 2e-6, 1e-8);
  }
}

TEST(Total, Components) {
  const Hierarchy h = toy_h4();
  const Curvature c(0.1);
  std::mt19937_64 rng(10);
  const ProxySet ps = refresh(init_proxies(h, 4, 0, 1.0), h, c);
  const auto batch = random_batch(rng, h, 8, 4, 1.0);
  Matrix logits(8, 12);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : logits.data) x = normal(rng);
  const double ce = cross_entropy(logits, labels_of(batch));
  const double hyp = hyp_loss_batch(batch, ps, h, LossHyper{});

  LossHyper hp;
  hp.lambda = 0.0;
  EXPECT_NEAR(total_loss(batch, logits, ps, h, hp, 1.0, all_proxies(h)).total, ce, 1e-12);
  hp.lambda = 1.0;
  EXPECT_NEAR(total_loss(batch, logits, ps, h, hp, 0.0, all_proxies(h)).total, hyp, 1e-12);
  hp.lambda = 0.5;
  const LossBreakdown both = total_loss(batch, logits, ps, h, hp, 1.0, all_proxies(h));
  EXPECT_NEAR(both.total, ce + 0.5 * hyp, 1e-12);
  EXPECT_NEAR(both.total, both.ce + 0.5 * both.hyp, 1e-12);
}

}  // namespace
}  // namespace hyperhier
