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

#include <cmath>
#include <random>
#include <vector>

#include "hyperhier/errors.hpp"
#include "hyperhier/gradients.hpp"

namespace hyperhier {
namespace {

std::vector<Sample> random_samples(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                   int classes) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  std::vector<Sample> out(n);
  for (Sample& s : out) {
    s.features.resize(dim);
    for (double& x : s.features) x = normal(rng);
    s.label = label(rng);
  }
  return out;
}

Model toy_model(const Hierarchy& h, std::uint64_t seed) {
  ModelInit init;
  init.feature_dim = 8;
  init.embed_dim = 6;
  init.num_classes = h.num_classes();
  init.encoder_scale = 1.0;
  init.head_scale = 1.0;
  init.proxy_scale = 0.5;
  return init_model(h, init, seed);
}

TEST(CheckGradient, QuadraticIsExact) {
  const std::size_t n = 12;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec> a(n, Vec(n));
  Vec b(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) a[i][j] = a[j][i] = u(rng);
    b[i] = u(rng);
    x[i] = u(rng);
  }
  auto f = [&](std::span<const double> p) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += b[i] * p[i];
      for (std::size_t j = 0; j < n; ++j) s += 0.5 * p[i] * a[i][j] * p[j];
    }
    return s;
  };
  Vec g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = b[i];
    for (std::size_t j = 0; j < n; ++j) g[i] += a[i][j] * x[j];
  }
  GradCheckOptions opts;
  opts.step = 1e-4;
  const GradCheckReport r = check_gradient(f, x, g, opts);
  EXPECT_EQ(r.checked, n);
  EXPECT_LT(r.max_rel_error, 1e-10);
}

TEST(CheckGradient, StepRangeAndExclusion) {
  const Vec x{1.0, 2.0};
  const Vec g{2.0, 4.0};
  auto f = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
  GradCheckOptions opts;
  opts.step = 1e-3;
  EXPECT_THROW(check_gradient(f, x, g, opts), UsageError);
  opts.step = 1e-7;
  EXPECT_THROW(check_gradient(f, x, g, opts), UsageError);
  opts.step = 1e-5;
  const Vec wrong{2.0, 0.0};
  const GradCheckReport r = check_gradient(f, x, wrong, opts, [](std::size_t k) { return k == 1; });
  EXPECT_EQ(r.checked, 1u);
  EXPECT_EQ(r.excluded, (std::vector<std::size_t>{1}));
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(Backward, MatchesFiniteDifferences) {
  const Hierarchy h = toy_h4();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Model m = toy_model(h, seed);
    const auto batch = random_samples(rng, 16, 8, h.num_classes());
    GradCheckOptions opts;
    opts.seed = seed;
    const GradCheckReport r = gradient_check(m, batch, h, LossHyper{}, 1.0, opts);
    EXPECT_GE(r.checked, 200u);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " at " << parameter_name(m, r.worst_index);
  }
}

TEST(Backward, LeafOnlyAndWeightedCentroids) {
  const Hierarchy h = toy_h4();
  std::mt19937_64 rng(4);
  const Model m = toy_model(h, 4);
  const auto batch = random_samples(rng, 12, 8, h.num_classes());
  ForwardOptions fwd;
  fwd.weighting = CentroidWeighting::kSubtreeSize;
  EXPECT_LT(gradient_check(m, batch, h, LossHyper{}, 1.0, {}, fwd).max_rel_error, 1e-4);
  fwd.mask = leaf_proxies(h);
  EXPECT_LT(gradient_check(m, batch, h, LossHyper{}, 1.0, {}, fwd).max_rel_error, 1e-4);
}

TEST(Backward, ShapesAndFlatOrder) {
  const Hierarchy h = toy_h4();
  std::mt19937_64 rng(2);
  const Model m = toy_model(h, 2);
  const auto batch = random_samples(rng, 5, 8, h.num_classes());
  const GradBundle g = backward(batch, m, h, LossHyper{}, 1.0);
  EXPECT_EQ(g.d_embeddings.size(), 5u);
  EXPECT_EQ(g.d_leaf_proxies.size(), 12u);
  EXPECT_EQ(g.d_encoder_weight.rows, 8u);
  EXPECT_EQ(g.d_encoder_weight.cols, 6u);
  EXPECT_EQ(g.flat().size(), parameter_count(m));
  const LossBreakdown l = forward_loss(batch, m, h, LossHyper{}, 1.0);
  EXPECT_EQ(l.total, g.loss.total);
  EXPECT_EQ(parameter_name(m, 0), "encoder.weight[0,0]");
  EXPECT_EQ(parameter_name(m, 7), "encoder.weight[1,1]");
  EXPECT_EQ(parameter_name(m, parameter_count(m) - 1), "proxy.leaf[11,5]");
}

TEST(Backward, ZeroLambdaLeavesProxiesUntouched) {
  const Hierarchy h = toy_h4();
  std::mt19937_64 rng(3);
  const Model m = toy_model(h, 3);
  const auto batch = random_samples(rng, 10, 8, h.num_classes());
  LossHyper hp;
  hp.lambda = 0.0;
  const GradBundle g = backward(batch, m, h, hp, 1.0);
  for (const Vec& v : g.d_leaf_proxies) {
    for (double x : v) EXPECT_EQ(x, 0.0);
  }
}

TEST(Backward, LinearInLossScale) {
  const Hierarchy h = toy_h4();
  std::mt19937_64 rng(5);
  const Model m = toy_model(h, 5);
  const auto batch = random_samples(rng, 10, 8, h.num_classes());
  LossHyper hp;
  const Vec base = backward(batch, m, h, hp, 1.0).flat();
  const double k = 3.0;
  hp.lambda *= k;
  const Vec scaled = backward(batch, m, h, hp, k).flat();
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled[i], k * base[i], 1e-12);
}

TEST(Backward, MirroredConfigurationGivesMirroredGradients) {
  const Hierarchy h = Hierarchy::parse(R"({
    "nodes": [{"name": "root", "children": [{"name": "a"}, {"name": "b"}]}],
    "leaf_classes": ["a", "b"], "subtrees": {"object": ["a"], "background": ["b"]}})");
  ModelInit init;
  init.feature_dim = 3;
  init.embed_dim = 3;
  init.num_classes = 2;
  Model m = init_model(h, init, 0);
  std::fill(m.encoder.bias.begin(), m.encoder.bias.end(), 0.0);
  m.proxies.leaf_tangents = {{0.7, -0.2, 0.4}, {-0.7, 0.2, -0.4}};
  const std::vector<Sample> batch{{{0.5, 1.0, -0.3}, 0}, {{-0.5, -1.0, 0.3}, 1}};
  const GradBundle g = backward(batch, m, h, LossHyper{}, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(g.d_embeddings[0][k], -g.d_embeddings[1][k], 1e-12);
    EXPECT_NEAR(g.d_leaf_proxies[0][k], -g.d_leaf_proxies[1][k], 1e-12);
  }
}

TEST(Backward, CoincidentProxyIsExcludedFromCheck) {
  const Hierarchy h = toy_h4();
  std::mt19937_64 rng(6);
  Model m = toy_model(h, 6);
  // Zero encoder: every sample embeds at the bias, placed on leaf 0's proxy.
  std::fill(m.encoder.weight.data.begin(), m.encoder.weight.data.end(), 0.0);
  m.encoder.bias = m.proxies.leaf_tangents[0];
  const auto batch = random_samples(rng, 4, 8, h.num_classes());
  GradCheckOptions opts;
  opts.coords = 100000;
  const GradCheckReport r = gradient_check(m, batch, h, LossHyper{}, 1.0, opts);
  EXPECT_FALSE(r.excluded.empty());
  EXPECT_LT(r.max_rel_error, 1e-4);
  const GradBundle g = backward(batch, m, h, LossHyper{}, 1.0);
  for (double x : g.flat()) EXPECT_TRUE(std::isfinite(x));
}

TEST(Backward, NonFiniteInputsAreRejected) {
  const Hierarchy h = toy_h4();
  const Model m = toy_model(h, 7);
  std::vector<Sample> batch{{Vec(8, 0.1), 0}, {Vec(8, 0.2), 1}};
  batch[1].features[3] = NAN;
  EXPECT_ANY_THROW(backward(batch, m, h, LossHyper{}, 1.0));
}

}  // namespace
}  // namespace hyperhier
