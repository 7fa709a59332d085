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

// Serial reference vs OpenMP kernels. Arg 0 is the batch size.

#include <benchmark/benchmark.h>

#include <random>

#include "hyperhier/gradients.hpp"
#include "hyperhier/kernels.hpp"

namespace {

using namespace hyperhier;

constexpr std::size_t kDim = 16;
const Curvature kC(0.1);

std::vector<Vec> tangents(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> out(n, Vec(kDim));
  for (Vec& v : out) {
    for (double& x : v) x = normal(rng);
  }
  return out;
}

template <Exec E>
void BM_Project(benchmark::State& state) {
  const auto v = tangents(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(project_batch(v, kC, E));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Exec E>
void BM_DistanceMatrix(benchmark::State& state) {
  const auto a = project_batch(tangents(state.range(0), 2), kC, Exec::kSerial);
  const auto b = project_batch(tangents(64, 3), kC, Exec::kSerial);
  for (auto _ : state) benchmark::DoNotOptimize(distance_matrix(a, b, kC, E));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 64);
}

template <Exec E>
void BM_Nearest(benchmark::State& state) {
  const Hierarchy h = toy_h4();
  const ProxySet ps = refresh(init_proxies(h, kDim, 4, 1.0), h, kC);
  const auto e = project_batch(tangents(state.range(0), 5), kC, Exec::kSerial);
  for (auto _ : state) benchmark::DoNotOptimize(nearest_batch(e, ps, kC, std::nullopt, E));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Exec E>
void BM_DistanceVjp(benchmark::State& state) {
  const auto a = project_batch(tangents(state.range(0), 6), kC, Exec::kSerial);
  const auto b = project_batch(tangents(64, 7), kC, Exec::kSerial);
  const Matrix up(a.size(), b.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(distance_matrix_vjp(a, b, kC, up, E));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 64);
}

#define HH_BENCH(fn)                                                       \
  BENCHMARK(fn<Exec::kSerial>)->Name(#fn "/serial")->Range(64, 4096);     \
  BENCHMARK(fn<Exec::kParallel>)->Name(#fn "/parallel")->Range(64, 4096)

HH_BENCH(BM_Project);
HH_BENCH(BM_DistanceMatrix);
HH_BENCH(BM_Nearest);
HH_BENCH(BM_DistanceVjp);

}  // namespace

BENCHMARK_MAIN();
