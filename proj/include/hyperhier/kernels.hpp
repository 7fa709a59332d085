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

// Data-parallel batch kernels. Every kernel has a serial reference and an
// OpenMP version; the two produce bitwise-identical results because each
// output element is computed by one thread with a fixed inner order and
// cross-element reductions happen afterwards, serially.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hyperhier/geometry.hpp"
#include "hyperhier/proxy.hpp"

namespace hyperhier {

enum class Exec { kSerial, kParallel };

// Row-major rows x cols matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

int omp_thread_count();

std::vector<LorentzPoint> project_batch_serial(std::span<const Vec> tangents, Curvature c);
std::vector<LorentzPoint> project_batch_parallel(std::span<const Vec> tangents, Curvature c);
std::vector<LorentzPoint> project_batch(std::span<const Vec> tangents, Curvature c, Exec exec);

// D(i, j) = geodesic_distance(a[i], b[j]).
Matrix distance_matrix_serial(std::span<const LorentzPoint> a,
                              std::span<const LorentzPoint> b, Curvature c);
Matrix distance_matrix_parallel(std::span<const LorentzPoint> a,
                                std::span<const LorentzPoint> b, Curvature c);
Matrix distance_matrix(std::span<const LorentzPoint> a, std::span<const LorentzPoint> b,
                       Curvature c, Exec exec);

std::vector<NearestProxy> nearest_batch_serial(std::span<const LorentzPoint> e,
                                               const ProxySet& ps, Curvature c,
                                               std::optional<std::span<const int>> restrict);
std::vector<NearestProxy> nearest_batch_parallel(std::span<const LorentzPoint> e,
                                                 const ProxySet& ps, Curvature c,
                                                 std::optional<std::span<const int>> restrict);
std::vector<NearestProxy> nearest_batch(std::span<const LorentzPoint> e, const ProxySet& ps,
                                        Curvature c,
                                        std::optional<std::span<const int>> restrict,
                                        Exec exec);

// Backward through D = distance_matrix(a, b) given dL/dD (same shape).
// Row gradients: ga[i] = sum_j dD(i,j) * d D(i,j)/d a[i], summed in j order.
// Column gradients: gb[j] = sum_i dD(i,j) * d D(i,j)/d b[j], summed in i order.
struct DistanceGrads {
  std::vector<AmbientGrad> rows;
  std::vector<AmbientGrad> cols;
};
DistanceGrads distance_matrix_vjp_serial(std::span<const LorentzPoint> a,
                                         std::span<const LorentzPoint> b, Curvature c,
                                         const Matrix& upstream);
DistanceGrads distance_matrix_vjp_parallel(std::span<const LorentzPoint> a,
                                           std::span<const LorentzPoint> b, Curvature c,
                                           const Matrix& upstream);
DistanceGrads distance_matrix_vjp(std::span<const LorentzPoint> a,
                                  std::span<const LorentzPoint> b, Curvature c,
                                  const Matrix& upstream, Exec exec);

}  // namespace hyperhier
