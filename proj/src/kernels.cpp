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

#include "hyperhier/kernels.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hyperhier/errors.hpp"

namespace hyperhier {

int omp_thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// OpenMP regions cannot propagate exceptions; capture the first one and
// rethrow after the loop.
class ExceptionSlot {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
#pragma omp critical(hyperhier_exception_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

std::ptrdiff_t ssize(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

std::vector<LorentzPoint> project_batch_serial(std::span<const Vec> tangents, Curvature c) {
  std::vector<LorentzPoint> out;
  out.reserve(tangents.size());
  for (const Vec& v : tangents) out.push_back(exp_map_origin(v, c));
  return out;
}

std::vector<LorentzPoint> project_batch_parallel(std::span<const Vec> tangents, Curvature c) {
  std::vector<LorentzPoint> out(tangents.size());
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ssize(tangents.size()); ++i) {
    slot.run([&] { out[i] = exp_map_origin(tangents[i], c); });
  }
  slot.rethrow();
  return out;
}

std::vector<LorentzPoint> project_batch(std::span<const Vec> tangents, Curvature c, Exec exec) {
  return exec == Exec::kParallel ? project_batch_parallel(tangents, c)
                                 : project_batch_serial(tangents, c);
}

Matrix distance_matrix_serial(std::span<const LorentzPoint> a,
                              std::span<const LorentzPoint> b, Curvature c) {
  Matrix d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = geodesic_distance(a[i], b[j], c);
  }
  return d;
}

Matrix distance_matrix_parallel(std::span<const LorentzPoint> a,
                                std::span<const LorentzPoint> b, Curvature c) {
  Matrix d(a.size(), b.size());
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ssize(a.size()); ++i) {
    slot.run([&] {
      for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = geodesic_distance(a[i], b[j], c);
    });
  }
  slot.rethrow();
  return d;
}

Matrix distance_matrix(std::span<const LorentzPoint> a, std::span<const LorentzPoint> b,
                       Curvature c, Exec exec) {
  return exec == Exec::kParallel ? distance_matrix_parallel(a, b, c)
                                 : distance_matrix_serial(a, b, c);
}

std::vector<NearestProxy> nearest_batch_serial(std::span<const LorentzPoint> e,
                                               const ProxySet& ps, Curvature c,
                                               std::optional<std::span<const int>> restrict) {
  std::vector<NearestProxy> out;
  out.reserve(e.size());
  for (const LorentzPoint& x : e) out.push_back(nearest_proxy(x, ps, c, restrict));
  return out;
}

std::vector<NearestProxy> nearest_batch_parallel(std::span<const LorentzPoint> e,
                                                 const ProxySet& ps, Curvature c,
                                                 std::optional<std::span<const int>> restrict) {
  std::vector<NearestProxy> out(e.size());
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ssize(e.size()); ++i) {
    slot.run([&] { out[i] = nearest_proxy(e[i], ps, c, restrict); });
  }
  slot.rethrow();
  return out;
}

std::vector<NearestProxy> nearest_batch(std::span<const LorentzPoint> e, const ProxySet& ps,
                                        Curvature c,
                                        std::optional<std::span<const int>> restrict,
                                        Exec exec) {
  return exec == Exec::kParallel ? nearest_batch_parallel(e, ps, c, restrict)
                                 : nearest_batch_serial(e, ps, c, restrict);
}

namespace {

void check_vjp_shapes(std::span<const LorentzPoint> a, std::span<const LorentzPoint> b,
                      const Matrix& upstream) {
  if (upstream.rows != a.size() || upstream.cols != b.size()) {
    throw UsageError("distance_matrix_vjp: upstream shape does not match the inputs");
  }
  const std::size_t n = a.empty() ? 0 : a.front().dim();
  for (const LorentzPoint& p : a) {
    if (p.dim() != n) throw UsageError("distance_matrix_vjp: ragged points");
  }
  for (const LorentzPoint& p : b) {
    if (!a.empty() && p.dim() != n) throw UsageError("distance_matrix_vjp: ragged points");
  }
}

DistanceGrads zero_grads(std::span<const LorentzPoint> a, std::span<const LorentzPoint> b) {
  DistanceGrads g;
  const std::size_t n = a.empty() ? (b.empty() ? 0 : b.front().dim()) : a.front().dim();
  g.rows.assign(a.size(), AmbientGrad(n));
  g.cols.assign(b.size(), AmbientGrad(n));
  return g;
}

}  // namespace

DistanceGrads distance_matrix_vjp_serial(std::span<const LorentzPoint> a,
                                         std::span<const LorentzPoint> b, Curvature c,
                                         const Matrix& upstream) {
  check_vjp_shapes(a, b, upstream);
  DistanceGrads g = zero_grads(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      geodesic_distance_vjp(a[i], b[j], c, upstream(i, j), &g.rows[i], nullptr);
    }
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      geodesic_distance_vjp(a[i], b[j], c, upstream(i, j), nullptr, &g.cols[j]);
    }
  }
  return g;
}

DistanceGrads distance_matrix_vjp_parallel(std::span<const LorentzPoint> a,
                                           std::span<const LorentzPoint> b, Curvature c,
                                           const Matrix& upstream) {
  check_vjp_shapes(a, b, upstream);
  DistanceGrads g = zero_grads(a, b);
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < ssize(a.size()); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        geodesic_distance_vjp(a[i], b[j], c, upstream(i, j), &g.rows[i], nullptr);
      }
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < ssize(b.size()); ++j) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        geodesic_distance_vjp(a[i], b[j], c, upstream(i, j), nullptr, &g.cols[j]);
      }
    }
  }
  return g;
}

DistanceGrads distance_matrix_vjp(std::span<const LorentzPoint> a,
                                  std::span<const LorentzPoint> b, Curvature c,
                                  const Matrix& upstream, Exec exec) {
  return exec == Exec::kParallel ? distance_matrix_vjp_parallel(a, b, c, upstream)
                                 : distance_matrix_vjp_serial(a, b, c, upstream);
}

}  // namespace hyperhier
