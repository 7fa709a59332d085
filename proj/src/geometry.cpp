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

#include "hyperhier/geometry.hpp"

#include <limits>
#include <string>

#include "hyperhier/errors.hpp"

namespace hyperhier {

namespace {

double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

// (t cosh t - sinh t) / t^3, the radial part of d/dv sinhc(sqrt(c)|v|).
double sinhc_slope(double t) {
  if (t < 1e-2) {
    const double t2 = t * t;
    return 1.0 / 3.0 + t2 * (1.0 / 30.0 + t2 * (1.0 / 840.0 + t2 / 45360.0));
  }
  return (t * std::cosh(t) - std::sinh(t)) / (t * t * t);
}

// asinh(t)/t.
double asinhc(double t) {
  if (t < 1e-6) return 1.0 - t * t / 6.0;
  return std::asinh(t) / t;
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(std::sqrt(c)) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw UsageError("curvature must be positive and finite, got " + std::to_string(c));
  }
}

LorentzPoint LorentzPoint::from_raw(std::span<const double> raw, Curvature c) {
  if (raw.size() < 2) throw UsageError("raw Lorentz vector needs at least 2 entries");
  LorentzPoint p;
  p.time = raw[0];
  p.space.assign(raw.begin() + 1, raw.end());
  require_on_manifold(p, c, "LorentzPoint::from_raw");
  return p;
}

Vec LorentzPoint::to_raw() const {
  Vec raw;
  raw.reserve(space.size() + 1);
  raw.push_back(time);
  raw.insert(raw.end(), space.begin(), space.end());
  return raw;
}

double manifold_tolerance(const LorentzPoint& x) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  return 1e-9 + 16.0 * kEps * x.time * x.time;
}

double manifold_residual(const LorentzPoint& x, Curvature c) {
  return lorentz_inner(x, x) + 1.0 / c.value();
}

bool on_manifold(const LorentzPoint& x, Curvature c) {
  if (!std::isfinite(x.time) || x.time <= 0.0) return false;
  for (double s : x.space) {
    if (!std::isfinite(s)) return false;
  }
  return std::abs(manifold_residual(x, c)) <= manifold_tolerance(x);
}

void require_on_manifold(const LorentzPoint& x, Curvature c, const char* what) {
  if (!on_manifold(x, c)) {
    throw UsageError(std::string(what) + ": point is off the manifold (residual " +
                     std::to_string(manifold_residual(x, c)) + ")");
  }
}

LorentzPoint origin(std::size_t n, Curvature c) {
  LorentzPoint o;
  o.space.assign(n, 0.0);
  o.time = 1.0 / c.sqrt_c();
  return o;
}

double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y) {
  require_same_dim(x.dim(), y.dim(), "lorentz_inner");
  return -x.time * y.time + dot(x.space, y.space);
}

double lorentz_inner(std::span<const double> x_raw, std::span<const double> y_raw) {
  require_same_dim(x_raw.size(), y_raw.size(), "lorentz_inner");
  if (x_raw.empty()) throw UsageError("lorentz_inner: empty vector");
  return -x_raw[0] * y_raw[0] + dot(x_raw.subspan(1), y_raw.subspan(1));
}

double sinhc(double t) {
  if (t < 1e-6) return 1.0 + t * t / 6.0;
  return std::sinh(t) / t;
}

LorentzPoint exp_map_origin(std::span<const double> v, Curvature c) {
  for (double x : v) {
    if (!std::isfinite(x)) throw UsageError("exp_map_origin: non-finite tangent entry");
  }
  const double r = std::sqrt(squared_norm(v));
  const double f = sinhc(c.sqrt_c() * r);
  LorentzPoint p;
  p.space.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p.space[i] = f * v[i];
  p.time = std::sqrt(1.0 / c.value() + squared_norm(p.space));
  if (!std::isfinite(p.time)) throw NumericError("exp_map_origin: overflow");
  return p;
}

Vec log_map_origin(const LorentzPoint& x, Curvature c) {
  require_on_manifold(x, c, "log_map_origin");
  const double ns = std::sqrt(squared_norm(x.space));
  const double g = asinhc(c.sqrt_c() * ns);
  Vec v(x.space.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g * x.space[i];
  return v;
}

double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature c) {
#ifdef HYPERHIER_DEBUG_CHECKS
  require_on_manifold(x, c, "geodesic_distance");
  require_on_manifold(y, c, "geodesic_distance");
#endif
  double z = -c.value() * lorentz_inner(x, y);
  if (z < 1.0) z = 1.0;
  return std::acosh(z) / c.sqrt_c();
}

double checked_geodesic_distance(const LorentzPoint& x, const LorentzPoint& y,
                                 Curvature c) {
  require_on_manifold(x, c, "geodesic_distance");
  require_on_manifold(y, c, "geodesic_distance");
  return geodesic_distance(x, y, c);
}

namespace {

struct Aggregate {
  LorentzPoint m;  // not on the manifold
  double neg_q = 0.0;  // -<m,m>_L
  double scale = 0.0;  // 1 / (sqrt c sqrt(-q))
};

Aggregate aggregate(std::span<const LorentzPoint> points, std::span<const double> weights,
                    Curvature c) {
  if (points.empty()) throw UsageError("lorentz_centroid: no points");
  require_same_dim(points.size(), weights.size(), "lorentz_centroid weights");
  const std::size_t n = points.front().dim();
  Aggregate a;
  a.m.space.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    require_same_dim(points[j].dim(), n, "lorentz_centroid");
    const double w = weights[j];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw UsageError("lorentz_centroid: weights must be nonnegative and finite");
    }
    total += w;
    a.m.time += w * points[j].time;
    for (std::size_t i = 0; i < n; ++i) a.m.space[i] += w * points[j].space[i];
  }
  if (total == 0.0) throw UsageError("lorentz_centroid: all weights are zero");
  a.neg_q = -lorentz_inner(a.m, a.m);
  if (!(a.neg_q > 0.0)) {
    throw NumericError("lorentz_centroid: aggregate is not timelike (<m,m>_L >= 0)");
  }
  a.scale = 1.0 / (c.sqrt_c() * std::sqrt(a.neg_q));
  return a;
}

}  // namespace

LorentzPoint lorentz_centroid(std::span<const LorentzPoint> points,
                              std::span<const double> weights, Curvature c) {
  Aggregate a = aggregate(points, weights, c);
  LorentzPoint mu = std::move(a.m);
  mu.time *= a.scale;
  for (double& s : mu.space) s *= a.scale;
  return mu;
}

double centroid_objective(std::span<const LorentzPoint> points,
                          std::span<const double> weights, const LorentzPoint& z,
                          Curvature c) {
  require_same_dim(points.size(), weights.size(), "centroid_objective");
  double acc = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    acc += weights[j] * (-2.0 / c.value() - 2.0 * lorentz_inner(points[j], z));
  }
  return acc;
}

void AmbientGrad::add(const AmbientGrad& other, double scale) {
  require_same_dim(space.size(), other.space.size(), "AmbientGrad::add");
  time += scale * other.time;
  for (std::size_t i = 0; i < space.size(); ++i) space[i] += scale * other.space[i];
}

Vec exp_map_origin_vjp(std::span<const double> v, Curvature c, const AmbientGrad& g) {
  require_same_dim(v.size(), g.space.size(), "exp_map_origin_vjp");
  const LorentzPoint p = exp_map_origin(v, c);
  // Fold the time gradient into the space gradient: d time / d space = space / time.
  Vec gs(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) gs[i] = g.space[i] + g.time * p.space[i] / p.time;

  const double r = std::sqrt(squared_norm(v));
  const double t = c.sqrt_c() * r;
  const double f = sinhc(t);
  const double radial = c.value() * sinhc_slope(t) * dot(v, gs);
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f * gs[i] + radial * v[i];
  return out;
}

double distance_dz(double z, Curvature c) {
  if (z < 1.0 + kAcoshClampBand) return 0.0;
  return 1.0 / (c.sqrt_c() * std::sqrt((z - 1.0) * (z + 1.0)));
}

void geodesic_distance_vjp(const LorentzPoint& x, const LorentzPoint& y, Curvature c,
                           double upstream, AmbientGrad* gx, AmbientGrad* gy) {
  const double z = -c.value() * lorentz_inner(x, y);
  const double k = upstream * distance_dz(z, c) * c.value();
  if (k == 0.0) return;
  // dz/dx_space = -c y_space, dz/dx_time = c y_time (and symmetrically for y).
  if (gx != nullptr) {
    gx->time += k * y.time;
    for (std::size_t i = 0; i < x.dim(); ++i) gx->space[i] -= k * y.space[i];
  }
  if (gy != nullptr) {
    gy->time += k * x.time;
    for (std::size_t i = 0; i < y.dim(); ++i) gy->space[i] -= k * x.space[i];
  }
}

void lorentz_centroid_vjp(std::span<const LorentzPoint> points,
                          std::span<const double> weights, Curvature c,
                          const AmbientGrad& g_mu, std::span<AmbientGrad> grads) {
  require_same_dim(points.size(), grads.size(), "lorentz_centroid_vjp");
  const Aggregate a = aggregate(points, weights, c);
  const std::size_t n = a.m.dim();
  // mu = s(m) m with s = (c * -q)^{-1/2}, q = <m,m>_L.
  const double gm_dot = g_mu.time * a.m.time + dot(g_mu.space, a.m.space);
  const double k = gm_dot * a.scale / a.neg_q;
  AmbientGrad g_m(n);
  g_m.time = a.scale * g_mu.time - k * a.m.time;
  for (std::size_t i = 0; i < n; ++i) g_m.space[i] = a.scale * g_mu.space[i] + k * a.m.space[i];
  for (std::size_t j = 0; j < points.size(); ++j) grads[j].add(g_m, weights[j]);
}

}  // namespace hyperhier
