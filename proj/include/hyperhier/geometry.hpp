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

// Lorentz (hyperboloid) model of hyperbolic space with curvature -c.
//
// A point x in R^{n+1} lies on the upper sheet {<x,x>_L = -1/c, x_time > 0}.
// Tangent vectors live at the origin O = (0, ..., 0, 1/sqrt(c)) and are
// plain R^n vectors. Raw (n+1)-vectors use the layout [time, space...].

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace hyperhier {

using Vec = std::vector<double>;

class Curvature {
 public:
  // Throws UsageError unless 0 < c < inf.
  explicit Curvature(double c);

  double value() const { return c_; }
  double sqrt_c() const { return sqrt_c_; }

 private:
  double c_;
  double sqrt_c_;
};

struct LorentzPoint {
  Vec space;
  double time = 0.0;

  std::size_t dim() const { return space.size(); }

  // Validating constructor from a raw [time, space...] vector.
  static LorentzPoint from_raw(std::span<const double> raw, Curvature c);
  Vec to_raw() const;

  friend bool operator==(const LorentzPoint&, const LorentzPoint&) = default;
};

// Absolute tolerance used when validating <x,x>_L = -1/c: 1e-9 plus the
// floor set by rounding the time coordinate (grows like eps * time^2).
double manifold_tolerance(const LorentzPoint& x);
// <x,x>_L + 1/c.
double manifold_residual(const LorentzPoint& x, Curvature c);
bool on_manifold(const LorentzPoint& x, Curvature c);
// Throws UsageError naming `what` if x is off the manifold.
void require_on_manifold(const LorentzPoint& x, Curvature c, const char* what);

LorentzPoint origin(std::size_t n, Curvature c);

// -x_time * y_time + <x_space, y_space>.
double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y);
double lorentz_inner(std::span<const double> x_raw, std::span<const double> y_raw);

// sinh(t)/t, with the two-term series below 1e-6.
double sinhc(double t);

LorentzPoint exp_map_origin(std::span<const double> v, Curvature c);
Vec log_map_origin(const LorentzPoint& x, Curvature c);

// (1/sqrt c) acosh(max(1, -c <x,y>_L)). Trusts its inputs; builds with
// HYPERHIER_DEBUG_CHECKS recheck the manifold constraint.
double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature c);
// Same value, always validating both arguments.
double checked_geodesic_distance(const LorentzPoint& x, const LorentzPoint& y,
                                 Curvature c);

// Closed-form Lorentzian centroid: m = sum w_i x_i, mu = m / (sqrt c sqrt|<m,m>_L|).
// Throws NumericError when <m,m>_L >= 0.
LorentzPoint lorentz_centroid(std::span<const LorentzPoint> points,
                              std::span<const double> weights, Curvature c);

// Sum_i w_i (-2/c - 2 <x_i, z>_L); minimized over the manifold by the centroid.
double centroid_objective(std::span<const LorentzPoint> points,
                          std::span<const double> weights, const LorentzPoint& z,
                          Curvature c);

// ---------------------------------------------------------------------------
// Vector-Jacobian products used by the gradient engine. Ambient gradients
// are split like the points: (g_space, g_time).

struct AmbientGrad {
  Vec space;
  double time = 0.0;

  explicit AmbientGrad(std::size_t n = 0) : space(n, 0.0) {}
  void add(const AmbientGrad& other, double scale = 1.0);
};

// Gradient of a scalar f(exp_map_origin(v)) with respect to v, given
// df/dspace and df/dtime. The time coordinate is treated as the function
// sqrt(1/c + |space|^2) of the space coordinates.
Vec exp_map_origin_vjp(std::span<const double> v, Curvature c, const AmbientGrad& g);

// Derivative of the distance with respect to the acosh argument z = -c<x,y>_L
// scaled by 1/sqrt(c); zero inside the clamp region z < 1 + 1e-10.
double distance_dz(double z, Curvature c);
constexpr double kAcoshClampBand = 1e-10;

// Accumulates upstream * d(dist)/dx into gx and upstream * d(dist)/dy into gy
// (either may be null).
void geodesic_distance_vjp(const LorentzPoint& x, const LorentzPoint& y, Curvature c,
                           double upstream, AmbientGrad* gx, AmbientGrad* gy);

// Given df/dmu for mu = lorentz_centroid(points, weights), accumulates
// df/dx_i into grads[i].
void lorentz_centroid_vjp(std::span<const LorentzPoint> points,
                          std::span<const double> weights, Curvature c,
                          const AmbientGrad& g_mu, std::span<AmbientGrad> grads);

}  // namespace hyperhier
