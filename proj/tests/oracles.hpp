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

// Independent reference implementations used only by tests. They share no
// code with the library beyond plain data types and are written for
// clarity, not speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "hyperhier/hierarchy.hpp"
#include "hyperhier/panoptic.hpp"

namespace oracle {

// Constants evaluated once with 50-digit arithmetic (mpmath).
// d(exp(1,0), exp(0,1)) at c = 0.1.
inline constexpr double kDistanceUnitAxes = 1.4257941884418082292;
// log(1 + e^2.5) + log(1 + e^-12.5).
inline constexpr double kLossSingleNegative = 2.5788934609387777473;
// Mean norm of a 16-dim N(0, 0.1^2 I) vector: 0.1 sqrt(2) Gamma(8.5) / Gamma(8).
inline constexpr double kChiMean16Scale01 = 0.39380256218873262287;

using LVec = std::vector<long double>;

struct LPoint {
  LVec space;
  long double time = 0;
};

inline LPoint exp0(const std::vector<double>& v, double c) {
  long double n2 = 0;
  for (double x : v) n2 += static_cast<long double>(x) * x;
  const long double n = std::sqrt(n2);
  const long double sc = std::sqrt(static_cast<long double>(c));
  const long double f = n == 0 ? 1.0L : std::sinh(sc * n) / (sc * n);
  LPoint p;
  long double s2 = 0;
  for (double x : v) {
    p.space.push_back(f * x);
    s2 += (f * x) * (f * x);
  }
  p.time = std::sqrt(1.0L / c + s2);
  return p;
}

inline long double inner(const LPoint& a, const LPoint& b) {
  long double s = -a.time * b.time;
  for (std::size_t i = 0; i < a.space.size(); ++i) s += a.space[i] * b.space[i];
  return s;
}

inline long double dist(const LPoint& a, const LPoint& b, double c) {
  const long double z = std::max(1.0L, -static_cast<long double>(c) * inner(a, b));
  return std::acosh(z) / std::sqrt(static_cast<long double>(c));
}

inline LPoint centroid(const std::vector<LPoint>& pts, double c) {
  LPoint m;
  m.space.assign(pts.front().space.size(), 0);
  for (const LPoint& p : pts) {
    m.time += p.time / pts.size();
    for (std::size_t i = 0; i < m.space.size(); ++i) m.space[i] += p.space[i] / pts.size();
  }
  const long double scale = 1.0L / (std::sqrt(static_cast<long double>(c)) * std::sqrt(std::abs(inner(m, m))));
  for (long double& x : m.space) x *= scale;
  m.time *= scale;
  return m;
}

// Every node's proxy point, leaves first then ancestors by recursion.
inline std::vector<LPoint> proxies(const hyperhier::Hierarchy& h,
                                   const std::vector<std::vector<double>>& leaf_tangents,
                                   double c) {
  std::vector<LPoint> pts(h.node_count());
  std::vector<bool> done(h.node_count(), false);
  std::function<void(int)> build = [&](int id) {
    if (done[id]) return;
    const auto& node = h.node(id);
    if (node.children.empty()) {
      pts[id] = exp0(leaf_tangents[h.class_of(id)], c);
    } else {
      std::vector<LPoint> kids;
      for (int ch : node.children) {
        build(ch);
        kids.push_back(pts[ch]);
      }
      pts[id] = centroid(kids, c);
    }
    done[id] = true;
  };
  build(h.root());
  return pts;
}

inline long double log1p_sum(const std::vector<long double>& a) {
  long double s = 0;
  for (long double x : a) s += std::exp(x);
  return std::log1p(s);
}

struct LossParams {
  double alpha_leaf = 5, alpha_anc = 2.5, delta = 0.5, c = 0.1;
};

// Per-sample hierarchical loss written straight from its definition.
inline long double sample_loss(const std::vector<double>& v, int label,
                               const hyperhier::Hierarchy& h, const std::vector<LPoint>& px,
                               const LossParams& p) {
  const LPoint x = exp0(v, p.c);
  std::set<int> pos;
  for (int l = 0; l < h.depth(); ++l) pos.insert(h.ancestor(label, l));
  std::vector<long double> a_pos, a_neg;
  for (int id = 0; id < h.node_count(); ++id) {
    const long double alpha = h.node(id).level == 0 ? p.alpha_leaf : p.alpha_anc;
    const long double d = dist(x, px[id], p.c);
    if (pos.count(id)) {
      a_pos.push_back(alpha * (d + p.delta));
    } else {
      a_neg.push_back(alpha * (p.delta - d));
    }
  }
  return log1p_sum(a_pos) + log1p_sum(a_neg);
}

// Batch form: per proxy, log-sum over its positive (negative) samples;
// pull averaged over proxies positive for some sample, push over all
// proxies in `use`.
inline long double batch_loss(const std::vector<std::vector<double>>& v,
                              const std::vector<int>& labels, const hyperhier::Hierarchy& h,
                              const std::vector<LPoint>& px, const LossParams& p,
                              const std::vector<bool>& use) {
  std::vector<LPoint> x;
  for (const auto& t : v) x.push_back(exp0(t, p.c));
  long double pull = 0, push = 0;
  int npos = 0, nall = 0;
  for (int id = 0; id < h.node_count(); ++id) {
    if (!use[id]) continue;
    ++nall;
    const long double alpha = h.node(id).level == 0 ? p.alpha_leaf : p.alpha_anc;
    std::vector<long double> ap, an;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long double d = dist(x[i], px[id], p.c);
      bool positive = false;
      for (int l = 0; l < h.depth(); ++l) positive = positive || h.ancestor(labels[i], l) == id;
      if (positive) {
        ap.push_back(alpha * (d + p.delta));
      } else {
        an.push_back(alpha * (p.delta - d));
      }
    }
    if (!ap.empty()) {
      ++npos;
      pull += log1p_sum(ap);
    }
    if (!an.empty()) push += log1p_sum(an);
  }
  return (npos ? pull / npos : 0) + push / nall;
}

// Flat proxy-anchor loss: one proxy per class, one scale alpha.
inline long double flat_proxy_anchor(const std::vector<std::vector<double>>& v,
                                     const std::vector<int>& labels,
                                     const std::vector<std::vector<double>>& class_tangents,
                                     double alpha, double delta, double c) {
  std::vector<LPoint> x, px;
  for (const auto& t : v) x.push_back(exp0(t, c));
  for (const auto& t : class_tangents) px.push_back(exp0(t, c));
  std::set<int> present(labels.begin(), labels.end());
  long double pull = 0, push = 0;
  for (std::size_t k = 0; k < px.size(); ++k) {
    long double sp = 0, sn = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long double d = dist(x[i], px[k], c);
      if (labels[i] == static_cast<int>(k)) {
        sp += std::exp(alpha * (d + delta));
      } else {
        sn += std::exp(alpha * (delta - d));
      }
    }
    pull += std::log1p(sp);
    push += std::log1p(sn);
  }
  return pull / present.size() + push / px.size();
}

// Mining scores recomputed from scratch in double, root excluded.
struct MiningRef {
  std::int64_t id;
  bool consistent;
  double objectness;
};

inline MiningRef mining_score(std::int64_t id, const std::vector<double>& space, double time,
                              const hyperhier::Hierarchy& h,
                              const std::vector<std::pair<std::vector<double>, double>>& px,
                              double c, const std::vector<double>& level_w,
                              const std::vector<double>& div_w, double beta, double eps) {
  auto d = [&](int node) {
    long double ip = -static_cast<long double>(time) * px[node].second;
    for (std::size_t i = 0; i < space.size(); ++i) ip += static_cast<long double>(space[i]) * px[node].first[i];
    return static_cast<double>(std::acosh(std::max(1.0L, -c * ip)) / std::sqrt(static_cast<long double>(c)));
  };
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id_node = 0; id_node < h.node_count(); ++id_node) {
    if (id_node == h.root()) continue;
    if (d(id_node) < best_d) {
      best_d = d(id_node);
      best = id_node;
    }
  }
  MiningRef r{id, h.tag(best) == hyperhier::SubtreeTag::kObject, 0.0};
  if (!r.consistent) return r;
  std::vector<std::vector<int>> sets(1);
  for (int id_node = 0; id_node < h.node_count(); ++id_node) {
    if (id_node != h.root() && h.tag(id_node) == hyperhier::SubtreeTag::kObject) sets[0].push_back(id_node);
  }
  for (int l = 0; l + 1 < h.depth(); ++l) {
    sets.emplace_back();
    for (int id_node = 0; id_node < h.node_count(); ++id_node) {
      if (h.node(id_node).level == l) sets.back().push_back(id_node);
    }
  }
  double sdiv = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<double> ds;
    for (int n : sets[s]) ds.push_back(d(n));
    double mean = 0;
    for (double x : ds) mean += x;
    mean /= ds.size();
    double var = 0;
    for (double x : ds) var += (x - mean) * (x - mean);
    var /= ds.size();
    std::sort(ds.begin(), ds.end());
    sdiv += div_w[s] * (ds[1] - ds[0]) / (std::sqrt(var) + eps);
  }
  r.objectness = sdiv + beta * level_w[h.node(best).level];
  return r;
}

// Scores every candidate, keeps the consistent ones and orders them by
// repeated selection of the best remaining (objectness, then smaller id).
struct CandidateRef {
  std::int64_t id;
  std::vector<double> space;
  double time;
};

inline std::vector<MiningRef> brute_force_mine(
    const std::vector<CandidateRef>& cands, const hyperhier::Hierarchy& h,
    const std::vector<std::pair<std::vector<double>, double>>& px, double c,
    const std::vector<double>& level_w, const std::vector<double>& div_w, double beta,
    double eps, std::size_t k) {
  std::vector<MiningRef> pool;
  for (const CandidateRef& cand : cands) {
    MiningRef r = mining_score(cand.id, cand.space, cand.time, h, px, c, level_w, div_w, beta, eps);
    if (r.consistent) pool.push_back(r);
  }
  std::vector<MiningRef> out;
  while (out.size() < k && !pool.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      const bool better = pool[i].objectness > pool[best].objectness ||
                          (pool[i].objectness == pool[best].objectness && pool[i].id < pool[best].id);
      if (better) best = i;
    }
    out.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

// PQ by explicit enumeration of every (pred segment, gt segment) pair.
struct PQRef {
  std::map<int, std::int64_t> tp, fp, fn;
  std::map<int, double> iou;
};

inline PQRef brute_force_pq(const hyperhier::PanopticMap& pred, const hyperhier::PanopticMap& gt) {
  using hyperhier::Segment;
  std::set<Segment> ps, gs;
  for (const Segment& s : pred.cells) if (s.cls >= 0) ps.insert(s);
  for (const Segment& s : gt.cells) if (s.cls >= 0) gs.insert(s);
  PQRef r;
  std::set<Segment> mp, mg;
  for (const Segment& p : ps) {
    for (const Segment& g : gs) {
      if (p.cls != g.cls) continue;
      std::int64_t inter = 0, uni = 0;
      for (std::size_t k = 0; k < gt.cells.size(); ++k) {
        const bool in_p = pred.cells[k] == p;
        const bool in_g = gt.cells[k] == g;
        const bool gt_void = gt.cells[k].cls < 0;
        if (in_p && in_g) ++inter;
        if (in_g || (in_p && !gt_void)) ++uni;
      }
      const double iou = uni ? static_cast<double>(inter) / uni : 0.0;
      if (iou > 0.5) {
        ++r.tp[g.cls];
        r.iou[g.cls] += iou;
        mp.insert(p);
        mg.insert(g);
      }
    }
  }
  for (const Segment& g : gs) if (!mg.count(g)) ++r.fn[g.cls];
  for (const Segment& p : ps) {
    if (mp.count(p)) continue;
    std::int64_t area = 0, on_void = 0;
    for (std::size_t k = 0; k < gt.cells.size(); ++k) {
      if (pred.cells[k] == p) {
        ++area;
        if (gt.cells[k].cls < 0) ++on_void;
      }
    }
    if (2 * on_void > area) continue;
    ++r.fp[p.cls];
  }
  return r;
}


// Random ground truth of up to 8 rectangles on a void canvas, and a
// prediction that jitters, relabels, drops or adds rectangles.
inline std::pair<hyperhier::PanopticMap, hyperhier::PanopticMap> random_pair(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> side(1, 64);
  const int w = side(rng), h = side(rng);
  hyperhier::PanopticMap gt(w, h), pred(w, h);
  std::uniform_int_distribution<int> nseg(0, 8), cls(0, 2), coin(0, 9);
  auto rect = [&](hyperhier::PanopticMap& m, hyperhier::Segment s, int x0, int y0, int rw, int rh) {
    for (int y = std::max(0, y0); y < std::min(h, y0 + rh); ++y) {
      for (int x = std::max(0, x0); x < std::min(w, x0 + rw); ++x) m.at(x, y) = s;
    }
  };
  const int n = nseg(rng);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), rw(1, w), rh(1, h);
    const int x0 = px(rng), y0 = py(rng), ww = rw(rng), hh = rh(rng);
    const hyperhier::Segment g{cls(rng), i};
    rect(gt, g, x0, y0, ww, hh);
    const int roll = coin(rng);
    if (roll == 0) continue;  // missed
    hyperhier::Segment p{roll == 1 ? cls(rng) : g.cls, i};
    std::uniform_int_distribution<int> jitter(-3, 3);
    rect(pred, p, x0 + jitter(rng), y0 + jitter(rng), std::max(1, ww + jitter(rng)),
         std::max(1, hh + jitter(rng)));
  }
  if (coin(rng) < 3) {
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
    rect(pred, {cls(rng), 99}, px(rng), py(rng), 1 + w / 4, 1 + h / 4);
  }
  return {pred, gt};
}

}  // namespace oracle
