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

#include "hyperhier/panoptic.hpp"

#include <fstream>

#include "hyperhier/errors.hpp"

namespace hyperhier {

PanopticMap::PanopticMap(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw UsageError("panoptic map: width and height must be positive");
  cells.assign(static_cast<std::size_t>(w) * h, Segment{});
}

double ClassStats::pq() const {
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  return denom > 0.0 ? iou_sum / denom : 0.0;
}

double ClassStats::rq() const {
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  return denom > 0.0 ? tp / denom : 0.0;
}

double ClassStats::sq() const { return tp > 0 ? iou_sum / tp : 0.0; }

ClassStats& ClassStats::operator+=(const ClassStats& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  iou_sum += o.iou_sum;
  return *this;
}

PQStats& PQStats::operator+=(const PQStats& o) {
  for (const auto& [cls, s] : o.per_class) per_class[cls] += s;
  return *this;
}

PQStats match_and_score(const PanopticMap& pred, const PanopticMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height ||
      pred.cells.size() != gt.cells.size()) {
    throw UsageError("match_and_score: prediction and ground truth differ in size");
  }
  std::map<Segment, std::int64_t> pred_area, gt_area, pred_void;
  std::map<std::pair<Segment, Segment>, std::int64_t> inter;  // (pred, gt)
  for (std::size_t k = 0; k < gt.cells.size(); ++k) {
    const Segment& p = pred.cells[k];
    const Segment& g = gt.cells[k];
    if (p.cls != kVoidClass) {
      ++pred_area[p];
      if (g.cls == kVoidClass) ++pred_void[p];
    }
    if (g.cls != kVoidClass) {
      ++gt_area[g];
      if (p.cls != kVoidClass) ++inter[{p, g}];
    }
  }

  PQStats stats;
  std::set<Segment> matched_pred, matched_gt;
  // IoU > 0.5 makes each match unique, so the scan order does not matter.
  for (const auto& [pg, n] : inter) {
    const auto& [p, g] = pg;
    if (p.cls != g.cls) continue;
    const std::int64_t uni = pred_area[p] - pred_void[p] + gt_area[g] - n;
    const double iou = static_cast<double>(n) / static_cast<double>(uni);
    if (iou > 0.5) {
      ClassStats& s = stats.per_class[g.cls];
      ++s.tp;
      s.iou_sum += iou;
      matched_pred.insert(p);
      matched_gt.insert(g);
    }
  }
  for (const auto& [g, area] : gt_area) {
    if (!matched_gt.contains(g)) ++stats.per_class[g.cls].fn;
  }
  for (const auto& [p, area] : pred_area) {
    if (matched_pred.contains(p)) continue;
    const auto it = pred_void.find(p);
    const std::int64_t v = it == pred_void.end() ? 0 : it->second;
    if (2 * v > area) continue;
    ++stats.per_class[p.cls].fp;
  }
  return stats;
}

QualityRow summarize(const PQStats& stats, std::span<const int> classes) {
  QualityRow row;
  for (int cls : classes) {
    const auto it = stats.per_class.find(cls);
    if (it == stats.per_class.end()) continue;
    const ClassStats& s = it->second;
    if (s.tp + s.fp + s.fn == 0) continue;
    ++row.classes;
    row.pq += s.pq();
    row.rq += s.rq();
    row.sq += s.sq();
    row.tp += s.tp;
    row.fp += s.fp;
    row.fn += s.fn;
  }
  if (row.classes > 0) {
    row.pq /= row.classes;
    row.rq /= row.classes;
    row.sq /= row.classes;
  }
  return row;
}

OpenWorldReport open_world_report(const PQStats& open, std::span<const int> known_classes,
                                  int unknown_class, const PQStats* closed) {
  OpenWorldReport r;
  r.known = summarize(open, known_classes);
  const int unk[] = {unknown_class};
  r.unknown = summarize(open, unk);
  if (closed != nullptr) {
    r.closed_known = summarize(*closed, known_classes);
    r.delta_pq = r.closed_known->pq - r.known.pq;
  }
  return r;
}

nlohmann::json to_json(const QualityRow& row) {
  nlohmann::json j = {{"pq", row.pq}, {"rq", row.rq}, {"sq", row.sq},
                      {"classes", row.classes}, {"tp", row.tp}, {"fp", row.fp},
                      {"fn", row.fn}};
  if (row.classes == 0) j["note"] = "no segments";
  return j;
}

nlohmann::json to_json(const OpenWorldReport& report) {
  nlohmann::json j = {{"known", to_json(report.known)}, {"unknown", to_json(report.unknown)}};
  if (report.closed_known) j["closed_known"] = to_json(*report.closed_known);
  if (report.delta_pq) j["delta_pq"] = *report.delta_pq;
  return j;
}

namespace {

int get_int(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_number_integer()) {
    throw UsageError(where + ": missing or non-integer '" + key + "'");
  }
  return j[key].get<int>();
}

}  // namespace

std::vector<PanopticMap> maps_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array()) {
    throw UsageError("panoptic file: expected {\"images\": [...]}");
  }
  std::vector<PanopticMap> maps;
  for (std::size_t i = 0; i < doc["images"].size(); ++i) {
    const nlohmann::json& img = doc["images"][i];
    const std::string where = "image " + std::to_string(i);
    PanopticMap m(get_int(img, "width", where), get_int(img, "height", where));
    if (!img.contains("segments") || !img["segments"].is_array()) {
      throw UsageError(where + ": missing 'segments' array");
    }
    std::set<Segment> seen;
    for (const nlohmann::json& seg : img["segments"]) {
      const Segment s{get_int(seg, "class", where), get_int(seg, "instance", where)};
      if (s.cls < 0) throw UsageError(where + ": class ids must be non-negative");
      if (!seen.insert(s).second) throw UsageError(where + ": duplicate segment");
      if (!seg.contains("runs") || !seg["runs"].is_array()) {
        throw UsageError(where + ": segment without 'runs'");
      }
      for (const nlohmann::json& run : seg["runs"]) {
        if (!run.is_array() || run.size() != 2 || !run[0].is_number_integer() ||
            !run[1].is_number_integer()) {
          throw UsageError(where + ": run must be [start, length]");
        }
        const std::int64_t start = run[0].get<std::int64_t>();
        const std::int64_t len = run[1].get<std::int64_t>();
        if (start < 0 || len <= 0 || start + len > static_cast<std::int64_t>(m.cells.size())) {
          throw UsageError(where + ": run out of range");
        }
        for (std::int64_t k = start; k < start + len; ++k) {
          if (m.cells[k].cls != kVoidClass) throw UsageError(where + ": overlapping runs");
          m.cells[k] = s;
        }
      }
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

nlohmann::json maps_to_json(std::span<const PanopticMap> maps) {
  nlohmann::json images = nlohmann::json::array();
  for (const PanopticMap& m : maps) {
    std::map<Segment, nlohmann::json> runs;
    std::size_t k = 0;
    while (k < m.cells.size()) {
      std::size_t end = k + 1;
      while (end < m.cells.size() && m.cells[end] == m.cells[k]) ++end;
      if (m.cells[k].cls != kVoidClass) {
        runs[m.cells[k]].push_back({static_cast<std::int64_t>(k),
                                    static_cast<std::int64_t>(end - k)});
      }
      k = end;
    }
    nlohmann::json segs = nlohmann::json::array();
    for (auto& [s, r] : runs) {
      segs.push_back({{"class", s.cls}, {"instance", s.instance}, {"runs", std::move(r)}});
    }
    images.push_back({{"width", m.width}, {"height", m.height}, {"segments", std::move(segs)}});
  }
  return {{"images", std::move(images)}};
}

std::vector<PanopticMap> load_maps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  return maps_from_json(doc);
}

}  // namespace hyperhier
