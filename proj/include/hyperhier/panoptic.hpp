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

// Panoptic quality. A prediction and a ground-truth segment of the same
// class match when IoU > 0.5, where the union leaves out the part of the
// prediction that falls on ground-truth void. Unmatched predictions that
// are more than half void are not false positives.
//
// Map interchange (JSON):
//
//   {"images": [{"width": W, "height": H,
//                "segments": [{"class": 3, "instance": 0, "runs": [[start, len], ...]}]}]}
//
// Pixels not covered by any run are void.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace hyperhier {

inline constexpr int kVoidClass = -1;

struct Segment {
  int cls = kVoidClass;
  int instance = 0;
  friend auto operator<=>(const Segment&, const Segment&) = default;
};

struct PanopticMap {
  int width = 0;
  int height = 0;
  std::vector<Segment> cells;  // row-major, width * height

  PanopticMap() = default;
  PanopticMap(int w, int h);  // all void
  Segment& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
  const Segment& at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
};

struct ClassStats {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double iou_sum = 0.0;

  double pq() const;
  double rq() const;
  double sq() const;
  ClassStats& operator+=(const ClassStats& o);
};

struct PQStats {
  std::map<int, ClassStats> per_class;
  PQStats& operator+=(const PQStats& o);
};

// Throws UsageError when the dimensions differ.
PQStats match_and_score(const PanopticMap& pred, const PanopticMap& gt);

struct QualityRow {
  double pq = 0.0;
  double rq = 0.0;
  double sq = 0.0;
  int classes = 0;        // classes that contributed
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// Mean over classes with TP + FP + FN > 0 among `classes`.
QualityRow summarize(const PQStats& stats, std::span<const int> classes);

struct OpenWorldReport {
  QualityRow known;
  QualityRow unknown;
  std::optional<QualityRow> closed_known;
  std::optional<double> delta_pq;  // closed known PQ - open known PQ
};

OpenWorldReport open_world_report(const PQStats& open, std::span<const int> known_classes,
                                  int unknown_class, const PQStats* closed = nullptr);

nlohmann::json to_json(const QualityRow& row);
nlohmann::json to_json(const OpenWorldReport& report);

// RLE interchange. Throws UsageError on malformed input (overlapping or
// out-of-range runs, duplicate segments, bad dimensions).
std::vector<PanopticMap> maps_from_json(const nlohmann::json& doc);
nlohmann::json maps_to_json(std::span<const PanopticMap> maps);
std::vector<PanopticMap> load_maps(const std::string& path);

}  // namespace hyperhier
