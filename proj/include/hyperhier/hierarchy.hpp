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

// Balanced semantic taxonomy. Levels count upward from the leaves: level 0
// holds the class leaves and level depth()-1 holds the single root. The
// root's children carry a subtree tag (object / background / ignored) that
// is inherited by every descendant.
//
// Hierarchy document (JSON):
//
//   {
//     "nodes": [ {"name": "root", "children": [ {"name": "object", ...}, ... ]} ],
//     "leaf_classes": ["car", "truck", ...],          // class id = position
//     "subtrees": {"object": ["object"], "background": [...], "ignored": [...]}
//   }
//
// A child may be a nested node object or the name of a node defined at the
// top level of "nodes". Nodes may set "passthrough": true (written by
// to_json for padding nodes).

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hyperhier {

enum class SubtreeTag { kNone, kObject, kBackground, kIgnored };

const char* to_string(SubtreeTag tag);

struct HierarchyNode {
  int id = -1;
  std::string name;
  int level = -1;
  int parent = -1;  // -1 for the root
  std::vector<int> children;
  bool passthrough = false;  // single-child padding node
  SubtreeTag tag = SubtreeTag::kNone;
};

class Hierarchy {
 public:
  // Validates and balances. Throws ValidationError (with offending ids) on
  // multiple roots, cycles, multi-parent nodes, undeclared or missing leaf
  // classes and untagged root children; UsageError on malformed documents.
  static Hierarchy build(const nlohmann::json& doc);
  static Hierarchy parse(std::string_view text);
  static Hierarchy load(const std::string& path);

  nlohmann::json to_json() const;

  int depth() const { return depth_; }
  int root() const { return root_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int num_classes() const { return static_cast<int>(class_to_leaf_.size()); }

  const HierarchyNode& node(int id) const;
  std::span<const HierarchyNode> nodes() const { return nodes_; }
  std::span<const int> level_nodes(int level) const;

  int leaf_of(int class_id) const;
  // Class id of a level-0 node, -1 otherwise.
  int class_of(int node_id) const { return leaf_to_class_.at(node_id); }
  const std::string& class_name(int class_id) const;
  // Class id for a leaf-class name, -1 if unknown.
  int find_class(std::string_view name) const;
  // Node id for a name, -1 if unknown.
  int find_node(std::string_view name) const;

  // pi_level(class): the class's ancestor at `level`.
  int ancestor(int class_id, int level) const;
  // Ancestors at levels 0..depth()-1, in level order.
  std::span<const int> positive_set(int class_id) const;
  // All remaining node ids, ascending.
  std::vector<int> negative_set(int class_id) const;

  SubtreeTag tag(int node_id) const { return node(node_id).tag; }
  bool is_ancestor_or_self(int maybe_ancestor, int node_id) const;

 private:
  Hierarchy() = default;

  void check_class(int class_id) const;

  std::vector<HierarchyNode> nodes_;
  std::vector<std::vector<int>> levels_;
  std::vector<int> class_to_leaf_;
  std::vector<int> leaf_to_class_;
  std::vector<std::vector<int>> ancestors_;  // [class][level]
  int depth_ = 0;
  int root_ = -1;
};

// Built-in four-level toy taxonomy: 12 leaf classes in object / background /
// ignored subtrees. Used by default configs and tests.
std::string_view toy_h4_document();
Hierarchy toy_h4();

}  // namespace hyperhier
