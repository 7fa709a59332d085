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

#include "hyperhier/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hyperhier/errors.hpp"

namespace hyperhier {

using nlohmann::json;

const char* to_string(SubtreeTag tag) {
  switch (tag) {
    case SubtreeTag::kObject: return "object";
    case SubtreeTag::kBackground: return "background";
    case SubtreeTag::kIgnored: return "ignored";
    case SubtreeTag::kNone: break;
  }
  return "none";
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

[[noreturn]] void fail(const std::string& msg, std::vector<int> ids) {
  std::string full = msg;
  if (!ids.empty()) full += " (node ids: " + join_ids(ids) + ")";
  throw ValidationError(full, std::move(ids));
}

struct RawNode {
  std::string name;
  bool passthrough = false;
  std::vector<int> child_ids;              // nested definitions
  std::vector<std::string> child_refs;     // references by name
};

class Flattener {
 public:
  std::vector<RawNode> nodes;
  std::map<std::string, int> by_name;

  int define(const json& item) {
    if (!item.is_object()) throw UsageError("hierarchy: node definition must be an object");
    if (!item.contains("name") || !item["name"].is_string()) {
      throw UsageError("hierarchy: node without a string \"name\"");
    }
    for (const auto& [key, _] : item.items()) {
      if (key != "name" && key != "children" && key != "passthrough") {
        throw UsageError("hierarchy: unknown node key \"" + key + "\"");
      }
    }
    const int id = static_cast<int>(nodes.size());
    const std::string name = item["name"].get<std::string>();
    if (by_name.contains(name)) fail("hierarchy: duplicate node name \"" + name + "\"",
                                     {by_name[name], id});
    by_name[name] = id;
    nodes.push_back({name, item.value("passthrough", false), {}, {}});
    if (item.contains("children")) {
      const json& children = item["children"];
      if (!children.is_array()) throw UsageError("hierarchy: \"children\" must be an array");
      for (const json& child : children) {
        if (child.is_string()) {
          nodes[id].child_refs.push_back(child.get<std::string>());
        } else {
          const int cid = define(child);
          nodes[id].child_ids.push_back(cid);
        }
      }
    }
    return id;
  }
};

}  // namespace

Hierarchy Hierarchy::build(const json& doc) {
  if (!doc.is_object()) throw UsageError("hierarchy: document must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes" && key != "leaf_classes" && key != "subtrees") {
      throw UsageError("hierarchy: unknown top-level key \"" + key + "\"");
    }
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array() || doc["nodes"].empty()) {
    throw UsageError("hierarchy: \"nodes\" must be a non-empty array");
  }
  if (!doc.contains("leaf_classes") || !doc["leaf_classes"].is_array()) {
    throw UsageError("hierarchy: \"leaf_classes\" must be an array");
  }
  if (!doc.contains("subtrees") || !doc["subtrees"].is_object()) {
    throw UsageError("hierarchy: \"subtrees\" must be an object");
  }

  Flattener flat;
  for (const json& item : doc["nodes"]) flat.define(item);
  const int n_file = static_cast<int>(flat.nodes.size());

  // Resolve edges and parents.
  std::vector<std::vector<int>> children(n_file);
  std::vector<std::vector<int>> parents(n_file);
  for (int id = 0; id < n_file; ++id) {
    std::vector<int>& ch = children[id];
    ch = flat.nodes[id].child_ids;
    for (const std::string& ref : flat.nodes[id].child_refs) {
      auto it = flat.by_name.find(ref);
      if (it == flat.by_name.end()) {
        fail("hierarchy: node \"" + flat.nodes[id].name + "\" references unknown child \"" +
                 ref + "\"",
             {id});
      }
      ch.push_back(it->second);
    }
    // Keep definition order for children regardless of how they were written.
    std::sort(ch.begin(), ch.end());
    for (int c : ch) {
      if (c == id) fail("hierarchy: cycle (node is its own child)", {id});
      parents[c].push_back(id);
    }
  }
  std::vector<int> multi_parent;
  std::vector<int> roots;
  for (int id = 0; id < n_file; ++id) {
    if (parents[id].size() > 1) multi_parent.push_back(id);
    if (parents[id].empty()) roots.push_back(id);
  }
  if (!multi_parent.empty()) fail("hierarchy: nodes with more than one parent", multi_parent);
  if (roots.size() > 1) fail("hierarchy: multiple roots", roots);
  if (roots.empty()) {
    std::vector<int> all(n_file);
    for (int i = 0; i < n_file; ++i) all[i] = i;
    fail("hierarchy: cycle (no root)", all);
  }
  const int root = roots.front();

  // Reachability from the root catches cycles detached from it.
  std::vector<int> depth(n_file, -1);
  {
    std::vector<int> stack{root};
    depth[root] = 0;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int c : children[u]) {
        depth[c] = depth[u] + 1;
        stack.push_back(c);
      }
    }
    std::vector<int> unreachable;
    for (int id = 0; id < n_file; ++id) {
      if (depth[id] < 0) unreachable.push_back(id);
    }
    if (!unreachable.empty()) fail("hierarchy: cycle detached from the root", unreachable);
  }
  if (children[root].empty()) fail("hierarchy: root has no children", {root});

  // Leaf classes.
  std::vector<int> class_to_node;
  {
    std::vector<int> seen(n_file, 0);
    for (const json& entry : doc["leaf_classes"]) {
      if (!entry.is_string()) throw UsageError("hierarchy: leaf_classes must hold strings");
      const std::string name = entry.get<std::string>();
      auto it = flat.by_name.find(name);
      if (it == flat.by_name.end()) {
        fail("hierarchy: leaf class \"" + name + "\" has no node", {});
      }
      const int id = it->second;
      if (!children[id].empty()) fail("hierarchy: leaf class \"" + name + "\" has children", {id});
      if (seen[id]++) fail("hierarchy: leaf class \"" + name + "\" listed twice", {id});
      class_to_node.push_back(id);
    }
    std::vector<int> missing;
    for (int id = 0; id < n_file; ++id) {
      if (children[id].empty() && !seen[id]) missing.push_back(id);
    }
    if (!missing.empty()) fail("hierarchy: leaf nodes missing from leaf_classes", missing);
  }

  // Subtree tags on the root's children.
  std::vector<SubtreeTag> tag(n_file, SubtreeTag::kNone);
  {
    const json& subtrees = doc["subtrees"];
    const std::pair<const char*, SubtreeTag> kinds[] = {{"object", SubtreeTag::kObject},
                                                        {"background", SubtreeTag::kBackground},
                                                        {"ignored", SubtreeTag::kIgnored}};
    for (const auto& [key, _] : subtrees.items()) {
      if (key != "object" && key != "background" && key != "ignored") {
        throw UsageError("hierarchy: unknown subtree tag \"" + key + "\"");
      }
    }
    for (const auto& [key, kind] : kinds) {
      if (!subtrees.contains(key)) continue;
      if (!subtrees[key].is_array()) throw UsageError("hierarchy: subtree lists must be arrays");
      for (const json& entry : subtrees[key]) {
        const std::string name = entry.get<std::string>();
        auto it = flat.by_name.find(name);
        if (it == flat.by_name.end() || parents[it->second].empty() ||
            parents[it->second].front() != root) {
          fail("hierarchy: subtree entry \"" + name + "\" is not a child of the root",
               it == flat.by_name.end() ? std::vector<int>{} : std::vector<int>{it->second});
        }
        if (tag[it->second] != SubtreeTag::kNone) {
          fail("hierarchy: root child \"" + name + "\" tagged twice", {it->second});
        }
        tag[it->second] = kind;
      }
    }
    std::vector<int> untagged;
    for (int c : children[root]) {
      if (tag[c] == SubtreeTag::kNone) untagged.push_back(c);
    }
    if (!untagged.empty()) fail("hierarchy: root children without a subtree tag", untagged);
  }

  // Assemble nodes, then pad ragged branches with passthrough nodes directly
  // above the shallow leaves.
  Hierarchy h;
  h.root_ = root;
  h.nodes_.resize(n_file);
  for (int id = 0; id < n_file; ++id) {
    HierarchyNode& node = h.nodes_[id];
    node.id = id;
    node.name = flat.nodes[id].name;
    node.parent = parents[id].empty() ? -1 : parents[id].front();
    node.children = children[id];
    node.passthrough = flat.nodes[id].passthrough;
  }
  int max_depth = 0;
  for (int leaf : class_to_node) max_depth = std::max(max_depth, depth[leaf]);
  for (int leaf : class_to_node) {
    for (int missing = max_depth - depth[leaf]; missing > 0; --missing) {
      const int parent = h.nodes_[leaf].parent;
      HierarchyNode pad;
      pad.id = static_cast<int>(h.nodes_.size());
      pad.name = h.nodes_[leaf].name + "/pad" + std::to_string(missing);
      pad.parent = parent;
      pad.children = {leaf};
      pad.passthrough = true;
      for (int& c : h.nodes_[parent].children) {
        if (c == leaf) c = pad.id;
      }
      h.nodes_[leaf].parent = pad.id;
      h.nodes_.push_back(std::move(pad));
    }
  }
  h.depth_ = max_depth + 1;
  // Levels and tags by a top-down pass.
  {
    std::vector<int> stack{root};
    h.nodes_[root].level = h.depth_ - 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int c : h.nodes_[u].children) {
        HierarchyNode& child = h.nodes_[c];
        child.level = h.nodes_[u].level - 1;
        if (u == root) {
          // Padding nodes directly under the root inherit their leaf's tag.
          int tagged = c;
          while (tagged >= n_file) tagged = h.nodes_[tagged].children.front();
          child.tag = tag[tagged];
        } else {
          child.tag = h.nodes_[u].tag;
        }
        stack.push_back(c);
      }
    }
  }
  for (const HierarchyNode& node : h.nodes_) {
    if (node.children.empty() && node.level != 0) {
      fail("hierarchy: balancing left a leaf above level 0", {node.id});
    }
  }

  h.levels_.assign(h.depth_, {});
  for (const HierarchyNode& node : h.nodes_) h.levels_[node.level].push_back(node.id);
  h.class_to_leaf_ = class_to_node;
  h.leaf_to_class_.assign(h.nodes_.size(), -1);
  for (std::size_t k = 0; k < class_to_node.size(); ++k) {
    h.leaf_to_class_[class_to_node[k]] = static_cast<int>(k);
  }
  h.ancestors_.assign(class_to_node.size(), std::vector<int>(h.depth_));
  for (std::size_t k = 0; k < class_to_node.size(); ++k) {
    int u = class_to_node[k];
    for (int level = 0; level < h.depth_; ++level) {
      h.ancestors_[k][level] = u;
      u = h.nodes_[u].parent;
    }
  }
  return h;
}

Hierarchy Hierarchy::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("hierarchy: JSON parse error: ") + e.what());
  }
  try {
    return build(doc);
  } catch (const json::exception& e) {
    throw UsageError(std::string("hierarchy: malformed document: ") + e.what());
  }
}

Hierarchy Hierarchy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("hierarchy: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

json Hierarchy::to_json() const {
  std::function<json(int)> emit = [&](int id) {
    const HierarchyNode& node = nodes_[id];
    json j;
    j["name"] = node.name;
    if (node.passthrough) j["passthrough"] = true;
    if (!node.children.empty()) {
      json ch = json::array();
      for (int c : node.children) ch.push_back(emit(c));
      j["children"] = std::move(ch);
    }
    return j;
  };
  json doc;
  doc["nodes"] = json::array({emit(root_)});
  json leaves = json::array();
  for (int leaf : class_to_leaf_) leaves.push_back(nodes_[leaf].name);
  doc["leaf_classes"] = std::move(leaves);
  json subtrees = json::object();
  for (int c : nodes_[root_].children) subtrees[to_string(nodes_[c].tag)].push_back(nodes_[c].name);
  doc["subtrees"] = std::move(subtrees);
  return doc;
}

const HierarchyNode& Hierarchy::node(int id) const {
  if (id < 0 || id >= node_count()) throw UsageError("hierarchy: node id out of range");
  return nodes_[id];
}

std::span<const int> Hierarchy::level_nodes(int level) const {
  if (level < 0 || level >= depth_) throw UsageError("hierarchy: level out of range");
  return levels_[level];
}

void Hierarchy::check_class(int class_id) const {
  if (class_id < 0 || class_id >= num_classes()) {
    throw UsageError("hierarchy: unknown class id " + std::to_string(class_id));
  }
}

int Hierarchy::leaf_of(int class_id) const {
  check_class(class_id);
  return class_to_leaf_[class_id];
}

const std::string& Hierarchy::class_name(int class_id) const {
  return nodes_[leaf_of(class_id)].name;
}

int Hierarchy::find_class(std::string_view name) const {
  for (int k = 0; k < num_classes(); ++k) {
    if (nodes_[class_to_leaf_[k]].name == name) return k;
  }
  return -1;
}

int Hierarchy::find_node(std::string_view name) const {
  for (const HierarchyNode& node : nodes_) {
    if (node.name == name) return node.id;
  }
  return -1;
}

int Hierarchy::ancestor(int class_id, int level) const {
  check_class(class_id);
  if (level < 0 || level >= depth_) {
    throw UsageError("hierarchy: level " + std::to_string(level) + " out of range [0, " +
                     std::to_string(depth_ - 1) + "]");
  }
  return ancestors_[class_id][level];
}

std::span<const int> Hierarchy::positive_set(int class_id) const {
  check_class(class_id);
  return ancestors_[class_id];
}

std::vector<int> Hierarchy::negative_set(int class_id) const {
  std::span<const int> pos = positive_set(class_id);
  std::vector<int> out;
  out.reserve(nodes_.size() - pos.size());
  for (const HierarchyNode& node : nodes_) {
    if (std::find(pos.begin(), pos.end(), node.id) == pos.end()) out.push_back(node.id);
  }
  return out;
}

bool Hierarchy::is_ancestor_or_self(int maybe_ancestor, int node_id) const {
  for (int u = node_id; u >= 0; u = nodes_[u].parent) {
    if (u == maybe_ancestor) return true;
  }
  return false;
}

std::string_view toy_h4_document() {
  return R"({
  "nodes": [
    {"name": "root", "children": [
      {"name": "object", "children": [
        {"name": "vehicle", "children": [{"name": "car"}, {"name": "truck"}, {"name": "bus"}]},
        {"name": "human", "children": [{"name": "person"}, {"name": "rider"}]},
        {"name": "animal", "children": [{"name": "dog"}, {"name": "cat"}]}
      ]},
      {"name": "background", "children": [
        {"name": "flat", "children": [{"name": "road"}, {"name": "sidewalk"}]},
        {"name": "construction", "children": [{"name": "building"}, {"name": "wall"}]}
      ]},
      {"name": "ignored", "children": [
        {"name": "void", "children": [{"name": "unlabeled"}]}
      ]}
    ]}
  ],
  "leaf_classes": ["car", "truck", "bus", "person", "rider", "dog", "cat",
                   "road", "sidewalk", "building", "wall", "unlabeled"],
  "subtrees": {"object": ["object"], "background": ["background"], "ignored": ["ignored"]}
})";
}

Hierarchy toy_h4() { return Hierarchy::parse(toy_h4_document()); }

}  // namespace hyperhier
