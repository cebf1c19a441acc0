// Copyright 2026 The specsim Authors
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

#include "specsim/spectree.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "specsim/error.hpp"

namespace specsim {

SpecTree SpecTree::build(std::span<const DraftEntry> spec, int branching_limit) {
  if (branching_limit < 1) throw MalformedTree("branching limit must be >= 1");
  SpecTree tree;
  tree.branching_limit_ = branching_limit;
  const auto count = spec.size();
  if (count == 0) {
    tree.child_offsets_.assign(1, 0);
    return tree;
  }
  if (spec.front().parent.has_value()) throw MalformedTree("first entry must be a depth-0 node");

  tree.nodes_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = spec[i];
    if (!(e.logit > 0.0 && e.logit <= 1.0) || !std::isfinite(e.logit)) {
      throw MalformedTree("logit out of (0, 1] at node " + std::to_string(i));
    }
    if (e.parent && *e.parent >= count) {
      throw MalformedTree("dangling parent reference at node " + std::to_string(i));
    }
    if (e.parent && *e.parent == i) throw MalformedTree("node " + std::to_string(i) + " is its own parent");
    auto& n = tree.nodes_[i];
    n.id = static_cast<NodeId>(i);
    n.parent = e.parent;
    n.logit = e.logit;
  }

  // Depths by walking up with a visit state; a revisit of an in-progress node
  // is a cycle.
  std::vector<int> depth(count, -1);
  std::vector<std::uint8_t> state(count, 0);
  std::vector<NodeId> stack;
  for (std::size_t i = 0; i < count; ++i) {
    if (depth[i] >= 0) continue;
    stack.clear();
    NodeId cur = static_cast<NodeId>(i);
    while (depth[cur] < 0) {
      if (state[cur] == 1) throw MalformedTree("cycle through node " + std::to_string(cur));
      state[cur] = 1;
      stack.push_back(cur);
      if (!tree.nodes_[cur].parent) break;
      cur = *tree.nodes_[cur].parent;
    }
    // Either stopped on a parentless node (on the stack, depth 0) or on an
    // ancestor whose depth is already known.
    int base = depth[cur] >= 0 ? depth[cur] + 1 : 0;
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      depth[*it] = base++;
      state[*it] = 2;
    }
  }

  int max_depth = 0;
  for (std::size_t i = 0; i < count; ++i) {
    tree.nodes_[i].depth = depth[i];
    max_depth = std::max(max_depth, depth[i]);
  }
  tree.layers_.assign(static_cast<std::size_t>(max_depth) + 1, {});
  for (std::size_t i = 0; i < count; ++i) {
    tree.layers_[static_cast<std::size_t>(depth[i])].push_back(static_cast<NodeId>(i));
  }

  // Children in CSR form, ids ascending.
  std::vector<std::uint32_t> degree(count, 0);
  for (const auto& n : tree.nodes_) {
    if (n.parent) ++degree[*n.parent];
  }
  if (tree.layers_[0].size() > static_cast<std::size_t>(branching_limit)) {
    throw MalformedTree("depth-0 layer exceeds the branching limit");
  }
  tree.child_offsets_.assign(count + 1, 0);
  for (std::size_t i = 0; i < count; ++i) {
    if (degree[i] > static_cast<std::uint32_t>(branching_limit)) {
      throw MalformedTree("node " + std::to_string(i) + " exceeds the branching limit");
    }
    tree.child_offsets_[i + 1] = tree.child_offsets_[i] + degree[i];
  }
  tree.child_ids_.resize(tree.child_offsets_.back());
  std::vector<std::uint32_t> fill(tree.child_offsets_.begin(), tree.child_offsets_.end() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    if (const auto p = tree.nodes_[i].parent) tree.child_ids_[fill[*p]++] = static_cast<NodeId>(i);
  }

  // Layers are in ascending depth, so parents are final before children.
  for (const auto& layer : tree.layers_) {
    for (NodeId id : layer) {
      auto& n = tree.nodes_[id];
      n.draft_logit = n.parent ? tree.nodes_[*n.parent].draft_logit * n.logit : n.logit;
    }
  }
  return tree;
}

std::span<const NodeId> SpecTree::root_level() const noexcept {
  if (layers_.empty()) return {};
  return layers_.front();
}

std::span<const NodeId> SpecTree::children(NodeId id) const {
  if (id >= nodes_.size()) throw std::out_of_range("node id out of range");
  return std::span<const NodeId>(child_ids_).subspan(child_offsets_[id],
                                                     child_offsets_[id + 1] - child_offsets_[id]);
}

std::vector<double> SpecTree::draft_logits() const {
  std::vector<double> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = nodes_[i].draft_logit;
  return out;
}

void SpecTree::set_weights(std::span<const double> weights) {
  if (weights.size() != nodes_.size()) throw std::invalid_argument("weight count does not match tree size");
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].weight = weights[i];
}

GreedyFrontier::GreedyFrontier(const SpecTree& tree, std::span<const double> weights)
    : tree_(&tree), weights_(weights) {
  if (weights.size() < tree.size()) throw std::invalid_argument("weights must cover every node");
  selected_.reserve(tree.size());
  for (NodeId id : tree.root_level()) heap_.push({weights_[id], id});
}

std::optional<NodeId> GreedyFrontier::next() {
  if (heap_.empty()) return std::nullopt;
  const Entry top = heap_.top();
  heap_.pop();
  selected_.push_back(top.id);
  last_weight_ = top.weight;
  for (NodeId c : tree_->children(top.id)) heap_.push({weights_[c], c});
  return top.id;
}

SelectionSet top_n_selection(const SpecTree& tree, int n, std::span<const double> weights) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (static_cast<std::size_t>(n) > tree.size()) {
    throw InsufficientNodes("tree has " + std::to_string(tree.size()) + " nodes, " + std::to_string(n) +
                            " requested");
  }
  GreedyFrontier frontier(tree, weights);
  SelectionSet out;
  out.n = n;
  out.node_ids.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.node_ids.push_back(*frontier.next());
  return out;
}

bool is_connected(const SpecTree& tree, std::span<const NodeId> selection) {
  std::vector<std::uint8_t> in(tree.size(), 0);
  for (NodeId id : selection) {
    if (id >= tree.size()) return false;
    in[id] = 1;
  }
  for (NodeId id : selection) {
    const auto& p = tree.node(id).parent;
    if (p && !in[*p]) return false;
  }
  return true;
}

SpecTree read_trace(std::istream& in, int branching_limit) {
  struct Row {
    std::string id;
    std::string parent;
    double logit;
  };
  std::vector<Row> rows;
  std::unordered_map<std::string, NodeId> index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Row r;
    if (!(ls >> r.id >> r.parent >> r.logit)) {
      throw MalformedTree("trace line " + std::to_string(line_no) + ": expected `node_id parent_id logit`");
    }
    if (!index.emplace(r.id, static_cast<NodeId>(rows.size())).second) {
      throw MalformedTree("trace line " + std::to_string(line_no) + ": duplicate node id " + r.id);
    }
    rows.push_back(std::move(r));
  }
  std::vector<DraftEntry> spec;
  spec.reserve(rows.size());
  for (const auto& r : rows) {
    DraftEntry e;
    e.logit = r.logit;
    if (r.parent != "-") {
      const auto it = index.find(r.parent);
      if (it == index.end()) throw MalformedTree("dangling parent " + r.parent + " for node " + r.id);
      e.parent = it->second;
    }
    spec.push_back(e);
  }
  return SpecTree::build(spec, branching_limit);
}

SpecTree parse_trace(const std::string& text, int branching_limit) {
  std::istringstream in(text);
  return read_trace(in, branching_limit);
}

void write_trace(std::ostream& out, const SpecTree& tree) {
  const auto old_precision = out.precision(17);
  for (const auto& n : tree.nodes()) {
    out << n.id << ' ';
    if (n.parent) {
      out << *n.parent;
    } else {
      out << '-';
    }
    out << ' ' << n.logit << '\n';
  }
  out.precision(old_precision);
}

}  // namespace specsim
