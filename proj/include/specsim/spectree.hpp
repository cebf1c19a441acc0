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

#pragma once

// Speculative token trees: construction, draft logits and greedy top-n
// connected selection.
//
// A tree hangs off an implicit root (the last verified token). Nodes without a
// parent sit at depth 0 and are children of that implicit root; everything
// else has exactly one explicit parent.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace specsim {

using NodeId = std::uint32_t;

struct SpecNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  int depth = 0;
  double logit = 1.0;        // o(v), SSM probability of the token given its path
  double draft_logit = 1.0;  // dl(u), product of logits along the path
  std::optional<double> weight;
};

/// One entry of a tree description: parent index (into the same list) and the
/// node's SSM probability.
struct DraftEntry {
  std::optional<NodeId> parent;
  double logit = 1.0;
};

inline constexpr int kDefaultBranchingLimit = 4;

class SpecTree {
 public:
  SpecTree() = default;

  /// Validates the description and computes depths, draft logits and the
  /// layer index. Throws MalformedTree on dangling parents, cycles, logits
  /// outside (0, 1], a parented first entry, or nodes exceeding the branching
  /// limit.
  static SpecTree build(std::span<const DraftEntry> spec,
                        int branching_limit = kDefaultBranchingLimit);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  int branching_limit() const noexcept { return branching_limit_; }
  int depth() const noexcept { return static_cast<int>(layers_.size()); }

  const SpecNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const SpecNode> nodes() const noexcept { return nodes_; }

  /// Node ids at each depth, ascending depth, ids ascending inside a layer.
  const std::vector<std::vector<NodeId>>& layers() const noexcept { return layers_; }
  std::span<const NodeId> root_level() const noexcept;
  std::span<const NodeId> children(NodeId id) const;

  /// Draft logits in id order.
  std::vector<double> draft_logits() const;

  /// Stores predicted weights on the nodes. Topology stays immutable.
  void set_weights(std::span<const double> weights);

 private:
  std::vector<SpecNode> nodes_;
  std::vector<std::vector<NodeId>> layers_;
  std::vector<std::uint32_t> child_offsets_;
  std::vector<NodeId> child_ids_;
  int branching_limit_ = kDefaultBranchingLimit;
};

/// Depth-ordered traversal: yields (depth, node ids) pairs.
class LayerRange {
 public:
  explicit LayerRange(const SpecTree& tree) : tree_(&tree) {}

  class iterator {
   public:
    using value_type = std::pair<int, std::span<const NodeId>>;
    iterator(const SpecTree* t, int d) : tree_(t), depth_(d) {}
    value_type operator*() const {
      return {depth_, std::span<const NodeId>(tree_->layers()[static_cast<std::size_t>(depth_)])};
    }
    iterator& operator++() {
      ++depth_;
      return *this;
    }
    bool operator==(const iterator& o) const { return depth_ == o.depth_; }
    bool operator!=(const iterator& o) const { return depth_ != o.depth_; }

   private:
    const SpecTree* tree_;
    int depth_;
  };

  iterator begin() const { return {tree_, 0}; }
  iterator end() const { return {tree_, tree_->depth()}; }

 private:
  const SpecTree* tree_;
};

inline LayerRange layer_iter(const SpecTree& tree) { return LayerRange(tree); }

struct SelectionSet {
  int n = 0;
  std::vector<NodeId> node_ids;  // selection order: node_ids[k] is u_max at step k+1
};

/// Incremental greedy over the frontier of the current selection.
///
/// The frontier starts as the depth-0 layer; each pop moves the heaviest
/// frontier node into the selection and exposes its children. Since a set of
/// k connected nodes cannot reach below depth k-1, only the first n layers
/// are ever candidates for S(n). Ties go to the lower node id.
class GreedyFrontier {
 public:
  GreedyFrontier(const SpecTree& tree, std::span<const double> weights);

  /// Pops u_max, or nullopt once every node is selected.
  std::optional<NodeId> next();

  std::span<const NodeId> selected() const noexcept { return selected_; }
  double last_weight() const noexcept { return last_weight_; }

 private:
  struct Entry {
    double weight;
    NodeId id;
  };
  struct Less {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.weight != b.weight) return a.weight < b.weight;
      return a.id > b.id;
    }
  };

  const SpecTree* tree_;
  std::span<const double> weights_;
  std::priority_queue<Entry, std::vector<Entry>, Less> heap_;
  std::vector<NodeId> selected_;
  double last_weight_ = 0.0;
};

/// S(n) by incremental greedy. Throws InsufficientNodes when n exceeds the
/// node count and std::invalid_argument for n < 1 or a short weight vector.
SelectionSet top_n_selection(const SpecTree& tree, int n, std::span<const double> weights);

/// True when every selected node's parent is selected or it sits at depth 0.
bool is_connected(const SpecTree& tree, std::span<const NodeId> selection);

// Trace format: one node per line, `node_id parent_id logit`; the parent of a
// depth-0 node is `-`. Blank lines and lines starting with '#' are skipped.
SpecTree read_trace(std::istream& in, int branching_limit = kDefaultBranchingLimit);
SpecTree parse_trace(const std::string& text, int branching_limit = kDefaultBranchingLimit);
void write_trace(std::ostream& out, const SpecTree& tree);

}  // namespace specsim
