#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hbs/geometry.hpp"

namespace hbs {

struct TreeNode {
  int64_t id = 0;       // BFS order: parent id < child ids, siblings consecutive
  int level = 0;        // 0 at the root
  int64_t parent = -1;
  std::vector<int64_t> children;      // ascending ids; empty for leaves
  std::vector<int64_t> row_indices;   // target (row) indices inside this box
  std::vector<int64_t> col_indices;   // source (column) indices inside this box
  std::array<double, 3> center = {0, 0, 0};
  double half_width = 0.0;            // cube half-width, equal on every axis

  bool is_leaf() const { return children.empty(); }
  int64_t combined() const {
    return static_cast<int64_t>(row_indices.size() + col_indices.size());
  }
};

// Hyperoctree over the union of target and source points: uniform bisection of
// the joint bounding cube, quadtree in 2D, octree in 3D. Empty children are
// pruned; child ordering follows octant index (low/high per axis, x fastest),
// and points exactly on a bisection plane go to the lower-coordinate child.
struct IndexTree {
  int dim = 2;
  int depth = 0;             // deepest occupied level
  int secondary_depth = 0;   // depth of a tree built on the smaller side alone
  int64_t leaf_capacity = 0;
  int64_t overfull_leaves = 0;  // leaves pinned at max depth above capacity
  std::vector<TreeNode> nodes;  // indexed by id

  const TreeNode& node(int64_t id) const { return nodes[static_cast<size_t>(id)]; }

  // Node ids at exactly this level, ascending.
  std::vector<int64_t> level_nodes(int level) const;

  // The block partition at a level: nodes living at that level plus every leaf
  // that bottomed out above it. Row index sets of the returned nodes tile the
  // full row set exactly once; likewise for columns.
  std::vector<int64_t> partition_nodes(int level) const;

  // One line per node (id, level, parent, box, index counts); fixed format so
  // identical trees serialize identically.
  std::string diagnostic_text() const;
};

IndexTree build_tree(const PointSet& targets, const PointSet& sources, int64_t leaf_capacity,
                     int max_depth = 30);

}  // namespace hbs
