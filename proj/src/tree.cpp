#include "hbs/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace hbs {

namespace {

struct BoundingCube {
  std::array<double, 3> center = {0, 0, 0};
  double half_width = 0.0;
};

BoundingCube joint_bounding_cube(const PointSet& a, const PointSet& b, int dim) {
  std::array<double, 3> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  auto absorb = [&](const PointSet& ps) {
    for (int64_t i = 0; i < ps.size(); ++i)
      for (int d = 0; d < dim; ++d) {
        lo[static_cast<size_t>(d)] = std::min(lo[static_cast<size_t>(d)], ps.point(i)[d]);
        hi[static_cast<size_t>(d)] = std::max(hi[static_cast<size_t>(d)], ps.point(i)[d]);
      }
  };
  absorb(a);
  absorb(b);
  BoundingCube box;
  for (int d = 0; d < dim; ++d) {
    box.center[static_cast<size_t>(d)] =
        0.5 * (lo[static_cast<size_t>(d)] + hi[static_cast<size_t>(d)]);
    box.half_width =
        std::max(box.half_width, 0.5 * (hi[static_cast<size_t>(d)] - lo[static_cast<size_t>(d)]));
  }
  return box;
}

// Core builder; either side may be empty (the secondary-depth pass uses one).
IndexTree build_core(const PointSet& targets, const PointSet& sources, int64_t leaf_capacity,
                     int max_depth) {
  const int dim = targets.size() > 0 ? targets.dim : sources.dim;
  IndexTree tree;
  tree.dim = dim;
  tree.leaf_capacity = leaf_capacity;
  const BoundingCube root_box = joint_bounding_cube(targets, sources, dim);

  TreeNode root;
  root.id = 0;
  root.center = root_box.center;
  root.half_width = root_box.half_width;
  root.row_indices.resize(static_cast<size_t>(targets.size()));
  for (int64_t i = 0; i < targets.size(); ++i) root.row_indices[static_cast<size_t>(i)] = i;
  root.col_indices.resize(static_cast<size_t>(sources.size()));
  for (int64_t i = 0; i < sources.size(); ++i) root.col_indices[static_cast<size_t>(i)] = i;
  tree.nodes.push_back(std::move(root));

  const int nchild = 1 << dim;
  // points on the bisection plane (coord == center) land in the lower child
  auto octant_of = [dim](const double* p, const std::array<double, 3>& c) {
    int o = 0;
    for (int d = 0; d < dim; ++d)
      if (p[d] > c[static_cast<size_t>(d)]) o |= 1 << d;
    return o;
  };

  std::deque<int64_t> work;
  work.push_back(0);
  while (!work.empty()) {
    const int64_t nid = work.front();
    work.pop_front();
    // snapshot: nodes vector may reallocate while children are appended
    const auto center = tree.nodes[static_cast<size_t>(nid)].center;
    const double hw = tree.nodes[static_cast<size_t>(nid)].half_width;
    const int level = tree.nodes[static_cast<size_t>(nid)].level;

    if (tree.nodes[static_cast<size_t>(nid)].combined() <= leaf_capacity) continue;
    if (level >= max_depth) {
      ++tree.overfull_leaves;
      continue;
    }

    std::vector<std::vector<int64_t>> crow(static_cast<size_t>(nchild));
    std::vector<std::vector<int64_t>> ccol(static_cast<size_t>(nchild));
    for (int64_t idx : tree.nodes[static_cast<size_t>(nid)].row_indices)
      crow[static_cast<size_t>(octant_of(targets.point(idx), center))].push_back(idx);
    for (int64_t idx : tree.nodes[static_cast<size_t>(nid)].col_indices)
      ccol[static_cast<size_t>(octant_of(sources.point(idx), center))].push_back(idx);

    for (int o = 0; o < nchild; ++o) {
      if (crow[static_cast<size_t>(o)].empty() && ccol[static_cast<size_t>(o)].empty()) continue;
      TreeNode child;
      child.id = static_cast<int64_t>(tree.nodes.size());
      child.level = level + 1;
      child.parent = nid;
      child.half_width = 0.5 * hw;
      for (int d = 0; d < dim; ++d)
        child.center[static_cast<size_t>(d)] =
            center[static_cast<size_t>(d)] + ((o >> d) & 1 ? 0.5 : -0.5) * hw;
      child.row_indices = std::move(crow[static_cast<size_t>(o)]);
      child.col_indices = std::move(ccol[static_cast<size_t>(o)]);
      tree.nodes[static_cast<size_t>(nid)].children.push_back(child.id);
      tree.depth = std::max(tree.depth, child.level);
      work.push_back(child.id);
      tree.nodes.push_back(std::move(child));
    }
  }
  return tree;
}

}  // namespace

std::vector<int64_t> IndexTree::level_nodes(int level) const {
  std::vector<int64_t> out;
  for (const TreeNode& n : nodes)
    if (n.level == level) out.push_back(n.id);
  return out;
}

std::vector<int64_t> IndexTree::partition_nodes(int level) const {
  if (level < 0 || level > depth) throw error("partition_nodes: level out of range");
  std::vector<int64_t> out;
  for (const TreeNode& n : nodes)
    if (n.level == level || (n.level < level && n.is_leaf())) out.push_back(n.id);
  return out;
}

std::string IndexTree::diagnostic_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "dim " << dim << " depth " << depth << " secondary_depth " << secondary_depth
     << " nodes " << nodes.size() << " overfull " << overfull_leaves << "\n";
  for (const TreeNode& n : nodes) {
    os << n.id << " lvl " << n.level << " parent " << n.parent << " box";
    for (int d = 0; d < dim; ++d) os << " " << n.center[static_cast<size_t>(d)];
    os << " hw " << n.half_width << " rows " << n.row_indices.size() << " cols "
       << n.col_indices.size() << (n.is_leaf() ? " leaf" : "") << "\n";
  }
  return os.str();
}

IndexTree build_tree(const PointSet& targets, const PointSet& sources, int64_t leaf_capacity,
                     int max_depth) {
  if (leaf_capacity < 1) throw error("build_tree: leaf_capacity must be >= 1");
  if (targets.size() == 0 && sources.size() == 0) throw error("build_tree: no points");
  if (targets.size() > 0 && sources.size() > 0 && targets.dim != sources.dim)
    throw error("build_tree: dimension mismatch");

  IndexTree tree = build_core(targets, sources, leaf_capacity, max_depth);

  // depth of the smaller side alone; ties go to the sources
  const PointSet empty{tree.dim, {}, {}, {}};
  const bool sources_smaller = sources.size() <= targets.size();
  if (targets.size() == 0 || sources.size() == 0) {
    tree.secondary_depth = tree.depth;
  } else {
    IndexTree aux = sources_smaller ? build_core(empty, sources, leaf_capacity, max_depth)
                                    : build_core(targets, empty, leaf_capacity, max_depth);
    tree.secondary_depth = aux.depth;
  }
  return tree;
}

}  // namespace hbs
