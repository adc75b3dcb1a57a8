#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbs/dense.hpp"
#include "hbs/kernels.hpp"
#include "hbs/tree.hpp"

namespace hbs {

// Per-block factors at one level of the telescoping representation
//   A ~= D + L [ compressed remainder ] R.
// row_active / col_active are the global indices this block carries into the
// level (leaf indices at the deepest level, pulled-up child skeletons above);
// row_skel / col_skel are the subsets retained by the interpolative
// decompositions, so l has shape |row_active| x |row_skel| and r has shape
// |col_skel| x |col_active|. A pass-through block (a leaf sitting above the
// deepest level, carried unchanged until its own level) stores no matrices:
// its l and r act as identities and its d contribution is zero.
struct BlockFactors {
  int64_t node_id = -1;
  bool passthrough = false;
  DenseMatrix d;
  DenseMatrix l;
  DenseMatrix r;
  std::vector<int64_t> row_active, col_active;
  std::vector<int64_t> row_skel, col_skel;
};

struct LevelFactors {
  int level = 0;
  std::vector<BlockFactors> blocks;  // partition members, ascending node id
};

// Telescoping compressed form of the kernel matrix over a tree: per-level
// diagonal blocks and interpolation factors for levels depth..1, plus the
// root interaction matrix among the final skeletons. Every d block and the
// root matrix are true submatrices of A evaluated at skeleton indices.
struct CompressedMatrix {
  IndexTree tree;
  std::vector<LevelFactors> levels;  // ordered deepest level first
  DenseMatrix root_d;                // final skeleton cross-interactions
  // root block order and the global skeleton indices behind root_d
  std::vector<int64_t> root_row_skel, root_col_skel;
  int64_t m = 0, n = 0;
  double eps = 0.0;
  int64_t kr = 0, kc = 0;  // = root_d dimensions
  bool proxy_fallback = false;  // proxy was requested but disabled (see compress)

  // mean retained skeleton count per block at one level (diagnostics)
  double mean_skeleton(int level) const;
};

struct CompressOptions {
  double eps = 1e-9;
  bool use_proxy = true;
  bool parallel = true;  // OpenMP over blocks within a level; false = serial reference
  double proxy_radius_factor = 1.5;   // ring radius as a multiple of the box ball radius
  int64_t proxy_count_2d = 64;
  int64_t proxy_count_3d = 192;
  // Non-harmonic radial kernels sample a 3-shell annulus instead of one ring;
  // shells sit at radius factors spaced from proxy_radius_factor to rbf_shell_max.
  int rbf_shells = 3;
  double rbf_shell_max = 1.9;
  // Yukawa fields decay like exp(-k r): once k times the root box diameter
  // exceeds this, ring sampling is numerically degenerate and compression
  // falls back to the global route (with a warning on stderr).
  double yukawa_proxy_limit = 30.0;
};

// Recursive skeletonization of the kernel matrix over the given tree,
// leaves to root: extract diagonal blocks, compress off-diagonal block rows
// and columns by interpolative decomposition at relative precision eps,
// pull the skeletons up one level, repeat. Blocks within a level are
// independent; options.parallel distributes them across OpenMP threads
// without changing any result.
CompressedMatrix compress(const KernelSpec& kernel, const PointSet& targets,
                          const PointSet& sources, const IndexTree& tree,
                          const CompressOptions& opts);

// process-wide count of compress() calls, for asserting a code path never
// compresses anything
int64_t compress_invocations();

// y = A_eps * x evaluated through the telescoping factors.
std::vector<double> apply(const CompressedMatrix& cm, std::span<const double> x);
// x = A_eps^T * y.
std::vector<double> apply_adjoint(const CompressedMatrix& cm, std::span<const double> y);

// Versioned little-endian binary container, so factorization can rerun
// without recompression.
void save_compressed(const CompressedMatrix& cm, const std::string& path);
CompressedMatrix load_compressed(const std::string& path);

}  // namespace hbs
