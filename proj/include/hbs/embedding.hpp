#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbs/dense.hpp"
#include "hbs/skeletonize.hpp"

namespace hbs {

// One variable group of the sparse embedding: the x- or y-chunk contributed by
// a single partition member at one level, or the root chunk x^(0). Groups are
// laid out level-major, deepest level first, x-chunks before y-chunks, members
// in depth-first tree order. Depth-first member order is what keeps every
// inter-level coupling a plain identity when the tree has leaves at mixed
// depths; breadth-first order would interleave shallow leaves into the middle
// of sibling expansions.
struct VarGroup {
  int level = -1;       // tree level of the owning partition; -1 for the root group
  char part = 'x';      // 'x' or 'y'
  int64_t node_id = -1; // owning tree node; -1 for the root group
  int64_t offset = 0;   // start within the concatenated unknown vector
  int64_t width = 0;
  int64_t trail = 0;    // structural fill width to the right of this group in R
};

enum class BlockKind { dense, identity, neg_identity };

// A sub-block of one block row. Dense blocks always span their whole group;
// identity markers may address a column slice of it.
struct SparseBlock {
  int64_t gid = 0;
  int64_t col_offset = 0;  // within the group; 0 for dense blocks
  int64_t width = 0;       // identity span; dense blocks use mat.cols()
  BlockKind kind = BlockKind::dense;
  DenseMatrix mat;
};

// Contiguous rows sharing the same block supports. Constraint rows place the
// -I block naming their target slice last, so evaluating the other sub-blocks
// in storage order reproduces the target bitwise.
struct BlockRow {
  int64_t row_offset = 0;
  int64_t nrows = 0;
  std::vector<SparseBlock> subs;
};

struct SparseBlockMatrix {
  int64_t nrows = 0;
  int64_t ncols = 0;
  std::vector<VarGroup> groups;  // shared column layout
  std::vector<BlockRow> rows;

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> apply_transpose(std::span<const double> y) const;
};

// coordinate text export, one "row col value" line per entry, 1-based
void export_coordinate(const SparseBlockMatrix& a, const std::string& path);

// The structured sparse system equivalent to the compressed operator: E holds
// the M observation rows, C the inter-level consistency constraints. For any
// x, lift(x) fills the auxiliary variables so that C * lift(x) = 0 exactly and
// E * lift(x) equals the compressed matrix applied to x.
struct Embedding {
  int64_t m = 0, n = 0;  // dense problem shape
  int64_t nvars = 0;     // total unknowns; x^(lambda) occupies [0, n)
  std::vector<VarGroup> groups;
  SparseBlockMatrix e, c;
  std::vector<int64_t> row_perm;  // E row i observes dense row row_perm[i]
  std::vector<int64_t> col_perm;  // unknown j carries dense column col_perm[j]

  // c.rows index ranges per level pair, needed to evaluate lift in dependency
  // order: all coupling rows that define x-chunks, then the y-chunk rows from
  // the root outward
  std::vector<std::pair<int64_t, int64_t>> rrow_ranges;  // deepest level first
  std::vector<std::pair<int64_t, int64_t>> drow_ranges;  // same order; root rows last

  std::vector<double> lift(std::span<const double> x) const;
  std::vector<double> extract_solution(std::span<const double> xbar) const;
  std::vector<double> embed_rhs(std::span<const double> b) const;  // b[row_perm]
  int64_t predicted_r_nnz() const;
};

Embedding assemble_embedding(const CompressedMatrix& cm);

enum class StackVariant { overdetermined, underdetermined, tikhonov };

// One row batch of the weighted stack: a block row scaled by weight, occupying
// stacked rows [slot, slot + row->nrows).
struct StackRow {
  const BlockRow* row;
  double weight;
  int64_t slot;
};

// Weighted stacked system fed to the sparse QR. Soft rows come first and enter
// at their natural scale (regularization rows carry mu); hard rows are the
// constraints promoted into the stack at weight tau:
//   overdetermined:  [E; tau C]          soft = E,        hard = C
//   tikhonov:        [E; mu I1; tau C]   soft = [E; I1],  hard = C
//   underdetermined: [I1; tau E; tau C]  soft = I1,       hard = [E; C]
struct WeightedStack {
  const Embedding* emb = nullptr;
  StackVariant variant = StackVariant::overdetermined;
  double tau = 1.0;
  double mu = 0.0;
  std::vector<BlockRow> i1;  // synthetic identity rows over x^(lambda), one per member
  std::vector<StackRow> layout;
  int64_t nrows = 0;
  int64_t soft_len = 0, hard_len = 0;

  // layout points into i1, so copies would dangle; moves keep the heap buffer
  WeightedStack() = default;
  WeightedStack(const WeightedStack&) = delete;
  WeightedStack& operator=(const WeightedStack&) = delete;
  WeightedStack(WeightedStack&&) = default;
  WeightedStack& operator=(WeightedStack&&) = default;

  int64_t rows() const { return nrows; }
  int64_t cols() const { return emb->nvars; }

  // the stacked weighted matrix as an operator
  std::vector<double> apply(std::span<const double> xbar) const;
  std::vector<double> apply_transpose(std::span<const double> y) const;
  // residual operators in unweighted coordinates
  std::vector<double> apply_soft(std::span<const double> xbar) const;
  std::vector<double> apply_hard(std::span<const double> xbar) const;
  // stacked weighted right-hand side [soft; tau * hard]
  std::vector<double> build_rhs(std::span<const double> soft, std::span<const double> hard) const;
};

WeightedStack assemble_weighted(const Embedding& emb, double tau, StackVariant variant,
                                double mu = 0.0);

}  // namespace hbs
