#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbs/dense.hpp"
#include "hbs/embedding.hpp"

namespace hbs {

// One frozen row of R: pivot column first, remaining support ascending.
// slot is the stacked-row position that carries this row's value after Q^T
// has been applied to a right-hand side.
struct RRow {
  int64_t slot = -1;
  std::vector<int64_t> cols;
  std::vector<double> vals;
};

// Reflectors of one elimination panel. v holds the unit Householder vectors
// column by column (lower trapezoid, zeros above row j of column j), acting on
// the stacked rows listed in row_slots; each reflector is H = I - 2 v v^T.
struct QRPanel {
  int64_t gid = -1;
  std::vector<int64_t> row_slots;
  DenseMatrix v;
};

struct QROptions {
  bool parallel = true;  // OpenMP over independent panels; false = serial reference
};

// Householder QR of the weighted stacked system, one panel per variable
// group in elimination order (the column order of the embedding). R rows are
// indexed by their pivot column, so solve_r works directly in the unknowns'
// coordinates; Q lives implicitly in the panel reflectors.
struct SparseQRFactors {
  int64_t nrows = 0;
  int64_t ncols = 0;
  std::vector<VarGroup> groups;  // column layout, copied from the embedding
  std::vector<QRPanel> panels;   // elimination order
  std::vector<RRow> rrows;       // rrows[j] has pivot column j
  int64_t nnz_r = 0;

  std::vector<double> apply_qt(std::span<const double> b) const;
  std::vector<double> apply_q(std::span<const double> y) const;
  // back/forward substitution with R or R^T; w and the result are indexed by
  // column. Throws when a pivot is smaller than 1e-14 times the largest one.
  std::vector<double> solve_r(std::span<const double> w) const;
  std::vector<double> solve_rt(std::span<const double> w) const;
  // least squares solution through Q^T b restricted to the pivot slots
  std::vector<double> solve_ls(std::span<const double> b) const;
  // adjoint of solve_ls: column space to row space through Q R^{-T}
  std::vector<double> solve_ls_adjoint(std::span<const double> v) const;
};

// Factor the stacked matrix. Panels within one level-and-part stage are
// independent and may run in parallel without changing any result. Throws
// when a column has no rows at all, naming the column.
SparseQRFactors factorize(const WeightedStack& ws, const QROptions& opts = {});

// process-wide count of factorize() calls, for asserting a code path never
// refactors anything
int64_t factorize_invocations();

// coordinate text export of R, one "row col value" line per entry, 1-based
void export_r_coordinate(const SparseQRFactors& f, const std::string& path);

}  // namespace hbs
