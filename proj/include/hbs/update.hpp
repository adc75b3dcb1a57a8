#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbs/dense.hpp"
#include "hbs/geometry.hpp"
#include "hbs/gmres.hpp"
#include "hbs/kernels.hpp"
#include "hbs/solver.hpp"

namespace hbs {

// A small edit of an already prepared system: extra observation rows with
// their data, rows to drop, extra source columns, columns to drop. Deletion
// indices refer to base rows and columns. Point sets carry bare coordinates.
struct Modification {
  PointSet added_targets;
  std::vector<double> added_data;
  std::vector<int64_t> deleted_rows;
  PointSet added_sources;
  std::vector<int64_t> deleted_cols;

  bool empty() const {
    return added_targets.size() == 0 && deleted_rows.empty() && added_sources.size() == 0 &&
           deleted_cols.empty();
  }
};

// Text round trip. Header "dim,<d>", then four sections, each a "<name>,<count>"
// line followed by that many rows: added_rows (coords then the datum),
// deleted_rows (one id per line), added_columns (coords), deleted_columns.
void save_modification(const Modification& mod, const std::string& path);
Modification load_modification(const std::string& path);

// The base system extended in place of a refactorization. Unknowns are
// ordered [x (base columns) | p_c added columns | q_r row slacks | q_c column
// annihilators]. The data rows keep every base row: a deleted row k gets a
// slack that enters only that row, plus the hard constraint
// (A x)_k + slack_k = b_k, which forces the row's residual to zero so it
// cannot influence the fit. A deleted column l keeps its variable but gains
// an annihilator column equal to A e_l and the hard constraint x_l + a_l = 0,
// cancelling its effect; added rows and columns are kernel evaluations
// against the base geometry. Rows of the added and duplicated column blocks
// are zeroed at deleted row positions so deletions act on the extended
// system, and for a ridge base the mu rows cover base and added columns but
// not the auxiliaries.
struct AugmentedSystem {
  const PreparedSystem* base = nullptr;
  int64_t m0 = 0, n0 = 0;
  int64_t pr = 0, qr = 0, pc = 0, qc = 0;
  double mu = 0.0;
  std::vector<int64_t> deleted_rows, deleted_cols;

  DenseMatrix cpr;   // pr x n0 added observation rows
  DenseMatrix bpc;   // m0 x pc added columns, zeroed at deleted rows
  DenseMatrix bmc;   // m0 x qc duplicated deleted columns, zeroed at deleted rows
  DenseMatrix cmr;   // qr x n0 deleted rows, read back off the compressed base
  DenseMatrix dp;    // pr x pc added rows against added columns
  DenseMatrix dmin;  // pr x qc added rows at deleted column positions
  std::vector<double> f;  // stacked soft data, ridge zeros included
  std::vector<double> g;  // hard targets: base data at deleted rows, then zeros

  int64_t cols() const { return n0 + pc + qr + qc; }
  int64_t rows_e() const { return m0 + pr + (mu > 0.0 ? n0 + pc : 0); }
  int64_t rows_c() const { return qr + qc; }

  // the extended soft block, its adjoint, and the hard constraint block
  std::vector<double> apply_e(std::span<const double> x) const;
  std::vector<double> apply_e_adjoint(std::span<const double> u) const;
  std::vector<double> apply_c(std::span<const double> x) const;
  std::vector<double> apply_c_adjoint(std::span<const double> y) const;
};

// Kernel and point sets must be the ones the base was prepared from; the
// base must be an overdetermined or ridge preparation with full column rank,
// and the extension must leave the system overdetermined.
AugmentedSystem build_augmented(const PreparedSystem& base, const KernelSpec& kernel,
                                const PointSet& targets, const PointSet& sources,
                                const Modification& mod, std::span<const double> b);

// tau here is deliberately moderate: the hard rows are re-enforced by the
// outer correction loop, so the inner iteration never sees the stiff
// weighting the direct path uses.
struct UpdateConfig {
  GmresOptions gmres;
  double tau = 1e2;
  int max_outer = 12;             // correction passes, each wrapping one GMRES solve
  double constraint_tol = 1e-12;  // on |w| relative to |g| + |x|
  double kkt_tol = 1e-9;          // gradient stall guard relative to the first pass
};

// Solves the extended least-squares problem by GMRES on the preconditioned
// normal equations, reusing the base factorization as the preconditioner
// core; nothing is compressed or refactored. A modification that only adds
// rows takes a single-setup fast path costing exactly one pseudoinverse
// application. The report's x holds base column coefficients then added
// column coefficients; a deleted column's slot carries its effective
// coefficient (variable plus annihilator), which the constraint pins to zero.
SolveReport solve_augmented_gmres(const AugmentedSystem& aug, const UpdateConfig& cfg = {});

}  // namespace hbs
