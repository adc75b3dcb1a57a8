#pragma once

#include "hbs/dense.hpp"

namespace hbs {

// Column-pivoted Householder QR. Pivot choice: largest remaining column norm,
// first index on ties, so factorizations are reproducible across runs and
// platforms with identical arithmetic. Truncation: the factorization stops at
// the first k with |R(k,k)| <= tol * |R(0,0)|; rank() is that k (full rank if
// the threshold is never crossed, tol <= 0 disables truncation).
class PivotedQr {
 public:
  PivotedQr(DenseMatrix a, double tol);

  int64_t rank() const { return rank_; }
  const std::vector<int64_t>& piv() const { return piv_; }

  // R11 (rank x rank, upper triangular) and R12 (rank x (n - rank)) of the
  // pivoted factor; column j of R corresponds to column piv[j] of A.
  DenseMatrix r11() const;
  DenseMatrix r12() const;

  void apply_q(std::span<double> x) const;   // x <- Q x, len = rows
  void apply_qt(std::span<double> x) const;  // x <- Q^T x

  int64_t rows() const { return qr_.rows(); }
  int64_t cols() const { return qr_.cols(); }

 private:
  DenseMatrix qr_;  // reflectors below the diagonal, R on and above
  std::vector<double> tau_;
  std::vector<int64_t> piv_;
  int64_t rank_;
};

// Interpolative decomposition. column_id picks skeleton columns S and an
// interpolation matrix P (k x n) with A ~= A(:,S) * P; the columns of P at the
// skeleton positions are set to exact unit vectors, never computed. row_id is
// the transposed analogue: A ~= L * A(S,:) with L (m x k) carrying exact unit
// rows at the skeleton positions. Observed reconstruction error is within a
// small factor (about 10) of tol * |A|_F for the kernel blocks this project
// feeds it; that constant is exercised by tests, not promised by the API.
struct IdResult {
  std::vector<int64_t> skeleton;
  DenseMatrix interp;
};

IdResult column_id(const DenseMatrix& a, double tol);
IdResult row_id(const DenseMatrix& a, double tol);

}  // namespace hbs
