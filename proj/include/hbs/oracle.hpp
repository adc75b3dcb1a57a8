#pragma once

#include "hbs/dense.hpp"

// Dense brute-force reference solvers. Everything here is LAPACK-backed and
// deliberately shares no code with the fast path; tests compare the two
// routes against each other. Never called on the solve path.
namespace hbs::oracle {

// Least-squares / minimum-norm solve by dense Householder QR (LQ when m < n).
// Throws on rank deficiency beyond 1e-12 relative to the largest diagonal.
std::vector<double> dense_lstsq(const DenseMatrix& a, std::span<const double> b);

// Equality-constrained least squares min |E x - f| s.t. C x = g by the
// nullspace method: QR of C^T splits the space, a reduced unconstrained
// problem determines the nullspace component. C must have full row rank.
std::vector<double> dense_equality_lstsq(const DenseMatrix& e, const DenseMatrix& c,
                                         std::span<const double> f, std::span<const double> g);

struct Svd {
  DenseMatrix u;          // m x r
  std::vector<double> s;  // r = min(m, n), descending
  DenseMatrix vt;         // r x n
};
Svd svd(const DenseMatrix& a);
std::vector<double> singular_values(const DenseMatrix& a);

// Minimum-norm least-squares solution through the SVD pseudoinverse,
// truncating singular values below rcond * s_max.
std::vector<double> svd_lstsq(const DenseMatrix& a, std::span<const double> b,
                              double rcond = 1e-13);

// 2-norm condition number from singular values (inf if exactly singular).
double estimate_condition(const DenseMatrix& a);

// Numerical rank: singular values above tol * s_max.
int64_t svd_rank(const DenseMatrix& a, double tol = 1e-6);

}  // namespace hbs::oracle
