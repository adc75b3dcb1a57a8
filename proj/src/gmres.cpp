#include "hbs/gmres.hpp"

#include <algorithm>
#include <cmath>

#include "hbs/dense.hpp"

extern "C" {
void dgelss_(const int* m, const int* n, const int* nrhs, double* a, const int* lda, double* b,
             const int* ldb, double* s, const double* rcond, int* rank, double* work,
             const int* lwork, int* info);
}

namespace hbs {

namespace {

// Truncated least-squares solve of the projected upper triangle. The Givens
// sweep can leave a near-zero trailing diagonal when the operator is singular
// on part of the space; plain back-substitution would blow up there, while
// dropping singular values below 1e-14 keeps the Krylov answer finite.
std::vector<double> solve_triangle(const DenseMatrix& h, std::span<const double> g, int k,
                                   int* rank_out) {
  DenseMatrix t(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) t(i, j) = h(i, j);
  std::vector<double> y(g.begin(), g.begin() + k);
  std::vector<double> s(static_cast<size_t>(k));
  const double rcond = 1e-14;
  int rank = 0, info = 0, one = 1;
  int lwork = -1;
  double wq = 0.0;
  dgelss_(&k, &k, &one, t.data(), &k, y.data(), &k, s.data(), &rcond, &rank, &wq, &lwork, &info);
  lwork = static_cast<int>(wq);
  std::vector<double> work(static_cast<size_t>(std::max(lwork, 1)));
  dgelss_(&k, &k, &one, t.data(), &k, y.data(), &k, s.data(), &rcond, &rank, work.data(), &lwork,
          &info);
  if (info != 0) throw error("gmres: projected solve failed");
  *rank_out = rank;
  return y;
}

}  // namespace

GmresResult gmres(const LinearOp& op, std::span<const double> rhs, const GmresOptions& opt) {
  if (opt.tol < 0.0 || opt.max_dim < 1) throw error("gmres: bad options");
  const int64_t n = static_cast<int64_t>(rhs.size());
  GmresResult res;
  res.x.assign(rhs.size(), 0.0);
  const double beta = norm2(rhs);
  if (beta == 0.0) {
    res.converged = true;
    return res;
  }

  // the Krylov dimension cannot exceed the space dimension
  const int kd = static_cast<int>(std::min<int64_t>(opt.max_dim, n));
  DenseMatrix h(kd + 1, kd);
  std::vector<std::vector<double>> basis;
  basis.reserve(static_cast<size_t>(kd));
  {
    std::vector<double> v0(rhs.begin(), rhs.end());
    for (double& t : v0) t /= beta;
    basis.push_back(std::move(v0));
  }
  std::vector<double> cs(static_cast<size_t>(kd), 0.0), sn(static_cast<size_t>(kd), 0.0);
  std::vector<double> gv(static_cast<size_t>(kd) + 1, 0.0);
  gv[0] = beta;

  int kk = 0;
  for (int k = 0; k < kd; ++k) {
    std::vector<double> w = op(basis[static_cast<size_t>(k)]);
    if (static_cast<int64_t>(w.size()) != n) throw error("gmres: operator changed dimension");

    // two MGS sweeps; the second pass folds its corrections into H
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= k; ++i) {
        const std::vector<double>& vi = basis[static_cast<size_t>(i)];
        double hij = 0.0;
        for (int64_t t = 0; t < n; ++t) hij += vi[static_cast<size_t>(t)] * w[static_cast<size_t>(t)];
        h(i, k) += hij;
        for (int64_t t = 0; t < n; ++t) w[static_cast<size_t>(t)] -= hij * vi[static_cast<size_t>(t)];
      }
    }
    const double sub = norm2(w);
    h(k + 1, k) = sub;

    // fold the new column through the accumulated rotations, then zero the
    // subdiagonal with a fresh one and update the rotated residual
    for (int i = 0; i < k; ++i) {
      const double t = cs[static_cast<size_t>(i)] * h(i, k) + sn[static_cast<size_t>(i)] * h(i + 1, k);
      h(i + 1, k) = -sn[static_cast<size_t>(i)] * h(i, k) + cs[static_cast<size_t>(i)] * h(i + 1, k);
      h(i, k) = t;
    }
    const double d = std::hypot(h(k, k), h(k + 1, k));
    if (d != 0.0) {
      cs[static_cast<size_t>(k)] = h(k, k) / d;
      sn[static_cast<size_t>(k)] = h(k + 1, k) / d;
      h(k, k) = d;
    } else {
      cs[static_cast<size_t>(k)] = 1.0;
      sn[static_cast<size_t>(k)] = 0.0;
    }
    h(k + 1, k) = 0.0;
    gv[static_cast<size_t>(k) + 1] = -sn[static_cast<size_t>(k)] * gv[static_cast<size_t>(k)];
    gv[static_cast<size_t>(k)] = cs[static_cast<size_t>(k)] * gv[static_cast<size_t>(k)];

    kk = k + 1;
    if (std::fabs(gv[static_cast<size_t>(kk)]) <= opt.tol * beta || sub <= 1e-15 * beta) break;
    for (double& t : w) t /= sub;
    basis.push_back(std::move(w));
  }

  int rank = 0;
  const std::vector<double> y = solve_triangle(h, gv, kk, &rank);
  for (int i = 0; i < kk; ++i) {
    const std::vector<double>& vi = basis[static_cast<size_t>(i)];
    for (int64_t t = 0; t < n; ++t)
      res.x[static_cast<size_t>(t)] += y[static_cast<size_t>(i)] * vi[static_cast<size_t>(t)];
  }
  res.iterations = kk;
  res.rel_residual = std::fabs(gv[static_cast<size_t>(kk)]) / beta;
  if (rank < kk) {
    // the rotated estimate assumes an exact projected solve; after truncation
    // only a fresh residual is trustworthy
    const std::vector<double> ax = op(res.x);
    double rn = 0.0;
    for (int64_t t = 0; t < n; ++t) {
      const double d = rhs[static_cast<size_t>(t)] - ax[static_cast<size_t>(t)];
      rn += d * d;
    }
    res.rel_residual = std::sqrt(rn) / beta;
  }
  res.converged = res.rel_residual <= opt.tol;
  return res;
}

}  // namespace hbs
