#include <cmath>

#include "doctest.h"
#include "hbs/dense.hpp"
#include "hbs/oracle.hpp"
#include "test_util.hpp"

using hbs::DenseMatrix;
using namespace testutil;

TEST_SUITE("oracle") {

TEST_CASE("QR least squares matches the SVD route on random instances") {
  auto rng = make_rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    int64_t m = 10 + trial, n = 4 + (trial % 7);
    DenseMatrix a = random_matrix(rng, m, n);
    std::vector<double> b = random_vector(rng, m);
    std::vector<double> x1 = hbs::oracle::dense_lstsq(a, b);
    std::vector<double> x2 = hbs::oracle::svd_lstsq(a, b);
    CHECK(max_abs_diff(x1, x2) < 1e-10 * (1.0 + hbs::norm2(x1)));
  }
}

TEST_CASE("minimum-norm solution of underdetermined systems") {
  auto rng = make_rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    int64_t m = 6 + trial, n = m + 5;
    DenseMatrix a = random_matrix(rng, m, n);
    std::vector<double> b = random_vector(rng, m);
    std::vector<double> x = hbs::oracle::dense_lstsq(a, b);
    std::vector<double> r = hbs::matvec(a, x);
    hbs::axpy(-1.0, b, r);
    CHECK(hbs::norm2(r) < 1e-10 * hbs::norm2(b));
    // Minimum-norm: x has no component outside the row space, so it agrees
    // with the pseudoinverse solution computed via the SVD.
    std::vector<double> xs = hbs::oracle::svd_lstsq(a, b);
    CHECK(max_abs_diff(x, xs) < 1e-10 * (1.0 + hbs::norm2(xs)));
  }
}

TEST_CASE("rank-deficient least squares throws instead of returning garbage") {
  auto rng = make_rng(33);
  DenseMatrix a = random_rank_k(rng, 12, 6, 3);
  std::vector<double> b = random_vector(rng, 12);
  CHECK_THROWS_AS(hbs::oracle::dense_lstsq(a, b), hbs::error);
}

TEST_CASE("equality-constrained least squares satisfies constraints exactly") {
  auto rng = make_rng(34);
  for (int trial = 0; trial < 12; ++trial) {
    int64_t m = 15 + trial, n = 8 + (trial % 5), p = 2 + (trial % 4);
    DenseMatrix e = random_matrix(rng, m, n);
    DenseMatrix c = random_matrix(rng, p, n);
    std::vector<double> f = random_vector(rng, m);
    std::vector<double> g = random_vector(rng, p);
    std::vector<double> x = hbs::oracle::dense_equality_lstsq(e, c, f, g);

    std::vector<double> cg = hbs::matvec(c, x);
    hbs::axpy(-1.0, g, cg);
    CHECK(hbs::norm2(cg) < 1e-11 * (1.0 + hbs::norm2(g)));

    // Against a heavily weighted unconstrained solve [E; tau*C] x ~= [f; tau*g].
    double tau = 1e8;
    DenseMatrix tc = c;
    for (int64_t j = 0; j < n; ++j)
      for (int64_t i = 0; i < p; ++i) tc(i, j) *= tau;
    DenseMatrix stacked = hbs::vcat(e, tc);
    std::vector<double> rhs(f.begin(), f.end());
    for (double v : g) rhs.push_back(tau * v);
    std::vector<double> xw = hbs::oracle::dense_lstsq(stacked, rhs);
    CHECK(max_abs_diff(x, xw) < 1e-6 * (1.0 + hbs::norm2(x)));
  }
}

TEST_CASE("equality-constrained solve with empty constraint block reduces to plain lstsq") {
  auto rng = make_rng(35);
  DenseMatrix e = random_matrix(rng, 9, 4);
  DenseMatrix c(0, 4);
  std::vector<double> f = random_vector(rng, 9);
  std::vector<double> x1 = hbs::oracle::dense_equality_lstsq(e, c, f, {});
  std::vector<double> x2 = hbs::oracle::dense_lstsq(e, f);
  CHECK(max_abs_diff(x1, x2) == 0.0);
}

TEST_CASE("SVD reconstructs the matrix and orders singular values") {
  auto rng = make_rng(36);
  DenseMatrix a = random_matrix(rng, 14, 9);
  hbs::oracle::Svd f = hbs::oracle::svd(a);
  REQUIRE(f.s.size() == 9);
  for (size_t i = 1; i < f.s.size(); ++i) CHECK(f.s[i] <= f.s[i - 1]);
  DenseMatrix us = f.u;
  for (int64_t j = 0; j < us.cols(); ++j)
    for (int64_t i = 0; i < us.rows(); ++i) us(i, j) *= f.s[static_cast<size_t>(j)];
  DenseMatrix recon = hbs::matmul(us, f.vt);
  double err = 0.0;
  for (int64_t j = 0; j < a.cols(); ++j)
    for (int64_t i = 0; i < a.rows(); ++i) err = std::max(err, std::fabs(a(i, j) - recon(i, j)));
  CHECK(err < 1e-13 * a.max_abs() * 14);
}

TEST_CASE("condition number and rank on constructed spectra") {
  DenseMatrix d = DenseMatrix::identity(6);
  d(3, 3) = 1e-3;
  d(4, 4) = 1e-8;
  d(5, 5) = 1e-8;
  CHECK(hbs::oracle::estimate_condition(d) == doctest::Approx(1e8).epsilon(1e-10));
  CHECK(hbs::oracle::svd_rank(d, 1e-6) == 4);
  CHECK(hbs::oracle::svd_rank(d, 1e-10) == 6);

  auto rng = make_rng(37);
  DenseMatrix a = random_rank_k(rng, 20, 15, 5);
  CHECK(hbs::oracle::svd_rank(a, 1e-10) == 5);
}

}  // TEST_SUITE
