#include <numeric>

#include "doctest.h"
#include "hbs/dense.hpp"
#include "hbs/id.hpp"
#include "test_util.hpp"

using hbs::DenseMatrix;
using namespace testutil;

namespace {

DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// ||A - A(:,S) * P||_F relative to ||A||_F.
double id_recon_error(const DenseMatrix& a, const hbs::IdResult& id) {
  std::vector<int64_t> all_rows(static_cast<size_t>(a.rows()));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  DenseMatrix askel = hbs::submatrix(a, all_rows, id.skeleton);
  DenseMatrix approx = hbs::matmul(askel, id.interp);
  double err = 0.0;
  for (int64_t j = 0; j < a.cols(); ++j)
    for (int64_t i = 0; i < a.rows(); ++i) {
      double d = a(i, j) - approx(i, j);
      err += d * d;
    }
  return std::sqrt(err) / a.norm_fro();
}

}  // namespace

TEST_SUITE("dense_id") {

TEST_CASE("matmul agrees with the naive triple loop") {
  auto rng = make_rng(11);
  DenseMatrix a = random_matrix(rng, 17, 9);
  DenseMatrix b = random_matrix(rng, 9, 13);
  DenseMatrix c = hbs::matmul(a, b);
  DenseMatrix ref = naive_matmul(a, b);
  for (int64_t j = 0; j < c.cols(); ++j)
    for (int64_t i = 0; i < c.rows(); ++i) CHECK(c(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-13));

  DenseMatrix tn = hbs::matmul_tn(a, a);
  DenseMatrix tn_ref = naive_matmul(a.transpose(), a);
  CHECK(max_abs_diff({tn.data(), static_cast<size_t>(tn.rows() * tn.cols())},
                     {tn_ref.data(), static_cast<size_t>(tn.rows() * tn.cols())}) < 1e-12);
  DenseMatrix nt = hbs::matmul_nt(b, b);
  DenseMatrix nt_ref = naive_matmul(b, b.transpose());
  CHECK(max_abs_diff({nt.data(), static_cast<size_t>(nt.rows() * nt.cols())},
                     {nt_ref.data(), static_cast<size_t>(nt.rows() * nt.cols())}) < 1e-12);
}

TEST_CASE("matvec handles both orientations and accumulation") {
  auto rng = make_rng(12);
  DenseMatrix a = random_matrix(rng, 8, 5);
  std::vector<double> x = random_vector(rng, 5);
  std::vector<double> y = hbs::matvec(a, x);
  for (int64_t i = 0; i < 8; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < 5; ++j) s += a(i, j) * x[static_cast<size_t>(j)];
    CHECK(y[static_cast<size_t>(i)] == doctest::Approx(s).epsilon(1e-14));
  }
  std::vector<double> yt = hbs::matvec(a, y, true);
  std::vector<double> acc = yt;
  hbs::matvec_acc(a, y, acc, true, -1.0);  // acc = yt - A^T y = 0
  CHECK(hbs::norm2(acc) < 1e-12 * hbs::norm2(yt));
}

TEST_CASE("submatrix, hcat, vcat copy the right entries") {
  auto rng = make_rng(13);
  DenseMatrix a = random_matrix(rng, 6, 7);
  std::vector<int64_t> ri = {5, 0, 2};
  std::vector<int64_t> ci = {6, 1};
  DenseMatrix s = hbs::submatrix(a, ri, ci);
  REQUIRE(s.rows() == 3);
  REQUIRE(s.cols() == 2);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 2; ++j)
      CHECK(s(i, j) == a(ri[static_cast<size_t>(i)], ci[static_cast<size_t>(j)]));

  DenseMatrix b = random_matrix(rng, 6, 3);
  DenseMatrix h = hbs::hcat(a, b);
  REQUIRE(h.cols() == 10);
  CHECK(h(4, 2) == a(4, 2));
  CHECK(h(4, 8) == b(4, 1));
  DenseMatrix c = random_matrix(rng, 2, 7);
  DenseMatrix v = hbs::vcat(a, c);
  REQUIRE(v.rows() == 8);
  CHECK(v(5, 3) == a(5, 3));
  CHECK(v(7, 3) == c(1, 3));
}

TEST_CASE("solve_upper_tri inverts against matmul and rejects tiny pivots") {
  auto rng = make_rng(14);
  DenseMatrix r(5, 5);
  for (int64_t j = 0; j < 5; ++j)
    for (int64_t i = 0; i <= j; ++i) r(i, j) = (i == j) ? 2.0 + j : 0.3 * (i + 1);
  DenseMatrix x = random_matrix(rng, 5, 2);
  DenseMatrix b = hbs::matmul(r, x);
  hbs::solve_upper_tri(r, b);
  for (int64_t j = 0; j < 2; ++j)
    for (int64_t i = 0; i < 5; ++i) CHECK(b(i, j) == doctest::Approx(x(i, j)).epsilon(1e-12));

  r(3, 3) = 1e-20;
  DenseMatrix b2 = random_matrix(rng, 5, 1);
  CHECK_THROWS_AS(hbs::solve_upper_tri(r, b2), hbs::error);
}

TEST_CASE("pivoted QR reproduces A and keeps Q orthonormal") {
  auto rng = make_rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    int64_t m = 20 + 7 * trial, n = 12 + 5 * (trial % 3);
    DenseMatrix a = random_matrix(rng, m, n);
    hbs::PivotedQr qr(a, 0.0);
    REQUIRE(qr.rank() == std::min(m, n));

    // Column j of A*Pi should equal Q * R(:,j).
    DenseMatrix r11 = qr.r11();
    DenseMatrix r12 = qr.r12();
    for (int64_t j = 0; j < n; ++j) {
      std::vector<double> col(static_cast<size_t>(m), 0.0);
      for (int64_t i = 0; i < qr.rank(); ++i)
        col[static_cast<size_t>(i)] = j < qr.rank() ? (i <= j ? r11(i, j) : 0.0) : r12(i, j - qr.rank());
      qr.apply_q(col);
      int64_t src = qr.piv()[static_cast<size_t>(j)];
      double err = 0.0, ref = 0.0;
      for (int64_t i = 0; i < m; ++i) {
        err = std::max(err, std::fabs(col[static_cast<size_t>(i)] - a(i, src)));
        ref = std::max(ref, std::fabs(a(i, src)));
      }
      CHECK(err < 1e-12 * std::max(1.0, ref));
    }

    // Q^T Q = I probed on random vectors.
    std::vector<double> v = random_vector(rng, m);
    std::vector<double> w = v;
    qr.apply_q(w);
    CHECK(hbs::norm2(w) == doctest::Approx(hbs::norm2(v)).epsilon(1e-13));
    qr.apply_qt(w);
    CHECK(max_abs_diff(v, w) < 1e-13 * hbs::norm2(v));
  }
}

TEST_CASE("pivot order is deterministic and decreasing in R diagonal") {
  auto rng = make_rng(22);
  DenseMatrix a = random_matrix(rng, 30, 18);
  hbs::PivotedQr qr1(a, 0.0);
  hbs::PivotedQr qr2(a, 0.0);
  CHECK(qr1.piv() == qr2.piv());
  DenseMatrix r11 = qr1.r11();
  for (int64_t i = 1; i < r11.rows(); ++i)
    CHECK(std::fabs(r11(i, i)) <= std::fabs(r11(i - 1, i - 1)) * (1.0 + 1e-12));
}

TEST_CASE("column ID recovers numerical rank of synthetic low-rank matrices") {
  auto rng = make_rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    int64_t m = 40 + trial * 10, n = 35 + trial * 5, k = 6 + trial;
    DenseMatrix a = random_rank_k(rng, m, n, k);
    hbs::IdResult id = hbs::column_id(a, 1e-12);
    int64_t kk = static_cast<int64_t>(id.skeleton.size());
    CHECK(kk >= k);
    CHECK(kk <= k + 2);
    CHECK(id.interp.rows() == kk);
    CHECK(id.interp.cols() == n);
    CHECK(id_recon_error(a, id) < 1e-10);
  }
}

TEST_CASE("skeleton columns of the interpolation matrix are exact unit vectors") {
  auto rng = make_rng(24);
  DenseMatrix a = random_rank_k(rng, 25, 30, 7);
  hbs::IdResult id = hbs::column_id(a, 1e-12);
  for (size_t s = 0; s < id.skeleton.size(); ++s) {
    for (int64_t i = 0; i < id.interp.rows(); ++i) {
      double want = (i == static_cast<int64_t>(s)) ? 1.0 : 0.0;
      CHECK(id.interp(i, id.skeleton[s]) == want);  // bitwise, not approximate
    }
  }
}

TEST_CASE("column ID truncation error tracks the requested tolerance") {
  auto rng = make_rng(25);
  // A = Q_u * diag(10^{-i/4}) * Q_v: geometric singular value decay, so every
  // tolerance below lands mid-spectrum.
  int64_t n = 60;
  hbs::PivotedQr qru(random_matrix(rng, n, n), 0.0);
  hbs::PivotedQr qrv(random_matrix(rng, n, n), 0.0);
  DenseMatrix a(n, n);
  for (int64_t j = 0; j < n; ++j) {
    std::vector<double> col(static_cast<size_t>(n), 0.0);
    col[static_cast<size_t>(j)] = 1.0;
    qrv.apply_q(col);
    for (int64_t i = 0; i < n; ++i) col[static_cast<size_t>(i)] *= std::pow(10.0, -0.25 * i);
    qru.apply_q(col);
    for (int64_t i = 0; i < n; ++i) a(i, j) = col[static_cast<size_t>(i)];
  }
  for (double tol : {1e-4, 1e-7, 1e-10}) {
    hbs::IdResult id = hbs::column_id(a, tol);
    CHECK(id_recon_error(a, id) < 100.0 * tol);
    CHECK(static_cast<int64_t>(id.skeleton.size()) < n);
  }
}

TEST_CASE("row ID mirrors column ID") {
  auto rng = make_rng(26);
  DenseMatrix a = random_rank_k(rng, 34, 28, 9);
  hbs::IdResult id = hbs::row_id(a, 1e-12);
  int64_t kk = static_cast<int64_t>(id.skeleton.size());
  CHECK(kk >= 9);
  CHECK(kk <= 11);
  REQUIRE(id.interp.rows() == a.rows());
  REQUIRE(id.interp.cols() == kk);
  std::vector<int64_t> all_cols(static_cast<size_t>(a.cols()));
  std::iota(all_cols.begin(), all_cols.end(), 0);
  DenseMatrix askel = hbs::submatrix(a, id.skeleton, all_cols);
  DenseMatrix approx = hbs::matmul(id.interp, askel);
  double err = 0.0;
  for (int64_t j = 0; j < a.cols(); ++j)
    for (int64_t i = 0; i < a.rows(); ++i) err = std::max(err, std::fabs(a(i, j) - approx(i, j)));
  CHECK(err < 1e-10 * a.max_abs());
  for (size_t s = 0; s < id.skeleton.size(); ++s)
    CHECK(id.interp(id.skeleton[s], static_cast<int64_t>(s)) == 1.0);
}

}  // TEST_SUITE
