#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "hbs/geometry.hpp"
#include "hbs/kernels.hpp"
#include "test_util.hpp"

using hbs::DenseMatrix;
using hbs::KernelFamily;
using hbs::KernelSpec;
using hbs::PointSet;

namespace {

std::vector<int64_t> iota_idx(int64_t n) {
  std::vector<int64_t> v(static_cast<size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_SUITE("geometry_kernels") {

TEST_CASE("ellipse points lie on x^2/4 + y^2 = 1 with unit normals") {
  PointSet ps = hbs::make_ellipse_boundary(8);
  REQUIRE(ps.size() == 8);
  ps.validate();
  for (int64_t i = 0; i < 8; ++i) {
    const double* p = ps.point(i);
    CHECK(p[0] * p[0] / 4.0 + p[1] * p[1] == doctest::Approx(1.0).epsilon(1e-14));
  }
  // first point sits at (2, 0) with outward normal (1, 0)
  CHECK(ps.point(0)[0] == doctest::Approx(2.0));
  CHECK(ps.normal(0)[0] == doctest::Approx(1.0));
  CHECK(std::fabs(ps.normal(0)[1]) < 1e-15);
  // trapezoidal weights sum to the ellipse perimeter (converged value)
  PointSet fine = hbs::make_ellipse_boundary(4096);
  double perim = std::accumulate(fine.weights.begin(), fine.weights.end(), 0.0);
  CHECK(perim == doctest::Approx(9.688448220547676).epsilon(1e-10));  // 4*E(sqrt(3)/2) series value
}

TEST_CASE("normals point outward along the position ray at axis crossings") {
  PointSet ps = hbs::make_ellipse_boundary(4);
  // points at t = 0, pi/2, pi, 3pi/2: (2,0), (0,1), (-2,0), (0,-1)
  CHECK(ps.normal(1)[1] == doctest::Approx(1.0));
  CHECK(ps.normal(2)[0] == doctest::Approx(-1.0));
  CHECK(ps.normal(3)[1] == doctest::Approx(-1.0));
}

TEST_CASE("unit grid covers [0,1]^2 endpoints inclusive") {
  PointSet g = hbs::make_unit_grid(16);
  REQUIRE(g.size() == 16);
  CHECK(g.point(0)[0] == 0.0);
  CHECK(g.point(0)[1] == 0.0);
  CHECK(g.point(15)[0] == 1.0);
  CHECK(g.point(15)[1] == 1.0);
  CHECK(g.point(1)[0] == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(hbs::make_unit_grid(15), hbs::error);
}

TEST_CASE("random square points are deterministic per seed and inside the box") {
  PointSet a = hbs::make_uniform_random_square(100, 42);
  PointSet b = hbs::make_uniform_random_square(100, 42);
  PointSet c = hbs::make_uniform_random_square(100, 43);
  CHECK(a.coords == b.coords);
  CHECK(a.coords != c.coords);
  for (double v : a.coords) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("sphere triangulation closes: areas sum near 4pi, normals outward") {
  for (int64_t nf : {1, 3}) {
    PointSet s = hbs::make_sphere_triangulation(nf);
    REQUIRE(s.size() == 20 * nf * nf);
    s.validate();
    double area = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
    // flat faceting always under-estimates the sphere area
    CHECK(area < 4.0 * std::numbers::pi);
    CHECK(area > 4.0 * std::numbers::pi * (nf == 1 ? 0.7 : 0.95));
    for (int64_t i = 0; i < s.size(); ++i) {
      double d = 0.0;
      for (int dd = 0; dd < 3; ++dd) d += s.normal(i)[dd] * s.point(i)[dd];
      CHECK(d > 0.0);  // outward
    }
    // piecewise-constant Gauss identity: sum_j area_j * dG/dn(x, y_j) = -1
    // for x strictly inside the surface, here the origin
    KernelSpec dl{KernelFamily::laplace3d_double_layer};
    double total = 0.0;
    const double x0[3] = {0.0, 0.0, 0.0};
    for (int64_t j = 0; j < s.size(); ++j)
      total += s.weights[static_cast<size_t>(j)] *
               hbs::eval_kernel(dl, x0, s.point(j), s.normal(j), 3, false);
    CHECK(total == doctest::Approx(-1.0).epsilon(nf == 1 ? 0.12 : 0.02));
  }
}

TEST_CASE("kernel point values match the table entries") {
  const double x2[2] = {1.0, 0.0}, o2[2] = {0.0, 0.0};
  const double x3[3] = {0.5, 0.0, 0.0}, o3[3] = {0.0, 0.0, 0.0};

  KernelSpec tps{KernelFamily::thin_plate_spline};
  CHECK(hbs::eval_kernel(tps, x2, o2, nullptr, 2, false) == 0.0);  // 1^2 log 1

  KernelSpec mq{KernelFamily::multiquadric};
  mq.c = 2.0;
  CHECK(hbs::eval_kernel(mq, o2, o2, nullptr, 2, false) == doctest::Approx(2.0));
  KernelSpec imq{KernelFamily::inverse_multiquadric};
  imq.c = 2.0;
  CHECK(hbs::eval_kernel(imq, o2, o2, nullptr, 2, false) == doctest::Approx(0.5));

  KernelSpec lap2{KernelFamily::laplace2d_log};
  CHECK(hbs::eval_kernel(lap2, x2, o2, nullptr, 2, false) == 0.0);  // -log(1)/2pi
  CHECK(hbs::eval_kernel(lap2, o3, x3, nullptr, 2, false) ==
        doctest::Approx(-std::log(0.5) / (2.0 * std::numbers::pi)));

  KernelSpec lap3{KernelFamily::laplace3d};
  CHECK(hbs::eval_kernel(lap3, x3, o3, nullptr, 3, false) ==
        doctest::Approx(1.0 / (4.0 * std::numbers::pi * 0.5)));

  KernelSpec yu{KernelFamily::yukawa2d};
  yu.k = 2.0;
  CHECK(hbs::eval_kernel(yu, x2, o2, nullptr, 2, false) ==
        doctest::Approx(std::cyl_bessel_k(0.0, 2.0) / (2.0 * std::numbers::pi)));

  KernelSpec ph{KernelFamily::polyharmonic};
  ph.n = 2;
  const double x2b[2] = {2.0, 0.0};
  CHECK(hbs::eval_kernel(ph, x2b, o2, nullptr, 2, false) == doctest::Approx(16.0 * std::log(2.0)));
  const double x3b[3] = {2.0, 0.0, 0.0};
  CHECK(hbs::eval_kernel(ph, x3b, o3, nullptr, 3, false) == doctest::Approx(8.0));

  CHECK_THROWS_AS(hbs::eval_kernel(lap2, o2, o2, nullptr, 2, false), hbs::error);
}

TEST_CASE("radial kernel blocks are symmetric and translation invariant") {
  PointSet a = hbs::make_uniform_random_square(12, 7);
  PointSet b = hbs::make_uniform_random_square(9, 8);
  KernelSpec tps{KernelFamily::thin_plate_spline};
  auto ia = iota_idx(a.size()), ib = iota_idx(b.size());
  DenseMatrix k1 = hbs::eval_block(tps, a, ia, b, ib);
  DenseMatrix k2 = hbs::eval_block(tps, b, ib, a, ia);
  for (int64_t i = 0; i < k1.rows(); ++i)
    for (int64_t j = 0; j < k1.cols(); ++j) CHECK(k1(i, j) == k2(j, i));

  PointSet as = a, bs = b;
  for (int64_t i = 0; i < as.size(); ++i) {
    as.point(i)[0] += 3.25;
    as.point(i)[1] -= 1.5;
  }
  for (int64_t i = 0; i < bs.size(); ++i) {
    bs.point(i)[0] += 3.25;
    bs.point(i)[1] -= 1.5;
  }
  DenseMatrix k3 = hbs::eval_block(tps, as, ia, bs, ib);
  double dmax = 0.0;
  for (int64_t i = 0; i < k1.rows(); ++i)
    for (int64_t j = 0; j < k1.cols(); ++j) dmax = std::max(dmax, std::fabs(k1(i, j) - k3(i, j)));
  CHECK(dmax < 1e-13);
}

TEST_CASE("double-layer block on the unit circle satisfies the Gauss identity") {
  // On the unit circle the double-layer kernel is identically -1/(4 pi), so
  // with trapezoidal weights 2 pi / n the row sums of -I/2 + K are exactly
  // -1/2 - (n-1)/(2n) = -1 + 1/(2n). The 1/(2n) defect is the dropped
  // curvature diagonal, whose true value on the circle is w * (-1/(4 pi)).
  const int64_t n = 10;
  PointSet circ = hbs::make_circle(n, 1.0);
  circ.normals = circ.coords;  // unit circle: outward normal equals position
  circ.weights.assign(static_cast<size_t>(n), 2.0 * std::numbers::pi / static_cast<double>(n));
  KernelSpec dl{KernelFamily::laplace2d_double_layer};
  auto idx = iota_idx(n);
  DenseMatrix a = hbs::eval_block(dl, circ, idx, circ, idx);
  for (int64_t i = 0; i < n; ++i) {
    CHECK(a(i, i) == -0.5);
    double row = 0.0;
    for (int64_t j = 0; j < n; ++j) row += a(i, j);
    CHECK(row == doctest::Approx(-1.0 + 1.0 / (2.0 * n)).epsilon(1e-12));
  }

  // Same identity on the ellipse, where curvature varies: trapezoidal row sums
  // approach -1 with the O(1/n) defect of the omitted diagonal sample.
  PointSet ell = hbs::make_ellipse_boundary(256);
  auto eidx = iota_idx(ell.size());
  DenseMatrix ae = hbs::eval_block(dl, ell, eidx, ell, eidx);
  for (int64_t i = 0; i < ell.size(); ++i) {
    double row = 0.0;
    for (int64_t j = 0; j < ell.size(); ++j) row += ae(i, j);
    CHECK(std::fabs(row - (-1.0)) < 2.0 / 256.0);
  }
}

TEST_CASE("source weights scale columns") {
  PointSet src = hbs::make_uniform_random_square(6, 3);
  PointSet tgt = hbs::make_uniform_random_square(5, 4);
  KernelSpec mq{KernelFamily::multiquadric};
  mq.c = 0.7;
  auto is = iota_idx(6), it = iota_idx(5);
  DenseMatrix plain = hbs::eval_block(mq, tgt, it, src, is);
  src.weights = {1.0, 2.0, 3.0, 0.5, -1.0, 4.0};
  DenseMatrix weighted = hbs::eval_block(mq, tgt, it, src, is);
  for (int64_t j = 0; j < 6; ++j)
    for (int64_t i = 0; i < 5; ++i)
      CHECK(weighted(i, j) == doctest::Approx(plain(i, j) * src.weights[static_cast<size_t>(j)]));
}

TEST_CASE("pointset CSV round trip preserves all fields") {
  PointSet a = hbs::make_ellipse_boundary(7);
  const char* path = "/tmp/hbs_test_pointset.csv";
  hbs::save_pointset_csv(a, path);
  PointSet b = hbs::load_pointset_csv(path);
  CHECK(b.dim == 2);
  REQUIRE(b.size() == 7);
  CHECK(testutil::max_abs_diff(a.coords, b.coords) == 0.0);
  CHECK(testutil::max_abs_diff(a.normals, b.normals) == 0.0);
  CHECK(testutil::max_abs_diff(a.weights, b.weights) == 0.0);
  std::remove(path);

  PointSet g = hbs::make_unit_grid(9);
  hbs::save_pointset_csv(g, path);
  PointSet g2 = hbs::load_pointset_csv(path);
  CHECK(g2.size() == 9);
  CHECK_FALSE(g2.has_normals());
  CHECK_FALSE(g2.has_weights());
  CHECK(testutil::max_abs_diff(g.coords, g2.coords) == 0.0);
  std::remove(path);
}

}  // TEST_SUITE
