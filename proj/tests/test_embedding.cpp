#include "hbs/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "hbs/geometry.hpp"
#include "hbs/kernels.hpp"
#include "hbs/oracle.hpp"
#include "hbs/skeletonize.hpp"
#include "hbs/tree.hpp"
#include "test_util.hpp"

using namespace hbs;
using testutil::make_rng;
using testutil::random_vector;

namespace {

CompressedMatrix compress_ellipse(int64_t n, int64_t cap, double eps) {
  const PointSet pts = make_ellipse_boundary(n);
  const KernelSpec spec{KernelFamily::laplace2d_double_layer};
  const IndexTree tree = build_tree(pts, pts, cap);
  CompressOptions opts;
  opts.eps = eps;
  return compress(spec, pts, pts, tree, opts);
}

DenseMatrix materialize(const SparseBlockMatrix& a) {
  DenseMatrix out(a.nrows, a.ncols);
  std::vector<double> e(static_cast<size_t>(a.ncols), 0.0);
  for (int64_t j = 0; j < a.ncols; ++j) {
    e[static_cast<size_t>(j)] = 1.0;
    const std::vector<double> col = a.apply(e);
    for (int64_t i = 0; i < a.nrows; ++i) out(i, j) = col[static_cast<size_t>(i)];
    e[static_cast<size_t>(j)] = 0.0;
  }
  return out;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// worst relative mismatch between E*lift(x) and the telescoping matvec,
// plus a bitwise check that the constraints annihilate every lifted vector
double lift_probe(const CompressedMatrix& cm, const Embedding& emb, uint64_t seed,
                  int trials) {
  auto rng = make_rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::vector<double> x = random_vector(rng, cm.n);
    const std::vector<double> xbar = emb.lift(x);
    REQUIRE(max_abs(emb.c.apply(xbar)) == 0.0);
    const std::vector<double> ex = emb.e.apply(xbar);
    const std::vector<double> ax = hbs::apply(cm, x);
    double diff = 0.0, scale = 0.0;
    for (int64_t i = 0; i < emb.m; ++i) {
      const double ref = ax[static_cast<size_t>(emb.row_perm[static_cast<size_t>(i)])];
      diff = std::max(diff, std::fabs(ex[static_cast<size_t>(i)] - ref));
      scale = std::max(scale, std::fabs(ref));
    }
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

// stacked matrix times xbar evaluated row batch by row batch through layout
std::vector<double> apply_stack(const WeightedStack& ws, std::span<const double> xbar) {
  std::vector<double> out(static_cast<size_t>(ws.nrows), 0.0);
  for (const StackRow& sr : ws.layout) {
    std::vector<double> chunk(static_cast<size_t>(sr.row->nrows), 0.0);
    for (const SparseBlock& sb : sr.row->subs) {
      const VarGroup& g = ws.emb->groups[static_cast<size_t>(sb.gid)];
      switch (sb.kind) {
        case BlockKind::dense:
          matvec_acc(sb.mat,
                     std::span<const double>(xbar.data() + g.offset, static_cast<size_t>(g.width)),
                     chunk);
          break;
        case BlockKind::identity:
          for (int64_t i = 0; i < sr.row->nrows; ++i)
            chunk[static_cast<size_t>(i)] += xbar[static_cast<size_t>(g.offset + sb.col_offset + i)];
          break;
        case BlockKind::neg_identity:
          for (int64_t i = 0; i < sr.row->nrows; ++i)
            chunk[static_cast<size_t>(i)] -= xbar[static_cast<size_t>(g.offset + sb.col_offset + i)];
          break;
      }
    }
    for (int64_t i = 0; i < sr.row->nrows; ++i)
      out[static_cast<size_t>(sr.slot + i)] = sr.weight * chunk[static_cast<size_t>(i)];
  }
  return out;
}

}  // namespace

TEST_SUITE("embedding") {

TEST_CASE("single leaf reduces to the dense problem") {
  const CompressedMatrix cm = compress_ellipse(12, 64, 1e-9);
  REQUIRE(cm.levels.empty());
  const Embedding emb = assemble_embedding(cm);

  CHECK(emb.nvars == cm.n);
  CHECK(emb.c.nrows == 0);
  CHECK(emb.c.rows.empty());
  REQUIRE(emb.groups.size() == 1);
  CHECK(emb.groups[0].part == 'x');
  CHECK(emb.groups[0].width == cm.n);
  REQUIRE(emb.e.rows.size() == 1);
  REQUIRE(emb.e.rows[0].subs.size() == 1);
  CHECK(emb.e.rows[0].subs[0].kind == BlockKind::dense);
  CHECK(emb.predicted_r_nnz() == cm.n * (cm.n + 1) / 2);

  auto rng = make_rng(41);
  const std::vector<double> x = random_vector(rng, cm.n);
  const std::vector<double> ex = emb.e.apply(emb.lift(x));
  const std::vector<double> ax = hbs::apply(cm, x);
  for (int64_t i = 0; i < emb.m; ++i)
    CHECK(ex[static_cast<size_t>(i)] ==
          ax[static_cast<size_t>(emb.row_perm[static_cast<size_t>(i)])]);
}

TEST_CASE("one level embedding has the two block row pattern") {
  const CompressedMatrix cm = compress_ellipse(32, 16, 1e-12);
  REQUIRE(cm.levels.size() == 1);
  const Embedding emb = assemble_embedding(cm);
  const size_t nb = cm.levels[0].blocks.size();

  // groups: x then y per member, root chunk last
  REQUIRE(emb.groups.size() == 2 * nb + 1);
  for (size_t k = 0; k < nb; ++k) {
    CHECK(emb.groups[k].part == 'x');
    CHECK(emb.groups[nb + k].part == 'y');
  }
  CHECK(emb.groups.back().node_id == -1);
  CHECK(emb.groups.back().width == cm.kc);
  const int64_t root_gid = static_cast<int64_t>(emb.groups.size()) - 1;

  // observation rows couple each member's x- and y-chunks
  REQUIRE(emb.e.rows.size() == nb);
  for (const BlockRow& br : emb.e.rows) {
    REQUIRE(br.subs.size() == 2);
    CHECK(br.subs[0].kind == BlockKind::dense);
    CHECK(emb.groups[static_cast<size_t>(br.subs[0].gid)].part == 'x');
    CHECK(emb.groups[static_cast<size_t>(br.subs[1].gid)].part == 'y');
  }

  // coupling rows: R x^(1) = x^(0) chunks, then y^(1) = D^(0) x^(0) slices
  REQUIRE(emb.rrow_ranges.size() == 1);
  REQUIRE(emb.drow_ranges.size() == 1);
  for (int64_t ri = emb.rrow_ranges[0].first; ri < emb.rrow_ranges[0].second; ++ri) {
    const BlockRow& br = emb.c.rows[static_cast<size_t>(ri)];
    REQUIRE(br.subs.size() == 2);
    CHECK(emb.groups[static_cast<size_t>(br.subs[0].gid)].part == 'x');
    CHECK(br.subs[1].kind == BlockKind::neg_identity);
    CHECK(br.subs[1].gid == root_gid);
  }
  for (int64_t ri = emb.drow_ranges[0].first; ri < emb.drow_ranges[0].second; ++ri) {
    const BlockRow& br = emb.c.rows[static_cast<size_t>(ri)];
    REQUIRE(br.subs.size() == 2);
    CHECK(br.subs[0].gid == root_gid);
    CHECK(br.subs[0].kind == BlockKind::dense);
    CHECK(br.subs[1].kind == BlockKind::neg_identity);
    CHECK(emb.groups[static_cast<size_t>(br.subs[1].gid)].part == 'y');
  }
  CHECK(emb.c.nrows == emb.nvars - emb.n);

  CHECK(lift_probe(cm, emb, 57, 5) <= 1e-13);
}

TEST_CASE("lifting reproduces the compressed operator") {
  const CompressedMatrix cm = compress_ellipse(256, 32, 1e-9);
  REQUIRE(cm.levels.size() >= 2);
  const Embedding emb = assemble_embedding(cm);
  CHECK(emb.c.nrows == emb.nvars - emb.n);
  CHECK(lift_probe(cm, emb, 91, 100) <= 1e-13);
}

TEST_CASE("mixed depth leaves keep the couplings consistent") {
  // a tight cluster drives subdivision deep on one side only, so the deepest
  // partition carries shallow leaves through pass-through levels
  PointSet pts = make_uniform_random_square(260, 17);
  const PointSet cluster = make_uniform_random_square(120, 18);
  for (int64_t i = 0; i < cluster.size(); ++i) {
    pts.coords.push_back(0.90 + 0.02 * cluster.point(i)[0]);
    pts.coords.push_back(0.90 + 0.02 * cluster.point(i)[1]);
  }
  const KernelSpec spec{KernelFamily::thin_plate_spline};
  const IndexTree tree = build_tree(pts, pts, 24);
  CompressOptions opts;
  opts.eps = 1e-8;
  const CompressedMatrix cm = compress(spec, pts, pts, tree, opts);

  bool any_passthrough = false;
  for (const LevelFactors& lf : cm.levels)
    for (const BlockFactors& b : lf.blocks) any_passthrough |= b.passthrough;
  REQUIRE(any_passthrough);

  const Embedding emb = assemble_embedding(cm);
  CHECK(emb.c.nrows == emb.nvars - emb.n);
  CHECK(lift_probe(cm, emb, 23, 20) <= 1e-12);
}

TEST_CASE("transpose application matches the forward operator") {
  const CompressedMatrix cm = compress_ellipse(128, 16, 1e-8);
  const Embedding emb = assemble_embedding(cm);
  auto rng = make_rng(7);
  for (const SparseBlockMatrix* a : {&emb.e, &emb.c}) {
    const std::vector<double> x = random_vector(rng, a->ncols);
    const std::vector<double> y = random_vector(rng, a->nrows);
    const std::vector<double> ax = a->apply(x);
    const std::vector<double> aty = a->apply_transpose(y);
    double fwd = 0.0, adj = 0.0;
    for (int64_t i = 0; i < a->nrows; ++i)
      fwd += ax[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    for (int64_t j = 0; j < a->ncols; ++j)
      adj += x[static_cast<size_t>(j)] * aty[static_cast<size_t>(j)];
    CHECK(std::fabs(fwd - adj) <= 1e-12 * std::max(std::fabs(fwd), 1.0));
  }
}

TEST_CASE("constraints have full row rank") {
  const CompressedMatrix cm = compress_ellipse(64, 16, 1e-6);
  const Embedding emb = assemble_embedding(cm);
  REQUIRE(emb.c.nrows > 0);
  const DenseMatrix cd = materialize(emb.c);
  CHECK(oracle::svd_rank(cd, 1e-10) == emb.c.nrows);
}

TEST_CASE("coordinate export round trips") {
  const CompressedMatrix cm = compress_ellipse(64, 16, 1e-8);
  const Embedding emb = assemble_embedding(cm);
  const std::string path = "/tmp/hbs_embed_coord.txt";
  export_coordinate(emb.c, path);

  DenseMatrix got(emb.c.nrows, emb.c.ncols);
  std::ifstream is(path);
  REQUIRE(is.good());
  int64_t r, c;
  double v;
  int64_t min_r = emb.c.nrows, min_c = emb.c.ncols;
  while (is >> r >> c >> v) {
    min_r = std::min(min_r, r);
    min_c = std::min(min_c, c);
    got(r - 1, c - 1) += v;
  }
  CHECK(min_r == 1);
  CHECK(min_c == 1);
  const DenseMatrix want = materialize(emb.c);
  double diff = 0.0;
  for (int64_t j = 0; j < want.cols(); ++j)
    for (int64_t i = 0; i < want.rows(); ++i)
      diff = std::max(diff, std::fabs(got(i, j) - want(i, j)));
  CHECK(diff == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("weighted stack layouts cover each variant") {
  // overdetermined thin plate spline fit: M targets against N grid centers
  const PointSet targets = make_uniform_random_square(1024, 3);
  const PointSet centers = make_unit_grid(256);
  const KernelSpec spec{KernelFamily::thin_plate_spline};
  const IndexTree tree = build_tree(targets, centers, 64);
  CompressOptions opts;
  opts.eps = 1e-6;
  const CompressedMatrix cm = compress(spec, targets, centers, tree, opts);
  const Embedding emb = assemble_embedding(cm);
  REQUIRE(emb.m == 1024);
  REQUIRE(emb.n == 256);

  auto rng = make_rng(19);
  const std::vector<double> x = random_vector(rng, emb.n);
  const std::vector<double> xbar = emb.lift(x);
  const double tau = 1e3;

  auto check_cover = [](const WeightedStack& ws) {
    std::vector<int> hit(static_cast<size_t>(ws.nrows), 0);
    for (const StackRow& sr : ws.layout)
      for (int64_t i = 0; i < sr.row->nrows; ++i) ++hit[static_cast<size_t>(sr.slot + i)];
    for (int h : hit) REQUIRE(h == 1);
  };

  SUBCASE("plain overdetermined") {
    const WeightedStack ws = assemble_weighted(emb, tau, StackVariant::overdetermined);
    CHECK(ws.nrows == emb.m + emb.c.nrows);
    CHECK(ws.soft_len == emb.m);
    CHECK(ws.hard_len == emb.c.nrows);
    check_cover(ws);

    const std::vector<double> soft = ws.apply_soft(xbar);
    const std::vector<double> hard = ws.apply_hard(xbar);
    const std::vector<double> full = apply_stack(ws, xbar);
    for (int64_t i = 0; i < ws.soft_len; ++i)
      CHECK(full[static_cast<size_t>(i)] == soft[static_cast<size_t>(i)]);
    for (int64_t i = 0; i < ws.hard_len; ++i)
      CHECK(full[static_cast<size_t>(ws.soft_len + i)] == tau * hard[static_cast<size_t>(i)]);

    const std::vector<double> rhs =
        ws.build_rhs(soft, std::vector<double>(static_cast<size_t>(ws.hard_len), 1.0));
    CHECK(static_cast<int64_t>(rhs.size()) == ws.nrows);
    CHECK(rhs.back() == tau);
  }

  SUBCASE("tikhonov regularization") {
    const WeightedStack ws = assemble_weighted(emb, tau, StackVariant::tikhonov, 0.1);
    CHECK(ws.nrows == emb.m + emb.n + emb.c.nrows);
    CHECK(ws.soft_len == emb.m + emb.n);
    CHECK(ws.hard_len == emb.c.nrows);
    check_cover(ws);

    const std::vector<double> soft = ws.apply_soft(xbar);
    const std::vector<double> full = apply_stack(ws, xbar);
    for (int64_t j = 0; j < emb.n; ++j) {
      CHECK(soft[static_cast<size_t>(emb.m + j)] == 0.1 * xbar[static_cast<size_t>(j)]);
      CHECK(full[static_cast<size_t>(emb.m + j)] == 0.1 * xbar[static_cast<size_t>(j)]);
    }
    // mu = 0 stays legal; the regularization rows just vanish numerically
    const WeightedStack ws0 = assemble_weighted(emb, tau, StackVariant::tikhonov, 0.0);
    CHECK(ws0.nrows == ws.nrows);
  }

  SUBCASE("shape errors") {
    CHECK_THROWS_AS(assemble_weighted(emb, tau, StackVariant::underdetermined), error);
    CHECK_THROWS_AS(assemble_weighted(emb, 0.0, StackVariant::overdetermined), error);
    CHECK_THROWS_AS(assemble_weighted(emb, tau, StackVariant::tikhonov, -1.0), error);
  }
}

TEST_CASE("underdetermined stack promotes the observations") {
  const PointSet targets = make_uniform_random_square(48, 11);
  const PointSet sources = make_unit_grid(144);
  const KernelSpec spec{KernelFamily::laplace2d_log};
  const IndexTree tree = build_tree(targets, sources, 24);
  CompressOptions opts;
  opts.eps = 1e-9;
  const CompressedMatrix cm = compress(spec, targets, sources, tree, opts);
  const Embedding emb = assemble_embedding(cm);
  REQUIRE(emb.m < emb.n);

  const double tau = 1e4;
  const WeightedStack ws = assemble_weighted(emb, tau, StackVariant::underdetermined);
  CHECK(ws.nrows == emb.n + emb.m + emb.c.nrows);
  CHECK(ws.soft_len == emb.n);
  CHECK(ws.hard_len == emb.m + emb.c.nrows);

  auto rng = make_rng(29);
  const std::vector<double> x = random_vector(rng, emb.n);
  const std::vector<double> xbar = emb.lift(x);
  const std::vector<double> soft = ws.apply_soft(xbar);
  for (int64_t j = 0; j < emb.n; ++j)
    CHECK(soft[static_cast<size_t>(j)] == xbar[static_cast<size_t>(j)]);
  const std::vector<double> hard = ws.apply_hard(xbar);
  const std::vector<double> full = apply_stack(ws, xbar);
  for (int64_t i = 0; i < ws.hard_len; ++i)
    CHECK(full[static_cast<size_t>(ws.soft_len + i)] == tau * hard[static_cast<size_t>(i)]);

  CHECK_THROWS_AS(assemble_weighted(emb, tau, StackVariant::overdetermined), error);
}

TEST_CASE("stack of a constraint free embedding is the matrix itself") {
  const CompressedMatrix cm = compress_ellipse(12, 64, 1e-9);
  const Embedding emb = assemble_embedding(cm);
  const WeightedStack ws = assemble_weighted(emb, 1.0, StackVariant::overdetermined);
  CHECK(ws.nrows == emb.m);
  CHECK(ws.hard_len == 0);
  REQUIRE(ws.layout.size() == emb.e.rows.size());
  CHECK(ws.layout[0].weight == 1.0);
}

}  // TEST_SUITE
