#include "hbs/solver.hpp"

#include <chrono>
#include <cfloat>
#include <cmath>
#include <cstdio>

#include "hbs/tree.hpp"
#include "json.hpp"

namespace hbs {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double default_tau() { return 1.0 / std::cbrt(DBL_EPSILON); }

void validate_config(const SolverConfig& cfg) {
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw error("solver: eps must lie in (0, 1)");
  if (cfg.tau < 0.0) throw error("solver: tau must be nonnegative");
  if (cfg.mu < 0.0) throw error("solver: mu must be nonnegative");
  if (cfg.max_iter < 1) throw error("solver: max_iter must be at least 1");
  if (cfg.constraint_tol < 0.0) throw error("solver: constraint_tol must be nonnegative");
  if (cfg.leaf_capacity < 1) throw error("solver: leaf_capacity must be at least 1");
}

PreparedSystem prepare_common(const KernelSpec& kernel, const PointSet& targets,
                              const PointSet& sources, const SolverConfig& cfg,
                              StackVariant variant) {
  PreparedSystem ps;
  ps.cfg = cfg;
  if (ps.cfg.tau == 0.0) ps.cfg.tau = default_tau();
  ps.variant = variant;

  auto t0 = std::chrono::steady_clock::now();
  const IndexTree tree = build_tree(targets, sources, cfg.leaf_capacity);
  CompressOptions copts;
  copts.eps = cfg.eps;
  copts.use_proxy = cfg.use_proxy;
  copts.parallel = cfg.parallel;
  ps.cm = std::make_unique<CompressedMatrix>(compress(kernel, targets, sources, tree, copts));
  ps.t_compress = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  ps.emb = std::make_unique<Embedding>(assemble_embedding(*ps.cm));
  ps.stack = assemble_weighted(*ps.emb, ps.cfg.tau, variant, cfg.mu);
  QROptions qopts;
  qopts.parallel = cfg.parallel;
  ps.factors = factorize(ps.stack, qopts);
  ps.t_qr = seconds_since(t0);

  ps.pinv_count = std::make_unique<std::atomic<int64_t>>(0);
  return ps;
}

// |A x - b| / |b|, against the true kernel matrix when it is small enough to
// sum directly (row chunks keep the dense scratch bounded), otherwise against
// the compressed operator.
double relative_residual(const KernelSpec& kernel, const PointSet& targets,
                         const PointSet& sources, const CompressedMatrix& cm,
                         std::span<const double> x, std::span<const double> b,
                         bool& vs_true) {
  const int64_t m = targets.size();
  const int64_t n = sources.size();
  std::vector<double> ax;
  if (m * n <= 10'000'000) {
    vs_true = true;
    ax.assign(static_cast<size_t>(m), 0.0);
    std::vector<int64_t> all_cols(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) all_cols[static_cast<size_t>(j)] = j;
    const int64_t chunk = 512;
    std::vector<int64_t> rows;
    for (int64_t r0 = 0; r0 < m; r0 += chunk) {
      const int64_t r1 = std::min(m, r0 + chunk);
      rows.clear();
      for (int64_t i = r0; i < r1; ++i) rows.push_back(i);
      const DenseMatrix block = eval_block(kernel, targets, rows, sources, all_cols);
      for (int64_t i = 0; i < r1 - r0; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < n; ++j) s += block(i, j) * x[static_cast<size_t>(j)];
        ax[static_cast<size_t>(r0 + i)] = s;
      }
    }
  } else {
    vs_true = false;
    ax = apply(cm, x);
  }
  double dn = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    const double d = ax[static_cast<size_t>(i)] - b[static_cast<size_t>(i)];
    dn += d * d;
  }
  const double bn = norm2(b);
  return bn > 0.0 ? std::sqrt(dn) / bn : std::sqrt(dn);
}

SolveReport finish_report(const PreparedSystem& ps, const KernelSpec& kernel,
                          const PointSet& targets, const PointSet& sources,
                          std::span<const double> b, DcResult dc, double t_solve) {
  SolveReport rep;
  rep.x = ps.emb->extract_solution(dc.xbar);
  rep.n_iter = dc.n_iter;
  rep.converged = dc.converged;
  rep.constraint_history = std::move(dc.history);
  rep.t_compress = ps.t_compress;
  rep.t_qr = ps.t_qr;
  rep.t_solve = t_solve;
  rep.m = ps.emb->m;
  rep.n = ps.emb->n;
  rep.kr = ps.cm->kr;
  rep.kc = ps.cm->kc;
  for (const LevelFactors& lf : ps.cm->levels) {
    rep.level_blocks.push_back(static_cast<int64_t>(lf.blocks.size()));
    rep.level_skeletons.push_back(ps.cm->mean_skeleton(lf.level));
  }
  rep.seed = ps.cfg.seed;
  rep.fit_residual = relative_residual(kernel, targets, sources, *ps.cm, rep.x, b,
                                       rep.residual_vs_true);
  return rep;
}

}  // namespace

DcResult deferred_correction(const SparseQRFactors& factors, const WeightedStack& stack,
                             std::span<const double> soft_rhs,
                             std::span<const double> hard_rhs, int max_iter,
                             double constraint_tol) {
  if (max_iter < 1) throw error("deferred_correction: max_iter must be at least 1");
  if (static_cast<int64_t>(soft_rhs.size()) != stack.soft_len ||
      static_cast<int64_t>(hard_rhs.size()) != stack.hard_len)
    throw error("deferred_correction: right-hand side lengths do not match the stack");

  const double tau = stack.tau;
  const double gnorm = norm2(hard_rhs);

  DcResult res;

  std::vector<double> x(static_cast<size_t>(stack.cols()), 0.0);
  std::vector<double> r(soft_rhs.begin(), soft_rhs.end());
  std::vector<double> w(hard_rhs.begin(), hard_rhs.end());
  std::vector<double> lam(w.size(), 0.0);

  // Pass 0 is the plain weighted solve; n_iter counts the correction passes
  // after it, so the constraint history always holds n_iter + 1 entries.
  for (int it = 0; it <= max_iter; ++it) {
    // weighted right-hand side [r; tau w + lam / tau]
    std::vector<double> hb = w;
    for (size_t i = 0; i < hb.size(); ++i) hb[i] += lam[i] / (tau * tau);
    const std::vector<double> dx = factors.solve_ls(stack.build_rhs(r, hb));

    for (size_t j = 0; j < x.size(); ++j) x[j] += dx[j];
    const std::vector<double> sdx = stack.apply_soft(dx);
    for (size_t i = 0; i < r.size(); ++i) r[i] -= sdx[i];
    const std::vector<double> hdx = stack.apply_hard(dx);
    for (size_t i = 0; i < w.size(); ++i) w[i] -= hdx[i];

    const double wn = norm2(w);
    res.history.push_back(wn);
    res.n_iter = it;
    if (wn <= constraint_tol * (gnorm + norm2(x))) {
      res.converged = true;
      break;
    }
    for (size_t i = 0; i < w.size(); ++i) lam[i] += tau * tau * w[i];
  }
  res.xbar = std::move(x);
  return res;
}

PreparedSystem prepare_overdetermined(const KernelSpec& kernel, const PointSet& targets,
                                      const PointSet& sources, const SolverConfig& cfg) {
  validate_config(cfg);
  if (targets.size() < sources.size())
    throw error("prepare_overdetermined: needs at least as many rows as columns");
  const StackVariant variant =
      cfg.mu > 0.0 ? StackVariant::tikhonov : StackVariant::overdetermined;
  return prepare_common(kernel, targets, sources, cfg, variant);
}

PreparedSystem prepare_underdetermined(const KernelSpec& kernel, const PointSet& targets,
                                       const PointSet& sources, const SolverConfig& cfg) {
  validate_config(cfg);
  if (targets.size() >= sources.size())
    throw error("prepare_underdetermined: needs fewer rows than columns");
  if (cfg.mu > 0.0)
    throw error("prepare_underdetermined: Tikhonov weight applies to the overdetermined path");
  return prepare_common(kernel, targets, sources, cfg, StackVariant::underdetermined);
}

DcResult pseudoinverse_solve(const PreparedSystem& ps, std::span<const double> b) {
  if (static_cast<int64_t>(b.size()) != ps.emb->m)
    throw error("pseudoinverse_solve: right-hand side length does not match the system");

  const std::vector<double> bp = ps.emb->embed_rhs(b);
  std::vector<double> soft, hard;
  switch (ps.variant) {
    case StackVariant::overdetermined:
      soft = bp;
      hard.assign(static_cast<size_t>(ps.stack.hard_len), 0.0);
      break;
    case StackVariant::tikhonov:
      soft = bp;
      soft.resize(static_cast<size_t>(ps.stack.soft_len), 0.0);
      hard.assign(static_cast<size_t>(ps.stack.hard_len), 0.0);
      break;
    case StackVariant::underdetermined:
      soft.assign(static_cast<size_t>(ps.stack.soft_len), 0.0);
      hard = bp;
      hard.resize(static_cast<size_t>(ps.stack.hard_len), 0.0);
      break;
  }
  DcResult res = deferred_correction(ps.factors, ps.stack, soft, hard, ps.cfg.max_iter,
                                     ps.cfg.constraint_tol);
  ps.pinv_count->fetch_add(1, std::memory_order_relaxed);
  return res;
}

std::vector<double> pseudoinverse_apply(const PreparedSystem& ps, std::span<const double> b) {
  return ps.emb->extract_solution(pseudoinverse_solve(ps, b).xbar);
}

std::vector<double> normal_inverse_apply(const PreparedSystem& ps, std::span<const double> v) {
  if (ps.variant == StackVariant::underdetermined)
    throw error("normal_inverse_apply: defined for the overdetermined forms only");
  if (static_cast<int64_t>(v.size()) != ps.emb->n)
    throw error("normal_inverse_apply: length mismatch");
  std::vector<double> z(static_cast<size_t>(ps.emb->nvars), 0.0);
  for (int64_t j = 0; j < ps.emb->n; ++j)
    z[static_cast<size_t>(j)] = v[static_cast<size_t>(ps.emb->col_perm[static_cast<size_t>(j)])];
  std::vector<double> u = ps.factors.solve_ls_adjoint(z);
  std::fill(u.begin() + static_cast<ptrdiff_t>(ps.stack.soft_len), u.end(), 0.0);
  return ps.emb->extract_solution(ps.factors.solve_ls(u));
}

SolveReport solve_overdetermined(const KernelSpec& kernel, const PointSet& targets,
                                 const PointSet& sources, std::span<const double> b,
                                 const SolverConfig& cfg) {
  PreparedSystem ps = prepare_overdetermined(kernel, targets, sources, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  DcResult dc = pseudoinverse_solve(ps, b);
  return finish_report(ps, kernel, targets, sources, b, std::move(dc), seconds_since(t0));
}

SolveReport solve_underdetermined(const KernelSpec& kernel, const PointSet& targets,
                                  const PointSet& sources, std::span<const double> b,
                                  const SolverConfig& cfg) {
  PreparedSystem ps = prepare_underdetermined(kernel, targets, sources, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  DcResult dc = pseudoinverse_solve(ps, b);
  return finish_report(ps, kernel, targets, sources, b, std::move(dc), seconds_since(t0));
}

std::string SolveReport::to_json() const {
  nlohmann::json j;
  j["m"] = m;
  j["n"] = n;
  j["kr"] = kr;
  j["kc"] = kc;
  j["n_iter"] = n_iter;
  j["gmres_iterations"] = gmres_iterations;
  j["converged"] = converged;
  j["constraint_history"] = constraint_history;
  j["fit_residual"] = fit_residual;
  j["residual_vs_true"] = residual_vs_true;
  j["timings"] = {{"compress", t_compress}, {"qr", t_qr}, {"solve", t_solve}};
  j["level_blocks"] = level_blocks;
  j["level_skeletons"] = level_skeletons;
  j["seed"] = seed;
  j["x"] = x;
  return j.dump(2);
}

}  // namespace hbs
