#include "hbs/update.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

extern "C" {
void dgelss_(const int* m, const int* n, const int* nrhs, double* a, const int* lda, double* b,
             const int* ldb, double* s, const double* rcond, int* rank, double* work,
             const int* lwork, int* info);
}

namespace hbs {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_deletions(const std::vector<int64_t>& ids, int64_t limit, const char* what) {
  std::vector<int64_t> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw error(std::string("build_augmented: duplicate deleted ") + what);
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= limit))
    throw error(std::string("build_augmented: deleted ") + what + " out of range");
}

std::vector<int64_t> iota_indices(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Moore-Penrose inverse of a small square block, truncating singular values
// below rcond times the largest. Small enough that forming it is cheaper
// than factoring per application.
DenseMatrix pinv_small(const DenseMatrix& a, double rcond) {
  const int k = static_cast<int>(a.rows());
  if (a.cols() != a.rows()) throw error("pinv_small: square blocks only");
  if (k == 0) return DenseMatrix();
  DenseMatrix work_a = a;
  DenseMatrix bx = DenseMatrix::identity(k);
  std::vector<double> s(static_cast<size_t>(k));
  int rank = 0, info = 0, lwork = -1;
  double wq = 0.0;
  dgelss_(&k, &k, &k, work_a.data(), &k, bx.data(), &k, s.data(), &rcond, &rank, &wq, &lwork,
          &info);
  lwork = static_cast<int>(wq);
  std::vector<double> work(static_cast<size_t>(std::max(lwork, 1)));
  dgelss_(&k, &k, &k, work_a.data(), &k, bx.data(), &k, s.data(), &rcond, &rank, work.data(),
          &lwork, &info);
  if (info != 0) throw error("pinv_small: SVD failed");
  return bx;
}

}  // namespace

void save_modification(const Modification& mod, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("save_modification: cannot open " + path);
  out.precision(17);
  int dim = 2;
  if (mod.added_targets.size() > 0) dim = mod.added_targets.dim;
  else if (mod.added_sources.size() > 0) dim = mod.added_sources.dim;
  if (mod.added_targets.size() > 0 && mod.added_sources.size() > 0 &&
      mod.added_targets.dim != mod.added_sources.dim)
    throw error("save_modification: added rows and columns disagree on dimension");
  if (static_cast<int64_t>(mod.added_data.size()) != mod.added_targets.size())
    throw error("save_modification: added rows and data differ in count");
  out << "dim," << dim << "\n";
  out << "added_rows," << mod.added_targets.size() << "\n";
  for (int64_t i = 0; i < mod.added_targets.size(); ++i) {
    for (int d = 0; d < dim; ++d) out << mod.added_targets.point(i)[d] << ",";
    out << mod.added_data[static_cast<size_t>(i)] << "\n";
  }
  out << "deleted_rows," << mod.deleted_rows.size() << "\n";
  for (int64_t id : mod.deleted_rows) out << id << "\n";
  out << "added_columns," << mod.added_sources.size() << "\n";
  for (int64_t i = 0; i < mod.added_sources.size(); ++i) {
    for (int d = 0; d < dim; ++d) out << (d ? "," : "") << mod.added_sources.point(i)[d];
    out << "\n";
  }
  out << "deleted_columns," << mod.deleted_cols.size() << "\n";
  for (int64_t id : mod.deleted_cols) out << id << "\n";
}

Modification load_modification(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("load_modification: cannot open " + path);
  std::string line;
  auto next_line = [&](const char* what) {
    while (std::getline(in, line))
      if (!line.empty()) return;
    throw error(std::string("load_modification: truncated file, expected ") + what);
  };
  auto section = [&](const std::string& name) {
    next_line(name.c_str());
    std::istringstream hs(line);
    std::string tag;
    int64_t count = -1;
    if (!std::getline(hs, tag, ',') || tag != name || !(hs >> count) || count < 0)
      throw error("load_modification: expected '" + name + ",<count>' line");
    return count;
  };

  next_line("dim header");
  int dim = 0;
  {
    std::istringstream hs(line);
    std::string tag;
    if (!std::getline(hs, tag, ',') || tag != "dim" || !(hs >> dim) || dim < 1 || dim > 3)
      throw error("load_modification: expected 'dim,<d>' header");
  }

  Modification mod;
  mod.added_targets.dim = dim;
  mod.added_sources.dim = dim;

  const int64_t nrows = section("added_rows");
  for (int64_t i = 0; i < nrows; ++i) {
    next_line("an added row");
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != dim + 1)
      throw error("load_modification: added row needs coords plus one datum");
    for (int d = 0; d < dim; ++d) mod.added_targets.coords.push_back(vals[static_cast<size_t>(d)]);
    mod.added_data.push_back(vals[static_cast<size_t>(dim)]);
  }
  const int64_t ndelr = section("deleted_rows");
  for (int64_t i = 0; i < ndelr; ++i) {
    next_line("a deleted row id");
    mod.deleted_rows.push_back(std::stoll(line));
  }
  const int64_t ncols = section("added_columns");
  for (int64_t i = 0; i < ncols; ++i) {
    next_line("an added column");
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != dim)
      throw error("load_modification: added column needs exactly the coords");
    for (int d = 0; d < dim; ++d) mod.added_sources.coords.push_back(vals[static_cast<size_t>(d)]);
  }
  const int64_t ndelc = section("deleted_columns");
  for (int64_t i = 0; i < ndelc; ++i) {
    next_line("a deleted column id");
    mod.deleted_cols.push_back(std::stoll(line));
  }
  return mod;
}

std::vector<double> AugmentedSystem::apply_e(std::span<const double> x) const {
  if (static_cast<int64_t>(x.size()) != cols()) throw error("apply_e: length mismatch");
  const std::span<const double> xb = x.subspan(0, static_cast<size_t>(n0));
  const std::span<const double> xpc = x.subspan(static_cast<size_t>(n0), static_cast<size_t>(pc));
  const std::span<const double> xqr =
      x.subspan(static_cast<size_t>(n0 + pc), static_cast<size_t>(qr));
  const std::span<const double> xqc =
      x.subspan(static_cast<size_t>(n0 + pc + qr), static_cast<size_t>(qc));

  std::vector<double> out(static_cast<size_t>(rows_e()), 0.0);
  const std::vector<double> ax = hbs::apply(*base->cm, xb);
  std::copy(ax.begin(), ax.end(), out.begin());
  std::span<double> top(out.data(), static_cast<size_t>(m0));
  if (pc > 0) matvec_acc(bpc, xpc, top);
  for (int64_t i = 0; i < qr; ++i)
    out[static_cast<size_t>(deleted_rows[static_cast<size_t>(i)])] += xqr[static_cast<size_t>(i)];
  if (qc > 0) matvec_acc(bmc, xqc, top);
  if (pr > 0) {
    std::span<double> mid(out.data() + m0, static_cast<size_t>(pr));
    matvec_acc(cpr, xb, mid);
    if (pc > 0) matvec_acc(dp, xpc, mid);
    if (qc > 0) matvec_acc(dmin, xqc, mid);
  }
  if (mu > 0.0) {
    double* ridge = out.data() + m0 + pr;
    for (int64_t j = 0; j < n0; ++j) ridge[j] = mu * xb[static_cast<size_t>(j)];
    for (int64_t j = 0; j < pc; ++j) ridge[n0 + j] = mu * xpc[static_cast<size_t>(j)];
  }
  return out;
}

std::vector<double> AugmentedSystem::apply_e_adjoint(std::span<const double> u) const {
  if (static_cast<int64_t>(u.size()) != rows_e()) throw error("apply_e_adjoint: length mismatch");
  const std::span<const double> utop = u.subspan(0, static_cast<size_t>(m0));
  const std::span<const double> umid = u.subspan(static_cast<size_t>(m0), static_cast<size_t>(pr));

  std::vector<double> z(static_cast<size_t>(cols()), 0.0);
  const std::vector<double> atu = hbs::apply_adjoint(*base->cm, utop);
  std::copy(atu.begin(), atu.end(), z.begin());
  std::span<double> zb(z.data(), static_cast<size_t>(n0));
  std::span<double> zpc(z.data() + n0, static_cast<size_t>(pc));
  if (pr > 0) matvec_acc(cpr, umid, zb, true);
  if (pc > 0) {
    matvec_acc(bpc, utop, zpc, true);
    if (pr > 0) matvec_acc(dp, umid, zpc, true);
  }
  for (int64_t i = 0; i < qr; ++i)
    z[static_cast<size_t>(n0 + pc + i)] =
        u[static_cast<size_t>(deleted_rows[static_cast<size_t>(i)])];
  if (qc > 0) {
    std::span<double> zqc(z.data() + n0 + pc + qr, static_cast<size_t>(qc));
    matvec_acc(bmc, utop, zqc, true);
    if (pr > 0) matvec_acc(dmin, umid, zqc, true);
  }
  if (mu > 0.0) {
    const double* ridge = u.data() + m0 + pr;
    for (int64_t j = 0; j < n0; ++j) z[static_cast<size_t>(j)] += mu * ridge[j];
    for (int64_t j = 0; j < pc; ++j) z[static_cast<size_t>(n0 + j)] += mu * ridge[n0 + j];
  }
  return z;
}

std::vector<double> AugmentedSystem::apply_c(std::span<const double> x) const {
  if (static_cast<int64_t>(x.size()) != cols()) throw error("apply_c: length mismatch");
  const std::span<const double> xb = x.subspan(0, static_cast<size_t>(n0));
  std::vector<double> y(static_cast<size_t>(rows_c()), 0.0);
  if (qr > 0) matvec_acc(cmr, xb, std::span<double>(y.data(), static_cast<size_t>(qr)));
  for (int64_t i = 0; i < qr; ++i) y[static_cast<size_t>(i)] += x[static_cast<size_t>(n0 + pc + i)];
  for (int64_t j = 0; j < qc; ++j)
    y[static_cast<size_t>(qr + j)] = x[static_cast<size_t>(deleted_cols[static_cast<size_t>(j)])] +
                                     x[static_cast<size_t>(n0 + pc + qr + j)];
  return y;
}

std::vector<double> AugmentedSystem::apply_c_adjoint(std::span<const double> y) const {
  if (static_cast<int64_t>(y.size()) != rows_c()) throw error("apply_c_adjoint: length mismatch");
  std::vector<double> z(static_cast<size_t>(cols()), 0.0);
  if (qr > 0)
    matvec_acc(cmr, y.subspan(0, static_cast<size_t>(qr)),
               std::span<double>(z.data(), static_cast<size_t>(n0)), true);
  for (int64_t i = 0; i < qr; ++i) z[static_cast<size_t>(n0 + pc + i)] = y[static_cast<size_t>(i)];
  for (int64_t j = 0; j < qc; ++j) {
    z[static_cast<size_t>(deleted_cols[static_cast<size_t>(j)])] += y[static_cast<size_t>(qr + j)];
    z[static_cast<size_t>(n0 + pc + qr + j)] = y[static_cast<size_t>(qr + j)];
  }
  return z;
}

AugmentedSystem build_augmented(const PreparedSystem& base, const KernelSpec& kernel,
                                const PointSet& targets, const PointSet& sources,
                                const Modification& mod, std::span<const double> b) {
  if (!base.cm) throw error("build_augmented: base holds no compressed matrix");
  if (base.variant == StackVariant::underdetermined)
    throw error("build_augmented: base must be an overdetermined or ridge preparation");
  kernel.validate();
  const int64_t m0 = base.cm->m, n0 = base.cm->n;
  if (targets.size() != m0 || sources.size() != n0)
    throw error("build_augmented: point sets do not match the base system");
  if (static_cast<int64_t>(b.size()) != m0) throw error("build_augmented: data length mismatch");
  const int64_t pr = mod.added_targets.size();
  if (static_cast<int64_t>(mod.added_data.size()) != pr)
    throw error("build_augmented: added rows and data differ in count");
  const int64_t pc = mod.added_sources.size();
  const int64_t qr = static_cast<int64_t>(mod.deleted_rows.size());
  const int64_t qc = static_cast<int64_t>(mod.deleted_cols.size());
  check_deletions(mod.deleted_rows, m0, "rows");
  check_deletions(mod.deleted_cols, n0, "columns");
  if (m0 + pr < n0 + pc + qr + qc)
    throw error("build_augmented: modification would leave the system underdetermined");

  AugmentedSystem aug;
  aug.base = &base;
  aug.m0 = m0;
  aug.n0 = n0;
  aug.pr = pr;
  aug.qr = qr;
  aug.pc = pc;
  aug.qc = qc;
  aug.mu = base.cfg.mu;
  aug.deleted_rows = mod.deleted_rows;
  aug.deleted_cols = mod.deleted_cols;

  if (pr > 0) {
    const std::vector<int64_t> ridx = iota_indices(pr), cidx = iota_indices(n0);
    aug.cpr = eval_block(kernel, mod.added_targets, ridx, sources, cidx);
  }
  if (pc > 0) {
    const std::vector<int64_t> ridx = iota_indices(m0), cidx = iota_indices(pc);
    aug.bpc = eval_block(kernel, targets, ridx, mod.added_sources, cidx);
  }
  if (qc > 0) {
    // duplicated columns come off the compressed operator so the hard
    // cancellation x_l + a_l = 0 is exact for the system actually solved
    aug.bmc = DenseMatrix(m0, qc);
    std::vector<double> ej(static_cast<size_t>(n0), 0.0);
    for (int64_t j = 0; j < qc; ++j) {
      ej[static_cast<size_t>(aug.deleted_cols[static_cast<size_t>(j)])] = 1.0;
      const std::vector<double> col = hbs::apply(*base.cm, ej);
      std::copy(col.begin(), col.end(), aug.bmc.col(j));
      ej[static_cast<size_t>(aug.deleted_cols[static_cast<size_t>(j)])] = 0.0;
    }
  }
  // deletions act on the extended system: a deleted row contributes nothing
  // through added or duplicated columns either
  for (int64_t k : aug.deleted_rows) {
    for (int64_t j = 0; j < pc; ++j) aug.bpc(k, j) = 0.0;
    for (int64_t j = 0; j < qc; ++j) aug.bmc(k, j) = 0.0;
  }
  if (qr > 0) {
    aug.cmr = DenseMatrix(qr, n0);
    std::vector<double> ei(static_cast<size_t>(m0), 0.0);
    for (int64_t i = 0; i < qr; ++i) {
      ei[static_cast<size_t>(aug.deleted_rows[static_cast<size_t>(i)])] = 1.0;
      const std::vector<double> row = hbs::apply_adjoint(*base.cm, ei);
      for (int64_t j = 0; j < n0; ++j) aug.cmr(i, j) = row[static_cast<size_t>(j)];
      ei[static_cast<size_t>(aug.deleted_rows[static_cast<size_t>(i)])] = 0.0;
    }
  }
  if (pr > 0 && pc > 0) {
    const std::vector<int64_t> ridx = iota_indices(pr), cidx = iota_indices(pc);
    aug.dp = eval_block(kernel, mod.added_targets, ridx, mod.added_sources, cidx);
  }
  if (pr > 0 && qc > 0) {
    aug.dmin = DenseMatrix(pr, qc);
    for (int64_t i = 0; i < pr; ++i)
      for (int64_t j = 0; j < qc; ++j)
        aug.dmin(i, j) = aug.cpr(i, aug.deleted_cols[static_cast<size_t>(j)]);
  }

  aug.f.assign(b.begin(), b.end());
  aug.f.insert(aug.f.end(), mod.added_data.begin(), mod.added_data.end());
  if (aug.mu > 0.0) aug.f.resize(aug.f.size() + static_cast<size_t>(n0 + pc), 0.0);
  aug.g.reserve(static_cast<size_t>(qr + qc));
  for (int64_t k : aug.deleted_rows) aug.g.push_back(b[static_cast<size_t>(k)]);
  aug.g.resize(static_cast<size_t>(qr + qc), 0.0);
  return aug;
}

SolveReport solve_augmented_gmres(const AugmentedSystem& aug, const UpdateConfig& cfg) {
  if (!aug.base) throw error("solve_augmented_gmres: system was never built");
  if (!(cfg.tau > 0.0)) throw error("solve_augmented_gmres: tau must be positive");
  if (cfg.max_outer < 1) throw error("solve_augmented_gmres: max_outer must be at least 1");
  const PreparedSystem& base = *aug.base;
  const auto t0 = std::chrono::steady_clock::now();

  SolveReport rep;
  rep.m = aug.rows_e();
  rep.n = aug.cols();
  rep.kr = base.cm->kr;
  rep.kc = base.cm->kc;
  rep.seed = base.cfg.seed;

  const int64_t m0 = aug.m0, n0 = aug.n0, pr = aug.pr, pc = aug.pc, qr = aug.qr, qc = aug.qc;
  const std::span<const double> f(aug.f);
  const std::span<const double> b0 = f.subspan(0, static_cast<size_t>(m0));

  if (qr == 0 && qc == 0 && pc == 0) {
    // Row addition only. With the base pseudoinverse as the left block of the
    // preconditioner the data rows collapse to I + C^T C, so one
    // pseudoinverse application covers the whole solve.
    std::vector<double> bf = pseudoinverse_apply(base, b0);
    if (pr > 0) {
      const std::span<const double> bplus = f.subspan(static_cast<size_t>(m0),
                                                      static_cast<size_t>(pr));
      matvec_acc(aug.cpr, bplus, bf, true);
      const auto op = [&aug](std::span<const double> v) {
        const std::vector<double> cv = matvec(aug.cpr, v);
        std::vector<double> y(v.begin(), v.end());
        matvec_acc(aug.cpr, cv, y, true);
        return y;
      };
      // start from B f itself; only the correction enters the Krylov space
      std::vector<double> r0(bf.size(), 0.0);
      const std::vector<double> cbf = matvec(aug.cpr, bf);
      matvec_acc(aug.cpr, cbf, r0, true, -1.0);
      const GmresResult gr = gmres(op, r0, cfg.gmres);
      rep.x = std::move(bf);
      axpy(1.0, gr.x, rep.x);
      rep.gmres_iterations = gr.iterations;
      rep.converged = gr.converged;
    } else {
      rep.x = std::move(bf);
      rep.converged = true;
    }
    rep.n_iter = 0;
    rep.constraint_history = {0.0};
    // fit quality over the data rows; the ridge rows are not data
    const std::vector<double> ex = aug.apply_e(rep.x);
    double rn = 0.0, fn = 0.0;
    for (int64_t i = 0; i < m0 + pr; ++i) {
      const double d = aug.f[static_cast<size_t>(i)] - ex[static_cast<size_t>(i)];
      rn += d * d;
      fn += aug.f[static_cast<size_t>(i)] * aug.f[static_cast<size_t>(i)];
    }
    rep.fit_residual = std::sqrt(rn) / (std::sqrt(fn) + std::numeric_limits<double>::min());
    rep.t_solve = seconds_since(t0);
    return rep;
  }

  // General case: minimize over [x, added, slacks, annihilators] subject to
  // the hard rows, by correction passes around GMRES on the preconditioned
  // normal equations of the weighted stack [E; tau C].
  const double tau = cfg.tau;
  const int64_t e = pc + qr + qc;
  const int64_t k1 = pr + qr + qc;
  const int64_t nv = aug.cols();

  // dense copies of the auxiliary column block of E
  DenseMatrix ee_top(m0, e), ee_bot(pr, e);
  for (int64_t j = 0; j < pc; ++j) {
    std::copy(aug.bpc.col(j), aug.bpc.col(j) + m0, ee_top.col(j));
    if (pr > 0) std::copy(aug.dp.col(j), aug.dp.col(j) + pr, ee_bot.col(j));
  }
  for (int64_t i = 0; i < qr; ++i)
    ee_top(aug.deleted_rows[static_cast<size_t>(i)], pc + i) = 1.0;
  for (int64_t j = 0; j < qc; ++j) {
    std::copy(aug.bmc.col(j), aug.bmc.col(j) + m0, ee_top.col(pc + qr + j));
    if (pr > 0) std::copy(aug.dmin.col(j), aug.dmin.col(j) + pr, ee_bot.col(pc + qr + j));
  }

  // exact inverse of the weighted normal matrix through an unsymmetric
  // low-rank correction of blockdiag((A^T A + mu^2)^{-1}, D_ee^+)
  DenseMatrix dee = matmul_tn(ee_top, ee_top);
  if (pr > 0) {
    const DenseMatrix bb = matmul_tn(ee_bot, ee_bot);
    for (int64_t j = 0; j < e; ++j)
      for (int64_t i = 0; i < e; ++i) dee(i, j) += bb(i, j);
  }
  for (int64_t j = 0; j < e; ++j)
    dee(j, j) += (j < pc) ? aug.mu * aug.mu : tau * tau;
  const DenseMatrix dee_pinv = pinv_small(dee, 1e-13);

  DenseMatrix vmat(n0, k1);  // [Cpr^T | tau Cmr^T | tau Cmc^T]
  for (int64_t i = 0; i < pr; ++i)
    for (int64_t j = 0; j < n0; ++j) vmat(j, i) = aug.cpr(i, j);
  for (int64_t i = 0; i < qr; ++i)
    for (int64_t j = 0; j < n0; ++j) vmat(j, pr + i) = tau * aug.cmr(i, j);
  for (int64_t j = 0; j < qc; ++j)
    vmat(aug.deleted_cols[static_cast<size_t>(j)], pr + qr + j) = tau;

  DenseMatrix xmat(n0, e);  // A^T Ee_top + Cpr^T Ee_bot + tau^2 [0 | Cmr^T | Cmc^T]
  for (int64_t j = 0; j < e; ++j) {
    const std::vector<double> atc = hbs::apply_adjoint(
        *base.cm, std::span<const double>(ee_top.col(j), static_cast<size_t>(m0)));
    std::copy(atc.begin(), atc.end(), xmat.col(j));
  }
  if (pr > 0) {
    const DenseMatrix cb = matmul_tn(aug.cpr, ee_bot);
    for (int64_t j = 0; j < e; ++j)
      for (int64_t i = 0; i < n0; ++i) xmat(i, j) += cb(i, j);
  }
  for (int64_t i = 0; i < qr; ++i)
    for (int64_t j = 0; j < n0; ++j) xmat(j, pc + i) += tau * tau * aug.cmr(i, j);
  for (int64_t j = 0; j < qc; ++j)
    xmat(aug.deleted_cols[static_cast<size_t>(j)], pc + qr + j) += tau * tau;

  // unsymmetric Woodbury factors: Uh Vh^T = [[V V^T, X], [X^T, 0]], with each
  // column pair balanced so the truncated core solve keeps every direction
  const int64_t kw = k1 + 2 * e;
  DenseMatrix uh(n0 + e, kw), vh(n0 + e, kw);
  for (int64_t j = 0; j < k1; ++j) {
    std::copy(vmat.col(j), vmat.col(j) + n0, uh.col(j));
    std::copy(vmat.col(j), vmat.col(j) + n0, vh.col(j));
  }
  for (int64_t j = 0; j < e; ++j) {
    std::copy(xmat.col(j), xmat.col(j) + n0, uh.col(k1 + j));
    vh(n0 + j, k1 + j) = 1.0;
    uh(n0 + j, k1 + e + j) = 1.0;
    std::copy(xmat.col(j), xmat.col(j) + n0, vh.col(k1 + e + j));
  }
  for (int64_t j = 0; j < kw; ++j) {
    const double nu = norm2(std::span<const double>(uh.col(j), static_cast<size_t>(n0 + e)));
    const double nv_ = norm2(std::span<const double>(vh.col(j), static_cast<size_t>(n0 + e)));
    if (nu > 0.0 && nv_ > 0.0) {
      const double s = std::sqrt(nu / nv_);
      for (int64_t i = 0; i < n0 + e; ++i) {
        uh(i, j) /= s;
        vh(i, j) *= s;
      }
    }
  }

  const auto b0inv = [&](std::span<const double> v) {
    std::vector<double> t = normal_inverse_apply(base, v.subspan(0, static_cast<size_t>(n0)));
    const std::vector<double> bot =
        e > 0 ? matvec(dee_pinv, v.subspan(static_cast<size_t>(n0), static_cast<size_t>(e)))
              : std::vector<double>();
    t.insert(t.end(), bot.begin(), bot.end());
    return t;
  };

  DenseMatrix ymat(n0 + e, kw);
  for (int64_t j = 0; j < kw; ++j) {
    const std::vector<double> yc =
        b0inv(std::span<const double>(uh.col(j), static_cast<size_t>(n0 + e)));
    std::copy(yc.begin(), yc.end(), ymat.col(j));
  }
  DenseMatrix core = matmul_tn(vh, ymat);
  for (int64_t j = 0; j < kw; ++j) core(j, j) += 1.0;
  const DenseMatrix core_pinv = pinv_small(core, 1e-13);

  const auto apply_m = [&](std::span<const double> v) {
    std::vector<double> t = b0inv(v);
    const std::vector<double> s = matvec(vh, t, true);
    const std::vector<double> u = matvec(core_pinv, s);
    matvec_acc(ymat, u, t, false, -1.0);
    return t;
  };

  const int64_t me = aug.rows_e();
  const auto apply_weighted = [&](std::span<const double> x) {
    std::vector<double> out = aug.apply_e(x);
    const std::vector<double> cx = aug.apply_c(x);
    for (double wv : cx) out.push_back(tau * wv);
    return out;
  };
  const auto apply_weighted_adjoint = [&](std::span<const double> u) {
    std::vector<double> z = aug.apply_e_adjoint(u.subspan(0, static_cast<size_t>(me)));
    const std::vector<double> cz = aug.apply_c_adjoint(
        u.subspan(static_cast<size_t>(me), static_cast<size_t>(aug.rows_c())));
    axpy(tau, cz, z);
    return z;
  };
  const LinearOp op = [&](std::span<const double> x) {
    return apply_m(apply_weighted_adjoint(apply_weighted(x)));
  };

  std::vector<double> x(static_cast<size_t>(nv), 0.0);
  std::vector<double> r = aug.f;
  std::vector<double> w = aug.g;
  std::vector<double> lam(w.size(), 0.0);
  const double gnorm = norm2(aug.g);
  double kkt0 = 0.0;
  {
    std::vector<double> grad = aug.apply_e_adjoint(aug.f);
    const std::vector<double> cg = aug.apply_c_adjoint(aug.g);
    axpy(1.0, cg, grad);
    kkt0 = norm2(grad) + std::numeric_limits<double>::min();
  }

  bool ok = false;
  int used = 0;
  for (int it = 0; it < cfg.max_outer; ++it) {
    std::vector<double> rhs(r.begin(), r.end());
    rhs.reserve(r.size() + w.size());
    for (size_t i = 0; i < w.size(); ++i)
      rhs.push_back(tau * (w[i] + lam[i] / (tau * tau)));
    const GmresResult gr = gmres(op, apply_m(apply_weighted_adjoint(rhs)), cfg.gmres);
    rep.gmres_iterations += gr.iterations;
    ++used;

    axpy(1.0, gr.x, x);
    const std::vector<double> edx = aug.apply_e(gr.x);
    for (size_t i = 0; i < r.size(); ++i) r[i] -= edx[i];
    const std::vector<double> cdx = aug.apply_c(gr.x);
    for (size_t i = 0; i < w.size(); ++i) w[i] -= cdx[i];

    const double wn = norm2(w);
    rep.constraint_history.push_back(wn);
    // at roundoff level a multiplier step only injects noise
    if (wn > 100.0 * std::numeric_limits<double>::epsilon() * (gnorm + norm2(x) + 1.0))
      for (size_t i = 0; i < w.size(); ++i) lam[i] += tau * tau * w[i];

    std::vector<double> grad = aug.apply_e_adjoint(r);
    const std::vector<double> cl = aug.apply_c_adjoint(lam);
    axpy(1.0, cl, grad);
    const double kkt = norm2(grad);
    if (wn <= cfg.constraint_tol * (gnorm + norm2(x)) && kkt <= cfg.kkt_tol * kkt0) {
      ok = true;
      break;
    }
  }
  rep.n_iter = used - 1;
  rep.converged = ok;

  // effective coefficients: a deleted column reports variable plus annihilator
  rep.x.assign(x.begin(), x.begin() + static_cast<ptrdiff_t>(n0 + pc));
  for (int64_t j = 0; j < qc; ++j)
    rep.x[static_cast<size_t>(aug.deleted_cols[static_cast<size_t>(j)])] +=
        x[static_cast<size_t>(n0 + pc + qr + j)];

  // fit quality over the surviving data rows; deleted rows carry a slack that
  // zeroes their residual by construction, and the ridge rows are not data
  std::vector<char> gone(static_cast<size_t>(m0), 0);
  for (int64_t k : aug.deleted_rows) gone[static_cast<size_t>(k)] = 1;
  double rn = 0.0, fn = 0.0;
  for (int64_t i = 0; i < m0 + pr; ++i) {
    if (i < m0 && gone[static_cast<size_t>(i)]) continue;
    const double ri = r[static_cast<size_t>(i)];
    const double fi = aug.f[static_cast<size_t>(i)];
    rn += ri * ri;
    fn += fi * fi;
  }
  rep.fit_residual = std::sqrt(rn) / (std::sqrt(fn) + std::numeric_limits<double>::min());
  rep.t_solve = seconds_since(t0);
  return rep;
}

}  // namespace hbs
