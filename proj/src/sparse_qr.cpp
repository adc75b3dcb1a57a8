#include "hbs/sparse_qr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace hbs {

namespace {

// rows in flight between panels: a batch over a sorted set of support groups
struct WorkBlock {
  std::vector<int64_t> row_slots;
  std::vector<int64_t> gids;
  DenseMatrix data;  // row_slots.size() x sum of group widths
};

WorkBlock expand_row(const StackRow& sr, const std::vector<VarGroup>& groups) {
  const BlockRow& br = *sr.row;
  WorkBlock wb;
  wb.row_slots.resize(static_cast<size_t>(br.nrows));
  std::iota(wb.row_slots.begin(), wb.row_slots.end(), sr.slot);

  std::vector<const SparseBlock*> subs;
  subs.reserve(br.subs.size());
  for (const SparseBlock& sb : br.subs) subs.push_back(&sb);
  std::sort(subs.begin(), subs.end(),
            [](const SparseBlock* a, const SparseBlock* b) { return a->gid < b->gid; });

  int64_t width = 0;
  for (const SparseBlock* sb : subs) {
    if (!wb.gids.empty() && wb.gids.back() == sb->gid)
      throw error("factorize: block row references a group twice");
    wb.gids.push_back(sb->gid);
    width += groups[static_cast<size_t>(sb->gid)].width;
  }
  wb.data = DenseMatrix(br.nrows, width);
  int64_t off = 0;
  for (const SparseBlock* sb : subs) {
    const int64_t gw = groups[static_cast<size_t>(sb->gid)].width;
    switch (sb->kind) {
      case BlockKind::dense:
        for (int64_t j = 0; j < gw; ++j)
          for (int64_t i = 0; i < br.nrows; ++i) wb.data(i, off + j) = sr.weight * sb->mat(i, j);
        break;
      case BlockKind::identity:
        for (int64_t i = 0; i < br.nrows; ++i) wb.data(i, off + sb->col_offset + i) = sr.weight;
        break;
      case BlockKind::neg_identity:
        for (int64_t i = 0; i < br.nrows; ++i) wb.data(i, off + sb->col_offset + i) = -sr.weight;
        break;
    }
    off += gw;
  }
  return wb;
}

struct PanelResult {
  QRPanel panel;
  std::vector<RRow> rrows;
  WorkBlock remainder;        // empty row_slots when nothing is carried on
  int64_t remainder_key = -1;
};

// gather every pending block of one group, eliminate the group's columns by
// dense Householder reflectors, freeze the finished R rows, carry the rest
PanelResult eliminate_group(int64_t gid, std::vector<WorkBlock> blocks,
                            const std::vector<VarGroup>& groups) {
  std::vector<int64_t> ugids;
  int64_t r_total = 0;
  for (const WorkBlock& b : blocks) {
    ugids.insert(ugids.end(), b.gids.begin(), b.gids.end());
    r_total += static_cast<int64_t>(b.row_slots.size());
  }
  std::sort(ugids.begin(), ugids.end());
  ugids.erase(std::unique(ugids.begin(), ugids.end()), ugids.end());

  std::vector<int64_t> col_start(ugids.size() + 1, 0);
  for (size_t t = 0; t < ugids.size(); ++t)
    col_start[t + 1] = col_start[t] + groups[static_cast<size_t>(ugids[t])].width;
  const int64_t w_panel = col_start.back();
  const int64_t k = groups[static_cast<size_t>(gid)].width;

  auto pos_of = [&](int64_t g) {
    const size_t t = static_cast<size_t>(
        std::lower_bound(ugids.begin(), ugids.end(), g) - ugids.begin());
    return col_start[t];
  };

  PanelResult res;
  res.panel.gid = gid;
  res.panel.row_slots.reserve(static_cast<size_t>(r_total));
  DenseMatrix p(r_total, w_panel);
  int64_t r0 = 0;
  for (WorkBlock& b : blocks) {
    const int64_t br = static_cast<int64_t>(b.row_slots.size());
    int64_t boff = 0;
    for (int64_t g : b.gids) {
      const int64_t gw = groups[static_cast<size_t>(g)].width;
      const int64_t dest = pos_of(g);
      for (int64_t j = 0; j < gw; ++j)
        for (int64_t i = 0; i < br; ++i) p(r0 + i, dest + j) = b.data(i, boff + j);
      boff += gw;
    }
    res.panel.row_slots.insert(res.panel.row_slots.end(), b.row_slots.begin(),
                               b.row_slots.end());
    b.data = DenseMatrix();
    r0 += br;
  }
  blocks.clear();

  res.panel.v = DenseMatrix(r_total, k);
  const int64_t base = groups[static_cast<size_t>(gid)].offset;
  for (int64_t j = 0; j < k; ++j) {
    double sig2 = 0.0;
    for (int64_t i = j; i < r_total; ++i) sig2 += p(i, j) * p(i, j);
    const double sigma = std::sqrt(sig2);
    if (j >= r_total || sigma == 0.0)
      throw error("factorize: column " + std::to_string(base + j) + " has no rows to eliminate");
    const double a0 = p(j, j);
    const double beta = a0 >= 0.0 ? -sigma : sigma;
    const double unorm = std::sqrt(2.0 * sigma * (sigma + std::fabs(a0)));
    res.panel.v(j, j) = (a0 - beta) / unorm;
    for (int64_t i = j + 1; i < r_total; ++i) res.panel.v(i, j) = p(i, j) / unorm;
    for (int64_t c = j + 1; c < w_panel; ++c) {
      double s = 0.0;
      for (int64_t i = j; i < r_total; ++i) s += res.panel.v(i, j) * p(i, c);
      s *= 2.0;
      for (int64_t i = j; i < r_total; ++i) p(i, c) -= s * res.panel.v(i, j);
    }
    p(j, j) = beta;
  }

  res.rrows.resize(static_cast<size_t>(k));
  for (int64_t j = 0; j < k; ++j) {
    RRow& rr = res.rrows[static_cast<size_t>(j)];
    rr.slot = res.panel.row_slots[static_cast<size_t>(j)];
    rr.cols.reserve(static_cast<size_t>(w_panel - j));
    rr.vals.reserve(static_cast<size_t>(w_panel - j));
    rr.cols.push_back(base + j);
    rr.vals.push_back(p(j, j));
    for (int64_t c = j + 1; c < w_panel; ++c) {
      const size_t t = static_cast<size_t>(
          std::upper_bound(col_start.begin(), col_start.end(), c) - col_start.begin() - 1);
      rr.cols.push_back(groups[static_cast<size_t>(ugids[t])].offset + (c - col_start[t]));
      rr.vals.push_back(p(j, c));
    }
  }

  if (r_total > k && ugids.size() > 1) {
    res.remainder.row_slots.assign(res.panel.row_slots.begin() + k,
                                   res.panel.row_slots.end());
    res.remainder.gids.assign(ugids.begin() + 1, ugids.end());
    res.remainder.data = DenseMatrix(r_total - k, w_panel - k);
    for (int64_t c = k; c < w_panel; ++c)
      for (int64_t i = k; i < r_total; ++i) res.remainder.data(i - k, c - k) = p(i, c);
    res.remainder_key = ugids[1];
  }
  return res;
}

}  // namespace

namespace {
std::atomic<int64_t> g_factorize_calls{0};
}  // namespace

int64_t factorize_invocations() { return g_factorize_calls.load(); }

SparseQRFactors factorize(const WeightedStack& ws, const QROptions& opts) {
  g_factorize_calls.fetch_add(1);
  const Embedding& emb = *ws.emb;
  SparseQRFactors f;
  f.nrows = ws.nrows;
  f.ncols = emb.nvars;
  f.groups = emb.groups;
  if (f.nrows < f.ncols)
    throw error("factorize: stacked system has fewer rows than columns");

  const size_t ngroups = emb.groups.size();
  std::vector<std::vector<WorkBlock>> pending(ngroups);
  for (const StackRow& sr : ws.layout) {
    WorkBlock wb = expand_row(sr, emb.groups);
    const size_t key = static_cast<size_t>(wb.gids.front());
    pending[key].push_back(std::move(wb));
  }

  f.rrows.resize(static_cast<size_t>(f.ncols));
  size_t g0 = 0;
  while (g0 < ngroups) {
    size_t g1 = g0 + 1;
    while (g1 < ngroups && emb.groups[g1].level == emb.groups[g0].level &&
           emb.groups[g1].part == emb.groups[g0].part)
      ++g1;

    std::vector<int64_t> tasks;
    for (size_t g = g0; g < g1; ++g) {
      if (emb.groups[g].width == 0) {
        if (!pending[g].empty()) throw error("factorize: rows keyed to an empty group");
        continue;
      }
      if (pending[g].empty())
        throw error("factorize: column " + std::to_string(emb.groups[g].offset) +
                    " has no rows to eliminate");
      tasks.push_back(static_cast<int64_t>(g));
    }

    std::vector<PanelResult> results(tasks.size());
    std::string fail;
    const int64_t ntask = static_cast<int64_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel && ntask > 1)
    for (int64_t ti = 0; ti < ntask; ++ti) {
      try {
        const size_t g = static_cast<size_t>(tasks[static_cast<size_t>(ti)]);
        results[static_cast<size_t>(ti)] =
            eliminate_group(tasks[static_cast<size_t>(ti)], std::move(pending[g]), emb.groups);
        pending[g].clear();
      } catch (const std::exception& ex) {
#pragma omp critical
        fail = ex.what();
      }
    }
    if (!fail.empty()) throw error(fail);

    // merge in group order so results never depend on thread scheduling
    for (PanelResult& res : results) {
      for (RRow& rr : res.rrows) {
        f.nnz_r += static_cast<int64_t>(rr.vals.size());
        f.rrows[static_cast<size_t>(rr.cols.front())] = std::move(rr);
      }
      f.panels.push_back(std::move(res.panel));
      if (!res.remainder.row_slots.empty()) {
        if (res.remainder_key < static_cast<int64_t>(g1))
          throw error("factorize: remainder rows target the active stage");
        pending[static_cast<size_t>(res.remainder_key)].push_back(std::move(res.remainder));
      }
    }
    g0 = g1;
  }

  for (int64_t j = 0; j < f.ncols; ++j)
    if (f.rrows[static_cast<size_t>(j)].slot < 0)
      throw error("factorize: column " + std::to_string(j) + " was never eliminated");
  if (f.nnz_r > 3 * emb.predicted_r_nnz())
    throw error("factorize: fill exceeded the structural envelope");
  return f;
}

namespace {

void reflect_forward(const QRPanel& p, std::vector<double>& sub) {
  const int64_t r = p.v.rows(), k = p.v.cols();
  for (int64_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (int64_t i = j; i < r; ++i) s += p.v(i, j) * sub[static_cast<size_t>(i)];
    s *= 2.0;
    for (int64_t i = j; i < r; ++i) sub[static_cast<size_t>(i)] -= s * p.v(i, j);
  }
}

void reflect_backward(const QRPanel& p, std::vector<double>& sub) {
  const int64_t r = p.v.rows(), k = p.v.cols();
  for (int64_t j = k - 1; j >= 0; --j) {
    double s = 0.0;
    for (int64_t i = j; i < r; ++i) s += p.v(i, j) * sub[static_cast<size_t>(i)];
    s *= 2.0;
    for (int64_t i = j; i < r; ++i) sub[static_cast<size_t>(i)] -= s * p.v(i, j);
  }
}

}  // namespace

std::vector<double> SparseQRFactors::apply_qt(std::span<const double> b) const {
  if (static_cast<int64_t>(b.size()) != nrows) throw error("apply_qt: length mismatch");
  std::vector<double> v(b.begin(), b.end());
  std::vector<double> sub;
  for (const QRPanel& p : panels) {
    sub.resize(p.row_slots.size());
    for (size_t i = 0; i < p.row_slots.size(); ++i)
      sub[i] = v[static_cast<size_t>(p.row_slots[i])];
    reflect_forward(p, sub);
    for (size_t i = 0; i < p.row_slots.size(); ++i)
      v[static_cast<size_t>(p.row_slots[i])] = sub[i];
  }
  return v;
}

std::vector<double> SparseQRFactors::apply_q(std::span<const double> y) const {
  if (static_cast<int64_t>(y.size()) != nrows) throw error("apply_q: length mismatch");
  std::vector<double> v(y.begin(), y.end());
  std::vector<double> sub;
  for (auto it = panels.rbegin(); it != panels.rend(); ++it) {
    sub.resize(it->row_slots.size());
    for (size_t i = 0; i < it->row_slots.size(); ++i)
      sub[i] = v[static_cast<size_t>(it->row_slots[i])];
    reflect_backward(*it, sub);
    for (size_t i = 0; i < it->row_slots.size(); ++i)
      v[static_cast<size_t>(it->row_slots[i])] = sub[i];
  }
  return v;
}

std::vector<double> SparseQRFactors::solve_r(std::span<const double> w) const {
  if (static_cast<int64_t>(w.size()) != ncols) throw error("solve_r: length mismatch");
  double maxdiag = 0.0;
  for (const RRow& rr : rrows) maxdiag = std::max(maxdiag, std::fabs(rr.vals.front()));
  std::vector<double> x(w.begin(), w.end());
  for (int64_t j = ncols - 1; j >= 0; --j) {
    const RRow& rr = rrows[static_cast<size_t>(j)];
    if (std::fabs(rr.vals.front()) <= 1e-14 * maxdiag)
      throw error("solve_r: singular pivot at column " + std::to_string(j));
    double s = x[static_cast<size_t>(j)];
    for (size_t t = 1; t < rr.cols.size(); ++t)
      s -= rr.vals[t] * x[static_cast<size_t>(rr.cols[t])];
    x[static_cast<size_t>(j)] = s / rr.vals.front();
  }
  return x;
}

std::vector<double> SparseQRFactors::solve_rt(std::span<const double> w) const {
  if (static_cast<int64_t>(w.size()) != ncols) throw error("solve_rt: length mismatch");
  double maxdiag = 0.0;
  for (const RRow& rr : rrows) maxdiag = std::max(maxdiag, std::fabs(rr.vals.front()));
  std::vector<double> x(static_cast<size_t>(ncols), 0.0);
  std::vector<double> acc(static_cast<size_t>(ncols), 0.0);
  for (int64_t j = 0; j < ncols; ++j) {
    const RRow& rr = rrows[static_cast<size_t>(j)];
    if (std::fabs(rr.vals.front()) <= 1e-14 * maxdiag)
      throw error("solve_rt: singular pivot at column " + std::to_string(j));
    const double xj = (w[static_cast<size_t>(j)] - acc[static_cast<size_t>(j)]) / rr.vals.front();
    x[static_cast<size_t>(j)] = xj;
    for (size_t t = 1; t < rr.cols.size(); ++t)
      acc[static_cast<size_t>(rr.cols[t])] += rr.vals[t] * xj;
  }
  return x;
}

std::vector<double> SparseQRFactors::solve_ls(std::span<const double> b) const {
  const std::vector<double> v = apply_qt(b);
  std::vector<double> w(static_cast<size_t>(ncols));
  for (int64_t j = 0; j < ncols; ++j)
    w[static_cast<size_t>(j)] = v[static_cast<size_t>(rrows[static_cast<size_t>(j)].slot)];
  return solve_r(w);
}

std::vector<double> SparseQRFactors::solve_ls_adjoint(std::span<const double> v) const {
  const std::vector<double> y = solve_rt(v);
  std::vector<double> z(static_cast<size_t>(nrows), 0.0);
  for (int64_t j = 0; j < ncols; ++j)
    z[static_cast<size_t>(rrows[static_cast<size_t>(j)].slot)] = y[static_cast<size_t>(j)];
  return apply_q(z);
}

void export_r_coordinate(const SparseQRFactors& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw error("export_r_coordinate: cannot open " + path);
  os.precision(17);
  for (int64_t j = 0; j < f.ncols; ++j) {
    const RRow& rr = f.rrows[static_cast<size_t>(j)];
    for (size_t t = 0; t < rr.cols.size(); ++t)
      if (rr.vals[t] != 0.0) os << j + 1 << ' ' << rr.cols[t] + 1 << ' ' << rr.vals[t] << '\n';
  }
  if (!os) throw error("export_r_coordinate: write failed for " + path);
}

}  // namespace hbs
