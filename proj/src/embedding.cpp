#include "hbs/embedding.hpp"

#include <algorithm>
#include <cinttypes>
#include <fstream>
#include <numeric>

namespace hbs {

namespace {

// preorder positions, children visited in id order
std::vector<int64_t> dfs_positions(const IndexTree& tree) {
  std::vector<int64_t> pos(tree.nodes.size(), -1);
  std::vector<int64_t> stack{0};
  int64_t counter = 0;
  while (!stack.empty()) {
    const int64_t id = stack.back();
    stack.pop_back();
    pos[static_cast<size_t>(id)] = counter++;
    const TreeNode& nd = tree.node(id);
    for (auto it = nd.children.rbegin(); it != nd.children.rend(); ++it) stack.push_back(*it);
  }
  return pos;
}

// evaluate one block row into chunk; constraint targets (the trailing -I) are
// skipped when include_neg is false so lift can reuse the exact same sums
void accumulate_row(const BlockRow& br, const std::vector<VarGroup>& groups,
                    std::span<const double> x, double* chunk, bool include_neg) {
  for (const SparseBlock& sb : br.subs) {
    const VarGroup& g = groups[static_cast<size_t>(sb.gid)];
    switch (sb.kind) {
      case BlockKind::dense:
        matvec_acc(sb.mat, std::span<const double>(x.data() + g.offset, static_cast<size_t>(g.width)),
                   std::span<double>(chunk, static_cast<size_t>(br.nrows)));
        break;
      case BlockKind::identity: {
        const double* xs = x.data() + g.offset + sb.col_offset;
        for (int64_t i = 0; i < br.nrows; ++i) chunk[i] += xs[i];
        break;
      }
      case BlockKind::neg_identity: {
        if (!include_neg) break;
        const double* xs = x.data() + g.offset + sb.col_offset;
        for (int64_t i = 0; i < br.nrows; ++i) chunk[i] -= xs[i];
        break;
      }
    }
  }
}

DenseMatrix row_slice(const DenseMatrix& a, int64_t r0, int64_t nr) {
  DenseMatrix out(nr, a.cols());
  for (int64_t j = 0; j < a.cols(); ++j)
    for (int64_t i = 0; i < nr; ++i) out(i, j) = a(r0 + i, j);
  return out;
}

}  // namespace

std::vector<double> SparseBlockMatrix::apply(std::span<const double> x) const {
  if (static_cast<int64_t>(x.size()) != ncols) throw error("sparse apply: length mismatch");
  std::vector<double> y(static_cast<size_t>(nrows), 0.0);
  for (const BlockRow& br : rows)
    accumulate_row(br, groups, x, y.data() + br.row_offset, true);
  return y;
}

std::vector<double> SparseBlockMatrix::apply_transpose(std::span<const double> yv) const {
  if (static_cast<int64_t>(yv.size()) != nrows) throw error("sparse apply: length mismatch");
  std::vector<double> x(static_cast<size_t>(ncols), 0.0);
  for (const BlockRow& br : rows) {
    const double* yc = yv.data() + br.row_offset;
    for (const SparseBlock& sb : br.subs) {
      const VarGroup& g = groups[static_cast<size_t>(sb.gid)];
      switch (sb.kind) {
        case BlockKind::dense:
          matvec_acc(sb.mat, std::span<const double>(yc, static_cast<size_t>(br.nrows)),
                     std::span<double>(x.data() + g.offset, static_cast<size_t>(g.width)), true);
          break;
        case BlockKind::identity:
          for (int64_t i = 0; i < br.nrows; ++i) x[static_cast<size_t>(g.offset + sb.col_offset + i)] += yc[i];
          break;
        case BlockKind::neg_identity:
          for (int64_t i = 0; i < br.nrows; ++i) x[static_cast<size_t>(g.offset + sb.col_offset + i)] -= yc[i];
          break;
      }
    }
  }
  return x;
}

void export_coordinate(const SparseBlockMatrix& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw error("export_coordinate: cannot open " + path);
  os.precision(17);
  for (const BlockRow& br : a.rows) {
    for (const SparseBlock& sb : br.subs) {
      const VarGroup& g = a.groups[static_cast<size_t>(sb.gid)];
      if (sb.kind == BlockKind::dense) {
        for (int64_t j = 0; j < sb.mat.cols(); ++j)
          for (int64_t i = 0; i < sb.mat.rows(); ++i)
            if (sb.mat(i, j) != 0.0)
              os << br.row_offset + i + 1 << ' ' << g.offset + j + 1 << ' ' << sb.mat(i, j)
                 << '\n';
      } else {
        const double v = sb.kind == BlockKind::identity ? 1.0 : -1.0;
        for (int64_t i = 0; i < br.nrows; ++i)
          os << br.row_offset + i + 1 << ' ' << g.offset + sb.col_offset + i + 1 << ' ' << v
             << '\n';
      }
    }
  }
  if (!os) throw error("export_coordinate: write failed for " + path);
}

std::vector<double> Embedding::lift(std::span<const double> x) const {
  if (static_cast<int64_t>(x.size()) != n) throw error("lift: length mismatch");
  std::vector<double> xbar(static_cast<size_t>(nvars), 0.0);
  for (int64_t j = 0; j < n; ++j) xbar[static_cast<size_t>(j)] = x[static_cast<size_t>(col_perm[static_cast<size_t>(j)])];

  auto fill_targets = [&](std::pair<int64_t, int64_t> range) {
    for (int64_t ri = range.first; ri < range.second; ++ri) {
      const BlockRow& br = c.rows[static_cast<size_t>(ri)];
      const SparseBlock& tgt = br.subs.back();
      const VarGroup& g = groups[static_cast<size_t>(tgt.gid)];
      double* dst = xbar.data() + g.offset + tgt.col_offset;
      std::fill(dst, dst + br.nrows, 0.0);
      accumulate_row(br, groups, xbar, dst, false);
    }
  };
  // x-chunks flow away from the observations, y-chunks flow back from the root
  for (const auto& r : rrow_ranges) fill_targets(r);
  for (auto it = drow_ranges.rbegin(); it != drow_ranges.rend(); ++it) fill_targets(*it);
  return xbar;
}

std::vector<double> Embedding::extract_solution(std::span<const double> xbar) const {
  if (static_cast<int64_t>(xbar.size()) != nvars) throw error("extract_solution: length mismatch");
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int64_t j = 0; j < n; ++j)
    x[static_cast<size_t>(col_perm[static_cast<size_t>(j)])] = xbar[static_cast<size_t>(j)];
  return x;
}

std::vector<double> Embedding::embed_rhs(std::span<const double> b) const {
  if (static_cast<int64_t>(b.size()) != m) throw error("embed_rhs: length mismatch");
  std::vector<double> out(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i)
    out[static_cast<size_t>(i)] = b[static_cast<size_t>(row_perm[static_cast<size_t>(i)])];
  return out;
}

int64_t Embedding::predicted_r_nnz() const {
  int64_t total = 0;
  for (const VarGroup& g : groups) total += g.width * (g.width + 1) / 2 + g.width * g.trail;
  return total;
}

Embedding assemble_embedding(const CompressedMatrix& cm) {
  Embedding emb;
  emb.m = cm.m;
  emb.n = cm.n;

  if (cm.levels.empty()) {
    emb.nvars = cm.n;
    emb.groups.push_back({-1, 'x', -1, 0, cm.n, 0});
    emb.col_perm = cm.root_col_skel;
    emb.row_perm = cm.root_row_skel;
    emb.e.nrows = cm.m;
    emb.e.ncols = cm.n;
    if (cm.m > 0 && cm.n > 0) {
      BlockRow br{0, cm.m, {}};
      br.subs.push_back({0, 0, cm.n, BlockKind::dense, cm.root_d});
      emb.e.rows.push_back(std::move(br));
    }
    emb.c.nrows = 0;
    emb.c.ncols = cm.n;
    emb.e.groups = emb.groups;
    emb.c.groups = emb.groups;
    return emb;
  }

  const IndexTree& tree = cm.tree;
  const std::vector<int64_t> dfs = dfs_positions(tree);
  const size_t L = cm.levels.size();

  // per level: block indices in depth-first member order, and node -> block maps
  std::vector<std::vector<size_t>> order(L);
  std::vector<std::vector<int64_t>> block_of(L, std::vector<int64_t>(tree.nodes.size(), -1));
  for (size_t li = 0; li < L; ++li) {
    const auto& blocks = cm.levels[li].blocks;
    order[li].resize(blocks.size());
    std::iota(order[li].begin(), order[li].end(), size_t{0});
    std::sort(order[li].begin(), order[li].end(), [&](size_t a, size_t b) {
      return dfs[static_cast<size_t>(blocks[a].node_id)] <
             dfs[static_cast<size_t>(blocks[b].node_id)];
    });
    for (size_t bi = 0; bi < blocks.size(); ++bi)
      block_of[li][static_cast<size_t>(blocks[bi].node_id)] = static_cast<int64_t>(bi);
  }

  // variable groups: per level x-chunks then y-chunks, members depth-first
  std::vector<std::vector<int64_t>> xg(L), yg(L);
  int64_t off = 0;
  for (size_t li = 0; li < L; ++li) {
    const auto& blocks = cm.levels[li].blocks;
    xg[li].assign(blocks.size(), -1);
    yg[li].assign(blocks.size(), -1);
    for (size_t bi : order[li]) {
      const BlockFactors& b = blocks[bi];
      xg[li][bi] = static_cast<int64_t>(emb.groups.size());
      emb.groups.push_back({cm.levels[li].level, 'x', b.node_id, off,
                            static_cast<int64_t>(b.col_active.size()), 0});
      off += static_cast<int64_t>(b.col_active.size());
    }
    for (size_t bi : order[li]) {
      const BlockFactors& b = blocks[bi];
      yg[li][bi] = static_cast<int64_t>(emb.groups.size());
      emb.groups.push_back({cm.levels[li].level, 'y', b.node_id, off,
                            static_cast<int64_t>(b.row_skel.size()), 0});
      off += static_cast<int64_t>(b.row_skel.size());
    }
  }
  const int64_t root_gid = static_cast<int64_t>(emb.groups.size());
  emb.groups.push_back({-1, 'x', -1, off, cm.kc, 0});
  off += cm.kc;
  emb.nvars = off;

  for (size_t bi : order[0]) {
    const BlockFactors& b = cm.levels[0].blocks[bi];
    emb.row_perm.insert(emb.row_perm.end(), b.row_active.begin(), b.row_active.end());
    emb.col_perm.insert(emb.col_perm.end(), b.col_active.begin(), b.col_active.end());
  }
  if (static_cast<int64_t>(emb.col_perm.size()) != cm.n ||
      static_cast<int64_t>(emb.row_perm.size()) != cm.m)
    throw error("assemble_embedding: deepest partition does not cover the point sets");

  // observation rows: [D^(lambda)  L^(lambda)]
  emb.e.ncols = emb.nvars;
  int64_t ero = 0;
  for (size_t bi : order[0]) {
    const BlockFactors& b = cm.levels[0].blocks[bi];
    const int64_t ra = static_cast<int64_t>(b.row_active.size());
    if (ra == 0) continue;
    BlockRow br{ero, ra, {}};
    if (!b.d.empty()) br.subs.push_back({xg[0][bi], 0, b.d.cols(), BlockKind::dense, b.d});
    if (b.passthrough)
      br.subs.push_back({yg[0][bi], 0, ra, BlockKind::identity, {}});
    else if (!b.l.empty())
      br.subs.push_back({yg[0][bi], 0, b.l.cols(), BlockKind::dense, b.l});
    emb.e.rows.push_back(std::move(br));
    ero += ra;
  }
  emb.e.nrows = ero;
  if (ero != cm.m) throw error("assemble_embedding: observation row count mismatch");

  // consistency rows, one level pair at a time
  emb.c.ncols = emb.nvars;
  int64_t cro = 0;
  for (size_t li = 0; li < L; ++li) {
    const auto& blocks = cm.levels[li].blocks;
    const bool has_coarser = li + 1 < L;

    // where each member's skeleton chunk lands in the consuming level
    std::vector<int64_t> x_parent_gid(blocks.size(), -1), x_parent_off(blocks.size(), 0);
    std::vector<int64_t> y_parent_bi(blocks.size(), -1), y_parent_off(blocks.size(), 0);
    size_t cursor = 0;
    if (has_coarser) {
      const auto& coarse = cm.levels[li + 1].blocks;
      for (size_t qi : order[li + 1]) {
        const BlockFactors& q = coarse[qi];
        const TreeNode& qn = tree.node(q.node_id);
        std::vector<int64_t> sources;
        if (qn.is_leaf())
          sources.push_back(q.node_id);
        else
          sources = qn.children;
        int64_t xo = 0, yo = 0;
        for (int64_t s : sources) {
          const int64_t sbi = block_of[li][static_cast<size_t>(s)];
          if (sbi < 0 || cursor >= order[li].size() ||
              order[li][cursor] != static_cast<size_t>(sbi))
            throw error("assemble_embedding: partition order mismatch");
          ++cursor;
          const BlockFactors& sb = blocks[static_cast<size_t>(sbi)];
          x_parent_gid[static_cast<size_t>(sbi)] = xg[li + 1][static_cast<size_t>(qi)];
          x_parent_off[static_cast<size_t>(sbi)] = xo;
          y_parent_bi[static_cast<size_t>(sbi)] = static_cast<int64_t>(qi);
          y_parent_off[static_cast<size_t>(sbi)] = yo;
          xo += static_cast<int64_t>(sb.col_skel.size());
          yo += static_cast<int64_t>(sb.row_skel.size());
        }
        if (xo != static_cast<int64_t>(q.col_active.size()) ||
            yo != static_cast<int64_t>(q.row_active.size()))
          throw error("assemble_embedding: skeleton chunk sizes disagree");
      }
      if (cursor != order[li].size())
        throw error("assemble_embedding: partition order mismatch");
    } else {
      int64_t xo = 0, yo = 0;
      for (size_t bi : order[li]) {
        const BlockFactors& b = blocks[bi];
        x_parent_gid[bi] = root_gid;
        x_parent_off[bi] = xo;
        y_parent_off[bi] = yo;
        xo += static_cast<int64_t>(b.col_skel.size());
        yo += static_cast<int64_t>(b.row_skel.size());
      }
    }

    // structural fill widths for the QR nonzero budget
    for (size_t bi : order[li]) {
      const BlockFactors& b = blocks[bi];
      const int64_t rs = static_cast<int64_t>(b.row_skel.size());
      int64_t ca_q, rs_q;
      if (has_coarser) {
        const BlockFactors& q =
            cm.levels[li + 1].blocks[static_cast<size_t>(y_parent_bi[bi])];
        ca_q = static_cast<int64_t>(q.col_active.size());
        rs_q = static_cast<int64_t>(q.row_skel.size());
      } else {
        ca_q = cm.kc;
        rs_q = 0;
      }
      emb.groups[static_cast<size_t>(xg[li][bi])].trail = rs + ca_q;
      emb.groups[static_cast<size_t>(yg[li][bi])].trail = ca_q + rs_q;
    }

    // coupling rows: R^(l) x^(l) = x^(l-1) chunk
    const int64_t rbegin = static_cast<int64_t>(emb.c.rows.size());
    for (size_t bi : order[li]) {
      const BlockFactors& b = blocks[bi];
      const int64_t cs = static_cast<int64_t>(b.col_skel.size());
      if (cs == 0) continue;
      BlockRow br{cro, cs, {}};
      if (b.passthrough)
        br.subs.push_back({xg[li][bi], 0, cs, BlockKind::identity, {}});
      else
        br.subs.push_back({xg[li][bi], 0, b.r.cols(), BlockKind::dense, b.r});
      br.subs.push_back({x_parent_gid[bi], x_parent_off[bi], cs, BlockKind::neg_identity, {}});
      emb.c.rows.push_back(std::move(br));
      cro += cs;
    }
    emb.rrow_ranges.emplace_back(rbegin, static_cast<int64_t>(emb.c.rows.size()));

    // coupling rows: y^(l) chunk = D x + L y one level up (the root beyond the top)
    const int64_t dbegin = static_cast<int64_t>(emb.c.rows.size());
    for (size_t bi : order[li]) {
      const BlockFactors& b = blocks[bi];
      const int64_t rs = static_cast<int64_t>(b.row_skel.size());
      if (rs == 0) continue;
      BlockRow br{cro, rs, {}};
      if (has_coarser) {
        const size_t qi = static_cast<size_t>(y_parent_bi[bi]);
        const BlockFactors& q = cm.levels[li + 1].blocks[qi];
        const int64_t roff = y_parent_off[bi];
        if (!q.d.empty())
          br.subs.push_back(
              {xg[li + 1][qi], 0, q.d.cols(), BlockKind::dense, row_slice(q.d, roff, rs)});
        if (q.passthrough)
          br.subs.push_back({yg[li + 1][qi], roff, rs, BlockKind::identity, {}});
        else if (!q.l.empty())
          br.subs.push_back(
              {yg[li + 1][qi], 0, q.l.cols(), BlockKind::dense, row_slice(q.l, roff, rs)});
      } else {
        if (cm.kc > 0)
          br.subs.push_back(
              {root_gid, 0, cm.kc, BlockKind::dense, row_slice(cm.root_d, y_parent_off[bi], rs)});
      }
      br.subs.push_back({yg[li][bi], 0, rs, BlockKind::neg_identity, {}});
      emb.c.rows.push_back(std::move(br));
      cro += rs;
    }
    emb.drow_ranges.emplace_back(dbegin, static_cast<int64_t>(emb.c.rows.size()));
  }
  emb.c.nrows = cro;
  if (cro != emb.nvars - emb.n)
    throw error("assemble_embedding: constraint row count mismatch");

  emb.e.groups = emb.groups;
  emb.c.groups = emb.groups;
  return emb;
}

std::vector<double> WeightedStack::apply(std::span<const double> xbar) const {
  if (static_cast<int64_t>(xbar.size()) != emb->nvars) throw error("stack apply: length mismatch");
  std::vector<double> out(static_cast<size_t>(nrows), 0.0);
  std::vector<double> chunk;
  for (const StackRow& sr : layout) {
    chunk.assign(static_cast<size_t>(sr.row->nrows), 0.0);
    accumulate_row(*sr.row, emb->groups, xbar, chunk.data(), true);
    for (int64_t i = 0; i < sr.row->nrows; ++i)
      out[static_cast<size_t>(sr.slot + i)] = sr.weight * chunk[static_cast<size_t>(i)];
  }
  return out;
}

std::vector<double> WeightedStack::apply_transpose(std::span<const double> y) const {
  if (static_cast<int64_t>(y.size()) != nrows) throw error("stack apply: length mismatch");
  std::vector<double> x(static_cast<size_t>(emb->nvars), 0.0);
  for (const StackRow& sr : layout) {
    const double* yc = y.data() + sr.slot;
    for (const SparseBlock& sb : sr.row->subs) {
      const VarGroup& g = emb->groups[static_cast<size_t>(sb.gid)];
      switch (sb.kind) {
        case BlockKind::dense:
          matvec_acc(sb.mat, std::span<const double>(yc, static_cast<size_t>(sr.row->nrows)),
                     std::span<double>(x.data() + g.offset, static_cast<size_t>(g.width)), true,
                     sr.weight);
          break;
        case BlockKind::identity:
          for (int64_t i = 0; i < sr.row->nrows; ++i)
            x[static_cast<size_t>(g.offset + sb.col_offset + i)] += sr.weight * yc[i];
          break;
        case BlockKind::neg_identity:
          for (int64_t i = 0; i < sr.row->nrows; ++i)
            x[static_cast<size_t>(g.offset + sb.col_offset + i)] -= sr.weight * yc[i];
          break;
      }
    }
  }
  return x;
}

std::vector<double> WeightedStack::apply_soft(std::span<const double> xbar) const {
  switch (variant) {
    case StackVariant::overdetermined:
      return emb->e.apply(xbar);
    case StackVariant::tikhonov: {
      std::vector<double> out = emb->e.apply(xbar);
      out.reserve(static_cast<size_t>(emb->m + emb->n));
      for (int64_t j = 0; j < emb->n; ++j) out.push_back(mu * xbar[static_cast<size_t>(j)]);
      return out;
    }
    case StackVariant::underdetermined:
      return std::vector<double>(xbar.begin(), xbar.begin() + emb->n);
  }
  throw error("apply_soft: bad variant");
}

std::vector<double> WeightedStack::apply_hard(std::span<const double> xbar) const {
  if (variant != StackVariant::underdetermined) return emb->c.apply(xbar);
  std::vector<double> out = emb->e.apply(xbar);
  const std::vector<double> cx = emb->c.apply(xbar);
  out.insert(out.end(), cx.begin(), cx.end());
  return out;
}

std::vector<double> WeightedStack::build_rhs(std::span<const double> soft,
                                             std::span<const double> hard) const {
  if (static_cast<int64_t>(soft.size()) != soft_len ||
      static_cast<int64_t>(hard.size()) != hard_len)
    throw error("build_rhs: region length mismatch");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(nrows));
  out.insert(out.end(), soft.begin(), soft.end());
  for (double h : hard) out.push_back(tau * h);
  return out;
}

WeightedStack assemble_weighted(const Embedding& emb, double tau, StackVariant variant,
                                double mu) {
  if (!(tau > 0.0)) throw error("assemble_weighted: tau must be positive");
  if (mu < 0.0) throw error("assemble_weighted: mu must be nonnegative");
  if (variant == StackVariant::underdetermined && emb.m >= emb.n)
    throw error("assemble_weighted: underdetermined variant needs m < n");
  if (variant != StackVariant::underdetermined && emb.m < emb.n)
    throw error("assemble_weighted: overdetermined variants need m >= n");

  WeightedStack ws;
  ws.emb = &emb;
  ws.variant = variant;
  ws.tau = tau;
  ws.mu = variant == StackVariant::tikhonov ? mu : 0.0;

  if (variant != StackVariant::overdetermined) {
    int64_t ro = 0;
    for (size_t gi = 0; gi < emb.groups.size(); ++gi) {
      const VarGroup& g = emb.groups[gi];
      if (g.offset >= emb.n) break;  // x^(lambda) groups sit at the front
      if (g.width == 0) continue;
      BlockRow br{ro, g.width, {}};
      br.subs.push_back({static_cast<int64_t>(gi), 0, g.width, BlockKind::identity, {}});
      ws.i1.push_back(std::move(br));
      ro += g.width;
    }
  }

  const int64_t crows = emb.c.nrows;
  auto push_rows = [&ws](const std::vector<BlockRow>& rows, double weight, int64_t base) {
    for (const BlockRow& br : rows) ws.layout.push_back({&br, weight, base + br.row_offset});
  };
  switch (variant) {
    case StackVariant::overdetermined:
      push_rows(emb.e.rows, 1.0, 0);
      push_rows(emb.c.rows, tau, emb.m);
      ws.soft_len = emb.m;
      ws.hard_len = crows;
      ws.nrows = emb.m + crows;
      break;
    case StackVariant::tikhonov:
      push_rows(emb.e.rows, 1.0, 0);
      push_rows(ws.i1, ws.mu, emb.m);
      push_rows(emb.c.rows, tau, emb.m + emb.n);
      ws.soft_len = emb.m + emb.n;
      ws.hard_len = crows;
      ws.nrows = emb.m + emb.n + crows;
      break;
    case StackVariant::underdetermined:
      push_rows(ws.i1, 1.0, 0);
      push_rows(emb.e.rows, tau, emb.n);
      push_rows(emb.c.rows, tau, emb.n + emb.m);
      ws.soft_len = emb.n;
      ws.hard_len = emb.m + crows;
      ws.nrows = emb.n + emb.m + crows;
      break;
  }
  return ws;
}

}  // namespace hbs
