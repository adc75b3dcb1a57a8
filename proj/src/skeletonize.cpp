#include "hbs/skeletonize.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "hbs/id.hpp"

namespace hbs {

namespace {

double ball_radius(const TreeNode& n, int dim) {
  return n.half_width * std::sqrt(static_cast<double>(dim));
}

double center_dist(const TreeNode& a, const TreeNode& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double dd = a.center[static_cast<size_t>(d)] - b.center[static_cast<size_t>(d)];
    s += dd * dd;
  }
  return std::sqrt(s);
}

// The row space of a far-field interaction block is spanned by potentials of
// equivalent sources on the proxy surface, which live in the single-layer
// kernel even when the true kernel is a double layer.
KernelSpec row_side_proxy_kernel(const KernelSpec& k) {
  KernelSpec out = k;
  if (k.family == KernelFamily::laplace2d_double_layer) out.family = KernelFamily::laplace2d_log;
  if (k.family == KernelFamily::laplace3d_double_layer) out.family = KernelFamily::laplace3d;
  return out;
}

// Green's-family kernels use one ring; RBF-type kernels are not harmonic, so a
// single ring is not a complete far-field basis and a small annulus of shells
// is sampled instead.
PointSet make_proxy_points(const KernelSpec& kernel, const TreeNode& node, int dim,
                           const CompressOptions& o) {
  const double r = ball_radius(node, dim);
  const int64_t count = dim == 3 ? o.proxy_count_3d : o.proxy_count_2d;
  if (!kernel.rbf_like())
    return make_proxy_surface(dim, node.center.data(), o.proxy_radius_factor * r, count);
  PointSet shells;
  shells.dim = dim;
  const int ns = std::max(1, o.rbf_shells);
  for (int s = 0; s < ns; ++s) {
    const double f = ns == 1 ? o.proxy_radius_factor
                             : o.proxy_radius_factor +
                                   (o.rbf_shell_max - o.proxy_radius_factor) *
                                       (static_cast<double>(s) / static_cast<double>(ns - 1));
    PointSet ring = make_proxy_surface(dim, node.center.data(), f * r, count);
    shells.coords.insert(shells.coords.end(), ring.coords.begin(), ring.coords.end());
  }
  return shells;
}

std::vector<int64_t> iota_indices(int64_t n) {
  std::vector<int64_t> v(static_cast<size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

double CompressedMatrix::mean_skeleton(int level) const {
  for (const LevelFactors& lf : levels) {
    if (lf.level != level) continue;
    if (lf.blocks.empty()) return 0.0;
    double s = 0.0;
    for (const BlockFactors& b : lf.blocks)
      s += 0.5 * static_cast<double>(b.row_skel.size() + b.col_skel.size());
    return s / static_cast<double>(lf.blocks.size());
  }
  return 0.0;
}

namespace {
std::atomic<int64_t> g_compress_calls{0};
}  // namespace

int64_t compress_invocations() { return g_compress_calls.load(); }

CompressedMatrix compress(const KernelSpec& kernel, const PointSet& targets,
                          const PointSet& sources, const IndexTree& tree,
                          const CompressOptions& opts) {
  g_compress_calls.fetch_add(1);
  kernel.validate();
  if (!(opts.eps > 0.0) || opts.eps >= 1.0) throw error("compress: eps must be in (0, 1)");
  if (tree.nodes.empty()) throw error("compress: empty tree");
  if (static_cast<int64_t>(tree.node(0).row_indices.size()) != targets.size() ||
      static_cast<int64_t>(tree.node(0).col_indices.size()) != sources.size())
    throw error("compress: tree does not cover these point sets");

  CompressedMatrix cm;
  cm.tree = tree;
  cm.m = targets.size();
  cm.n = sources.size();
  cm.eps = opts.eps;

  bool use_proxy = opts.use_proxy;
  if (use_proxy &&
      (kernel.family == KernelFamily::yukawa2d || kernel.family == KernelFamily::yukawa3d)) {
    const double diam = 2.0 * ball_radius(tree.node(0), tree.dim);
    if (kernel.k * diam > opts.yukawa_proxy_limit) {
      use_proxy = false;
      cm.proxy_fallback = true;
      std::fprintf(stderr,
                   "compress: yukawa decay k*diam = %.3g too strong for proxy surfaces; "
                   "falling back to global compression\n",
                   kernel.k * diam);
    }
  }

  if (tree.depth == 0) {
    // single-leaf tree: nothing to compress, the root block is the whole matrix
    cm.root_row_skel = tree.node(0).row_indices;
    cm.root_col_skel = tree.node(0).col_indices;
    cm.root_d = eval_block(kernel, targets, cm.root_row_skel, sources, cm.root_col_skel);
    cm.kr = cm.root_d.rows();
    cm.kc = cm.root_d.cols();
    return cm;
  }

  const KernelSpec row_proxy = row_side_proxy_kernel(kernel);
  const size_t nn = tree.nodes.size();
  std::vector<std::vector<int64_t>> rskel(nn), cskel(nn);

  for (int lvl = tree.depth; lvl >= 1; --lvl) {
    const std::vector<int64_t> members = tree.partition_nodes(lvl);
    const size_t nb = members.size();
    LevelFactors lf;
    lf.level = lvl;
    lf.blocks.resize(nb);

    // active index sets carried into this level (leaf indices at the deepest
    // level, skeletons pulled up from below elsewhere)
    std::vector<std::vector<int64_t>> ract(nb), cact(nb);
    for (size_t mi = 0; mi < nb; ++mi) {
      const TreeNode& nd = tree.node(members[mi]);
      if (lvl == tree.depth) {
        ract[mi] = nd.row_indices;
        cact[mi] = nd.col_indices;
      } else if (nd.is_leaf()) {
        ract[mi] = rskel[static_cast<size_t>(nd.id)];
        cact[mi] = cskel[static_cast<size_t>(nd.id)];
      } else {
        for (int64_t c : nd.children) {
          const auto& rs = rskel[static_cast<size_t>(c)];
          const auto& cs = cskel[static_cast<size_t>(c)];
          ract[mi].insert(ract[mi].end(), rs.begin(), rs.end());
          cact[mi].insert(cact[mi].end(), cs.begin(), cs.end());
        }
      }
    }

    std::string fail;
#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel && nb > 1)
    for (int64_t mi = 0; mi < static_cast<int64_t>(nb); ++mi) {
      try {
        const size_t ui = static_cast<size_t>(mi);
        const TreeNode& nd = tree.node(members[ui]);
        BlockFactors& bf = lf.blocks[ui];
        bf.node_id = nd.id;
        bf.row_active = ract[ui];
        bf.col_active = cact[ui];
        const bool own_level = nd.level == lvl;
        bf.passthrough = !own_level;

        if (lvl == tree.depth) {
          // first participation extracts the self block, pass-through or not
          bf.d = eval_block(kernel, targets, bf.row_active, sources, bf.col_active);
        } else if (own_level && !nd.is_leaf()) {
          // regrouped diagonal block: cross-interactions between the children's
          // skeletons; same-child entries were extracted at deeper levels
          bf.d = DenseMatrix(static_cast<int64_t>(bf.row_active.size()),
                             static_cast<int64_t>(bf.col_active.size()));
          int64_t roff = 0;
          for (int64_t ci : nd.children) {
            const auto& rs = rskel[static_cast<size_t>(ci)];
            int64_t coff = 0;
            for (int64_t cj : nd.children) {
              const auto& cs = cskel[static_cast<size_t>(cj)];
              if (ci != cj && !rs.empty() && !cs.empty()) {
                DenseMatrix blk = eval_block(kernel, targets, rs, sources, cs);
                for (int64_t j = 0; j < blk.cols(); ++j)
                  for (int64_t i = 0; i < blk.rows(); ++i) bf.d(roff + i, coff + j) = blk(i, j);
              }
              coff += static_cast<int64_t>(cs.size());
            }
            roff += static_cast<int64_t>(rs.size());
          }
        }

        if (!own_level) {
          bf.row_skel = bf.row_active;
          bf.col_skel = bf.col_active;
        } else {
          PointSet proxy;
          std::vector<int64_t> proxy_idx;
          if (use_proxy) {
            proxy = make_proxy_points(kernel, nd, tree.dim, opts);
            proxy_idx = iota_indices(proxy.size());
          }
          // near field: members whose box ball meets this block's proxy ball
          std::vector<size_t> near;
          for (size_t mj = 0; mj < nb; ++mj) {
            if (mj == ui) continue;
            if (!use_proxy) {
              near.push_back(mj);
              continue;
            }
            const TreeNode& other = tree.node(members[mj]);
            const double lim = opts.proxy_radius_factor * ball_radius(nd, tree.dim) +
                               ball_radius(other, tree.dim);
            if (center_dist(nd, other, tree.dim) <= lim) near.push_back(mj);
          }

          // row compression: [ near columns | proxy sources ]
          if (bf.row_active.empty()) {
            bf.l = DenseMatrix(0, 0);
          } else {
            std::vector<int64_t> cols;
            for (size_t mj : near) cols.insert(cols.end(), cact[mj].begin(), cact[mj].end());
            DenseMatrix sample = eval_block(kernel, targets, bf.row_active, sources, cols);
            if (use_proxy)
              sample = hcat(sample,
                            eval_block(row_proxy, targets, bf.row_active, proxy, proxy_idx));
            if (sample.cols() == 0) {
              bf.l = DenseMatrix(static_cast<int64_t>(bf.row_active.size()), 0);
            } else {
              IdResult idr = row_id(sample, opts.eps);
              bf.l = std::move(idr.interp);
              bf.row_skel.reserve(idr.skeleton.size());
              for (int64_t s : idr.skeleton)
                bf.row_skel.push_back(bf.row_active[static_cast<size_t>(s)]);
            }
          }

          // column compression: [ near rows ; proxy targets ]
          if (bf.col_active.empty()) {
            bf.r = DenseMatrix(0, 0);
          } else {
            std::vector<int64_t> rows;
            for (size_t mj : near) rows.insert(rows.end(), ract[mj].begin(), ract[mj].end());
            DenseMatrix sample = eval_block(kernel, targets, rows, sources, bf.col_active);
            if (use_proxy)
              sample =
                  vcat(sample, eval_block(kernel, proxy, proxy_idx, sources, bf.col_active));
            if (sample.rows() == 0) {
              bf.r = DenseMatrix(0, static_cast<int64_t>(bf.col_active.size()));
            } else {
              IdResult idc = column_id(sample, opts.eps);
              bf.r = std::move(idc.interp);
              bf.col_skel.reserve(idc.skeleton.size());
              for (int64_t s : idc.skeleton)
                bf.col_skel.push_back(bf.col_active[static_cast<size_t>(s)]);
            }
          }
        }
      } catch (const std::exception& e) {
#pragma omp critical
        if (fail.empty()) fail = e.what();
      }
    }
    if (!fail.empty()) throw error("compress: " + fail);

    for (size_t mi = 0; mi < nb; ++mi) {
      rskel[static_cast<size_t>(members[mi])] = lf.blocks[mi].row_skel;
      cskel[static_cast<size_t>(members[mi])] = lf.blocks[mi].col_skel;
    }
    cm.levels.push_back(std::move(lf));
  }

  // root interaction matrix over the level-1 partition's final skeletons
  const LevelFactors& top = cm.levels.back();
  for (const BlockFactors& b : top.blocks) {
    cm.root_row_skel.insert(cm.root_row_skel.end(), b.row_skel.begin(), b.row_skel.end());
    cm.root_col_skel.insert(cm.root_col_skel.end(), b.col_skel.begin(), b.col_skel.end());
  }
  cm.kr = static_cast<int64_t>(cm.root_row_skel.size());
  cm.kc = static_cast<int64_t>(cm.root_col_skel.size());
  cm.root_d = DenseMatrix(cm.kr, cm.kc);
  {
    int64_t roff = 0;
    for (const BlockFactors& bi : top.blocks) {
      int64_t coff = 0;
      for (const BlockFactors& bj : top.blocks) {
        if (bi.node_id != bj.node_id && !bi.row_skel.empty() && !bj.col_skel.empty()) {
          DenseMatrix blk = eval_block(kernel, targets, bi.row_skel, sources, bj.col_skel);
          for (int64_t j = 0; j < blk.cols(); ++j)
            for (int64_t i = 0; i < blk.rows(); ++i) cm.root_d(roff + i, coff + j) = blk(i, j);
        }
        coff += static_cast<int64_t>(bj.col_skel.size());
      }
      roff += static_cast<int64_t>(bi.row_skel.size());
    }
  }
  return cm;
}

namespace {

// Shared forward/adjoint evaluation of the telescoping form. Forward follows
// x^(l-1) = R x^(l) upward, y^(l+1) = D x^(l) + L y^(l) back down; the adjoint
// runs the same recursion with L^T and R^T swapping roles.
std::vector<double> apply_core(const CompressedMatrix& cm, std::span<const double> v,
                               bool adjoint) {
  const int64_t in_len = adjoint ? cm.m : cm.n;
  const int64_t out_len = adjoint ? cm.n : cm.m;
  if (static_cast<int64_t>(v.size()) != in_len) throw error("apply: length mismatch");
  std::vector<double> out(static_cast<size_t>(out_len), 0.0);

  if (cm.levels.empty()) {
    const auto& gather_idx = adjoint ? cm.root_row_skel : cm.root_col_skel;
    const auto& scatter_idx = adjoint ? cm.root_col_skel : cm.root_row_skel;
    std::vector<double> xg(gather_idx.size());
    for (size_t i = 0; i < gather_idx.size(); ++i)
      xg[i] = v[static_cast<size_t>(gather_idx[i])];
    std::vector<double> y = matvec(cm.root_d, xg, adjoint);
    for (size_t i = 0; i < scatter_idx.size(); ++i)
      out[static_cast<size_t>(scatter_idx[i])] = y[i];
    return out;
  }

  const size_t nn = cm.tree.nodes.size();
  std::vector<std::vector<double>> xs(nn);   // transformed chunk per node
  std::vector<std::vector<double>> xin(nn);  // raw gathered chunk (feeds the D term)

  // final skeleton chunk lengths per node; a node's last appearance across the
  // levels is at its own level, where its skeletons are final
  std::vector<size_t> final_rk(nn, 0), final_ck(nn, 0);
  for (const LevelFactors& lf : cm.levels) {
    for (const BlockFactors& b : lf.blocks) {
      final_rk[static_cast<size_t>(b.node_id)] = b.row_skel.size();
      final_ck[static_cast<size_t>(b.node_id)] = b.col_skel.size();
    }
  }

  // upward sweep, deepest level first
  for (size_t li = 0; li < cm.levels.size(); ++li) {
    const LevelFactors& lf = cm.levels[li];
    const bool deepest = li == 0;
    for (const BlockFactors& b : lf.blocks) {
      const size_t id = static_cast<size_t>(b.node_id);
      std::vector<double>& gathered = xin[id];
      gathered.clear();
      const auto& act = adjoint ? b.row_active : b.col_active;
      if (deepest) {
        gathered.reserve(act.size());
        for (int64_t gi : act) gathered.push_back(v[static_cast<size_t>(gi)]);
      } else {
        const TreeNode& nd = cm.tree.node(b.node_id);
        if (nd.is_leaf()) {
          gathered = std::move(xs[id]);
        } else {
          for (int64_t c : nd.children) {
            const auto& ch = xs[static_cast<size_t>(c)];
            gathered.insert(gathered.end(), ch.begin(), ch.end());
          }
        }
      }
      if (b.passthrough)
        xs[id] = gathered;
      else
        xs[id] = adjoint ? matvec(b.l, gathered, true) : matvec(b.r, gathered, false);
    }
  }

  // root coupling
  const LevelFactors& top = cm.levels.back();
  std::vector<double> x0;
  for (const BlockFactors& b : top.blocks) {
    const auto& ch = xs[static_cast<size_t>(b.node_id)];
    x0.insert(x0.end(), ch.begin(), ch.end());
  }
  std::vector<double> y0 = matvec(cm.root_d, x0, adjoint);

  std::vector<std::vector<double>> ys(nn);
  {
    size_t off = 0;
    for (const BlockFactors& b : top.blocks) {
      const size_t len = adjoint ? b.col_skel.size() : b.row_skel.size();
      ys[static_cast<size_t>(b.node_id)].assign(y0.begin() + static_cast<int64_t>(off),
                                                y0.begin() + static_cast<int64_t>(off + len));
      off += len;
    }
  }

  // downward sweep, level 1 first
  for (size_t li = cm.levels.size(); li-- > 0;) {
    const LevelFactors& lf = cm.levels[li];
    const bool deepest = li == 0;
    for (const BlockFactors& b : lf.blocks) {
      const size_t id = static_cast<size_t>(b.node_id);
      std::vector<double> ych = std::move(ys[id]);
      std::vector<double> res;
      if (b.passthrough)
        res = std::move(ych);
      else
        res = adjoint ? matvec(b.r, ych, true) : matvec(b.l, ych, false);
      if (!b.d.empty()) matvec_acc(b.d, xin[id], res, adjoint, 1.0);
      const auto& act = adjoint ? b.col_active : b.row_active;
      if (res.size() != act.size()) throw error("apply: internal chunk size mismatch");

      if (deepest) {
        for (size_t i = 0; i < act.size(); ++i)
          out[static_cast<size_t>(act[i])] = res[i];
      } else {
        const TreeNode& nd = cm.tree.node(b.node_id);
        if (nd.is_leaf()) {
          ys[id] = std::move(res);
        } else {
          size_t pos = 0;
          for (int64_t c : nd.children) {
            const size_t cid = static_cast<size_t>(c);
            const size_t clen = adjoint ? final_ck[cid] : final_rk[cid];
            ys[cid].assign(res.begin() + static_cast<int64_t>(pos),
                           res.begin() + static_cast<int64_t>(pos + clen));
            pos += clen;
          }
          if (pos != res.size()) throw error("apply: child chunk partition mismatch");
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> apply(const CompressedMatrix& cm, std::span<const double> x) {
  return apply_core(cm, x, false);
}

std::vector<double> apply_adjoint(const CompressedMatrix& cm, std::span<const double> y) {
  return apply_core(cm, y, true);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "compressed-matrix files are little-endian");

constexpr uint32_t kMagic = 0x43534248;  // "HBSC"
constexpr uint32_t kVersion = 1;

void put_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void put_index_list(std::ostream& os, const std::vector<int64_t>& v) {
  put_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(int64_t)));
}

std::vector<int64_t> get_index_list(std::istream& is) {
  const uint64_t n = get_u64(is);
  std::vector<int64_t> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(int64_t)));
  return v;
}

void put_matrix(std::ostream& os, const DenseMatrix& a) {
  put_i64(os, a.rows());
  put_i64(os, a.cols());
  os.write(reinterpret_cast<const char*>(a.data()),
           static_cast<std::streamsize>(static_cast<size_t>(a.rows()) *
                                        static_cast<size_t>(a.cols()) * sizeof(double)));
}

DenseMatrix get_matrix(std::istream& is) {
  const int64_t m = get_i64(is);
  const int64_t n = get_i64(is);
  if (m < 0 || n < 0) throw error("load_compressed: corrupt matrix header");
  DenseMatrix a(m, n);
  is.read(reinterpret_cast<char*>(a.data()),
          static_cast<std::streamsize>(static_cast<size_t>(m) * static_cast<size_t>(n) *
                                       sizeof(double)));
  return a;
}

}  // namespace

void save_compressed(const CompressedMatrix& cm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw error("save_compressed: cannot open " + path);
  uint32_t header[2] = {kMagic, kVersion};
  os.write(reinterpret_cast<const char*>(header), sizeof header);

  put_i64(os, cm.tree.dim);
  put_i64(os, cm.tree.depth);
  put_i64(os, cm.tree.secondary_depth);
  put_i64(os, cm.tree.leaf_capacity);
  put_i64(os, cm.tree.overfull_leaves);
  put_u64(os, cm.tree.nodes.size());
  for (const TreeNode& n : cm.tree.nodes) {
    put_i64(os, n.id);
    put_i64(os, n.level);
    put_i64(os, n.parent);
    put_index_list(os, n.children);
    put_index_list(os, n.row_indices);
    put_index_list(os, n.col_indices);
    for (double c : n.center) put_f64(os, c);
    put_f64(os, n.half_width);
  }

  put_i64(os, cm.m);
  put_i64(os, cm.n);
  put_f64(os, cm.eps);
  put_u64(os, cm.proxy_fallback ? 1 : 0);
  put_u64(os, cm.levels.size());
  for (const LevelFactors& lf : cm.levels) {
    put_i64(os, lf.level);
    put_u64(os, lf.blocks.size());
    for (const BlockFactors& b : lf.blocks) {
      put_i64(os, b.node_id);
      put_u64(os, b.passthrough ? 1 : 0);
      put_matrix(os, b.d);
      put_matrix(os, b.l);
      put_matrix(os, b.r);
      put_index_list(os, b.row_active);
      put_index_list(os, b.col_active);
      put_index_list(os, b.row_skel);
      put_index_list(os, b.col_skel);
    }
  }
  put_matrix(os, cm.root_d);
  put_index_list(os, cm.root_row_skel);
  put_index_list(os, cm.root_col_skel);
  if (!os) throw error("save_compressed: write failed for " + path);
}

CompressedMatrix load_compressed(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw error("load_compressed: cannot open " + path);
  uint32_t header[2] = {0, 0};
  is.read(reinterpret_cast<char*>(header), sizeof header);
  if (!is || header[0] != kMagic) throw error("load_compressed: not a compressed-matrix file");
  if (header[1] != kVersion) throw error("load_compressed: unsupported file version");

  CompressedMatrix cm;
  cm.tree.dim = static_cast<int>(get_i64(is));
  cm.tree.depth = static_cast<int>(get_i64(is));
  cm.tree.secondary_depth = static_cast<int>(get_i64(is));
  cm.tree.leaf_capacity = get_i64(is);
  cm.tree.overfull_leaves = get_i64(is);
  cm.tree.nodes.resize(get_u64(is));
  for (TreeNode& n : cm.tree.nodes) {
    n.id = get_i64(is);
    n.level = static_cast<int>(get_i64(is));
    n.parent = get_i64(is);
    n.children = get_index_list(is);
    n.row_indices = get_index_list(is);
    n.col_indices = get_index_list(is);
    for (double& c : n.center) c = get_f64(is);
    n.half_width = get_f64(is);
  }

  cm.m = get_i64(is);
  cm.n = get_i64(is);
  cm.eps = get_f64(is);
  cm.proxy_fallback = get_u64(is) != 0;
  cm.levels.resize(get_u64(is));
  for (LevelFactors& lf : cm.levels) {
    lf.level = static_cast<int>(get_i64(is));
    lf.blocks.resize(get_u64(is));
    for (BlockFactors& b : lf.blocks) {
      b.node_id = get_i64(is);
      b.passthrough = get_u64(is) != 0;
      b.d = get_matrix(is);
      b.l = get_matrix(is);
      b.r = get_matrix(is);
      b.row_active = get_index_list(is);
      b.col_active = get_index_list(is);
      b.row_skel = get_index_list(is);
      b.col_skel = get_index_list(is);
    }
  }
  cm.root_d = get_matrix(is);
  cm.root_row_skel = get_index_list(is);
  cm.root_col_skel = get_index_list(is);
  cm.kr = static_cast<int64_t>(cm.root_row_skel.size());
  cm.kc = static_cast<int64_t>(cm.root_col_skel.size());
  if (!is) throw error("load_compressed: truncated file " + path);
  return cm;
}

}  // namespace hbs
