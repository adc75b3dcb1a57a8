#include "hbs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

extern "C" {
void dgeqrf_(const int* m, const int* n, double* a, const int* lda, double* tau, double* work,
             const int* lwork, int* info);
void dgelqf_(const int* m, const int* n, double* a, const int* lda, double* tau, double* work,
             const int* lwork, int* info);
void dormqr_(const char* side, const char* trans, const int* m, const int* n, const int* k,
             const double* a, const int* lda, const double* tau, double* c, const int* ldc,
             double* work, const int* lwork, int* info);
void dormlq_(const char* side, const char* trans, const int* m, const int* n, const int* k,
             const double* a, const int* lda, const double* tau, double* c, const int* ldc,
             double* work, const int* lwork, int* info);
void dtrtrs_(const char* uplo, const char* trans, const char* diag, const int* n, const int* nrhs,
             const double* a, const int* lda, double* b, const int* ldb, int* info);
void dgesdd_(const char* jobz, const int* m, const int* n, double* a, const int* lda, double* s,
             double* u, const int* ldu, double* vt, const int* ldvt, double* work,
             const int* lwork, int* iwork, int* info);
}

namespace hbs::oracle {

namespace {

constexpr double kRankTol = 1e-12;

void check_info(int info, const char* who) {
  if (info != 0) throw error(std::string("oracle: ") + who + " failed");
}

void check_triangular_rank(const DenseMatrix& a, int64_t k, const char* who) {
  double dmax = 0.0;
  for (int64_t i = 0; i < k; ++i) dmax = std::max(dmax, std::fabs(a(i, i)));
  for (int64_t i = 0; i < k; ++i)
    if (std::fabs(a(i, i)) <= kRankTol * dmax)
      throw error(std::string("oracle: ") + who + ": rank deficient");
}

int query_lwork(void (*fn)(const int*, const int*, double*, const int*, double*, double*,
                           const int*, int*),
                int m, int n, int lda) {
  double wq = 0.0;
  int info = 0, lwork = -1;
  fn(&m, &n, nullptr, &lda, nullptr, &wq, &lwork, &info);
  check_info(info, "workspace query");
  return static_cast<int>(wq);
}

}  // namespace

std::vector<double> dense_lstsq(const DenseMatrix& a, std::span<const double> b) {
  const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  if (b.size() != static_cast<size_t>(m)) throw error("dense_lstsq: rhs length mismatch");
  if (n == 0) return {};
  if (m == 0) return std::vector<double>(static_cast<size_t>(n), 0.0);
  DenseMatrix qr = a;
  int info = 0, one = 1;

  if (m >= n) {
    std::vector<double> tau(static_cast<size_t>(n));
    int lwork = query_lwork(dgeqrf_, m, n, m);
    std::vector<double> work(static_cast<size_t>(std::max(lwork, m)));
    dgeqrf_(&m, &n, qr.data(), &m, tau.data(), work.data(), &lwork, &info);
    check_info(info, "dgeqrf");
    check_triangular_rank(qr, n, "dense_lstsq");

    std::vector<double> y(b.begin(), b.end());
    int wl = static_cast<int>(work.size());
    dormqr_("L", "T", &m, &one, &n, qr.data(), &m, tau.data(), y.data(), &m, work.data(), &wl,
            &info);
    check_info(info, "dormqr");
    dtrtrs_("U", "N", "N", &n, &one, qr.data(), &m, y.data(), &m, &info);
    check_info(info, "dtrtrs");
    y.resize(static_cast<size_t>(n));
    return y;
  }

  // m < n: minimum-norm solution via the LQ factorization.
  std::vector<double> tau(static_cast<size_t>(m));
  int lwork = query_lwork(dgelqf_, m, n, m);
  std::vector<double> work(static_cast<size_t>(std::max(lwork, n)));
  dgelqf_(&m, &n, qr.data(), &m, tau.data(), work.data(), &lwork, &info);
  check_info(info, "dgelqf");
  check_triangular_rank(qr, m, "dense_lstsq");

  std::vector<double> x(static_cast<size_t>(n), 0.0);
  std::copy(b.begin(), b.end(), x.begin());
  dtrtrs_("L", "N", "N", &m, &one, qr.data(), &m, x.data(), &m, &info);
  check_info(info, "dtrtrs");
  int nn = n, wl = static_cast<int>(work.size());
  dormlq_("L", "T", &nn, &one, &m, qr.data(), &m, tau.data(), x.data(), &nn, work.data(), &wl,
          &info);
  check_info(info, "dormlq");
  return x;
}

std::vector<double> dense_equality_lstsq(const DenseMatrix& e, const DenseMatrix& c,
                                         std::span<const double> f, std::span<const double> g) {
  const int64_t n = e.cols(), p = c.rows();
  if (c.cols() != n && p > 0) throw error("dense_equality_lstsq: C width mismatch");
  if (p == 0) return dense_lstsq(e, f);
  if (p > n) throw error("dense_equality_lstsq: more constraints than unknowns");

  DenseMatrix ct = c.transpose();  // n x p
  const int ni = static_cast<int>(n), pi = static_cast<int>(p);
  int info = 0, one = 1;
  std::vector<double> tau(static_cast<size_t>(p));
  int lwork = query_lwork(dgeqrf_, ni, pi, ni);
  lwork = std::max({lwork, ni, static_cast<int>(e.rows()) * 2});
  std::vector<double> work(static_cast<size_t>(lwork));
  dgeqrf_(&ni, &pi, ct.data(), &ni, tau.data(), work.data(), &lwork, &info);
  check_info(info, "dgeqrf(C^T)");
  check_triangular_rank(ct, p, "dense_equality_lstsq: constraints");

  // Particular solution x_p = Q1 R1^{-T} g satisfies C x_p = g.
  std::vector<double> xp(static_cast<size_t>(n), 0.0);
  std::copy(g.begin(), g.end(), xp.begin());
  dtrtrs_("U", "T", "N", &pi, &one, ct.data(), &ni, xp.data(), &ni, &info);
  check_info(info, "dtrtrs(R1^T)");
  dormqr_("L", "N", &ni, &one, &pi, ct.data(), &ni, tau.data(), xp.data(), &ni, work.data(),
          &lwork, &info);
  check_info(info, "dormqr(x_p)");

  // Reduced operator E Q; columns past p span the nullspace of C.
  DenseMatrix eq = e;
  const int mi = static_cast<int>(e.rows());
  if (mi > 0) {
    dormqr_("R", "N", &mi, &ni, &pi, ct.data(), &ni, tau.data(), eq.data(), &mi, work.data(),
            &lwork, &info);
    check_info(info, "dormqr(EQ)");
  }
  DenseMatrix ez(e.rows(), n - p);
  for (int64_t j = p; j < n; ++j)
    for (int64_t i = 0; i < e.rows(); ++i) ez(i, j - p) = eq(i, j);

  std::vector<double> rhs(f.begin(), f.end());
  matvec_acc(e, xp, rhs, false, -1.0);
  std::vector<double> y = n - p > 0 ? dense_lstsq(ez, rhs) : std::vector<double>{};

  std::vector<double> zy(static_cast<size_t>(n), 0.0);
  std::copy(y.begin(), y.end(), zy.begin() + p);
  dormqr_("L", "N", &ni, &one, &pi, ct.data(), &ni, tau.data(), zy.data(), &ni, work.data(),
          &lwork, &info);
  check_info(info, "dormqr(Zy)");
  axpy(1.0, zy, xp);
  return xp;
}

namespace {

Svd svd_impl(const DenseMatrix& a, bool want_vectors) {
  const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  const int r = std::min(m, n);
  Svd out;
  out.s.assign(static_cast<size_t>(r), 0.0);
  if (r == 0) return out;
  DenseMatrix work_a = a;
  int info = 0, lwork = -1;
  std::vector<int> iwork(static_cast<size_t>(8 * r));
  double wq = 0.0;
  if (want_vectors) {
    out.u = DenseMatrix(m, r);
    out.vt = DenseMatrix(r, n);
    dgesdd_("S", &m, &n, work_a.data(), &m, out.s.data(), out.u.data(), &m, out.vt.data(), &r,
            &wq, &lwork, iwork.data(), &info);
    check_info(info, "dgesdd query");
    lwork = static_cast<int>(wq);
    std::vector<double> work(static_cast<size_t>(lwork));
    dgesdd_("S", &m, &n, work_a.data(), &m, out.s.data(), out.u.data(), &m, out.vt.data(), &r,
            work.data(), &lwork, iwork.data(), &info);
    check_info(info, "dgesdd");
  } else {
    int ldu = 1;
    dgesdd_("N", &m, &n, work_a.data(), &m, out.s.data(), nullptr, &ldu, nullptr, &ldu, &wq,
            &lwork, iwork.data(), &info);
    check_info(info, "dgesdd query");
    lwork = static_cast<int>(wq);
    std::vector<double> work(static_cast<size_t>(lwork));
    dgesdd_("N", &m, &n, work_a.data(), &m, out.s.data(), nullptr, &ldu, nullptr, &ldu,
            work.data(), &lwork, iwork.data(), &info);
    check_info(info, "dgesdd");
  }
  return out;
}

}  // namespace

Svd svd(const DenseMatrix& a) { return svd_impl(a, true); }

std::vector<double> singular_values(const DenseMatrix& a) { return svd_impl(a, false).s; }

std::vector<double> svd_lstsq(const DenseMatrix& a, std::span<const double> b, double rcond) {
  Svd f = svd(a);
  std::vector<double> utb = matvec(f.u, b, true);
  const double cutoff = f.s.empty() ? 0.0 : rcond * f.s[0];
  for (size_t i = 0; i < f.s.size(); ++i) utb[i] = f.s[i] > cutoff ? utb[i] / f.s[i] : 0.0;
  return matvec(f.vt, utb, true);
}

double estimate_condition(const DenseMatrix& a) {
  std::vector<double> s = singular_values(a);
  if (s.empty()) return 1.0;
  if (s.back() == 0.0) return std::numeric_limits<double>::infinity();
  return s.front() / s.back();
}

int64_t svd_rank(const DenseMatrix& a, double tol) {
  std::vector<double> s = singular_values(a);
  if (s.empty()) return 0;
  int64_t r = 0;
  for (double v : s)
    if (v > tol * s[0]) ++r;
  return r;
}

}  // namespace hbs::oracle
