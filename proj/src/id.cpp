#include "hbs/id.hpp"

#include <algorithm>
#include <cmath>

namespace hbs {

namespace {

// Householder vector for x (beta = resulting R diagonal). v is normalized to
// v[0] = 1 and stored with the essential part only; tau = 0 marks a no-op.
double make_house(std::span<double> x, double& tau) {
  const size_t n = x.size();
  double sigma = 0.0;
  for (size_t i = 1; i < n; ++i) sigma += x[i] * x[i];
  const double alpha = x[0];
  if (sigma == 0.0) {
    tau = 0.0;
    return alpha;
  }
  const double mu = std::sqrt(alpha * alpha + sigma);
  const double beta = alpha <= 0.0 ? mu : -mu;
  const double v0 = alpha - beta;
  tau = -v0 / beta;  // equals 2 v0^2 / (sigma + v0^2) with this normalization
  const double inv = 1.0 / v0;
  for (size_t i = 1; i < n; ++i) x[i] *= inv;
  x[0] = 1.0;
  return beta;
}

double exact_trailing_norm2(const DenseMatrix& a, int64_t col, int64_t from_row) {
  double s = 0.0;
  const double* c = a.col(col);
  for (int64_t i = from_row; i < a.rows(); ++i) s += c[i] * c[i];
  return s;
}

}  // namespace

PivotedQr::PivotedQr(DenseMatrix a, double tol) : qr_(std::move(a)) {
  const int64_t m = qr_.rows(), n = qr_.cols();
  const int64_t kmax = std::min(m, n);
  piv_.resize(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) piv_[static_cast<size_t>(j)] = j;
  tau_.assign(static_cast<size_t>(kmax), 0.0);
  rank_ = 0;

  std::vector<double> norms(static_cast<size_t>(n)), norms_ref(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    norms[static_cast<size_t>(j)] = exact_trailing_norm2(qr_, j, 0);
    norms_ref[static_cast<size_t>(j)] = norms[static_cast<size_t>(j)];
  }

  double r00 = 0.0;
  std::vector<double> vtmp(static_cast<size_t>(n));
  for (int64_t k = 0; k < kmax; ++k) {
    int64_t best = k;
    for (int64_t j = k + 1; j < n; ++j)
      if (norms[static_cast<size_t>(j)] > norms[static_cast<size_t>(best)]) best = j;

    // The downdated estimate decides the pivot; the acceptance test below uses
    // the exact norm so truncation is not fooled by cancellation.
    const double rkk2 = exact_trailing_norm2(qr_, best, k);
    const double rkk = std::sqrt(rkk2);
    if (k == 0) r00 = rkk;
    if (rkk == 0.0 || (tol > 0.0 && rkk <= tol * r00)) break;

    if (best != k) {
      for (int64_t i = 0; i < m; ++i) std::swap(qr_(i, k), qr_(i, best));
      std::swap(norms[static_cast<size_t>(k)], norms[static_cast<size_t>(best)]);
      std::swap(norms_ref[static_cast<size_t>(k)], norms_ref[static_cast<size_t>(best)]);
      std::swap(piv_[static_cast<size_t>(k)], piv_[static_cast<size_t>(best)]);
    }

    double tau = 0.0;
    std::span<double> xk(qr_.col(k) + k, static_cast<size_t>(m - k));
    const double beta = make_house(xk, tau);
    tau_[static_cast<size_t>(k)] = tau;

    if (tau != 0.0) {
      for (int64_t j = k + 1; j < n; ++j) {
        double* cj = qr_.col(j);
        double s = cj[k];
        for (int64_t i = k + 1; i < m; ++i) s += qr_(i, k) * cj[i];
        s *= tau;
        cj[k] -= s;
        for (int64_t i = k + 1; i < m; ++i) cj[i] -= s * qr_(i, k);
      }
    }
    qr_(k, k) = beta;
    rank_ = k + 1;

    for (int64_t j = k + 1; j < n; ++j) {
      const double rkj = qr_(k, j);
      double nn = norms[static_cast<size_t>(j)] - rkj * rkj;
      // Downdating loses accuracy once most of the mass is gone; fall back to
      // an exact recompute past that point.
      if (nn < 0.01 * norms_ref[static_cast<size_t>(j)]) {
        nn = exact_trailing_norm2(qr_, j, k + 1);
        norms_ref[static_cast<size_t>(j)] = nn;
      }
      norms[static_cast<size_t>(j)] = std::max(nn, 0.0);
    }
  }
}

DenseMatrix PivotedQr::r11() const {
  DenseMatrix r(rank_, rank_);
  for (int64_t j = 0; j < rank_; ++j)
    for (int64_t i = 0; i <= j; ++i) r(i, j) = qr_(i, j);
  return r;
}

DenseMatrix PivotedQr::r12() const {
  const int64_t n = qr_.cols();
  DenseMatrix r(rank_, n - rank_);
  for (int64_t j = rank_; j < n; ++j)
    for (int64_t i = 0; i < rank_; ++i) r(i, j - rank_) = qr_(i, j);
  return r;
}

void PivotedQr::apply_qt(std::span<double> x) const {
  const int64_t m = qr_.rows();
  if (x.size() != static_cast<size_t>(m)) throw error("apply_qt: length mismatch");
  for (int64_t k = 0; k < rank_; ++k) {
    const double tau = tau_[static_cast<size_t>(k)];
    if (tau == 0.0) continue;
    double s = x[static_cast<size_t>(k)];
    for (int64_t i = k + 1; i < m; ++i) s += qr_(i, k) * x[static_cast<size_t>(i)];
    s *= tau;
    x[static_cast<size_t>(k)] -= s;
    for (int64_t i = k + 1; i < m; ++i) x[static_cast<size_t>(i)] -= s * qr_(i, k);
  }
}

void PivotedQr::apply_q(std::span<double> x) const {
  const int64_t m = qr_.rows();
  if (x.size() != static_cast<size_t>(m)) throw error("apply_q: length mismatch");
  for (int64_t k = rank_ - 1; k >= 0; --k) {
    const double tau = tau_[static_cast<size_t>(k)];
    if (tau == 0.0) continue;
    double s = x[static_cast<size_t>(k)];
    for (int64_t i = k + 1; i < m; ++i) s += qr_(i, k) * x[static_cast<size_t>(i)];
    s *= tau;
    x[static_cast<size_t>(k)] -= s;
    for (int64_t i = k + 1; i < m; ++i) x[static_cast<size_t>(i)] -= s * qr_(i, k);
  }
}

IdResult column_id(const DenseMatrix& a, double tol) {
  const int64_t n = a.cols();
  PivotedQr qr(a, tol);
  const int64_t k = qr.rank();

  IdResult res;
  res.skeleton.resize(static_cast<size_t>(k));
  for (int64_t j = 0; j < k; ++j) res.skeleton[static_cast<size_t>(j)] = qr.piv()[static_cast<size_t>(j)];

  res.interp = DenseMatrix(k, n);
  if (k > 0 && n > k) {
    DenseMatrix t = qr.r12();
    DenseMatrix r11 = qr.r11();
    solve_upper_tri(r11, t);
    for (int64_t j = k; j < n; ++j) {
      const int64_t dst = qr.piv()[static_cast<size_t>(j)];
      for (int64_t i = 0; i < k; ++i) res.interp(i, dst) = t(i, j - k);
    }
  }
  // Skeleton columns are unit vectors by definition; write them exactly.
  for (int64_t j = 0; j < k; ++j) res.interp(j, res.skeleton[static_cast<size_t>(j)]) = 1.0;
  return res;
}

IdResult row_id(const DenseMatrix& a, double tol) {
  IdResult cid = column_id(a.transpose(), tol);
  IdResult res;
  res.skeleton = std::move(cid.skeleton);
  res.interp = cid.interp.transpose();
  return res;
}

}  // namespace hbs
