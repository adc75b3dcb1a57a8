#include "hbs/dense.hpp"

#include <cmath>
#include <cstring>

namespace hbs {

DenseMatrix::DenseMatrix(int64_t rows, int64_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0) throw error("DenseMatrix: negative dimension");
  if (data_.size() != static_cast<size_t>(rows * cols))
    throw error("DenseMatrix: data size mismatch");
  for (double v : data_)
    if (!std::isfinite(v)) throw error("DenseMatrix: non-finite entry");
}

DenseMatrix DenseMatrix::identity(int64_t n) {
  DenseMatrix a(n, n);
  for (int64_t i = 0; i < n; ++i) a(i, i) = 1.0;
  return a;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (int64_t j = 0; j < cols_; ++j)
    for (int64_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::norm_fro() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw error("matmul: inner dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  for (int64_t j = 0; j < n; ++j) {
    double* cj = c.col(j);
    for (int64_t l = 0; l < k; ++l) {
      const double blj = b(l, j);
      if (blj == 0.0) continue;
      const double* al = a.col(l);
      for (int64_t i = 0; i < m; ++i) cj[i] += al[i] * blj;
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw error("matmul_tn: dimension mismatch");
  DenseMatrix c(a.cols(), b.cols());
  for (int64_t j = 0; j < b.cols(); ++j) {
    const double* bj = b.col(j);
    for (int64_t i = 0; i < a.cols(); ++i) {
      const double* ai = a.col(i);
      double s = 0.0;
      for (int64_t l = 0; l < a.rows(); ++l) s += ai[l] * bj[l];
      c(i, j) = s;
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw error("matmul_nt: dimension mismatch");
  DenseMatrix c(a.rows(), b.rows());
  for (int64_t l = 0; l < a.cols(); ++l) {
    const double* al = a.col(l);
    for (int64_t j = 0; j < b.rows(); ++j) {
      const double blj = b(j, l);
      if (blj == 0.0) continue;
      double* cj = c.col(j);
      for (int64_t i = 0; i < a.rows(); ++i) cj[i] += al[i] * blj;
    }
  }
  return c;
}

void matvec_acc(const DenseMatrix& a, std::span<const double> x, std::span<double> y,
                bool transposed, double alpha) {
  if (!transposed) {
    if (x.size() != static_cast<size_t>(a.cols()) || y.size() != static_cast<size_t>(a.rows()))
      throw error("matvec: size mismatch");
    for (int64_t j = 0; j < a.cols(); ++j) {
      const double xj = alpha * x[static_cast<size_t>(j)];
      if (xj == 0.0) continue;
      const double* aj = a.col(j);
      for (int64_t i = 0; i < a.rows(); ++i) y[static_cast<size_t>(i)] += aj[i] * xj;
    }
  } else {
    if (x.size() != static_cast<size_t>(a.rows()) || y.size() != static_cast<size_t>(a.cols()))
      throw error("matvec_t: size mismatch");
    for (int64_t j = 0; j < a.cols(); ++j) {
      const double* aj = a.col(j);
      double s = 0.0;
      for (int64_t i = 0; i < a.rows(); ++i) s += aj[i] * x[static_cast<size_t>(i)];
      y[static_cast<size_t>(j)] += alpha * s;
    }
  }
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x, bool transposed) {
  std::vector<double> y(static_cast<size_t>(transposed ? a.cols() : a.rows()), 0.0);
  matvec_acc(a, x, y, transposed);
  return y;
}

DenseMatrix submatrix(const DenseMatrix& a, std::span<const int64_t> row_idx,
                      std::span<const int64_t> col_idx) {
  DenseMatrix s(static_cast<int64_t>(row_idx.size()), static_cast<int64_t>(col_idx.size()));
  for (size_t j = 0; j < col_idx.size(); ++j)
    for (size_t i = 0; i < row_idx.size(); ++i)
      s(static_cast<int64_t>(i), static_cast<int64_t>(j)) = a(row_idx[i], col_idx[j]);
  return s;
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.rows() != b.rows()) throw error("hcat: row mismatch");
  DenseMatrix c(a.rows(), a.cols() + b.cols());
  std::memcpy(c.col(0), a.data(), sizeof(double) * static_cast<size_t>(a.rows() * a.cols()));
  std::memcpy(c.col(a.cols()), b.data(), sizeof(double) * static_cast<size_t>(b.rows() * b.cols()));
  return c;
}

DenseMatrix vcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols()) throw error("vcat: col mismatch");
  DenseMatrix c(a.rows() + b.rows(), a.cols());
  for (int64_t j = 0; j < a.cols(); ++j) {
    std::memcpy(c.col(j), a.col(j), sizeof(double) * static_cast<size_t>(a.rows()));
    std::memcpy(c.col(j) + a.rows(), b.col(j), sizeof(double) * static_cast<size_t>(b.rows()));
  }
  return c;
}

void solve_upper_tri(const DenseMatrix& r, DenseMatrix& b) {
  const int64_t n = r.rows();
  if (r.cols() != n || b.rows() != n) throw error("solve_upper_tri: shape mismatch");
  double dmax = 0.0;
  for (int64_t i = 0; i < n; ++i) dmax = std::max(dmax, std::fabs(r(i, i)));
  for (int64_t j = 0; j < b.cols(); ++j) {
    double* bj = b.col(j);
    for (int64_t i = n - 1; i >= 0; --i) {
      double s = bj[i];
      for (int64_t l = i + 1; l < n; ++l) s -= r(i, l) * bj[l];
      if (std::fabs(r(i, i)) <= 1e-14 * dmax)
        throw error("solve_upper_tri: singular diagonal at " + std::to_string(i));
      bj[i] = s / r(i, i);
    }
  }
}

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scal(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

}  // namespace hbs
