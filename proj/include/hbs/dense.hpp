#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbs {

class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Column-major dense matrix. Constructors taking external data reject NaN/Inf;
// results of internal arithmetic are not re-validated.
class DenseMatrix {
 public:
  DenseMatrix() : rows_(0), cols_(0) {}
  DenseMatrix(int64_t rows, int64_t cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), 0.0) {
    if (rows < 0 || cols < 0) throw error("DenseMatrix: negative dimension");
  }
  DenseMatrix(int64_t rows, int64_t cols, std::vector<double> data);

  static DenseMatrix identity(int64_t n);

  double& operator()(int64_t i, int64_t j) { return data_[static_cast<size_t>(j * rows_ + i)]; }
  double operator()(int64_t i, int64_t j) const { return data_[static_cast<size_t>(j * rows_ + i)]; }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* col(int64_t j) { return data_.data() + static_cast<size_t>(j * rows_); }
  const double* col(int64_t j) const { return data_.data() + static_cast<size_t>(j * rows_); }

  DenseMatrix transpose() const;
  double norm_fro() const;
  double max_abs() const;

 private:
  int64_t rows_, cols_;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T

// y += alpha * A * x (or A^T x). x/y sizes must match; no aliasing.
void matvec_acc(const DenseMatrix& a, std::span<const double> x, std::span<double> y,
                bool transposed = false, double alpha = 1.0);
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x, bool transposed = false);

DenseMatrix submatrix(const DenseMatrix& a, std::span<const int64_t> row_idx,
                      std::span<const int64_t> col_idx);
DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix vcat(const DenseMatrix& a, const DenseMatrix& b);

// In-place solve R * X = B for upper-triangular R (no pivoting; diagonal must be
// nonzero relative to its largest entry).
void solve_upper_tri(const DenseMatrix& r, DenseMatrix& b);

double norm2(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scal(double alpha, std::span<double> x);

}  // namespace hbs
