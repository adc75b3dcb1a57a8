#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hbs/dense.hpp"

namespace testutil {

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline hbs::DenseMatrix random_matrix(std::mt19937_64& rng, int64_t m, int64_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  hbs::DenseMatrix a(m, n);
  for (int64_t j = 0; j < n; ++j)
    for (int64_t i = 0; i < m; ++i) a(i, j) = dist(rng);
  return a;
}

// Exact rank-k product of two random factors.
inline hbs::DenseMatrix random_rank_k(std::mt19937_64& rng, int64_t m, int64_t n, int64_t k) {
  return hbs::matmul(random_matrix(rng, m, k), random_matrix(rng, k, n));
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int64_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = dist(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace testutil
