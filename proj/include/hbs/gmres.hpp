#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hbs {

// Residual target is relative to |rhs|; the basis grows to max_dim without
// restarting, so memory is max_dim vectors of the operator dimension.
struct GmresOptions {
  double tol = 1e-10;
  int64_t max_dim = 200;
};

struct GmresResult {
  std::vector<double> x;
  int64_t iterations = 0;
  bool converged = false;
  double rel_residual = 0.0;  // |rhs - op x| / |rhs|
};

using LinearOp = std::function<std::vector<double>(std::span<const double>)>;

// Restart-free GMRES from the zero initial guess. Arnoldi runs modified
// Gram-Schmidt twice per step so the basis stays orthogonal on stiff
// operators; the residual is updated by Givens rotations and the final
// projected triangle is solved as a truncated least-squares problem, which
// keeps the answer finite when the operator is singular on part of the space.
GmresResult gmres(const LinearOp& op, std::span<const double> rhs,
                  const GmresOptions& opt = {});

}  // namespace hbs
