#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hbs/embedding.hpp"
#include "hbs/kernels.hpp"
#include "hbs/skeletonize.hpp"
#include "hbs/sparse_qr.hpp"

namespace hbs {

// tau = 0 resolves to the machine default eps_mach^(-1/3) ~ 1.7e5 when the
// system is prepared; mu > 0 adds Tikhonov rows on the overdetermined path.
struct SolverConfig {
  double eps = 1e-9;
  double tau = 0.0;
  double mu = 0.0;
  int max_iter = 8;               // correction passes allowed after the initial solve
  double constraint_tol = 1e-12;  // on |w| relative to |g| + |x|
  int64_t leaf_capacity = 64;
  bool use_proxy = true;
  bool parallel = true;
  uint64_t seed = 0;  // carried into reports so experiment rows are reproducible
};

struct DcResult {
  std::vector<double> xbar;
  int n_iter = 0;  // correction passes taken after the initial weighted solve
  bool converged = false;  // false after max_iter is not an error, just a flag
  std::vector<double> history;  // |w| after the initial solve, then each pass
};

// Correction iteration on a fixed weighted factorization: solve, then refresh
// the unweighted residuals r and w and the multiplier estimate, repeating
// until the constraint residual is small. soft_rhs and hard_rhs are the
// unweighted right-hand sides of the two row regions.
DcResult deferred_correction(const SparseQRFactors& factors, const WeightedStack& stack,
                             std::span<const double> soft_rhs,
                             std::span<const double> hard_rhs, int max_iter,
                             double constraint_tol);

struct SolveReport {
  std::vector<double> x;
  int n_iter = 0;
  int64_t gmres_iterations = 0;  // augmented solves only; 0 on the direct path
  bool converged = false;
  std::vector<double> constraint_history;
  double fit_residual = 0.0;   // |A x - b| / |b|
  bool residual_vs_true = false;  // direct kernel summation when M N <= 1e7
  double t_compress = 0.0, t_qr = 0.0, t_solve = 0.0;
  int64_t m = 0, n = 0;
  int64_t kr = 0, kc = 0;  // final skeleton dimensions
  std::vector<int64_t> level_blocks;    // partition members per level, deepest first
  std::vector<double> level_skeletons;  // mean retained skeleton per level
  uint64_t seed = 0;

  std::string to_json() const;
};

// Compressed, embedded, and factored system kept for repeated right-hand
// sides. The heap-held pieces keep their addresses across moves, so the
// stack's internal pointers stay valid.
struct PreparedSystem {
  std::unique_ptr<CompressedMatrix> cm;
  std::unique_ptr<Embedding> emb;
  WeightedStack stack;
  SparseQRFactors factors;
  StackVariant variant = StackVariant::overdetermined;
  SolverConfig cfg;  // tau resolved
  double t_compress = 0.0, t_qr = 0.0;
  std::unique_ptr<std::atomic<int64_t>> pinv_count;  // pseudoinverse applications

  int64_t rows() const { return emb->m; }
  int64_t cols() const { return emb->n; }
};

PreparedSystem prepare_overdetermined(const KernelSpec& kernel, const PointSet& targets,
                                      const PointSet& sources, const SolverConfig& cfg);
PreparedSystem prepare_underdetermined(const KernelSpec& kernel, const PointSet& targets,
                                       const PointSet& sources, const SolverConfig& cfg);

// Solution phase only: the correction iteration through the stored factors.
// pseudoinverse_solve keeps the embedded unknowns and the iteration record;
// pseudoinverse_apply extracts the solution in the original column order.
DcResult pseudoinverse_solve(const PreparedSystem& ps, std::span<const double> b);
std::vector<double> pseudoinverse_apply(const PreparedSystem& ps, std::span<const double> b);

// Applies (A^T A + mu^2 I)^{-1} through the stored factors: scatter onto the
// x slots, transposed least-squares map, soft-row mask, least-squares map,
// extract. Overdetermined and Tikhonov forms only. The result carries the
// weighting bias of order tau^{-2}: good enough to precondition with, not an
// exact inverse.
std::vector<double> normal_inverse_apply(const PreparedSystem& ps, std::span<const double> v);

SolveReport solve_overdetermined(const KernelSpec& kernel, const PointSet& targets,
                                 const PointSet& sources, std::span<const double> b,
                                 const SolverConfig& cfg);
SolveReport solve_underdetermined(const KernelSpec& kernel, const PointSet& targets,
                                  const PointSet& sources, std::span<const double> b,
                                  const SolverConfig& cfg);

}  // namespace hbs
