#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hbs/dense.hpp"
#include "hbs/geometry.hpp"

namespace hbs {

enum class KernelFamily {
  laplace2d_log,          // -log(r) / (2 pi)
  laplace3d,              // 1 / (4 pi r)
  yukawa2d,               // K0(k r) / (2 pi)
  yukawa3d,               // exp(-k r) / (4 pi r)
  polyharmonic,           // r^(2n) log r in 2D, r^(2n-1) in 3D
  thin_plate_spline,      // r^2 log r
  multiquadric,           // sqrt(r^2 + c^2)
  inverse_multiquadric,   // 1 / sqrt(r^2 + c^2)
  laplace2d_double_layer, // (x-y).n_y / (2 pi r^2), -1/2 on the same-set diagonal
  laplace3d_double_layer, // (x-y).n_y / (4 pi r^3), -1/2 on the same-set diagonal
};

struct KernelSpec {
  KernelFamily family = KernelFamily::laplace2d_log;
  double k = 1.0;  // yukawa decay rate
  double c = 1.0;  // multiquadric shape parameter
  int n = 1;       // polyharmonic order

  // Throws if a required parameter is missing or nonpositive.
  void validate() const;

  int dim() const;                 // ambient dimension the family lives in
  bool needs_normals() const;      // double-layer families
  bool singular_at_zero() const;   // r = 0 is a pole (vs a finite limit)
  // Smooth non-oscillatory non-Green's kernels (TPS, polyharmonic, MQ, IMQ);
  // these need volumetric proxy sampling rather than a single ring.
  bool rbf_like() const;
};

std::string family_name(KernelFamily f);

// Point evaluation. ny is the unit normal at y (used by double-layer families,
// ignored otherwise; may be null for the rest). same_point marks entries where
// target and source are the same discretization node, which selects the
// kernel-specific diagonal value instead of the r -> 0 limit.
double eval_kernel(const KernelSpec& spec, const double* x, const double* y, const double* ny,
                   int dim, bool same_point);

// Matrix block A(i, j) = kernel(targets[target_idx[i]], sources[source_idx[j]]).
// Source weights, when present, multiply the columns; the -1/2 identity term of
// the double-layer diagonal is not weighted (it is not a quadrature term).
// Same-node detection requires targets and sources to be the same object.
DenseMatrix eval_block(const KernelSpec& spec, const PointSet& targets,
                       std::span<const int64_t> target_idx, const PointSet& sources,
                       std::span<const int64_t> source_idx);

}  // namespace hbs
