#include "hbs/kernels.hpp"

#include <cmath>
#include <numbers>

namespace hbs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFourPi = 4.0 * std::numbers::pi;

}  // namespace

void KernelSpec::validate() const {
  switch (family) {
    case KernelFamily::yukawa2d:
    case KernelFamily::yukawa3d:
      if (!(k > 0.0)) throw error("KernelSpec: yukawa requires k > 0");
      break;
    case KernelFamily::multiquadric:
    case KernelFamily::inverse_multiquadric:
      if (!(c > 0.0)) throw error("KernelSpec: multiquadric requires c > 0");
      break;
    case KernelFamily::polyharmonic:
      if (n < 1) throw error("KernelSpec: polyharmonic requires n >= 1");
      break;
    default:
      break;
  }
}

int KernelSpec::dim() const {
  switch (family) {
    case KernelFamily::laplace3d:
    case KernelFamily::yukawa3d:
    case KernelFamily::laplace3d_double_layer:
      return 3;
    default:
      return 2;
  }
}

bool KernelSpec::needs_normals() const {
  return family == KernelFamily::laplace2d_double_layer ||
         family == KernelFamily::laplace3d_double_layer;
}

bool KernelSpec::singular_at_zero() const {
  switch (family) {
    case KernelFamily::thin_plate_spline:
    case KernelFamily::multiquadric:
    case KernelFamily::inverse_multiquadric:
    case KernelFamily::polyharmonic:
      return false;
    default:
      return true;
  }
}

bool KernelSpec::rbf_like() const {
  switch (family) {
    case KernelFamily::thin_plate_spline:
    case KernelFamily::multiquadric:
    case KernelFamily::inverse_multiquadric:
    case KernelFamily::polyharmonic:
      return true;
    default:
      return false;
  }
}

std::string family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::laplace2d_log: return "laplace2d_log";
    case KernelFamily::laplace3d: return "laplace3d";
    case KernelFamily::yukawa2d: return "yukawa2d";
    case KernelFamily::yukawa3d: return "yukawa3d";
    case KernelFamily::polyharmonic: return "polyharmonic";
    case KernelFamily::thin_plate_spline: return "thin_plate_spline";
    case KernelFamily::multiquadric: return "multiquadric";
    case KernelFamily::inverse_multiquadric: return "inverse_multiquadric";
    case KernelFamily::laplace2d_double_layer: return "laplace2d_double_layer";
    case KernelFamily::laplace3d_double_layer: return "laplace3d_double_layer";
  }
  return "unknown";
}

double eval_kernel(const KernelSpec& spec, const double* x, const double* y, const double* ny,
                   int dim, bool same_point) {
  double r2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double dd = x[d] - y[d];
    r2 += dd * dd;
  }
  const double r = std::sqrt(r2);

  switch (spec.family) {
    case KernelFamily::laplace2d_double_layer:
    case KernelFamily::laplace3d_double_layer: {
      // The -1/2 comes from the jump relation of the double-layer potential;
      // the smooth curvature limit at coincident nodes is taken as 0.
      if (same_point) return -0.5;
      if (r == 0.0) throw error("eval_kernel: singular kernel at r = 0");
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += (x[d] - y[d]) * ny[d];
      return spec.family == KernelFamily::laplace2d_double_layer ? dot / (kTwoPi * r2)
                                                                 : dot / (kFourPi * r2 * r);
    }
    case KernelFamily::laplace2d_log:
      if (r == 0.0) throw error("eval_kernel: singular kernel at r = 0");
      return -std::log(r) / kTwoPi;
    case KernelFamily::laplace3d:
      if (r == 0.0) throw error("eval_kernel: singular kernel at r = 0");
      return 1.0 / (kFourPi * r);
    case KernelFamily::yukawa2d:
      if (r == 0.0) throw error("eval_kernel: singular kernel at r = 0");
      return std::cyl_bessel_k(0.0, spec.k * r) / kTwoPi;
    case KernelFamily::yukawa3d:
      if (r == 0.0) throw error("eval_kernel: singular kernel at r = 0");
      return std::exp(-spec.k * r) / (kFourPi * r);
    case KernelFamily::polyharmonic:
      if (dim == 2) return r == 0.0 ? 0.0 : std::pow(r2, spec.n) * std::log(r);
      return std::pow(r, 2 * spec.n - 1);
    case KernelFamily::thin_plate_spline:
      return r == 0.0 ? 0.0 : r2 * std::log(r);
    case KernelFamily::multiquadric:
      return std::sqrt(r2 + spec.c * spec.c);
    case KernelFamily::inverse_multiquadric:
      return 1.0 / std::sqrt(r2 + spec.c * spec.c);
  }
  throw error("eval_kernel: unknown family");
}

DenseMatrix eval_block(const KernelSpec& spec, const PointSet& targets,
                       std::span<const int64_t> target_idx, const PointSet& sources,
                       std::span<const int64_t> source_idx) {
  spec.validate();
  const int dim = targets.dim;
  if (sources.dim != dim) throw error("eval_block: dimension mismatch");
  if (spec.needs_normals() && !sources.has_normals())
    throw error("eval_block: double-layer kernel requires source normals");
  const bool same_set = &targets == &sources;
  const bool weighted = sources.has_weights();

  DenseMatrix a(static_cast<int64_t>(target_idx.size()), static_cast<int64_t>(source_idx.size()));
  for (size_t j = 0; j < source_idx.size(); ++j) {
    const int64_t sj = source_idx[j];
    if (sj < 0 || sj >= sources.size()) throw error("eval_block: source index out of range");
    const double* y = sources.point(sj);
    const double* ny = sources.has_normals() ? sources.normal(sj) : nullptr;
    const double w = weighted ? sources.weights[static_cast<size_t>(sj)] : 1.0;
    for (size_t i = 0; i < target_idx.size(); ++i) {
      const int64_t ti = target_idx[i];
      if (ti < 0 || ti >= targets.size()) throw error("eval_block: target index out of range");
      const bool same_point = same_set && ti == sj;
      double v = eval_kernel(spec, targets.point(ti), y, ny, dim, same_point);
      // the double-layer identity jump term is not a quadrature sample, so it
      // skips the weight; every other diagonal is an ordinary kernel value
      const bool unweighted = same_point && spec.needs_normals();
      a(static_cast<int64_t>(i), static_cast<int64_t>(j)) = unweighted ? v : v * w;
    }
  }
  return a;
}

}  // namespace hbs
