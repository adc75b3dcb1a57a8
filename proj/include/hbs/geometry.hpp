#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbs/dense.hpp"

namespace hbs {

// A set of points in 1, 2, or 3 dimensions. Coordinates are stored point-major:
// point i occupies coords[i*dim .. i*dim+dim). Normals, when present, use the
// same layout and must be unit vectors; weights carry one scalar per point
// (quadrature elements or source strengths, depending on the experiment).
struct PointSet {
  int dim = 2;
  std::vector<double> coords;
  std::vector<double> normals;
  std::vector<double> weights;

  int64_t size() const { return dim > 0 ? static_cast<int64_t>(coords.size()) / dim : 0; }
  const double* point(int64_t i) const { return coords.data() + i * dim; }
  double* point(int64_t i) { return coords.data() + i * dim; }
  const double* normal(int64_t i) const { return normals.data() + i * dim; }
  bool has_normals() const { return !normals.empty(); }
  bool has_weights() const { return !weights.empty(); }

  // Checks layout divisibility and unit normals (to 1e-12); throws on failure.
  void validate() const;
};

// 2:1 ellipse x^2/4 + y^2 = 1 at uniform parameter spacing t_i = 2*pi*i/n,
// with outward unit normals and trapezoidal arc-length weights.
PointSet make_ellipse_boundary(int64_t n);

// Tensor-product grid on [0,1]^2 including the endpoints; n must be a perfect
// square (m x m points). No normals or weights.
PointSet make_unit_grid(int64_t n);

// n points drawn uniformly from [0,1]^2 with the given seed.
PointSet make_uniform_random_square(int64_t n, uint64_t seed);

// n equispaced points on the circle of the given radius centered at the origin.
PointSet make_circle(int64_t n, double radius);

// Unit sphere triangulated by icosahedral refinement: each of the 20 faces is
// split into nfreq^2 flat triangles whose vertices lie on the sphere. Points
// are the flat-triangle centroids; normals are the flat-face outward normals;
// weights are the flat areas (one-point centroid quadrature). 20*nfreq^2 points.
PointSet make_sphere_triangulation(int64_t nfreq);

// Points on a circle (dim 2) or Fibonacci-spiral sphere (dim 3) of the given
// center and radius; used as proxy surfaces during compression.
PointSet make_proxy_surface(int dim, const double* center, double radius, int64_t n);

// CSV round trip. Format: a "dim,<d>" header line, then one point per row with
// columns (coords..., normals..., weight), normals and weight present only when
// the set carries them. The column count per row identifies which optional
// fields are present; for dim = 1 a two-column row is read as coords + weight.
PointSet load_pointset_csv(const std::string& path);
void save_pointset_csv(const PointSet& ps, const std::string& path);

}  // namespace hbs
