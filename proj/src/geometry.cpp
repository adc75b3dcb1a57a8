#include "hbs/geometry.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace hbs {

void PointSet::validate() const {
  if (dim < 1 || dim > 3) throw error("PointSet: dim must be 1, 2, or 3");
  if (coords.size() % static_cast<size_t>(dim) != 0)
    throw error("PointSet: coords length not divisible by dim");
  const int64_t n = size();
  if (!normals.empty()) {
    if (normals.size() != coords.size()) throw error("PointSet: normals length mismatch");
    for (int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int d = 0; d < dim; ++d) s += normal(i)[d] * normal(i)[d];
      if (std::fabs(std::sqrt(s) - 1.0) > 1e-12) throw error("PointSet: non-unit normal");
    }
  }
  if (!weights.empty() && weights.size() != static_cast<size_t>(n))
    throw error("PointSet: weights length mismatch");
}

PointSet make_ellipse_boundary(int64_t n) {
  if (n < 1) throw error("make_ellipse_boundary: n must be >= 1");
  PointSet ps;
  ps.dim = 2;
  ps.coords.resize(static_cast<size_t>(2 * n));
  ps.normals.resize(static_cast<size_t>(2 * n));
  ps.weights.resize(static_cast<size_t>(n));
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i) {
    const double t = h * static_cast<double>(i);
    const double ct = std::cos(t), st = std::sin(t);
    ps.coords[static_cast<size_t>(2 * i)] = 2.0 * ct;
    ps.coords[static_cast<size_t>(2 * i + 1)] = st;
    // speed |gamma'| = sqrt(4 sin^2 + cos^2); outward normal = (y', -x')/speed
    const double speed = std::sqrt(4.0 * st * st + ct * ct);
    ps.normals[static_cast<size_t>(2 * i)] = ct / speed;
    ps.normals[static_cast<size_t>(2 * i + 1)] = 2.0 * st / speed;
    ps.weights[static_cast<size_t>(i)] = h * speed;
  }
  return ps;
}

PointSet make_unit_grid(int64_t n) {
  const int64_t m = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (m * m != n || n < 1) throw error("make_unit_grid: n must be a positive perfect square");
  PointSet ps;
  ps.dim = 2;
  ps.coords.reserve(static_cast<size_t>(2 * n));
  for (int64_t iy = 0; iy < m; ++iy)
    for (int64_t ix = 0; ix < m; ++ix) {
      const double den = m > 1 ? static_cast<double>(m - 1) : 1.0;
      ps.coords.push_back(m > 1 ? static_cast<double>(ix) / den : 0.5);
      ps.coords.push_back(m > 1 ? static_cast<double>(iy) / den : 0.5);
    }
  return ps;
}

PointSet make_uniform_random_square(int64_t n, uint64_t seed) {
  if (n < 1) throw error("make_uniform_random_square: n must be >= 1");
  PointSet ps;
  ps.dim = 2;
  ps.coords.resize(static_cast<size_t>(2 * n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (double& c : ps.coords) c = dist(rng);
  return ps;
}

PointSet make_circle(int64_t n, double radius) {
  if (n < 1) throw error("make_circle: n must be >= 1");
  if (radius <= 0.0) throw error("make_circle: radius must be positive");
  PointSet ps;
  ps.dim = 2;
  ps.coords.resize(static_cast<size_t>(2 * n));
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i) {
    ps.coords[static_cast<size_t>(2 * i)] = radius * std::cos(h * static_cast<double>(i));
    ps.coords[static_cast<size_t>(2 * i + 1)] = radius * std::sin(h * static_cast<double>(i));
  }
  return ps;
}

namespace {

std::array<double, 3> normalized(std::array<double, 3> v) {
  const double s = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / s, v[1] / s, v[2] / s};
}

}  // namespace

PointSet make_sphere_triangulation(int64_t nfreq) {
  if (nfreq < 1) throw error("make_sphere_triangulation: nfreq must be >= 1");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<std::array<double, 3>, 12> verts = {{
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  }};
  const std::array<std::array<int, 3>, 20> faces = {{
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  }};

  PointSet ps;
  ps.dim = 3;
  const int64_t nf = nfreq;
  ps.coords.reserve(static_cast<size_t>(3 * 20 * nf * nf));
  ps.normals.reserve(static_cast<size_t>(3 * 20 * nf * nf));
  ps.weights.reserve(static_cast<size_t>(20 * nf * nf));

  auto emit = [&](const std::array<double, 3>& a, const std::array<double, 3>& b,
                  const std::array<double, 3>& c) {
    const std::array<double, 3> cen = {(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0,
                                       (a[2] + b[2] + c[2]) / 3.0};
    const std::array<double, 3> u = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const std::array<double, 3> v = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    std::array<double, 3> cr = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                                u[0] * v[1] - u[1] * v[0]};
    const double len = std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]);
    // orient outward: flip when the flat normal points against the centroid ray
    double sgn = (cr[0] * cen[0] + cr[1] * cen[1] + cr[2] * cen[2]) < 0.0 ? -1.0 : 1.0;
    for (int d = 0; d < 3; ++d) {
      ps.coords.push_back(cen[d]);
      ps.normals.push_back(sgn * cr[d] / len);
    }
    ps.weights.push_back(0.5 * len);
  };

  for (const auto& f : faces) {
    const auto v0 = verts[static_cast<size_t>(f[0])];
    const auto v1 = verts[static_cast<size_t>(f[1])];
    const auto v2 = verts[static_cast<size_t>(f[2])];
    // barycentric lattice point (i, j) on this face, projected to the sphere
    auto lattice = [&](int64_t i, int64_t j) {
      const double s = static_cast<double>(i) / static_cast<double>(nf);
      const double r = static_cast<double>(j) / static_cast<double>(nf);
      return normalized({v0[0] + s * (v1[0] - v0[0]) + r * (v2[0] - v0[0]),
                         v0[1] + s * (v1[1] - v0[1]) + r * (v2[1] - v0[1]),
                         v0[2] + s * (v1[2] - v0[2]) + r * (v2[2] - v0[2])});
    };
    for (int64_t i = 0; i < nf; ++i)
      for (int64_t j = 0; i + j < nf; ++j) {
        emit(lattice(i, j), lattice(i + 1, j), lattice(i, j + 1));
        if (i + j < nf - 1) emit(lattice(i + 1, j), lattice(i + 1, j + 1), lattice(i, j + 1));
      }
  }
  return ps;
}

PointSet make_proxy_surface(int dim, const double* center, double radius, int64_t n) {
  if (dim != 2 && dim != 3) throw error("make_proxy_surface: dim must be 2 or 3");
  if (n < 1 || radius <= 0.0) throw error("make_proxy_surface: bad radius or count");
  PointSet ps;
  ps.dim = dim;
  ps.coords.resize(static_cast<size_t>(dim * n));
  if (dim == 2) {
    const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      ps.coords[static_cast<size_t>(2 * i)] = center[0] + radius * std::cos(h * i);
      ps.coords[static_cast<size_t>(2 * i + 1)] = center[1] + radius * std::sin(h * i);
    }
  } else {
    // Fibonacci spiral: near-uniform coverage without poles clustering.
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int64_t i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = ga * static_cast<double>(i);
      ps.coords[static_cast<size_t>(3 * i)] = center[0] + radius * rho * std::cos(phi);
      ps.coords[static_cast<size_t>(3 * i + 1)] = center[1] + radius * rho * std::sin(phi);
      ps.coords[static_cast<size_t>(3 * i + 2)] = center[2] + radius * z;
    }
  }
  return ps;
}

PointSet load_pointset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("load_pointset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw error("load_pointset_csv: empty file");
  int dim = 0;
  {
    std::istringstream hs(line);
    std::string tag;
    if (!std::getline(hs, tag, ',') || tag != "dim" || !(hs >> dim))
      throw error("load_pointset_csv: expected 'dim,<d>' header");
  }
  PointSet ps;
  ps.dim = dim;
  bool first_row = true;
  bool with_normals = false, with_weights = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string cell;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (first_row) {
      const size_t d = static_cast<size_t>(dim);
      if (dim >= 2 && vals.size() >= 2 * d) with_normals = true;
      with_weights = vals.size() == d + 1 || vals.size() == 2 * d + 1;
      first_row = false;
    }
    size_t pos = 0;
    for (int d = 0; d < dim; ++d) ps.coords.push_back(vals.at(pos++));
    if (with_normals)
      for (int d = 0; d < dim; ++d) ps.normals.push_back(vals.at(pos++));
    if (with_weights) ps.weights.push_back(vals.at(pos++));
    if (pos != vals.size()) throw error("load_pointset_csv: inconsistent column count");
  }
  ps.validate();
  return ps;
}

void save_pointset_csv(const PointSet& ps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("save_pointset_csv: cannot open " + path);
  out.precision(17);
  out << "dim," << ps.dim << "\n";
  const int64_t n = ps.size();
  for (int64_t i = 0; i < n; ++i) {
    for (int d = 0; d < ps.dim; ++d) out << (d ? "," : "") << ps.point(i)[d];
    if (ps.has_normals())
      for (int d = 0; d < ps.dim; ++d) out << "," << ps.normal(i)[d];
    if (ps.has_weights()) out << "," << ps.weights[static_cast<size_t>(i)];
    out << "\n";
  }
}

}  // namespace hbs
