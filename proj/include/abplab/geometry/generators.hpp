#pragma once

// Built-in test geometries and linear transforms of existing ones.

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include "abplab/geometry/geometry.hpp"

namespace abplab {

namespace detail {

inline ImmersionJet circle_jet(const ChartPoint& xi) {
  const double c = std::cos(xi[0]), s = std::sin(xi[0]);
  ImmersionJet j;
  j.position = Vector(2);
  j.position << c, s;
  j.first = Matrix(2, 1);
  j.first << -s, c;
  j.second = {Vector(2)};
  j.second[0] << -c, -s;
  return j;
}

// (theta, phi) -> (sin phi cos theta, sin phi sin theta, cos phi)
inline ImmersionJet latlong_jet(const ChartPoint& xi) {
  const double ct = std::cos(xi[0]), st = std::sin(xi[0]);
  const double cp = std::cos(xi[1]), sp = std::sin(xi[1]);
  ImmersionJet j;
  j.position = Vector(3);
  j.position << sp * ct, sp * st, cp;
  j.first = Matrix(3, 2);
  j.first << -sp * st, cp * ct,
              sp * ct, cp * st,
              0.0, -sp;
  Vector tt(3), tp(3), pp(3);
  tt << -sp * ct, -sp * st, 0.0;
  tp << -cp * st, cp * ct, 0.0;
  pp << -sp * ct, -sp * st, -cp;
  j.second = {tt, tp, tp, pp};
  return j;
}

inline ImmersionJet clifford_jet(const ChartPoint& xi) {
  const double r = 1.0 / std::sqrt(2.0);
  const double ct = std::cos(xi[0]), st = std::sin(xi[0]);
  const double cp = std::cos(xi[1]), sp = std::sin(xi[1]);
  ImmersionJet j;
  j.position = Vector(4);
  j.position << r * ct, r * st, r * cp, r * sp;
  j.first = Matrix(4, 2);
  j.first << -r * st, 0.0,
              r * ct, 0.0,
              0.0, -r * sp,
              0.0, r * cp;
  Vector tt(4), pp(4);
  tt << -r * ct, -r * st, 0.0, 0.0;
  pp << 0.0, 0.0, -r * cp, -r * sp;
  j.second = {tt, Vector::Zero(4), Vector::Zero(4), pp};
  return j;
}

inline int subdivision_count(int refinement, int base) {
  if (refinement < 0) throw Error(ErrorKind::InvalidArgument, "refinement must be >= 0");
  return base << refinement;
}

}  // namespace detail

/// Unit circle as a periodic chart with 16 * 2^refinement nodes.
inline Geometry make_circle(int nodes) {
  if (nodes < 8) throw Error(ErrorKind::InvalidArgument, "circle needs at least 8 nodes");
  return Geometry(ChartGeometry(1, {ChartAxis::periodic_axis(nodes), ChartAxis{}}, detail::circle_jet), -1,
                  "circle");
}

/// Icosahedron subdivided `level` times with every vertex projected to S^2.
inline Geometry make_icosphere(int level) {
  if (level < 0) throw Error(ErrorKind::InvalidArgument, "refinement must be >= 0");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized());
      const Index id = static_cast<Index>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const Index a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  Matrix positions(3, static_cast<Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) positions.col(static_cast<Index>(i)) = verts[i];
  return Geometry(TriangleMeshGeometry(std::move(positions), std::move(faces)), level, "icosphere");
}

/// Unit sphere S^n in R^{n+1}: a 16 * 2^refinement node circle for n = 1, an
/// icosphere for n = 2.
inline Geometry make_sphere(int n, int refinement) {
  if (n == 1) {
    Geometry g = make_circle(detail::subdivision_count(refinement, 16));
    return Geometry(g.chart(), refinement, "circle");
  }
  if (n == 2) return make_icosphere(refinement);
  throw Error(ErrorKind::UnsupportedDimension, "make_sphere supports n = 1 or 2");
}

/// Chart variant of S^n: the circle for n = 1, a cell-centred latitude-longitude
/// grid (8 * 2^r longitudes, 4 * 2^r colatitudes) for n = 2.
inline Geometry make_sphere_chart(int n, int refinement) {
  if (n == 1) return make_sphere(1, refinement);
  if (n != 2) throw Error(ErrorKind::UnsupportedDimension, "make_sphere_chart supports n = 1 or 2");
  const int nt = detail::subdivision_count(refinement, 8);
  const int np = detail::subdivision_count(refinement, 4);
  return Geometry(ChartGeometry(2, {ChartAxis::periodic_axis(nt), ChartAxis::open_axis(np, 0.0, std::numbers::pi)},
                                detail::latlong_jet),
                  refinement, "sphere_chart");
}

/// (theta, phi) -> (cos theta, sin theta, cos phi, sin phi) / sqrt(2).
inline Geometry make_clifford_torus(int grid) {
  if (grid < 8) throw Error(ErrorKind::InvalidArgument, "Clifford torus grid needs at least 8 samples per axis");
  return Geometry(ChartGeometry(2, {ChartAxis::periodic_axis(grid), ChartAxis::periodic_axis(grid)},
                                detail::clifford_jet),
                  -1, "clifford");
}

/// Applies p -> linear * p to positions and derivatives. Analytic charts stay
/// analytic; meshes are rebuilt from the mapped vertices.
inline Geometry apply_linear_map(const Geometry& g, const Matrix& linear, const std::string& label = "") {
  if (linear.cols() != g.ambient_dim()) throw Error(ErrorKind::InvalidArgument, "linear map has wrong width");
  const std::string name = label.empty() ? g.label() : label;
  if (g.is_mesh()) {
    const auto& m = g.mesh();
    return Geometry(TriangleMeshGeometry(linear * m.vertices(), m.faces()), g.refinement(), name);
  }
  const ChartGeometry& c = g.chart();
  std::array<ChartAxis, 2> axes{c.axis(0), c.axis(1)};
  if (c.has_analytic_immersion()) {
    ImmersionFn inner = c.immersion();
    ImmersionFn mapped = [inner, linear](const ChartPoint& xi) {
      ImmersionJet j = inner(xi);
      j.position = linear * j.position;
      j.first = linear * j.first;
      for (auto& v : j.second) v = linear * v;
      return j;
    };
    return Geometry(ChartGeometry(c.dim(), axes, std::move(mapped)), g.refinement(), name);
  }
  return Geometry(ChartGeometry(c.dim(), axes, Matrix(linear * c.positions())), g.refinement(), name);
}

inline Geometry scaled(const Geometry& g, double factor) {
  return apply_linear_map(g, factor * Matrix::Identity(g.ambient_dim(), g.ambient_dim()));
}

/// Appends `extra` zero coordinates: Sigma in R^N viewed inside R^{N+extra}.
inline Geometry embedded(const Geometry& g, int extra) {
  if (extra < 0) throw Error(ErrorKind::InvalidArgument, "cannot embed into fewer dimensions");
  Matrix lift = Matrix::Zero(g.ambient_dim() + extra, g.ambient_dim());
  lift.topRows(g.ambient_dim()).setIdentity();
  return apply_linear_map(g, lift);
}

/// Two disjoint unit icospheres, centres 3 apart along the first axis.
inline Geometry make_two_spheres(int level) {
  const Geometry one = make_icosphere(level);
  const TriangleMeshGeometry& m = one.mesh();
  const Index nv = m.num_vertices();
  Matrix verts(3, 2 * nv);
  verts.leftCols(nv) = m.vertices();
  verts.rightCols(nv) = m.vertices();
  verts.rightCols(nv).row(0).array() += 3.0;
  std::vector<Face> faces = m.faces();
  for (const Face& f : m.faces()) faces.push_back({f[0] + nv, f[1] + nv, f[2] + nv});
  return Geometry(TriangleMeshGeometry(std::move(verts), std::move(faces)), level, "two_spheres");
}

}  // namespace abplab
