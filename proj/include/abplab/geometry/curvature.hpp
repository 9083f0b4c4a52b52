#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "abplab/geometry/geometry.hpp"

namespace abplab {

/// Per-sample extrinsic curvature. Second fundamental form vectors are stored
/// in the orthonormal tangent frame: sff(s)[i * n + j] = sff(e_i, e_j).
struct CurvatureData {
  std::uint64_t geometry_id = 0;
  int n = 0;
  int ambient = 0;
  std::vector<Matrix> tangent_basis;  // N x n
  std::vector<Matrix> normal_basis;   // N x m, first column along H when H != 0
  std::vector<std::vector<Vector>> sff;
  Matrix mean_curvature;              // N x samples
  Vector umbilicity_defect;

  Index num_samples() const { return mean_curvature.cols(); }
  int codim() const { return ambient - n; }

  /// h^alpha_ij with respect to normal_basis column alpha.
  double component(Index s, int alpha, int i, int j) const {
    return sff[static_cast<std::size_t>(s)][static_cast<std::size_t>(i * n + j)].dot(
        normal_basis[static_cast<std::size_t>(s)].col(alpha));
  }

  double max_tangential_mean_curvature() const {
    double worst = 0.0;
    for (Index s = 0; s < num_samples(); ++s) {
      const Matrix& t = tangent_basis[static_cast<std::size_t>(s)];
      worst = std::max(worst, (t.transpose() * mean_curvature.col(s)).norm());
    }
    return worst;
  }
};

namespace detail {

inline void finish_sample(CurvatureData& c, Index s, const Matrix& tangent, std::vector<Vector> sff) {
  const int n = c.n;
  Vector h = Vector::Zero(c.ambient);
  for (int i = 0; i < n; ++i) h += sff[static_cast<std::size_t>(i * n + i)];
  h /= n;
  const Matrix normals = normal_basis(tangent, h);
  double defect = 0.0;
  for (Index a = 0; a < normals.cols(); ++a) {
    const double ha = h.dot(normals.col(a));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double v = sff[static_cast<std::size_t>(i * n + j)].dot(normals.col(a)) - (i == j ? ha : 0.0);
        defect = std::max(defect, std::abs(v));
      }
  }
  c.tangent_basis[static_cast<std::size_t>(s)] = tangent;
  c.normal_basis[static_cast<std::size_t>(s)] = normals;
  c.sff[static_cast<std::size_t>(s)] = std::move(sff);
  c.mean_curvature.col(s) = h;
  c.umbilicity_defect(s) = defect;
}

}  // namespace detail

/// Charts: analytic (or grid-differenced) second derivatives projected to the
/// normal space. Meshes: the 2-ring quadratic fits.
inline CurvatureData compute_curvature(const Geometry& g) {
  CurvatureData c;
  c.geometry_id = g.id();
  c.n = g.dim();
  c.ambient = g.ambient_dim();
  const Index count = g.num_samples();
  c.tangent_basis.resize(static_cast<std::size_t>(count));
  c.normal_basis.resize(static_cast<std::size_t>(count));
  c.sff.resize(static_cast<std::size_t>(count));
  c.mean_curvature.resize(c.ambient, count);
  c.umbilicity_defect.resize(count);
  const int n = c.n;

  if (g.is_chart()) {
    const ChartGeometry& chart = g.chart();
    for (Index s = 0; s < count; ++s) {
      const LocalGeometry& loc = chart.node_geometry(s);
      std::vector<Vector> sff(static_cast<std::size_t>(n * n), Vector::Zero(c.ambient));
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              sff[static_cast<std::size_t>(a * n + b)] +=
                  loc.to_orthonormal(i, a) * loc.to_orthonormal(j, b) * loc.sff_at(i, j);
      detail::finish_sample(c, s, loc.tangent, std::move(sff));
    }
  } else {
    const TriangleMeshGeometry& mesh = g.mesh();
    for (Index s = 0; s < count; ++s) {
      const QuadraticFit& fit = mesh.fits()[static_cast<std::size_t>(s)];
      std::vector<Vector> sff = {fit.hessian[0], fit.hessian[1], fit.hessian[1], fit.hessian[2]};
      detail::finish_sample(c, s, fit.tangent, std::move(sff));
    }
  }
  return c;
}

struct MeanCurvatureCheck {
  bool ok = false;
  double max_deviation = 0.0;  // max_s | |H(s)| - 1 |
};

inline MeanCurvatureCheck check_unit_mean_curvature(const CurvatureData& c, double tol) {
  MeanCurvatureCheck out;
  for (Index s = 0; s < c.num_samples(); ++s)
    out.max_deviation = std::max(out.max_deviation, std::abs(c.mean_curvature.col(s).norm() - 1.0));
  out.ok = out.max_deviation <= tol;
  return out;
}

}  // namespace abplab
