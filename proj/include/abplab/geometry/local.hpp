#pragma once

// Pointwise differential geometry of an immersion X : chart -> R^N given its
// 2-jet: induced metric, Christoffel symbols, second fundamental form, mean
// curvature vector, and orthonormal tangent/normal frames.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

#include "abplab/error.hpp"

namespace abplab {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Chart coordinates; the second slot is unused for curves.
using ChartPoint = std::array<double, 2>;

struct ImmersionJet {
  Vector position;            // X
  Matrix first;               // N x n, column i = dX/dxi_i
  std::vector<Vector> second; // n*n entries, d2X/dxi_i dxi_j at i*n + j

  int dim() const { return static_cast<int>(first.cols()); }
  const Vector& d2(int i, int j) const { return second[static_cast<std::size_t>(i * dim() + j)]; }
};

/// Everything the curvature and transport code needs at one point.
struct LocalGeometry {
  int n = 0;
  Vector position;
  Matrix jacobian;          // N x n, dX/dxi
  Matrix metric;            // g_ij
  Matrix metric_inv;        // g^ij
  double sqrt_det = 0.0;
  Matrix tangent;           // N x n orthonormal, tangent = jacobian * to_orthonormal
  Matrix to_orthonormal;    // n x n
  Matrix tangent_projector; // N x N
  std::vector<Vector> sff;  // n*n ambient normal vectors, sff(d_i, d_j)
  std::vector<Matrix> christoffel; // christoffel[k](i, j) = Gamma^k_ij
  Vector mean_curvature;    // tr_g(sff) / n

  const Vector& sff_at(int i, int j) const { return sff[static_cast<std::size_t>(i * n + j)]; }

  /// <sff, v> as an n x n matrix in chart components.
  Matrix sff_contract(const Vector& v) const {
    Matrix out(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = sff_at(i, j).dot(v);
    return out;
  }

  /// Chart-component bilinear form expressed in the orthonormal tangent frame.
  Matrix to_frame(const Matrix& bilinear) const {
    return to_orthonormal.transpose() * bilinear * to_orthonormal;
  }

  /// Ambient gradient from chart partial derivatives.
  Vector gradient(const Vector& partials) const { return jacobian * (metric_inv * partials); }
};

inline LocalGeometry local_geometry(const ImmersionJet& jet) {
  LocalGeometry g;
  const int n = jet.dim();
  const Index ambient = jet.position.size();
  g.n = n;
  g.position = jet.position;
  g.jacobian = jet.first;
  g.metric = jet.first.transpose() * jet.first;
  const double det = g.metric.determinant();
  const double scale = g.metric.trace() / n;
  if (!(det > 1e-14 * std::pow(scale, n))) {
    throw Error(ErrorKind::NonImmersion, "induced metric determinant is not positive");
  }
  g.metric_inv = g.metric.inverse();
  g.sqrt_det = std::sqrt(det);

  // Gram-Schmidt on the coordinate vectors: tangent = jacobian * C with C upper
  // triangular, so C^T g C = I.
  Eigen::LLT<Matrix> llt(g.metric);
  const Matrix upper = llt.matrixU();
  g.to_orthonormal = upper.inverse();
  g.tangent = jet.first * g.to_orthonormal;
  g.tangent_projector = g.tangent * g.tangent.transpose();

  const Matrix normal_projector = Matrix::Identity(ambient, ambient) - g.tangent_projector;
  g.sff.resize(static_cast<std::size_t>(n * n));
  g.christoffel.assign(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector& xij = jet.d2(i, j);
      g.sff[static_cast<std::size_t>(i * n + j)] = normal_projector * xij;
      const Vector lowered = jet.first.transpose() * xij;  // <X_l, X_ij>
      const Vector raised = g.metric_inv * lowered;
      for (int k = 0; k < n; ++k) g.christoffel[static_cast<std::size_t>(k)](i, j) = raised(k);
    }
  }
  g.mean_curvature = Vector::Zero(ambient);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.mean_curvature += g.metric_inv(i, j) * g.sff_at(i, j);
  g.mean_curvature /= n;
  return g;
}

/// Orthonormal basis of the normal space. The first column is H/|H| when
/// |H| > 1e-8; the rest come from Gram-Schmidt over the ambient axes in order.
/// `seeds` records which ambient axes were used so the same frame can be
/// re-evaluated smoothly at nearby points; pass a filled vector to reuse it.
inline Matrix normal_basis(const Matrix& tangent, const Vector& mean_curvature,
                           std::vector<int>* seeds = nullptr) {
  const Index ambient = tangent.rows();
  const Index n = tangent.cols();
  const Index m = ambient - n;
  Matrix basis(ambient, m);
  Index filled = 0;

  auto orthogonalize = [&](Vector v) {
    v -= tangent * (tangent.transpose() * v);
    for (Index k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    // second pass for stability
    v -= tangent * (tangent.transpose() * v);
    for (Index k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    return v;
  };

  const double h_norm = mean_curvature.norm();
  if (h_norm > 1e-8 && m > 0) {
    Vector v = orthogonalize(mean_curvature / h_norm);
    basis.col(filled++) = v.normalized();
  }

  const bool reuse = seeds != nullptr && !seeds->empty();
  if (reuse) {
    for (int axis : *seeds) {
      if (filled == m) break;
      Vector v = orthogonalize(Vector::Unit(ambient, axis));
      basis.col(filled++) = v.normalized();
    }
  } else {
    if (seeds) seeds->clear();
    // Greedy: the axis with the largest residual wins; ties go to the lower index.
    while (filled < m) {
      Index best = -1;
      double best_norm = 0.0;
      Vector best_v;
      for (Index axis = 0; axis < ambient; ++axis) {
        Vector v = orthogonalize(Vector::Unit(ambient, axis));
        if (v.norm() > best_norm + 1e-12) {
          best_norm = v.norm();
          best = axis;
          best_v = std::move(v);
        }
      }
      if (best < 0 || best_norm < 1e-6) break;
      basis.col(filled++) = best_v / best_norm;
      if (seeds) seeds->push_back(static_cast<int>(best));
    }
  }
  if (filled != m) throw Error(ErrorKind::NonImmersion, "could not complete the normal frame");
  return basis;
}

}  // namespace abplab
