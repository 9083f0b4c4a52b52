#pragma once

// Closed triangle meshes embedded in R^N, with local quadratic fits (tangent
// planes and second derivatives) and curvature-corrected vertex areas.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "abplab/error.hpp"
#include "abplab/geometry/local.hpp"

namespace abplab {

using Face = std::array<Index, 3>;

/// Graph of a vector-valued quadratic over the fitted tangent plane.
struct QuadraticFit {
  Matrix tangent;                // N x 2, orthonormal
  std::array<Vector, 3> hessian; // normal parts of d11, d12, d22
  double residual = 0.0;         // rms fit residual
};

/// Least-squares fit of w(a) = L a + 1/2 a^T Q a + (cubic and quartic terms)
/// to neighbour displacements (columns of `offsets`), re-tilting the tangent
/// plane until the linear part vanishes. Throws when the design matrix is rank
/// deficient.
inline QuadraticFit fit_local_quadratic(const Matrix& offsets, int iterations = 6) {
  const Index ambient = offsets.rows();
  const Index count = offsets.cols();
  constexpr Index unknowns = 14;
  if (count < unknowns) throw Error(ErrorKind::RankDeficientFit, "fewer than 14 neighbours");

  Eigen::SelfAdjointEigenSolver<Matrix> pca(offsets * offsets.transpose());
  Matrix tangent(ambient, 2);
  tangent.col(0) = pca.eigenvectors().col(ambient - 1);
  tangent.col(1) = pca.eigenvectors().col(ambient - 2);

  QuadraticFit fit;
  for (int iter = 0; iter < iterations; ++iter) {
    const Matrix coords = tangent.transpose() * offsets;  // 2 x K
    const Matrix normal_part = offsets - tangent * coords;
    const double scale = std::sqrt(coords.squaredNorm() / count);
    Matrix design(count, unknowns);
    for (Index k = 0; k < count; ++k) {
      const double a = coords(0, k) / scale, b = coords(1, k) / scale;
      const double a2 = a * a, b2 = b * b;
      design.row(k) << a, b, 0.5 * a2, a * b, 0.5 * b2, a2 * a, a2 * b, a * b2, b2 * b, a2 * a2, a2 * a * b,
          a2 * b2, a * b2 * b, b2 * b2;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-8);
    if (qr.rank() < unknowns) throw Error(ErrorKind::RankDeficientFit, "quadratic design matrix is singular");
    const Matrix coef = qr.solve(Matrix(normal_part.transpose()));  // 14 x N
    const Vector slope0 = coef.row(0).transpose() / scale;
    const Vector slope1 = coef.row(1).transpose() / scale;
    const double scale2 = scale * scale;
    fit.hessian = {coef.row(2).transpose() / scale2, coef.row(3).transpose() / scale2,
                   coef.row(4).transpose() / scale2};
    fit.residual = std::sqrt((design * coef - normal_part.transpose()).squaredNorm() / count);

    Matrix tilted = tangent;
    tilted.col(0) += slope0;
    tilted.col(1) += slope1;
    Eigen::HouseholderQR<Matrix> orth(tilted);
    Matrix q = orth.householderQ() * Matrix::Identity(ambient, 2);
    // keep orientation close to the previous frame
    for (int c = 0; c < 2; ++c)
      if (q.col(c).dot(tilted.col(c)) < 0) q.col(c) = -q.col(c);
    tangent = q;
    if (std::max(slope0.norm(), slope1.norm()) < 1e-13) break;
  }
  const Matrix normal_projector = Matrix::Identity(ambient, ambient) - tangent * tangent.transpose();
  for (auto& h : fit.hessian) h = normal_projector * h;
  fit.tangent = tangent;
  return fit;
}

class TriangleMeshGeometry {
 public:
  struct Edge {
    Index a, b;
    double cotan_weight;  // (cot alpha + cot beta) / 2
  };

  TriangleMeshGeometry(Matrix vertices, std::vector<Face> faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    validate_and_build_edges();
    build_rings();
    count_components();
    fit_all();
    compute_areas();
  }

  int dim() const { return 2; }
  int ambient_dim() const { return static_cast<int>(vertices_.rows()); }
  Index num_vertices() const { return vertices_.cols(); }
  const Matrix& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::vector<Index>>& one_ring() const { return rings_; }
  const std::vector<std::vector<Index>>& vertex_faces() const { return vertex_faces_; }
  const std::vector<QuadraticFit>& fits() const { return fits_; }

  /// Lumped quadrature weights: curvature-corrected face areas split among the
  /// corners by Voronoi (mixed) areas.
  const Vector& vertex_areas() const { return vertex_areas_; }
  /// The same split applied to flat face areas.
  const Vector& flat_vertex_areas() const { return flat_vertex_areas_; }
  const Vector& face_areas() const { return face_areas_; }
  double flat_area() const { return face_areas_.sum(); }

  int component_count() const { return components_; }
  bool connected() const { return components_ == 1; }
  double max_edge_length() const { return max_edge_; }
  double min_cotan_weight() const { return min_cotan_; }

  std::vector<Index> two_ring(Index v) const {
    std::set<Index> out;
    for (Index a : rings_[static_cast<std::size_t>(v)]) {
      out.insert(a);
      for (Index b : rings_[static_cast<std::size_t>(a)]) out.insert(b);
    }
    out.erase(v);
    return {out.begin(), out.end()};
  }

 private:
  void validate_and_build_edges() {
    const Index nv = num_vertices();
    std::map<std::pair<Index, Index>, std::vector<Index>> edge_faces;
    face_areas_.resize(static_cast<Index>(faces_.size()));
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      for (Index v : t)
        if (v < 0 || v >= nv) throw Error(ErrorKind::DegenerateMesh, "face index out of range");
      const Vector e1 = vertices_.col(t[1]) - vertices_.col(t[0]);
      const Vector e2 = vertices_.col(t[2]) - vertices_.col(t[0]);
      const double cross2 = e1.squaredNorm() * e2.squaredNorm() - std::pow(e1.dot(e2), 2);
      const double area = 0.5 * std::sqrt(std::max(cross2, 0.0));
      if (!(area > 1e-14 * (e1.squaredNorm() + e2.squaredNorm()))) {
        throw Error(ErrorKind::DegenerateMesh, "face " + std::to_string(f) + " has zero area");
      }
      face_areas_(static_cast<Index>(f)) = area;
      for (int c = 0; c < 3; ++c) {
        Index a = t[static_cast<std::size_t>(c)], b = t[static_cast<std::size_t>((c + 1) % 3)];
        edge_faces[{std::min(a, b), std::max(a, b)}].push_back(static_cast<Index>(f));
      }
    }
    edges_.reserve(edge_faces.size());
    min_cotan_ = std::numeric_limits<double>::infinity();
    max_edge_ = 0.0;
    for (const auto& [key, fs] : edge_faces) {
      if (fs.size() != 2) throw Error(ErrorKind::DegenerateMesh, "mesh is not closed (edge with " +
                                                                  std::to_string(fs.size()) + " faces)");
      double w = 0.0;
      for (Index f : fs) {
        const Face& t = faces_[static_cast<std::size_t>(f)];
        Index opp = -1;
        for (Index v : t)
          if (v != key.first && v != key.second) opp = v;
        const Vector ea = vertices_.col(key.first) - vertices_.col(opp);
        const Vector eb = vertices_.col(key.second) - vertices_.col(opp);
        w += 0.5 * ea.dot(eb) / (2.0 * face_areas_(f));
      }
      edges_.push_back({key.first, key.second, w});
      min_cotan_ = std::min(min_cotan_, w);
      max_edge_ = std::max(max_edge_, (vertices_.col(key.first) - vertices_.col(key.second)).norm());
    }
  }

  void build_rings() {
    rings_.assign(static_cast<std::size_t>(num_vertices()), {});
    vertex_faces_.assign(static_cast<std::size_t>(num_vertices()), {});
    for (const Edge& e : edges_) {
      rings_[static_cast<std::size_t>(e.a)].push_back(e.b);
      rings_[static_cast<std::size_t>(e.b)].push_back(e.a);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f)
      for (Index v : faces_[f]) vertex_faces_[static_cast<std::size_t>(v)].push_back(static_cast<Index>(f));
    for (auto& r : rings_) std::sort(r.begin(), r.end());
    for (std::size_t v = 0; v < rings_.size(); ++v)
      if (rings_[v].empty()) throw Error(ErrorKind::DegenerateMesh, "isolated vertex " + std::to_string(v));
  }

  void count_components() {
    std::vector<Index> parent(static_cast<std::size_t>(num_vertices()));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index x) {
      while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
      }
      return x;
    };
    for (const Edge& e : edges_) parent[static_cast<std::size_t>(find(e.a))] = find(e.b);
    std::set<Index> roots;
    for (Index v = 0; v < num_vertices(); ++v) roots.insert(find(v));
    components_ = static_cast<int>(roots.size());
  }

  void fit_all() {
    fits_.reserve(static_cast<std::size_t>(num_vertices()));
    for (Index v = 0; v < num_vertices(); ++v) {
      const std::vector<Index> ring = two_ring(v);
      Matrix offsets(vertices_.rows(), static_cast<Index>(ring.size()));
      for (std::size_t k = 0; k < ring.size(); ++k)
        offsets.col(static_cast<Index>(k)) = vertices_.col(ring[k]) - vertices_.col(v);
      try {
        fits_.push_back(fit_local_quadratic(offsets));
      } catch (const Error& e) {
        throw Error(e.kind(), "vertex " + std::to_string(v) + ": mesh too coarse for a 2-ring quadratic fit");
      }
    }
  }

  // Fraction of a face's area assigned to each corner: the Voronoi split for
  // non-obtuse faces, otherwise 1/2 to the obtuse corner and 1/4 to the others.
  std::array<double, 3> corner_shares(const Face& t) const {
    std::array<double, 3> cot{};
    std::array<double, 3> len2{};  // squared length of the edge opposite corner c
    for (int c = 0; c < 3; ++c) {
      const Vector a = vertices_.col(t[static_cast<std::size_t>((c + 1) % 3)]) - vertices_.col(t[static_cast<std::size_t>(c)]);
      const Vector b = vertices_.col(t[static_cast<std::size_t>((c + 2) % 3)]) - vertices_.col(t[static_cast<std::size_t>(c)]);
      const double cross = std::sqrt(std::max(a.squaredNorm() * b.squaredNorm() - std::pow(a.dot(b), 2), 0.0));
      cot[static_cast<std::size_t>(c)] = a.dot(b) / cross;
      len2[static_cast<std::size_t>(c)] = (a - b).squaredNorm();
    }
    std::array<double, 3> share{};
    for (int c = 0; c < 3; ++c) {
      if (cot[static_cast<std::size_t>(c)] < 0.0) {
        for (int k = 0; k < 3; ++k) share[static_cast<std::size_t>(k)] = k == c ? 0.5 : 0.25;
        return share;
      }
    }
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t j = static_cast<std::size_t>((c + 1) % 3), k = static_cast<std::size_t>((c + 2) % 3);
      share[static_cast<std::size_t>(c)] = len2[k] * cot[k] + len2[j] * cot[j];
      total += share[static_cast<std::size_t>(c)];
    }
    for (double& s : share) s /= total;
    return share;
  }

  // Each face is weighted by the area of its closest-point projection onto
  // the surface. With w the offset from the surface to the flat face, that
  // area element is cos(tilt) / det(I - <sff, w>) ~ 1 + tr<sff, w> - |Dh|^2 / 2.
  // The offset is the quadratic bubble w = 1/2 sum_{i<j} l_i l_j sff(e_ij, e_ij)
  // and the tilt Dh is linear across the face with corner values read off the
  // fitted tangent planes.
  void compute_areas() {
    const Index nv = num_vertices();
    vertex_areas_ = Vector::Zero(nv);
    flat_vertex_areas_ = Vector::Zero(nv);
    const Index ambient = vertices_.rows();
    auto sff_along = [&](Index v, const Vector& e) {
      const QuadraticFit& fit = fits_[static_cast<std::size_t>(v)];
      const Vector c = fit.tangent.transpose() * e;
      return Vector(c(0) * c(0) * fit.hessian[0] + 2.0 * c(0) * c(1) * fit.hessian[1] +
                    c(1) * c(1) * fit.hessian[2]);
    };
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      const double area = face_areas_(static_cast<Index>(f));
      Matrix plane(ambient, 2);
      plane.col(0) = vertices_.col(t[1]) - vertices_.col(t[0]);
      plane.col(1) = vertices_.col(t[2]) - vertices_.col(t[0]);
      Eigen::HouseholderQR<Matrix> qr(plane);
      const Matrix basis = qr.householderQ() * Matrix::Identity(ambient, 2);
      const Matrix off_plane = Matrix::Identity(ambient, ambient) - basis * basis.transpose();

      Matrix slope_sum = Matrix::Zero(ambient, 2);
      double slope_sq = 0.0;
      Vector mean_h = Vector::Zero(ambient);
      for (Index v : t) {
        const QuadraticFit& fit = fits_[static_cast<std::size_t>(v)];
        const Matrix in_plane = basis.transpose() * fit.tangent;  // 2 x 2
        const Matrix slope = (off_plane * fit.tangent) * in_plane.inverse();
        slope_sum += slope;
        slope_sq += slope.squaredNorm();
        mean_h += 0.5 * (fit.hessian[0] + fit.hessian[2]) / 3.0;
      }
      double depth = 0.0;
      for (int c = 0; c < 3; ++c) {
        const Index i = t[static_cast<std::size_t>(c)], j = t[static_cast<std::size_t>((c + 1) % 3)];
        const Vector e = vertices_.col(j) - vertices_.col(i);
        depth += 0.5 * mean_h.dot(sff_along(i, e) + sff_along(j, e));
      }
      const double tilt = area / 12.0 * (slope_sum.squaredNorm() + slope_sq);
      const double curved = area + 2.0 * area / 24.0 * depth - 0.5 * tilt;
      const std::array<double, 3> share = corner_shares(t);
      for (int c = 0; c < 3; ++c) {
        const Index v = t[static_cast<std::size_t>(c)];
        vertex_areas_(v) += curved * share[static_cast<std::size_t>(c)];
        flat_vertex_areas_(v) += area * share[static_cast<std::size_t>(c)];
      }
    }
  }

  Matrix vertices_;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> rings_;
  std::vector<std::vector<Index>> vertex_faces_;
  std::vector<QuadraticFit> fits_;
  Vector face_areas_;
  Vector vertex_areas_;
  Vector flat_vertex_areas_;
  int components_ = 0;
  double max_edge_ = 0.0;
  double min_cotan_ = 0.0;
};

}  // namespace abplab
