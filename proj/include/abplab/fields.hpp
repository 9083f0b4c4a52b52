#pragma once

// Scalar fields on a geometry, intrinsic gradients, and the weak-form
// f-weighted Laplace-Beltrami operator div(f grad .).

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "abplab/geometry/curvature.hpp"
#include "abplab/geometry/geometry.hpp"

namespace abplab {

struct ScalarField {
  Vector values;
  std::uint64_t geometry_id = 0;

  ScalarField() = default;
  ScalarField(const Geometry& g, Vector v) : values(std::move(v)), geometry_id(g.id()) {
    if (values.size() != g.num_samples()) {
      throw Error(ErrorKind::InvalidArgument, "field length " + std::to_string(values.size()) +
                                                  " does not match sample count " +
                                                  std::to_string(g.num_samples()));
    }
  }

  static ScalarField constant(const Geometry& g, double c) {
    return ScalarField(g, Vector::Constant(g.num_samples(), c));
  }

  Index size() const { return values.size(); }
  double operator()(Index i) const { return values(i); }
};

inline void check_binding(const ScalarField& f, const Geometry& g) {
  if (f.geometry_id != g.id() || f.size() != g.num_samples()) {
    throw Error(ErrorKind::InvalidArgument, "field is bound to a different geometry");
  }
}

/// Lumped quadrature: sum_i w_i v_i.
inline double integrate(const Geometry& g, const Vector& values) { return g.weights().dot(values); }
inline double integrate(const Geometry& g, const ScalarField& f) {
  check_binding(f, g);
  return integrate(g, f.values);
}

/// Local model of a grid function on a chart: value, chart partials and
/// second partials. Between nodes j and j+1 along an axis it blends the
/// quadratic interpolants centred at j and j+1 with the quintic smoothstep, so
/// the model is C^2 and at a node it reproduces the usual second-order central
/// differences (one-sided at open ends).
struct ChartLocalJet {
  double value = 0.0;
  Vector d1;  // n
  Matrix d2;  // n x n
};

namespace detail {

struct AxisStencil {
  std::vector<int> nodes;
  std::vector<double> w0, w1, w2;

  void add(int node, double a, double b, double c) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] == node) {
        w0[k] += a;
        w1[k] += b;
        w2[k] += c;
        return;
      }
    }
    nodes.push_back(node);
    w0.push_back(a);
    w1.push_back(b);
    w2.push_back(c);
  }
};

inline int wrap_index(const ChartAxis& ax, int j) {
  if (!ax.periodic) return j;
  j %= ax.count;
  return j < 0 ? j + ax.count : j;
}

inline AxisStencil axis_stencil(const ChartAxis& ax, double coord) {
  const double pos = (coord - ax.lower) / ax.spacing;
  int j = static_cast<int>(std::floor(pos));
  double s = pos - j;
  // grid nodes reproduce plain differences exactly
  if (s < 1e-10) s = 0.0;
  if (s > 1.0 - 1e-10) {
    s = 0.0;
    ++j;
  }
  auto centre = [&](int c) { return ax.periodic ? c : std::clamp(c, 1, ax.count - 2); };
  const double h = ax.spacing;
  // quadratic Lagrange weights of the stencil centred at c, evaluated at pos
  auto lagrange = [&](int c, std::array<double, 3>& l0, std::array<double, 3>& l1, std::array<double, 3>& l2) {
    const double sg = (j - c) + s;
    l0 = {0.5 * sg * (sg - 1.0), 0.0, 0.5 * sg * (sg + 1.0)};
    l0[1] = 1.0 - l0[0] - l0[2];
    l1 = {(sg - 0.5) / h, 0.0, (sg + 0.5) / h};
    l1[1] = -(l1[0] + l1[2]);
    l2 = {1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)};
  };
  AxisStencil st;
  const int c0 = centre(j), c1 = centre(j + 1);
  std::array<double, 3> a0, a1, a2;
  lagrange(c0, a0, a1, a2);
  if (s == 0.0 || c0 == c1) {
    for (int o = 0; o < 3; ++o)
      st.add(wrap_index(ax, c0 - 1 + o), a0[static_cast<std::size_t>(o)], a1[static_cast<std::size_t>(o)],
             a2[static_cast<std::size_t>(o)]);
    return st;
  }
  std::array<double, 3> b0, b1, b2;
  lagrange(c1, b0, b1, b2);
  const double w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  const double dw = 30.0 * s * s * (1.0 - s) * (1.0 - s) / h;
  const double ddw = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (h * h);
  for (int o = 0; o < 3; ++o) {
    const std::size_t k = static_cast<std::size_t>(o);
    st.add(wrap_index(ax, c0 - 1 + o), (1.0 - w) * a0[k], (1.0 - w) * a1[k] - dw * a0[k],
           (1.0 - w) * a2[k] - 2.0 * dw * a1[k] - ddw * a0[k]);
    st.add(wrap_index(ax, c1 - 1 + o), w * b0[k], w * b1[k] + dw * b0[k], w * b2[k] + 2.0 * dw * b1[k] + ddw * b0[k]);
  }
  return st;
}

}  // namespace detail

inline ChartLocalJet chart_local_jet(const ChartGeometry& chart, const Vector& values, const ChartPoint& xi) {
  const int n = chart.dim();
  ChartLocalJet out;
  out.d1 = Vector::Zero(n);
  out.d2 = Matrix::Zero(n, n);
  const detail::AxisStencil a = detail::axis_stencil(chart.axis(0), xi[0]);
  if (n == 1) {
    for (std::size_t p = 0; p < a.nodes.size(); ++p) {
      const double v = values(chart.node(a.nodes[p]));
      out.value += a.w0[p] * v;
      out.d1(0) += a.w1[p] * v;
      out.d2(0, 0) += a.w2[p] * v;
    }
    return out;
  }
  const detail::AxisStencil b = detail::axis_stencil(chart.axis(1), xi[1]);
  for (std::size_t p = 0; p < a.nodes.size(); ++p) {
    for (std::size_t q = 0; q < b.nodes.size(); ++q) {
      const double v = values(chart.node(a.nodes[p], b.nodes[q]));
      out.value += a.w0[p] * b.w0[q] * v;
      out.d1(0) += a.w1[p] * b.w0[q] * v;
      out.d1(1) += a.w0[p] * b.w1[q] * v;
      out.d2(0, 0) += a.w2[p] * b.w0[q] * v;
      out.d2(1, 1) += a.w0[p] * b.w2[q] * v;
      out.d2(0, 1) += a.w1[p] * b.w1[q] * v;
    }
  }
  out.d2(1, 0) = out.d2(0, 1);
  return out;
}

/// Intrinsic gradient as ambient vectors, one column per sample.
inline Matrix gradient(const Geometry& g, const Vector& values) {
  if (values.size() != g.num_samples()) throw Error(ErrorKind::InvalidArgument, "field length mismatch");
  const Index count = g.num_samples();
  Matrix out = Matrix::Zero(g.ambient_dim(), count);
  if (g.is_chart()) {
    const ChartGeometry& chart = g.chart();
    for (Index k = 0; k < count; ++k) {
      const ChartLocalJet jet = chart_local_jet(chart, values, chart.node_point(k));
      out.col(k) = chart.node_geometry(k).gradient(jet.d1);
    }
    return out;
  }
  const TriangleMeshGeometry& mesh = g.mesh();
  const Matrix& p = mesh.vertices();
  Vector area_sum = Vector::Zero(count);
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Face& t = mesh.faces()[f];
    Matrix e(p.rows(), 2);
    e.col(0) = p.col(t[1]) - p.col(t[0]);
    e.col(1) = p.col(t[2]) - p.col(t[0]);
    const Eigen::Matrix2d gram = e.transpose() * e;
    if (!(gram.determinant() > 0.0)) throw Error(ErrorKind::DegenerateMetric, "flat face metric is singular");
    const Eigen::Vector2d du(values(t[1]) - values(t[0]), values(t[2]) - values(t[0]));
    const Vector grad = e * gram.ldlt().solve(du);
    const double area = mesh.face_areas()(static_cast<Index>(f));
    for (Index v : t) {
      out.col(v) += area * grad;
      area_sum(v) += area;
    }
  }
  for (Index v = 0; v < count; ++v) {
    const Matrix& tan = mesh.fits()[static_cast<std::size_t>(v)].tangent;
    out.col(v) = tan * (tan.transpose() * out.col(v)) / area_sum(v);
  }
  return out;
}

inline Matrix gradient(const Geometry& g, const ScalarField& f) {
  check_binding(f, g);
  return gradient(g, f.values);
}

/// Sparse symmetric weak-form operator with (L phi)_i ~ M_i div(f grad phi)(x_i)
/// and the lumped mass M.
struct WeightedLaplacian {
  Eigen::SparseMatrix<double> matrix;
  Vector mass;
  std::uint64_t geometry_id = 0;
  double min_edge_weight = 0.0;  // most negative off-diagonal coupling
  double min_diagonal = 0.0;
  double max_diagonal = 0.0;

  Vector apply(const Vector& v) const { return matrix * v; }
  /// Pointwise operator value: (L v)_i / M_i.
  Vector pointwise(const Vector& v) const { return (matrix * v).cwiseQuotient(mass); }
};

namespace detail {

inline void add_coupling(std::vector<Eigen::Triplet<double>>& trips, Index a, Index b, double w) {
  if (a == b || w == 0.0) return;
  trips.emplace_back(a, b, w);
  trips.emplace_back(b, a, w);
  trips.emplace_back(a, a, -w);
  trips.emplace_back(b, b, -w);
}

}  // namespace detail

/// Weak-form assembly of div(f grad .). Charts: the quadratic form
/// int f g^ij d_i phi d_j phi dvol with diagonal terms on grid edges and mixed
/// terms per cell. Meshes: cotangent weights times the edge mean of f.
inline WeightedLaplacian build_weighted_laplacian(const Geometry& g, const Vector& f) {
  const Index count = g.num_samples();
  if (f.size() != count) throw Error(ErrorKind::InvalidArgument, "density length mismatch");
  for (Index i = 0; i < count; ++i) {
    if (!std::isfinite(f(i))) throw Error(ErrorKind::NonFinite, "density is not finite at sample " + std::to_string(i));
    if (!(f(i) > 0.0)) throw Error(ErrorKind::NonPositiveDensity, "f <= 0 at sample " + std::to_string(i));
  }
  std::vector<Eigen::Triplet<double>> trips;
  WeightedLaplacian op;
  op.min_edge_weight = std::numeric_limits<double>::infinity();
  auto couple = [&](Index a, Index b, double w) {
    detail::add_coupling(trips, a, b, w);
    op.min_edge_weight = std::min(op.min_edge_weight, w);
  };

  if (g.is_chart()) {
    const ChartGeometry& chart = g.chart();
    const int n = chart.dim();
    const double vol = chart.cell_volume();
    for (Index k = 0; k < count; ++k) {
      for (int d = 0; d < n; ++d) {
        const Index k1 = chart.neighbor(k, d, 1);
        if (k1 < 0) continue;
        const auto em = chart.edge_metric(k, d);
        const double h = chart.axis(d).spacing;
        const double fe = 0.5 * (f(k) + f(k1));
        couple(k, k1, fe * em.metric_inv(d, d) * em.sqrt_det * vol / (h * h));
      }
      if (n == 2) {
        const Index k10 = chart.neighbor(k, 0, 1);
        const Index k01 = chart.neighbor(k, 1, 1);
        if (k10 < 0 || k01 < 0) continue;
        const Index k11 = chart.neighbor(k10, 1, 1);
        const auto cm = chart.cell_metric(k);
        // 2 a d0 d1 with cell-centred differences splits into the two diagonals
        const double fc = 0.25 * (f(k) + f(k10) + f(k01) + f(k11));
        const double c = 0.5 * fc * cm.metric_inv(0, 1) * cm.sqrt_det * vol / (chart.axis(0).spacing * chart.axis(1).spacing);
        if (c != 0.0) {
          couple(k, k11, c);
          couple(k10, k01, -c);
        }
      }
    }
  } else {
    const TriangleMeshGeometry& mesh = g.mesh();
    for (const auto& e : mesh.edges()) couple(e.a, e.b, e.cotan_weight * 0.5 * (f(e.a) + f(e.b)));
  }
  op.matrix.resize(count, count);
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.makeCompressed();
  op.mass = g.weights();
  op.geometry_id = g.id();
  const Vector diag = op.matrix.diagonal();
  op.min_diagonal = diag.minCoeff();
  op.max_diagonal = diag.maxCoeff();
  return op;
}

inline WeightedLaplacian build_weighted_laplacian(const Geometry& g, const ScalarField& f) {
  check_binding(f, g);
  return build_weighted_laplacian(g, f.values);
}

/// The f = 1 operator.
inline WeightedLaplacian build_laplacian(const Geometry& g) {
  return build_weighted_laplacian(g, Vector::Ones(g.num_samples()));
}

/// Largest |Delta_h x_k - n H_k| over samples and ambient coordinates k.
inline double operator_consistency_error(const Geometry& g, const CurvatureData& c) {
  if (c.geometry_id != g.id()) throw Error(ErrorKind::InvalidArgument, "curvature belongs to a different geometry");
  const WeightedLaplacian lap = build_laplacian(g);
  double worst = 0.0;
  for (int k = 0; k < g.ambient_dim(); ++k) {
    const Vector coord = g.positions().row(k).transpose();
    const Vector lx = lap.pointwise(coord);
    worst = std::max(worst, (lx - g.dim() * c.mean_curvature.row(k).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Discretization tolerance used by all verdicts: 10 x the consistency error.
inline double epsilon_h(const Geometry& g, const CurvatureData& c) { return 10.0 * operator_consistency_error(g, c); }

}  // namespace abplab
