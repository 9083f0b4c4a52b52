#pragma once

// Parametric chart geometries on a tensor grid (curves: one axis, surfaces:
// two axes), each axis either periodic or cell-centered on an open interval.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "abplab/error.hpp"
#include "abplab/geometry/local.hpp"

namespace abplab {

using ImmersionFn = std::function<ImmersionJet(const ChartPoint&)>;

struct ChartAxis {
  int count = 0;
  double lower = 0.0;   // coordinate of node 0
  double spacing = 0.0;
  bool periodic = true;

  double coordinate(double index) const { return lower + index * spacing; }

  static ChartAxis periodic_axis(int count, double period = 2.0 * std::numbers::pi) {
    return {count, 0.0, period / count, true};
  }
  /// Nodes at cell centres of (a, b); no node sits on an endpoint.
  static ChartAxis open_axis(int count, double a, double b) {
    const double h = (b - a) / count;
    return {count, a + 0.5 * h, h, false};
  }
};

class ChartGeometry {
 public:
  /// Analytic immersion: derivatives are exact at every chart point.
  ChartGeometry(int dim_n, std::array<ChartAxis, 2> axes, ImmersionFn immersion)
      : n_(dim_n), axes_(axes), immersion_(std::move(immersion)) {
    validate_axes();
    const ChartPoint origin{axes_[0].lower, axes_[1].lower};
    ambient_ = static_cast<int>(immersion_(origin).position.size());
    build_nodes_analytic();
    check_periodic_wrap();
    finish();
  }

  /// Positions only: derivatives by central differences on the grid.
  ChartGeometry(int dim_n, std::array<ChartAxis, 2> axes, Matrix positions)
      : n_(dim_n), axes_(axes), ambient_(static_cast<int>(positions.rows())) {
    validate_axes();
    if (positions.cols() != num_nodes()) {
      throw Error(ErrorKind::InvalidArgument, "position count does not match grid shape");
    }
    build_nodes_fd(positions);
    finish();
  }

  int dim() const { return n_; }
  int ambient_dim() const { return ambient_; }
  const ChartAxis& axis(int d) const { return axes_[static_cast<std::size_t>(d)]; }
  std::array<int, 2> grid_shape() const { return {axes_[0].count, n_ == 2 ? axes_[1].count : 1}; }
  Index num_nodes() const { return static_cast<Index>(grid_shape()[0]) * grid_shape()[1]; }
  bool has_analytic_immersion() const { return static_cast<bool>(immersion_); }

  Index node(int i0, int i1 = 0) const { return static_cast<Index>(i1) * axes_[0].count + i0; }
  std::array<int, 2> node_index(Index k) const {
    return {static_cast<int>(k % axes_[0].count), static_cast<int>(k / axes_[0].count)};
  }
  ChartPoint node_point(Index k) const {
    const auto idx = node_index(k);
    return {axes_[0].coordinate(idx[0]), n_ == 2 ? axes_[1].coordinate(idx[1]) : 0.0};
  }

  /// Neighbouring node along `d` at `offset` steps, or -1 past a non-periodic end.
  Index neighbor(Index k, int d, int offset) const {
    auto idx = node_index(k);
    const ChartAxis& ax = axes_[static_cast<std::size_t>(d)];
    int j = idx[static_cast<std::size_t>(d)] + offset;
    if (ax.periodic) {
      j %= ax.count;
      if (j < 0) j += ax.count;
    } else if (j < 0 || j >= ax.count) {
      return -1;
    }
    idx[static_cast<std::size_t>(d)] = j;
    return node(idx[0], idx[1]);
  }

  ImmersionJet jet(const ChartPoint& xi) const {
    if (!immersion_) {
      throw Error(ErrorKind::InvalidArgument, "off-grid evaluation needs an analytic immersion");
    }
    return immersion_(xi);
  }
  const ImmersionFn& immersion() const { return immersion_; }

  const ImmersionJet& node_jet(Index k) const { return jets_[static_cast<std::size_t>(k)]; }
  const LocalGeometry& node_geometry(Index k) const { return locals_[static_cast<std::size_t>(k)]; }

  const Matrix& positions() const { return positions_; }
  /// sqrt(det g) times the coordinate cell volume.
  const Vector& weights() const { return weights_; }
  double cell_volume() const { return n_ == 2 ? axes_[0].spacing * axes_[1].spacing : axes_[0].spacing; }

  /// Induced metric quantities at the midpoint between node k and its +1
  /// neighbour along d (analytic when available, else the node average).
  struct EdgeMetric {
    Matrix metric_inv;
    double sqrt_det;
  };
  EdgeMetric edge_metric(Index k, int d) const {
    const Index k1 = neighbor(k, d, 1);
    if (immersion_) {
      ChartPoint xi = node_point(k);
      xi[static_cast<std::size_t>(d)] += 0.5 * axes_[static_cast<std::size_t>(d)].spacing;
      const ImmersionJet j = immersion_(xi);
      const Matrix g = j.first.transpose() * j.first;
      return {g.inverse(), std::sqrt(g.determinant())};
    }
    const LocalGeometry& a = node_geometry(k);
    const LocalGeometry& b = node_geometry(k1);
    return {0.5 * (a.metric_inv + b.metric_inv), 0.5 * (a.sqrt_det + b.sqrt_det)};
  }

  /// Same at a cell centre (node k and its +1 neighbours along both axes).
  EdgeMetric cell_metric(Index k) const {
    if (immersion_) {
      ChartPoint xi = node_point(k);
      xi[0] += 0.5 * axes_[0].spacing;
      xi[1] += 0.5 * axes_[1].spacing;
      const ImmersionJet j = immersion_(xi);
      const Matrix g = j.first.transpose() * j.first;
      return {g.inverse(), std::sqrt(g.determinant())};
    }
    const Index k10 = neighbor(k, 0, 1);
    const Index k01 = neighbor(k, 1, 1);
    const Index k11 = neighbor(k10, 1, 1);
    EdgeMetric out{Matrix::Zero(n_, n_), 0.0};
    for (Index q : {k, k10, k01, k11}) {
      out.metric_inv += 0.25 * node_geometry(q).metric_inv;
      out.sqrt_det += 0.25 * node_geometry(q).sqrt_det;
    }
    return out;
  }

  /// Total length of the closed polyline through the nodes (curves only).
  double polyline_length() const {
    if (n_ != 1) throw Error(ErrorKind::UnsupportedDimension, "polyline length needs a curve");
    double total = 0.0;
    for (Index k = 0; k < num_nodes(); ++k) {
      const Index next = neighbor(k, 0, 1);
      if (next >= 0) total += (positions_.col(next) - positions_.col(k)).norm();
    }
    return total;
  }

  /// Smallest node spacing measured along the surface.
  double min_spacing() const { return min_spacing_; }
  double max_spacing() const { return max_spacing_; }

 private:
  void validate_axes() {
    if (n_ != 1 && n_ != 2) throw Error(ErrorKind::UnsupportedDimension, "charts support n = 1 or 2");
    for (int d = 0; d < n_; ++d) {
      const ChartAxis& ax = axes_[static_cast<std::size_t>(d)];
      if (ax.count < 3 || !(ax.spacing > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "chart axis needs at least 3 nodes and positive spacing");
      }
    }
    if (n_ == 1) axes_[1] = ChartAxis{1, 0.0, 1.0, true};
  }

  void build_nodes_analytic() {
    const Index count = num_nodes();
    jets_.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) jets_.push_back(immersion_(node_point(k)));
  }

  void check_periodic_wrap() {
    for (int d = 0; d < n_; ++d) {
      const ChartAxis& ax = axes_[static_cast<std::size_t>(d)];
      if (!ax.periodic) continue;
      ChartPoint a{axes_[0].lower, axes_[1].lower};
      ChartPoint b = a;
      b[static_cast<std::size_t>(d)] += ax.count * ax.spacing;
      const Vector pa = immersion_(a).position;
      const Vector pb = immersion_(b).position;
      if ((pa - pb).norm() > 1e-9 * (1.0 + pa.norm())) {
        throw Error(ErrorKind::InvalidArgument, "periodic axis does not wrap consistently");
      }
    }
  }

  // Second-order differences; one-sided three-point stencils at open ends.
  void build_nodes_fd(const Matrix& positions) {
    const Index count = num_nodes();
    jets_.assign(static_cast<std::size_t>(count), ImmersionJet{});
    auto diff1 = [&](Index k, int d) -> Vector {
      const double h = axes_[static_cast<std::size_t>(d)].spacing;
      const Index p = neighbor(k, d, 1), m = neighbor(k, d, -1);
      if (p >= 0 && m >= 0) return (positions.col(p) - positions.col(m)) / (2 * h);
      if (p < 0) {
        const Index m2 = neighbor(k, d, -2);
        return (3 * positions.col(k) - 4 * positions.col(m) + positions.col(m2)) / (2 * h);
      }
      const Index p2 = neighbor(k, d, 2);
      return (-3 * positions.col(k) + 4 * positions.col(p) - positions.col(p2)) / (2 * h);
    };
    auto diff2 = [&](Index k, int d) -> Vector {
      const double h = axes_[static_cast<std::size_t>(d)].spacing;
      Index p = neighbor(k, d, 1), m = neighbor(k, d, -1), c = k;
      if (p < 0) { c = m; p = k; m = neighbor(k, d, -2); }
      if (m < 0) { c = p; m = k; p = neighbor(k, d, 2); }
      return (positions.col(p) - 2 * positions.col(c) + positions.col(m)) / (h * h);
    };
    for (Index k = 0; k < count; ++k) {
      ImmersionJet& j = jets_[static_cast<std::size_t>(k)];
      j.position = positions.col(k);
      j.first.resize(ambient_, n_);
      for (int d = 0; d < n_; ++d) j.first.col(d) = diff1(k, d);
      j.second.assign(static_cast<std::size_t>(n_ * n_), Vector::Zero(ambient_));
      for (int d = 0; d < n_; ++d) j.second[static_cast<std::size_t>(d * n_ + d)] = diff2(k, d);
    }
    if (n_ == 2) {
      // mixed derivative: difference of the first-derivative field
      for (Index k = 0; k < count; ++k) {
        const Index p = neighbor(k, 1, 1), m = neighbor(k, 1, -1);
        Vector mixed;
        if (p >= 0 && m >= 0) {
          mixed = (jets_[static_cast<std::size_t>(p)].first.col(0) - jets_[static_cast<std::size_t>(m)].first.col(0)) /
                  (2 * axes_[1].spacing);
        } else {
          const Index q = p >= 0 ? p : m;
          const double sgn = p >= 0 ? 1.0 : -1.0;
          mixed = sgn * (jets_[static_cast<std::size_t>(q)].first.col(0) - jets_[static_cast<std::size_t>(k)].first.col(0)) /
                  axes_[1].spacing;
        }
        jets_[static_cast<std::size_t>(k)].second[1] = mixed;
        jets_[static_cast<std::size_t>(k)].second[2] = mixed;
      }
    }
  }

  void finish() {
    const Index count = num_nodes();
    positions_.resize(ambient_, count);
    weights_.resize(count);
    locals_.clear();
    locals_.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
      const ImmersionJet& j = jets_[static_cast<std::size_t>(k)];
      positions_.col(k) = j.position;
      locals_.push_back(local_geometry(j));
      weights_(k) = locals_.back().sqrt_det * cell_volume();
    }
    min_spacing_ = std::numeric_limits<double>::infinity();
    max_spacing_ = 0.0;
    for (Index k = 0; k < count; ++k) {
      for (int d = 0; d < n_; ++d) {
        const double len = locals_[static_cast<std::size_t>(k)].jacobian.col(d).norm() *
                           axes_[static_cast<std::size_t>(d)].spacing;
        min_spacing_ = std::min(min_spacing_, len);
        max_spacing_ = std::max(max_spacing_, len);
      }
    }
  }

  int n_;
  std::array<ChartAxis, 2> axes_;
  int ambient_ = 0;
  ImmersionFn immersion_;
  std::vector<ImmersionJet> jets_;
  std::vector<LocalGeometry> locals_;
  Matrix positions_;
  Vector weights_;
  double min_spacing_ = 0.0;
  double max_spacing_ = 0.0;
};

}  // namespace abplab
