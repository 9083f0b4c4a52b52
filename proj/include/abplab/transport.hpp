#pragma once

// The transport map Phi_r(x, y, t) = x + r (grad u(x) + y + t H(x)) in
// Euclidean space, A_r membership, the shifted Hessian A, Jacobian bounds and
// the covering Monte Carlo.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "abplab/potential.hpp"

namespace abplab {

/// Everything the map needs at one base point of Sigma.
struct PointState {
  Index index = -1;           // nearest sample
  ChartPoint xi{0.0, 0.0};    // chart coordinates (charts only)
  Vector position;
  double u = 0.0;
  Vector grad_u;
  Vector mean_curvature;
  Matrix tangent;             // N x n orthonormal
  Matrix normals;             // N x m, first column along H
  std::vector<Vector> sff;    // frame components sff(e_i, e_j) at i * n + j
  Matrix hessian_u;           // D^2 u in the frame; empty on meshes
  Vector d1_u;                // chart partials of u
  Matrix d2_u;                // chart second partials of u
  double sqrt_det = 1.0;
  Matrix jacobian;            // dX/dxi (charts only)
  std::vector<Vector> chart_sff;  // sff(d_i, d_j) (charts only)

  Index n() const { return tangent.cols(); }
  Matrix y_frame() const { return normals.rightCols(normals.cols() - 1); }
};

class TransportModel {
 public:
  TransportModel(const Geometry& g, const CurvatureData& c, const NormalizedDensity& f, const PotentialSolution& sol,
                 double epsilon_h)
      : g_(&g), c_(&c), f_(&f), sol_(&sol), eps_(epsilon_h) {
    check_binding(sol.u, g);
    check_binding(f.f, g);
    if (c.geometry_id != g.id()) throw Error(ErrorKind::InvalidArgument, "curvature belongs to a different geometry");
    seeds_.resize(static_cast<std::size_t>(g.num_samples()));
  }

  const Geometry& geometry() const { return *g_; }
  const CurvatureData& curvature() const { return *c_; }
  const NormalizedDensity& density() const { return *f_; }
  const PotentialSolution& solution() const { return *sol_; }
  double epsilon_h() const { return eps_; }
  int n() const { return g_->dim(); }
  int m() const { return g_->codim(); }
  bool analytic_chart() const { return g_->is_chart() && g_->chart().has_analytic_immersion(); }

  /// State at a sample. Analytic charts go through the same off-grid
  /// evaluator used by the finite differences, so both agree at nodes.
  PointState at_sample(Index k) const {
    if (analytic_chart()) {
      std::vector<int>& seeds = seeds_[static_cast<std::size_t>(k)];
      PointState s = at_chart(g_->chart().node_point(k), &seeds, k);
      return s;
    }
    PointState s;
    s.index = k;
    s.position = g_->positions().col(k);
    s.u = sol_->u.values(k);
    s.grad_u = sol_->grad_u.col(k);
    s.mean_curvature = c_->mean_curvature.col(k);
    s.tangent = c_->tangent_basis[static_cast<std::size_t>(k)];
    s.normals = c_->normal_basis[static_cast<std::size_t>(k)];
    s.sff = c_->sff[static_cast<std::size_t>(k)];
    if (g_->is_chart()) {
      const ChartGeometry& chart = g_->chart();
      s.xi = chart.node_point(k);
      const LocalGeometry& loc = chart.node_geometry(k);
      fill_chart_derivatives(s, loc, chart_local_jet(chart, sol_->u.values, s.xi));
    }
    return s;
  }

  /// Off-grid state on an analytic chart. `seeds` fixes the normal frame's
  /// Gram-Schmidt order; an empty vector is filled.
  PointState at_chart(const ChartPoint& xi, std::vector<int>* seeds, Index nearest = -1) const {
    if (!analytic_chart()) throw Error(ErrorKind::InvalidArgument, "off-grid evaluation needs an analytic chart");
    const ChartGeometry& chart = g_->chart();
    const LocalGeometry loc = local_geometry(chart.jet(xi));
    const ChartLocalJet uj = chart_local_jet(chart, sol_->u.values, xi);
    PointState s;
    s.index = nearest >= 0 ? nearest : nearest_node(xi);
    s.xi = xi;
    s.position = loc.position;
    s.u = uj.value;
    s.grad_u = loc.gradient(uj.d1);
    s.mean_curvature = loc.mean_curvature;
    s.tangent = loc.tangent;
    s.normals = normal_basis(loc.tangent, loc.mean_curvature, seeds);
    const int n = loc.n;
    s.sff.assign(static_cast<std::size_t>(n * n), Vector::Zero(loc.position.size()));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            s.sff[static_cast<std::size_t>(a * n + b)] +=
                loc.to_orthonormal(i, a) * loc.to_orthonormal(j, b) * loc.sff_at(i, j);
    fill_chart_derivatives(s, loc, uj);
    return s;
  }

  Index nearest_node(const ChartPoint& xi) const {
    const ChartGeometry& chart = g_->chart();
    std::array<int, 2> idx{0, 0};
    for (int d = 0; d < chart.dim(); ++d) {
      const ChartAxis& ax = chart.axis(d);
      int j = static_cast<int>(std::lround((xi[static_cast<std::size_t>(d)] - ax.lower) / ax.spacing));
      if (ax.periodic) {
        j %= ax.count;
        if (j < 0) j += ax.count;
      } else {
        j = std::clamp(j, 0, ax.count - 1);
      }
      idx[static_cast<std::size_t>(d)] = j;
    }
    return chart.node(idx[0], idx[1]);
  }

 private:
  static void fill_chart_derivatives(PointState& s, const LocalGeometry& loc, const ChartLocalJet& uj) {
    const int n = loc.n;
    s.d1_u = uj.d1;
    s.d2_u = uj.d2;
    Matrix hess = uj.d2;
    for (int k = 0; k < n; ++k) hess -= uj.d1(k) * loc.christoffel[static_cast<std::size_t>(k)];
    s.hessian_u = loc.to_frame(hess);
    s.sqrt_det = loc.sqrt_det;
    s.jacobian = loc.jacobian;
    s.chart_sff = loc.sff;
  }

  const Geometry* g_;
  const CurvatureData* c_;
  const NormalizedDensity* f_;
  const PotentialSolution* sol_;
  double eps_;
  mutable std::vector<std::vector<int>> seeds_;
};

/// Ambient vector y from its coordinates in the frame orthogonal to H.
inline Vector y_vector(const PointState& s, const Vector& ycoords) {
  if (ycoords.size() != s.normals.cols() - 1) throw Error(ErrorKind::InvalidArgument, "y has the wrong dimension");
  if (ycoords.size() == 0) return Vector::Zero(s.position.size());
  return s.y_frame() * ycoords;
}

inline double u_norm2(const PointState& s, const Vector& ycoords, double t) {
  return s.grad_u.squaredNorm() + ycoords.squaredNorm() + t * t;
}

inline Vector phi_map(const PointState& s, const Vector& ycoords, double t, double r) {
  return s.position + r * (s.grad_u + y_vector(s, ycoords) + t * s.mean_curvature);
}

struct Membership {
  bool in_U = false;
  bool member = false;
  double slack_min = std::numeric_limits<double>::infinity();  // normalized, over samples and probes
  double probe_slack_min = std::numeric_limits<double>::infinity();
  Index argmin = -1;
};

struct MembershipOptions {
  int probe_directions = 8;
  bool probes = true;
};

namespace detail {

// (F(z) - F(x)) / (|z - x|^2 / 2) with F(z) = r u(z) + |z - p|^2 / 2.
inline double normalized_slack(double r, double uz, const Vector& z, double fx, const Vector& x, const Vector& p) {
  const double d2 = (z - x).squaredNorm();
  const double fz = r * uz + 0.5 * (z - p).squaredNorm();
  return (fz - fx) / (0.5 * d2);
}

}  // namespace detail

/// Tests r u(z) + |z - p|^2 / 2 >= r u(x) + |x - p|^2 / 2 with p = Phi_r(x, y, t)
/// over every sample z and, on analytic charts, over probe circles around x
/// and around the worst sample. The slack is normalized by |z - x|^2 / 2 so it
/// is comparable with eigenvalues of g + rA; members need slack >= -eps_h.
inline Membership a_r_membership(const TransportModel& model, const PointState& s, const Vector& ycoords, double t,
                                 double r, const MembershipOptions& opt = {}) {
  const Geometry& g = model.geometry();
  const Vector p = phi_map(s, ycoords, t, r);
  const double fx = r * s.u + 0.5 * (s.position - p).squaredNorm();
  Membership out;
  out.in_U = u_norm2(s, ycoords, t) < 1.0;
  const Matrix& z = g.positions();
  const Vector& u = model.solution().u.values;
  const double floor2 = std::pow(1e-9 * g.spacing(), 2);
  for (Index k = 0; k < g.num_samples(); ++k) {
    const double d2 = (z.col(k) - s.position).squaredNorm();
    if (d2 <= floor2) continue;
    const double slack = detail::normalized_slack(r, u(k), z.col(k), fx, s.position, p);
    if (slack < out.slack_min) {
      out.slack_min = slack;
      out.argmin = k;
    }
  }
  if (opt.probes && model.analytic_chart()) {
    const ChartGeometry& chart = g.chart();
    const int n = chart.dim();
    auto probe_around = [&](const ChartPoint& centre) {
      for (double frac : {0.45, 0.125}) {
        for (int dir = 0; dir < opt.probe_directions; ++dir) {
          const double ang = std::numbers::pi * dir / opt.probe_directions;
          std::array<double, 2> step{std::cos(ang), n == 2 ? std::sin(ang) : 0.0};
          if (n == 1 && dir > 0) break;
          double pair = 0.0;
          for (double sign : {1.0, -1.0}) {
            ChartPoint q = centre;
            for (int d = 0; d < n; ++d)
              q[static_cast<std::size_t>(d)] += sign * frac * chart.axis(d).spacing * step[static_cast<std::size_t>(d)];
            const Vector zq = chart.jet(q).position;
            const double uq = chart_local_jet(chart, u, q).value;
            const double sl = detail::normalized_slack(r, uq, zq, fx, s.position, p);
            pair += 0.5 * sl;
            if (centre[0] != s.xi[0] || centre[1] != s.xi[1]) out.probe_slack_min = std::min(out.probe_slack_min, sl);
          }
          // symmetric pairs about x cancel the cubic terms
          if (centre[0] == s.xi[0] && centre[1] == s.xi[1]) out.probe_slack_min = std::min(out.probe_slack_min, pair);
        }
      }
    };
    probe_around(s.xi);
    if (out.argmin >= 0) probe_around(chart.node_point(out.argmin));
    out.slack_min = std::min(out.slack_min, out.probe_slack_min);
  }
  out.member = out.in_U && out.slack_min >= -model.epsilon_h();
  return out;
}

/// A = D^2 u - <sff, y> - t <sff, H> in the orthonormal tangent frame.
struct ShiftedHessianA {
  Matrix A;
  Vector eigenvalues;       // ascending
  double trace_sff_y = 0.0; // tr <sff, y>, zero for y orthogonal to H
  double trace_sff_h = 0.0; // tr <sff, H> = n |H|^2
};

inline ShiftedHessianA shifted_hessian(const PointState& s, const Vector& ycoords, double t) {
  if (s.hessian_u.size() == 0) {
    throw Error(ErrorKind::HessianUnavailable, "D^2 u needs a chart backend");
  }
  const Index n = s.n();
  const Vector y = y_vector(s, ycoords);
  ShiftedHessianA out;
  out.A = s.hessian_u;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Vector& h = s.sff[static_cast<std::size_t>(i * n + j)];
      out.A(i, j) -= h.dot(y) + t * h.dot(s.mean_curvature);
    }
    out.trace_sff_y += s.sff[static_cast<std::size_t>(i * n + i)].dot(y);
    out.trace_sff_h += s.sff[static_cast<std::size_t>(i * n + i)].dot(s.mean_curvature);
  }
  out.A = 0.5 * (out.A + out.A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.A, Eigen::EigenvaluesOnly);
  out.eigenvalues = eig.eigenvalues();
  return out;
}

/// Smallest eigenvalue of g + rA (the frame is orthonormal, so g = I).
inline double positivity_check(const ShiftedHessianA& a, double r) { return 1.0 + r * a.eigenvalues.minCoeff(); }

/// f^{1/(n+1)} - sqrt(1 - |grad u|^2) - t.
inline double bound_rate(double f, double grad_u2, int n, double t) {
  return std::pow(f, 1.0 / (n + 1)) - std::sqrt(std::max(0.0, 1.0 - grad_u2)) - t;
}

/// r^m (1 + r c)_+^n.
inline double jacobian_bound(double r, int n, int m, double rate) {
  return std::pow(r, m) * std::pow(std::max(0.0, 1.0 + r * rate), n);
}

struct TRangeCheck {
  bool ok = true;
  double lower = 0.0;  // -sqrt(1 - |grad u|^2)
  double upper = 0.0;  // f^{1/(n+1)} - sqrt(1 - |grad u|^2) + 1/r
};

/// -sqrt(1 - |grad u|^2) < t <= f^{1/(n+1)} - sqrt(1 - |grad u|^2) + 1/r, the
/// upper end relaxed by eps_h / r.
inline TRangeCheck t_range_check(double t, double r, double f, double grad_u2, int n, double epsilon_h) {
  TRangeCheck out;
  const double root = std::sqrt(std::max(0.0, 1.0 - grad_u2));
  out.lower = -root;
  out.upper = std::pow(f, 1.0 / (n + 1)) - root + 1.0 / r;
  out.ok = t > out.lower && t <= out.upper + epsilon_h / r;
  return out;
}

struct JacobianOptions {
  double chart_step = 1e-4;   // arc length, times the local curvature radius
  double fibre_step = 1e-4;   // times the radius of the admissible (y, t) ball
  double ladder_floor = 1e-4; // smallest rung relative to r
  // Ratios are left undefined where 1 + s c falls below this: the determinant
  // there is a small difference of O(1) numbers and loses relative accuracy.
  double conditioning_floor = 1e-2;
};

struct JacobianResult {
  double jac_numeric = 0.0;
  double jac_bound = 0.0;
  double bound_argument = 0.0;  // 1 + r c
  std::vector<double> ladder;   // s = r 2^{-k}, decreasing
  std::vector<double> ratio;    // |det D Phi_s| / (s^m (1 + s c)^n)
  std::vector<double> scaled_det;  // s^{-m} |det D Phi_s|
  double max_ratio_increase = 0.0; // max over consecutive rungs of ratio(s_big) - ratio(s_small)
};

namespace detail {

// Richardson-extrapolated central difference of a vector function.
template <class F>
Vector richardson_derivative(const F& fn, double h) {
  const Vector d1 = (fn(h) - fn(-h)) / (2.0 * h);
  const Vector d2 = (fn(0.5 * h) - fn(-0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace detail

/// |det D Phi_s| by finite differences in (chart coordinates, y-coordinates, t),
/// divided by the chart volume density.
inline double numeric_jacobian(const TransportModel& model, const PointState& base, const Vector& ycoords, double t,
                               double s, const JacobianOptions& opt = {}) {
  if (!model.analytic_chart()) throw Error(ErrorKind::HessianUnavailable, "Jacobians need an analytic chart backend");
  const ChartGeometry& chart = model.geometry().chart();
  const int n = chart.dim();
  const int m = model.m();
  const int dim = n + m;
  std::vector<int> seeds;
  model.at_chart(base.xi, &seeds);  // record the base frame's seed order
  // local feature scale: the curvature radius, at most 1
  double curvature = 1.0;
  for (const Vector& h : base.sff) curvature = std::max(curvature, h.norm());
  const double feature = 1.0 / curvature;
  Matrix D(dim, dim);
  for (int d = 0; d < n; ++d) {
    const double h = opt.chart_step * feature / base.jacobian.col(d).norm();
    if (!(h > 1e-13 * (1.0 + std::abs(base.xi[static_cast<std::size_t>(d)])))) {
      throw Error(ErrorKind::FdStepUnderflow, "chart step " + std::to_string(h) + " is below resolution");
    }
    auto fn = [&](double delta) {
      ChartPoint q = base.xi;
      q[static_cast<std::size_t>(d)] += delta;
      std::vector<int> sd = seeds;
      const PointState st = model.at_chart(q, &sd, base.index);
      return phi_map(st, ycoords, t, s);
    };
    D.col(d) = detail::richardson_derivative(fn, h);
  }
  const double radius = std::sqrt(std::max(1e-12, 1.0 - base.grad_u.squaredNorm()));
  const double h = opt.fibre_step * radius;
  for (int j = 0; j < m; ++j) {
    auto fn = [&](double delta) {
      Vector y = ycoords;
      double tt = t;
      if (j < m - 1) y(j) += delta;
      else tt += delta;
      // x is fixed along the fibre, so difference the displacement alone
      return Vector(s * (base.grad_u + y_vector(base, y) + tt * base.mean_curvature));
    };
    D.col(n + j) = detail::richardson_derivative(fn, h);
  }
  return std::abs(D.determinant()) / base.sqrt_det;
}

inline JacobianResult jacobian_and_bound(const TransportModel& model, const PointState& base, const Vector& ycoords,
                                         double t, double r, const Membership& membership,
                                         const JacobianOptions& opt = {}) {
  if (!membership.member) throw Error(ErrorKind::NotAMember, "Jacobian bound applies to A_r members only");
  const int n = model.n();
  const int m = model.m();
  const double f = model.density().f.values(base.index);
  const double rate = bound_rate(f, base.grad_u.squaredNorm(), n, t);
  JacobianResult out;
  out.bound_argument = 1.0 + r * rate;
  out.jac_bound = jacobian_bound(r, n, m, rate);
  for (double s = r; s >= opt.ladder_floor * r * (1.0 - 1e-12); s *= 0.5) {
    const double det = numeric_jacobian(model, base, ycoords, t, s, opt);
    const double arg = 1.0 + s * rate;
    out.ladder.push_back(s);
    out.scaled_det.push_back(det / std::pow(s, m));
    out.ratio.push_back(arg >= opt.conditioning_floor ? det / (std::pow(s, m) * std::pow(arg, n))
                                  : std::numeric_limits<double>::quiet_NaN());
    if (s == r) out.jac_numeric = det;
  }
  for (std::size_t k = 0; k + 1 < out.ratio.size(); ++k) {
    if (std::isnan(out.ratio[k]) || std::isnan(out.ratio[k + 1])) continue;
    out.max_ratio_increase = std::max(out.max_ratio_increase, out.ratio[k] - out.ratio[k + 1]);
  }
  return out;
}

/// Low-discrepancy points: the radical inverse in a prime base.
inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, scale = inv, out = 0.0;
  while (i > 0) {
    out += static_cast<double>(i % base) * scale;
    i /= base;
    scale *= inv;
  }
  return out;
}

/// Halton points of the unit ball in R^dim (cube points outside are skipped).
class HaltonBall {
 public:
  explicit HaltonBall(int dim, std::uint64_t start = 1) : dim_(dim), index_(start) {
    static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    if (dim < 1 || dim > 10) throw Error(ErrorKind::InvalidArgument, "Halton ball supports dimensions 1..10");
    bases_.assign(primes, primes + dim);
  }
  Vector next() {
    while (true) {
      Vector v(dim_);
      for (int d = 0; d < dim_; ++d) v(d) = 2.0 * radical_inverse(index_, bases_[static_cast<std::size_t>(d)]) - 1.0;
      ++index_;
      if (v.squaredNorm() < 1.0) return v;
    }
  }

 private:
  int dim_;
  std::uint64_t index_;
  std::vector<unsigned> bases_;
};

struct TransportSample {
  Index x_index = -1;
  Vector y;  // coordinates orthogonal to H
  double t = 0.0;
  double r = 0.0;
  Vector image;
  bool in_U = false;
  bool in_A_r = false;
  double jac_numeric = std::numeric_limits<double>::quiet_NaN();
  double jac_bound = std::numeric_limits<double>::quiet_NaN();
  double min_eig = std::numeric_limits<double>::quiet_NaN();
  double slack_min = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ratio_scan;
};

struct SweepOptions {
  std::vector<double> radii{0.5, 2.0, 8.0};
  int members_per_r = 1000;
  int max_candidates_per_r = 20000;
  std::uint64_t seed = 1;
  bool jacobians = true;
  MembershipOptions membership;
  JacobianOptions jacobian;
};

struct RadiusSummary {
  double r = 0.0;
  int candidates = 0;
  int members = 0;
  int bound_violations = 0;        // jac_numeric > jac_bound (1 + eps) + r^m eps^n
  int monotonicity_violations = 0; // ratio increases by more than eps along decreasing s
  int positivity_violations = 0;   // min eig of g + rA < -eps
  int t_range_violations = 0;
  int bound_argument_violations = 0;  // 1 + r c < -eps
  int trace_violations = 0;        // |tr A - (Delta u - n t)| > eps
  int am_hm_violations = 0;
  int small_s_violations = 0;      // |s^{-m} det - 1| > 1% at the smallest rung
  double min_min_eig = std::numeric_limits<double>::infinity();
  double max_bound_ratio = 0.0;    // max jac_numeric / jac_bound
  double max_ratio_increase = 0.0;
  double max_trace_error = 0.0;
  double max_small_s_error = 0.0;
  double min_bound_argument = std::numeric_limits<double>::infinity();
  double max_witness_error = 0.0;  // max |ratio - 1| over all rungs
};

struct SweepResult {
  std::vector<TransportSample> samples;
  std::vector<RadiusSummary> per_radius;
  double epsilon_h = 0.0;
  bool jacobians_checked = false;
  bool hessian_checked = false;

  int total(int RadiusSummary::*field) const {
    int out = 0;
    for (const auto& s : per_radius) out += s.*field;
    return out;
  }
};

/// AM-HM: sum 1/(1 + s l_i) >= n / (1 + (s/n) sum l_i) when every 1 + s l_i > 0.
inline bool am_hm_holds(const Vector& eigenvalues, double s, double tol = 1e-12) {
  const Index n = eigenvalues.size();
  double lhs = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = 1.0 + s * eigenvalues(i);
    if (!(d > 0.0)) return true;
    lhs += 1.0 / d;
  }
  // n / (1 + (s/n) tr A) written as n / mean(1 + s l_i) so both sides share rounding
  double mean = 0.0;
  for (Index i = 0; i < n; ++i) mean += (1.0 + s * eigenvalues(i)) / n;
  const double rhs = n / mean;
  return lhs >= rhs - tol * std::max(1.0, std::abs(rhs));
}

/// Randomized sweep over (x, y, t) for each r: x uniform over samples,
/// (y, t) from a Halton sequence in the ball of radius sqrt(1 - |grad u(x)|^2).
inline SweepResult run_transport_sweep(const TransportModel& model, const SweepOptions& opt) {
  const Geometry& g = model.geometry();
  const int n = model.n();
  const int m = model.m();
  const double eps = model.epsilon_h();
  SweepResult out;
  out.epsilon_h = eps;
  out.hessian_checked = g.is_chart();
  out.jacobians_checked = opt.jacobians && model.analytic_chart();
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<Index> pick(0, g.num_samples() - 1);
  for (double r : opt.radii) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "r must be positive");
    RadiusSummary sum;
    sum.r = r;
    HaltonBall halton(m);
    while (sum.members < opt.members_per_r && sum.candidates < opt.max_candidates_per_r) {
      ++sum.candidates;
      const Index x = pick(rng);
      const PointState s = model.at_sample(x);
      const double radius = std::sqrt(std::max(0.0, 1.0 - s.grad_u.squaredNorm())) * (1.0 - 1e-9);
      const Vector v = halton.next() * radius;
      TransportSample ts;
      ts.x_index = x;
      ts.y = v.head(m - 1);
      ts.t = v(m - 1);
      ts.r = r;
      ts.image = phi_map(s, ts.y, ts.t, r);
      const Membership mem = a_r_membership(model, s, ts.y, ts.t, r, opt.membership);
      ts.in_U = mem.in_U;
      ts.in_A_r = mem.member;
      ts.slack_min = mem.slack_min;
      if (mem.member) {
        ++sum.members;
        const double f = model.density().f.values(x);
        const double grad2 = s.grad_u.squaredNorm();
        const double rate = bound_rate(f, grad2, n, ts.t);
        const double arg = 1.0 + r * rate;
        sum.min_bound_argument = std::min(sum.min_bound_argument, arg);
        if (arg < -eps) ++sum.bound_argument_violations;
        if (!t_range_check(ts.t, r, f, grad2, n, eps).ok) ++sum.t_range_violations;
        ts.jac_bound = jacobian_bound(r, n, m, rate);
        if (out.hessian_checked) {
          const ShiftedHessianA a = shifted_hessian(s, ts.y, ts.t);
          ts.min_eig = positivity_check(a, r);
          sum.min_min_eig = std::min(sum.min_min_eig, ts.min_eig);
          if (ts.min_eig < -eps) ++sum.positivity_violations;
          const double trace_err =
              std::abs(a.A.trace() - (model.solution().laplacian_u(x) - n * ts.t));
          sum.max_trace_error = std::max(sum.max_trace_error, trace_err);
          if (trace_err > eps) ++sum.trace_violations;
          for (double sr : {0.25 * r, 0.5 * r, r})
            if (!am_hm_holds(a.eigenvalues, sr)) ++sum.am_hm_violations;
        }
        if (out.jacobians_checked) {
          const JacobianResult jr = jacobian_and_bound(model, s, ts.y, ts.t, r, mem, opt.jacobian);
          ts.jac_numeric = jr.jac_numeric;
          ts.ratio_scan = jr.ratio;
          if (jr.jac_numeric > jr.jac_bound * (1.0 + eps) + std::pow(r, m) * std::pow(eps, n)) ++sum.bound_violations;
          if (jr.bound_argument >= opt.jacobian.conditioning_floor) sum.max_bound_ratio = std::max(sum.max_bound_ratio, jr.jac_numeric / jr.jac_bound);
          if (jr.max_ratio_increase > eps) ++sum.monotonicity_violations;
          sum.max_ratio_increase = std::max(sum.max_ratio_increase, jr.max_ratio_increase);
          const double small = std::abs(jr.scaled_det.back() - 1.0);
          sum.max_small_s_error = std::max(sum.max_small_s_error, small);
          if (small > 0.01) ++sum.small_s_violations;
          for (double q : jr.ratio)
            if (!std::isnan(q)) sum.max_witness_error = std::max(sum.max_witness_error, std::abs(q - 1.0));
        }
      }
      out.samples.push_back(std::move(ts));
    }
    out.per_radius.push_back(sum);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& sweep, int m) {
  os << "x_index";
  for (int j = 1; j < m; ++j) os << ",y" << j;
  os << ",t,r,in_U,in_A_r,jac_numeric,jac_bound,min_eig,slack_min\n";
  os.precision(17);
  for (const TransportSample& s : sweep.samples) {
    os << s.x_index;
    for (Index j = 0; j < s.y.size(); ++j) os << ',' << s.y(j);
    os << ',' << s.t << ',' << s.r << ',' << (s.in_U ? 1 : 0) << ',' << (s.in_A_r ? 1 : 0) << ',' << s.jac_numeric
       << ',' << s.jac_bound << ',' << s.min_eig << ',' << s.slack_min << '\n';
  }
}

struct CoverageFailure {
  Vector p;
  Index x_index = -1;
  double match_error = 0.0;
  double slack_min = 0.0;
  double u_norm = 0.0;
};

struct CoverageResult {
  int trials = 0;
  int attempts = 0;
  int sampled = 0;
  int covered = 0;
  bool empty_region = false;
  double fraction = 1.0;
  double max_match_error = 0.0;
  double matcher_tolerance = 0.0;
  std::vector<CoverageFailure> failures;

  bool pass() const { return empty_region || covered == sampled; }
};

namespace detail {

// Newton on F(xi) = r u(xi) + |X(xi) - p|^2 / 2 over an analytic chart. Steps
// are accepted when F decreases, or when F is flat to rounding and the
// gradient shrinks.
inline ChartPoint refine_minimizer(const TransportModel& model, ChartPoint xi, const Vector& p, double r) {
  const ChartGeometry& chart = model.geometry().chart();
  const Vector& u = model.solution().u.values;
  const int n = chart.dim();
  struct Eval {
    double value;
    Vector grad;
    Matrix hess;
  };
  auto eval = [&](const ChartPoint& q) {
    const ImmersionJet jet = chart.jet(q);
    const ChartLocalJet uj = chart_local_jet(chart, u, q);
    const Vector diff = jet.position - p;
    Eval e{r * uj.value + 0.5 * diff.squaredNorm(), r * uj.d1 + jet.first.transpose() * diff,
           r * uj.d2 + jet.first.transpose() * jet.first};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e.hess(i, j) += diff.dot(jet.d2(i, j));
    return e;
  };
  double limit = std::numeric_limits<double>::infinity();
  for (int d = 0; d < n; ++d) limit = std::min(limit, chart.axis(d).spacing);
  Eval cur = eval(xi);
  for (int it = 0; it < 40; ++it) {
    Vector step;
    Eigen::LLT<Matrix> llt(cur.hess);
    if (llt.info() == Eigen::Success) step = -llt.solve(cur.grad);
    else step = -cur.grad / cur.hess.diagonal().cwiseAbs().maxCoeff();
    if (step.norm() > limit) step *= limit / step.norm();
    double lambda = 1.0;
    bool moved = false;
    for (int back = 0; back < 30 && !moved; ++back, lambda *= 0.5) {
      ChartPoint q = xi;
      for (int d = 0; d < n; ++d) q[static_cast<std::size_t>(d)] += lambda * step(d);
      const Eval next = eval(q);
      const bool flat = std::abs(next.value - cur.value) <= 1e-13 * std::abs(cur.value);
      if (next.value < cur.value || (flat && next.grad.norm() < cur.grad.norm())) {
        xi = q;
        cur = next;
        moved = true;
      }
    }
    if (!moved || lambda * step.norm() < 1e-16 * limit) break;
  }
  return xi;
}

inline double diameter_lower_bound(const Matrix& pts) {
  Index far = 0;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector a = pts.col(far);
    (pts.colwise() - a).colwise().squaredNorm().maxCoeff(&far);
  }
  const Vector a = pts.col(far);
  return std::sqrt((pts.colwise() - a).colwise().squaredNorm().maxCoeff());
}

}  // namespace detail

/// Samples p with sigma r < |x - p| < r for every sample x and checks that
/// p = Phi_r(x, y, t) for some A_r member with |grad u|^2 + |y|^2 + t^2 > sigma^2.
/// The preimage x minimizes r u + |. - p|^2 / 2 (Newton-refined on analytic
/// charts); y and t come from the normal part of (p - x) / r.
inline CoverageResult covering_montecarlo(const TransportModel& model, double r, double sigma, int trials,
                                          std::uint64_t seed, const MembershipOptions& mopt = {}) {
  if (!(sigma >= 0.0 && sigma < 1.0)) throw Error(ErrorKind::InvalidArgument, "sigma must lie in [0, 1)");
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "r must be positive");
  const Geometry& g = model.geometry();
  const Matrix& pts = g.positions();
  const Vector& u = model.solution().u.values;
  CoverageResult out;
  out.trials = trials;
  out.matcher_tolerance = model.analytic_chart() ? 1e-8 * r : 2.0 * g.spacing();  // mesh: relative to |p - x|
  if (detail::diameter_lower_bound(pts) >= 2.0 * r) {
    out.empty_region = true;
    return out;
  }
  const Vector lo = pts.rowwise().minCoeff().array() - r;
  const Vector hi = pts.rowwise().maxCoeff().array() + r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int max_attempts = 200 * std::max(trials, 1);
  const double lo2 = sigma * sigma * r * r, hi2 = r * r;
  while (out.sampled < trials && out.attempts < max_attempts) {
    ++out.attempts;
    Vector p(pts.rows());
    for (Index d = 0; d < p.size(); ++d) p(d) = lo(d) + (hi(d) - lo(d)) * unit(rng);
    const Vector d2 = (pts.colwise() - p).colwise().squaredNorm().transpose();
    if (!(d2.minCoeff() > lo2 && d2.maxCoeff() < hi2)) continue;
    ++out.sampled;

    Index best = 0;
    (r * u + 0.5 * d2).minCoeff(&best);
    PointState s;
    if (model.analytic_chart()) {
      const ChartPoint xi = detail::refine_minimizer(model, g.chart().node_point(best), p, r);
      std::vector<int> seeds;
      s = model.at_chart(xi, &seeds);
    } else {
      s = model.at_sample(best);
    }
    const Vector w = (p - s.position) / r;
    const Vector w_tan = s.tangent * (s.tangent.transpose() * w);
    const Vector w_nor = w - w_tan;
    const double h2 = s.mean_curvature.squaredNorm();
    const double t = h2 > 0.0 ? w_nor.dot(s.mean_curvature) / h2 : 0.0;
    const Vector y = w_nor - t * s.mean_curvature;
    const Vector ycoords = s.normals.cols() > 1 ? Vector(s.y_frame().transpose() * y) : Vector(0);
    const double match = r * (w_tan - s.grad_u).norm() + r * (y - y_vector(s, ycoords)).norm();
    const double tol = model.analytic_chart() ? out.matcher_tolerance : out.matcher_tolerance * (p - s.position).norm();
    const Membership mem = a_r_membership(model, s, ycoords, t, r, mopt);
    const double norm2 = u_norm2(s, ycoords, t);
    out.max_match_error = std::max(out.max_match_error, match);
    if (match <= tol && mem.member && norm2 > sigma * sigma) {
      ++out.covered;
    } else if (out.failures.size() < 20) {
      out.failures.push_back({p, s.index, match, mem.slack_min, std::sqrt(norm2)});
    }
  }
  if (out.sampled == 0) out.empty_region = true;
  out.fraction = out.sampled > 0 ? static_cast<double>(out.covered) / out.sampled : 1.0;
  return out;
}

}  // namespace abplab
