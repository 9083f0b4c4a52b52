#pragma once

// Density normalization, the potential equation
//   div(f grad u) = n/(n+1) f log f - |grad f|^2 / (2n f),
// and the pointwise bound on the Laplacian of its solution.

#include <cmath>
#include <limits>

#include "abplab/fields.hpp"

namespace abplab {

struct NormalizedDensity {
  ScalarField f;
  double scale_log = 0.0;  // log c with f = c * f_in
  double residual = 0.0;   // |n/(n+1) int f log f - 1/(2n) int |grad f|^2/f|
  double mass = 0.0;       // int f
};

namespace detail {

inline void check_density(const Vector& f) {
  for (Index i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f(i))) throw Error(ErrorKind::NonFinite, "density not finite at sample " + std::to_string(i));
    if (!(f(i) > 0.0)) throw Error(ErrorKind::NonPositiveDensity, "f <= 0 at sample " + std::to_string(i));
  }
}

/// Per-sample |grad f|^2 / f.
inline Vector fisher_density(const Geometry& g, const Vector& f) {
  const Matrix grad = gradient(g, f);
  return grad.colwise().squaredNorm().transpose().cwiseQuotient(f);
}

inline Vector entropy_density(const Vector& f) { return f.array() * f.array().log(); }

// A load whose mean-free part is this small relative to the load itself is
// rounding of a constant; the system is then treated as homogeneous.
inline constexpr double kRangeFloor = 1e-13;

}  // namespace detail

/// Rescales f so that n/(n+1) int f log f = 1/(2n) int |grad f|^2 / f.
inline NormalizedDensity normalize_density(const Geometry& g, const ScalarField& f) {
  check_binding(f, g);
  detail::check_density(f.values);
  const int n = g.dim();
  const double mass = integrate(g, f.values);
  const double fisher = integrate(g, detail::fisher_density(g, f.values));
  const double entropy = integrate(g, detail::entropy_density(f.values));
  const double log_c = ((n + 1.0) / (2.0 * n * n) * fisher - entropy) / mass;
  if (!std::isfinite(log_c)) throw Error(ErrorKind::NonFinite, "normalization integrals are not finite");

  NormalizedDensity out;
  out.f = ScalarField(g, f.values * std::exp(log_c));
  out.scale_log = log_c;
  out.mass = integrate(g, out.f.values);
  const double lhs = n / (n + 1.0) * integrate(g, detail::entropy_density(out.f.values));
  const double rhs = integrate(g, detail::fisher_density(g, out.f.values)) / (2.0 * n);
  out.residual = std::abs(lhs - rhs);
  return out;
}

struct PotentialOptions {
  double tolerance = 1e-10;        // relative residual |L u - M b| / |M b|
  double max_iteration_factor = 50.0;  // max iterations = factor * sqrt(N)
  double compatibility_tol = 1e-8; // |int b| <= tol * int |b|
  double omega_band = 1e-6;        // Omega = {|grad u| < 1 - band}
};

struct PotentialSolution {
  ScalarField u;                 // mass-weighted mean zero
  Matrix grad_u;                 // ambient, one column per sample
  Vector laplacian_u;            // unweighted Delta_h u
  Vector rhs;                    // b per sample
  double solver_residual = 0.0;  // |L u - P M b| / |P M b|, P removing the constant mode
  int iterations = 0;
  std::vector<bool> omega_mask;
  double omega_band = 1e-6;
  double min_diagonal = 0.0;     // extremal diagonal entries of the weighted operator
  double max_diagonal = 0.0;
};

/// Solves L x = rhs for symmetric negative semidefinite L with kernel the
/// constants, by Jacobi-preconditioned CG on -L with the constant mode
/// projected out. Returns the iteration count; throws on non-convergence.
inline int conjugate_gradient(const Eigen::SparseMatrix<double>& L, const Vector& rhs, Vector& x, double tol,
                              int max_iter, double* final_residual = nullptr) {
  const Index count = rhs.size();
  auto project = [](Vector& v) { v.array() -= v.mean(); };
  Vector b = -rhs;
  project(b);
  const double bnorm = b.norm();
  x = Vector::Zero(count);
  if (bnorm <= detail::kRangeFloor * rhs.norm()) {
    if (final_residual) *final_residual = 0.0;
    return 0;
  }
  const Vector inv_diag = (-Vector(L.diagonal())).cwiseInverse();
  Vector r = b;
  Vector z = inv_diag.cwiseProduct(r);
  project(z);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    const Vector q = -(L * p);
    const double alpha = rz / p.dot(q);
    x += alpha * p;
    r -= alpha * q;
    if (it % 50 == 0) r = b + L * x;  // refresh against drift
    const double rel = r.norm() / bnorm;
    if (rel <= tol) {
      project(x);
      if (final_residual) *final_residual = rel;
      return it;
    }
    z = inv_diag.cwiseProduct(r);
    project(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw Error(ErrorKind::SolverNonConvergence,
              "CG did not reach relative residual " + std::to_string(tol) + " in " + std::to_string(max_iter) +
                  " iterations (at " + std::to_string((b + L * x).norm() / bnorm) + ")");
}

inline PotentialSolution solve_potential(const Geometry& g, const NormalizedDensity& density,
                                         const PotentialOptions& opt = {}) {
  if (!g.connected()) {
    throw Error(ErrorKind::Disconnected, "potential equation needs a connected submanifold (" +
                                             std::to_string(g.component_count()) + " components)");
  }
  const Vector& f = density.f.values;
  check_binding(density.f, g);
  detail::check_density(f);
  const int n = g.dim();
  const Index count = g.num_samples();

  PotentialSolution sol;
  sol.rhs = n / (n + 1.0) * detail::entropy_density(f) - detail::fisher_density(g, f) / (2.0 * n);
  const Vector load = g.weights().cwiseProduct(sol.rhs);
  const double total = load.sum();
  const double total_abs = load.cwiseAbs().sum();
  // absolute floor at rounding level for f constant, where b vanishes identically
  if (std::abs(total) > opt.compatibility_tol * total_abs + 1e-14 * density.mass) {
    throw Error(ErrorKind::IncompatibleRhs, "integral of the right-hand side is " + std::to_string(total) +
                                                " against L1 norm " + std::to_string(total_abs));
  }

  const WeightedLaplacian op = build_weighted_laplacian(g, f);
  sol.min_diagonal = op.min_diagonal;
  sol.max_diagonal = op.max_diagonal;
  const int max_iter = static_cast<int>(std::ceil(opt.max_iteration_factor * std::sqrt(static_cast<double>(count))));
  Vector u;
  sol.iterations = conjugate_gradient(op.matrix, load, u, opt.tolerance, max_iter);
  // measured against the part of the load in the range of L; the constant
  // mode left after the compatibility check is rounding
  Vector range_load = load;
  range_load.array() -= load.mean();
  const double load_norm = range_load.norm();
  sol.solver_residual = load_norm > detail::kRangeFloor * load.norm() ? (op.matrix * u - range_load).norm() / load_norm : 0.0;

  u.array() -= g.weights().dot(u) / g.total_volume();
  sol.u = ScalarField(g, u);
  sol.grad_u = gradient(g, u);
  sol.laplacian_u = build_laplacian(g).pointwise(u);
  sol.omega_band = opt.omega_band;
  sol.omega_mask.resize(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) sol.omega_mask[static_cast<std::size_t>(i)] = sol.grad_u.col(i).norm() < 1.0 - opt.omega_band;
  return sol;
}

struct LemmaCheck {
  Vector slack;              // n(f^{1/(n+1)} - sqrt(1 - |grad u|^2)) - Delta u, NaN outside Omega
  Vector intermediate_slack; // n/(n+1) log f + n/2 |grad u|^2 - Delta u, NaN outside Omega
  double min_slack = std::numeric_limits<double>::infinity();
  double min_intermediate_slack = std::numeric_limits<double>::infinity();
  Index argmin = -1;
  Index omega_count = 0;
  bool intermediate_tighter = true;  // first bound <= final bound at every Omega sample
  double epsilon_h = 0.0;
  bool pass = false;
};

inline LemmaCheck lemma_delta_u_check(const Geometry& g, const PotentialSolution& sol, const NormalizedDensity& density,
                                      double epsilon_h) {
  check_binding(sol.u, g);
  const int n = g.dim();
  const Index count = g.num_samples();
  const Vector& f = density.f.values;
  LemmaCheck out;
  out.epsilon_h = epsilon_h;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.slack = Vector::Constant(count, nan);
  out.intermediate_slack = Vector::Constant(count, nan);
  for (Index i = 0; i < count; ++i) {
    if (!sol.omega_mask[static_cast<std::size_t>(i)]) continue;
    ++out.omega_count;
    const double grad2 = sol.grad_u.col(i).squaredNorm();
    const double final_bound = n * (std::pow(f(i), 1.0 / (n + 1)) - std::sqrt(1.0 - grad2));
    const double first_bound = n / (n + 1.0) * std::log(f(i)) + 0.5 * n * grad2;
    out.slack(i) = final_bound - sol.laplacian_u(i);
    out.intermediate_slack(i) = first_bound - sol.laplacian_u(i);
    if (first_bound > final_bound + 1e-12) out.intermediate_tighter = false;
    if (out.slack(i) < out.min_slack) {
      out.min_slack = out.slack(i);
      out.argmin = i;
    }
    out.min_intermediate_slack = std::min(out.min_intermediate_slack, out.intermediate_slack(i));
  }
  out.pass = out.omega_count == 0 || out.min_slack >= -epsilon_h;
  return out;
}

}  // namespace abplab
