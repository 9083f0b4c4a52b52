#pragma once

// Sharp constants, the log-Sobolev deficit for |H| = 1 submanifolds, and the
// sphere baselines (minimal submanifolds of S^{n+m}, and S^n itself).

#include <cmath>
#include <numbers>
#include <string>

#include "json.hpp"

#include "abplab/fields.hpp"

namespace abplab {

/// |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2).
inline double sphere_volume(int k) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "sphere dimension must be >= 0");
  const double a = 0.5 * (k + 1);
  return 2.0 * std::exp(a * std::log(std::numbers::pi) - std::lgamma(a));
}

/// |B^k| = |S^{k-1}| / k, with |B^0| = 1.
inline double ball_volume(int k) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "ball dimension must be >= 0");
  if (k == 0) return 1.0;
  return sphere_volume(k - 1) / k;
}

enum class InequalityKind { Main, PhamM12, PhamM3Plus, Beckner };

inline std::string to_string(InequalityKind k) {
  switch (k) {
    case InequalityKind::Main: return "main";
    case InequalityKind::PhamM12: return "pham_m12";
    case InequalityKind::PhamM3Plus: return "pham_m3plus";
    case InequalityKind::Beckner: return "beckner";
  }
  return "main";
}

struct SharpConstants {
  int n = 0;
  int m = 0;
  double theta = 1.0;
  InequalityKind kind = InequalityKind::Main;
  double additive_constant = 0.0;     // C in int f (log f + C)
  double sharp_area = 0.0;            // exp(C)
  double gradient_coefficient = 0.0;  // in front of int |grad f|^2 / f
};

inline void check_dims(int n, int m) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "m must be >= 1");
}

inline SharpConstants log_sobolev_constant(int n, int m, double theta = 1.0) {
  check_dims(n, m);
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "theta must lie in (0, 1], got " + std::to_string(theta));
  }
  SharpConstants c;
  c.n = n;
  c.m = m;
  c.theta = theta;
  c.kind = InequalityKind::Main;
  const double base = m <= 2 ? std::log(sphere_volume(n))
                             : std::log((n + 1) * sphere_volume(n + m - 1) / sphere_volume(m - 2));
  c.additive_constant = base + std::log(theta);
  c.sharp_area = std::exp(c.additive_constant);
  c.gradient_coefficient = (n + 1.0) / (2.0 * n * n);
  return c;
}

/// Baseline constants; `m` is the codimension inside the unit sphere S^{n+m}.
inline SharpConstants baseline_constant(InequalityKind kind, int n, int m) {
  check_dims(n, m);
  SharpConstants c;
  c.n = n;
  c.m = m;
  c.kind = kind;
  switch (kind) {
    case InequalityKind::PhamM12:
      if (m > 2) throw Error(ErrorKind::InvalidArgument, "pham_m12 needs codimension 1 or 2 in the sphere");
      c.additive_constant = std::log(sphere_volume(n));
      c.gradient_coefficient = (n + 1.0) / (2.0 * n * n);
      break;
    case InequalityKind::PhamM3Plus:
      if (m < 3) throw Error(ErrorKind::InvalidArgument, "pham_m3plus needs codimension >= 3 in the sphere");
      c.additive_constant = std::log((n + 1) * sphere_volume(n + m) / sphere_volume(m - 1));
      c.gradient_coefficient = (n + 1.0) / (2.0 * n * n);
      break;
    case InequalityKind::Beckner:
      if (m != 1) throw Error(ErrorKind::InvalidArgument, "beckner needs Sigma = S^n");
      c.additive_constant = std::log(sphere_volume(n));
      c.gradient_coefficient = 1.0 / (2.0 * n);
      break;
    case InequalityKind::Main:
      return log_sobolev_constant(n, m);
  }
  c.sharp_area = std::exp(c.additive_constant);
  return c;
}

struct EqualityFlags {
  bool f_constant_within_tol = false;
  bool umbilical_within_tol = false;
  bool area_matches_sharp_value = false;
  double f_relative_spread = 0.0;
  double max_umbilicity_defect = 0.0;
  double area_relative_error = 0.0;
};

struct InequalityTolerances {
  double mean_curvature = 1e-2;  // | |H| - 1 | on every sample
  double f_constant = 1e-6;      // (max f - min f) / mean f
  double umbilical_factor = 5.0; // times epsilon_h
  double area_relative = 1e-2;
  double epsilon_h = 0.0;
  double unit_sphere = 1e-8;     // | |x| - 1 | for the sphere baselines
};

struct InequalityReport {
  std::string scenario;
  SharpConstants constants;
  double lhs = 0.0;
  double rhs = 0.0;
  double deficit = 0.0;
  double mass = 0.0;  // int f
  double area = 0.0;
  EqualityFlags equality;
  InequalityTolerances tolerances;
  Index samples = 0;
  int refinement = -1;
  std::string geometry_kind;
  double mean_curvature_deviation = 0.0;

  /// Deficit is nonnegative up to the discretization tolerance, measured
  /// relative to int f so that the verdict is scale invariant.
  bool deficit_ok() const { return deficit >= -tolerances.epsilon_h * mass; }
};

namespace detail {

inline void check_positive_density(const Vector& f) {
  for (Index i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f(i))) throw Error(ErrorKind::NonFinite, "f not finite at sample " + std::to_string(i));
    if (!(f(i) > 0.0)) throw Error(ErrorKind::NonPositiveDensity, "f <= 0 at sample " + std::to_string(i));
  }
}

inline InequalityReport evaluate_with(const Geometry& g, const CurvatureData& c, const ScalarField& f,
                                      const SharpConstants& k, const InequalityTolerances& tol) {
  check_binding(f, g);
  const Vector& v = f.values;
  const Vector& w = g.weights();
  InequalityReport r;
  r.constants = k;
  r.tolerances = tol;
  r.samples = g.num_samples();
  r.refinement = g.refinement();
  r.geometry_kind = g.is_chart() ? "chart" : "mesh";
  r.mass = w.dot(v);
  r.area = g.total_volume();
  // int f (log f + C) - F log F = int f log(f e^C / F), summed without cancellation
  const double shift = k.additive_constant - std::log(r.mass);
  r.lhs = w.dot(Vector((v.array() * (v.array().log() + shift)).matrix()));
  const Matrix grad = gradient(g, v);
  r.rhs = k.gradient_coefficient * w.dot(grad.colwise().squaredNorm().transpose().cwiseQuotient(v));
  r.deficit = r.rhs - r.lhs;

  r.equality.f_relative_spread = (v.maxCoeff() - v.minCoeff()) / (r.mass / r.area);
  r.equality.f_constant_within_tol = r.equality.f_relative_spread <= tol.f_constant;
  r.equality.max_umbilicity_defect = c.umbilicity_defect.maxCoeff();
  r.equality.umbilical_within_tol = r.equality.max_umbilicity_defect <= tol.umbilical_factor * tol.epsilon_h;
  r.equality.area_relative_error = std::abs(r.area - k.sharp_area) / k.sharp_area;
  r.equality.area_matches_sharp_value = r.equality.area_relative_error <= tol.area_relative;
  return r;
}

}  // namespace detail

/// Deficit of the sharp inequality for a submanifold with |H| = 1. The
/// codimension of `g` must equal constants.m.
inline InequalityReport evaluate_log_sobolev(const Geometry& g, const CurvatureData& c, const ScalarField& f,
                                             const SharpConstants& constants, const InequalityTolerances& tol) {
  if (c.geometry_id != g.id()) throw Error(ErrorKind::InvalidArgument, "curvature belongs to a different geometry");
  if (constants.n != g.dim() || constants.m != g.codim()) {
    throw Error(ErrorKind::InvalidArgument, "constants are for (n, m) = (" + std::to_string(constants.n) + ", " +
                                                std::to_string(constants.m) + ") but the geometry has (" +
                                                std::to_string(g.dim()) + ", " + std::to_string(g.codim()) + ")");
  }
  const MeanCurvatureCheck hc = check_unit_mean_curvature(c, tol.mean_curvature);
  if (!hc.ok) {
    throw Error(ErrorKind::MeanCurvatureHypothesis,
                "max | |H| - 1 | = " + std::to_string(hc.max_deviation) + " exceeds " + std::to_string(tol.mean_curvature));
  }
  detail::check_positive_density(f.values);
  if (!g.connected()) {
    throw Error(ErrorKind::Disconnected, std::to_string(g.component_count()) + " connected components");
  }
  InequalityReport r = detail::evaluate_with(g, c, f, constants, tol);
  r.mean_curvature_deviation = hc.max_deviation;
  return r;
}

/// Baselines on submanifolds of the unit sphere S^{ambient-1}.
inline InequalityReport evaluate_baseline(const Geometry& g, const CurvatureData& c, const ScalarField& f,
                                          InequalityKind which, const InequalityTolerances& tol) {
  if (which == InequalityKind::Main) throw Error(ErrorKind::InvalidArgument, "use evaluate_log_sobolev for main");
  if (c.geometry_id != g.id()) throw Error(ErrorKind::InvalidArgument, "curvature belongs to a different geometry");
  const Vector radii = g.positions().colwise().norm().transpose();
  const double off = (radii.array() - 1.0).abs().maxCoeff();
  if (off > tol.unit_sphere) {
    throw Error(ErrorKind::NotOnUnitSphere, "max | |x| - 1 | = " + std::to_string(off));
  }
  const int sphere_codim = g.ambient_dim() - 1 - g.dim();
  if (which == InequalityKind::Beckner && sphere_codim != 0) {
    throw Error(ErrorKind::InvalidArgument, "beckner baseline needs Sigma = S^n");
  }
  detail::check_positive_density(f.values);
  const int m = which == InequalityKind::Beckner ? 1 : sphere_codim;
  return detail::evaluate_with(g, c, f, baseline_constant(which, g.dim(), m), tol);
}

inline nlohmann::json to_json(const SharpConstants& c) {
  return {{"n", c.n},
          {"m", c.m},
          {"theta", c.theta},
          {"inequality", to_string(c.kind)},
          {"additive_constant", c.additive_constant},
          {"sharp_area", c.sharp_area},
          {"gradient_coefficient", c.gradient_coefficient}};
}

inline nlohmann::json to_json(const InequalityReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["n"] = r.constants.n;
  j["m"] = r.constants.m;
  j["theta"] = r.constants.theta;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["deficit"] = r.deficit;
  j["constants"] = to_json(r.constants);
  j["equality_flags"] = {{"f_constant_within_tol", r.equality.f_constant_within_tol},
                         {"umbilical_within_tol", r.equality.umbilical_within_tol},
                         {"area_matches_sharp_value", r.equality.area_matches_sharp_value},
                         {"f_relative_spread", r.equality.f_relative_spread},
                         {"max_umbilicity_defect", r.equality.max_umbilicity_defect},
                         {"area_relative_error", r.equality.area_relative_error}};
  j["mesh"] = {{"samples", r.samples}, {"refinement", r.refinement}, {"kind", r.geometry_kind}};
  j["tolerances"] = {{"epsilon_h", r.tolerances.epsilon_h},
                     {"mean_curvature", r.tolerances.mean_curvature},
                     {"f_constant", r.tolerances.f_constant},
                     {"umbilical", r.tolerances.umbilical_factor * r.tolerances.epsilon_h},
                     {"area_relative", r.tolerances.area_relative},
                     {"deficit_floor", -r.tolerances.epsilon_h * r.mass}};
  return j;
}

}  // namespace abplab
