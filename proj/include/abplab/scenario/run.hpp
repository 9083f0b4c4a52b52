#pragma once

// Scenario pipeline: geometry -> curvature -> density -> hypotheses ->
// inequality -> normalization -> potential -> Delta u bound -> transport
// sweep -> covering, plus refinement studies and report emission.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "abplab/geometry/curvature.hpp"
#include "abplab/geometry/generators.hpp"
#include "abplab/geometry/io.hpp"
#include "abplab/inequality.hpp"
#include "abplab/potential.hpp"
#include "abplab/scenario/config.hpp"
#include "abplab/transport.hpp"

namespace abplab {

inline constexpr const char* kVersion = "0.1.0";

struct CheckResult {
  std::string name;
  std::string status;  // pass | fail | skipped
  std::string reason;
  double value = std::numeric_limits<double>::quiet_NaN();
};

struct PotentialSummary {
  double scale_log = 0.0;
  double normalization_residual = 0.0;
  double solver_residual = 0.0;
  int iterations = 0;
  Index omega_count = 0;
  double max_grad_u = 0.0;
};

struct LemmaSummary {
  double min_slack = 0.0;
  double min_intermediate_slack = 0.0;
  Index argmin = -1;
  Index omega_count = 0;
  bool intermediate_tighter = true;
  bool pass = false;
};

struct ConvergenceRow {
  int level = 0;
  Index samples = 0;
  double epsilon_h = 0.0;
  double deficit = 0.0;
  double deficit_error = 0.0;  // |deficit - reference|
  double min_slack = 0.0;
  double max_bound_violation = 0.0;  // max(0, jac_numeric / jac_bound - 1) over the sweep
  double deficit_order = std::numeric_limits<double>::quiet_NaN();  // against the previous row
  double slack_order = std::numeric_limits<double>::quiet_NaN();
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string timestamp;
};

struct RunReport {
  Scenario scenario;
  InequalityReport inequality;
  double epsilon_h = 0.0;
  int codim = 0;  // of the geometry actually built
  PotentialSummary potential;
  LemmaSummary lemma;
  bool sweep_ran = false;
  SweepResult sweep;
  bool covering_ran = false;
  CoverageResult coverage;
  std::vector<ConvergenceRow> convergence;
  std::vector<CheckResult> checks;
  Provenance provenance;

  bool all_pass() const {
    for (const auto& c : checks)
      if (c.status == "fail") return false;
    return true;
  }
  const CheckResult* check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Scenario at another refinement level; the Clifford grid follows 8 * 2^level.
inline Scenario with_level(Scenario s, int level) {
  s.refinement = level;
  if (s.geometry == "clifford") s.grid = 8 << level;
  return s;
}

namespace detail {

template <class F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline Geometry build_geometry(const Scenario& s) {
  Geometry g = [&] {
    if (s.geometry == "sphere") return make_sphere(s.n == 0 ? 2 : s.n, s.refinement);
    if (s.geometry == "sphere_chart") return make_sphere_chart(s.n == 0 ? 2 : s.n, s.refinement);
    if (s.geometry == "circle") return make_sphere(1, s.refinement);
    if (s.geometry == "clifford") return make_clifford_torus(s.grid);
    if (s.geometry == "two_spheres") return make_two_spheres(s.refinement);
    std::ifstream is(s.file);
    if (!is) throw Error(ErrorKind::Io, "cannot open geometry file " + s.file);
    return read_geometry(is);
  }();
  if (s.n != 0 && s.n != g.dim()) {
    throw Error(ErrorKind::UnsupportedDimension, s.geometry + " has dimension " + std::to_string(g.dim()) +
                                                     ", configured n = " + std::to_string(s.n));
  }
  if (s.radius != 1.0) g = scaled(g, s.radius);
  if (s.m != 0) {
    if (s.m < g.codim()) {
      throw Error(ErrorKind::InvalidArgument, s.geometry + " needs codimension >= " + std::to_string(g.codim()));
    }
    if (s.m > g.codim()) g = embedded(g, s.m - g.codim());
  }
  return g;
}

/// f at every sample from the scenario's expression.
inline ScalarField evaluate_density(const Geometry& g, const Scenario& s) {
  if (s.density == "constant") return ScalarField::constant(g, 1.0);
  const Expression e = Expression::parse(s.density);
  if (e.max_coordinate() > g.ambient_dim()) {
    throw Error(ErrorKind::Parse, "density uses x" + std::to_string(e.max_coordinate()) + " but the ambient dimension is " +
                                      std::to_string(g.ambient_dim()));
  }
  if (e.uses_angles() && !g.is_chart()) throw Error(ErrorKind::Parse, "chart angles need a chart geometry");
  Vector f(g.num_samples());
  const Matrix& x = g.positions();
  for (Index k = 0; k < g.num_samples(); ++k) {
    ChartPoint xi{0.0, 0.0};
    if (g.is_chart()) xi = g.chart().node_point(k);
    f(k) = e.eval(x.col(k).data(), g.ambient_dim(), xi.data(), g.is_chart() ? g.dim() : 0);
    if (!std::isfinite(f(k))) throw Error(ErrorKind::NonFinite, "density not finite at sample " + std::to_string(k));
    if (!(f(k) > 0.0)) throw Error(ErrorKind::NonPositiveDensity, "density <= 0 at sample " + std::to_string(k));
  }
  return ScalarField(g, f);
}

inline RunReport run_scenario(const Scenario& s) {
  detail::staged("config", [&] {
    validate(s);
    return 0;
  });
  RunReport rep;
  rep.scenario = s;
  rep.provenance.config_hash = config_hash(s);
  rep.provenance.seed = s.seed;
  rep.provenance.timestamp = detail::utc_timestamp();

  const Geometry g = detail::staged("geometry", [&] { return build_geometry(s); });
  const CurvatureData curv = detail::staged("curvature", [&] { return compute_curvature(g); });
  rep.epsilon_h = detail::staged("curvature", [&] { return epsilon_h(g, curv); });
  rep.codim = g.codim();
  const ScalarField f = detail::staged("density", [&] { return evaluate_density(g, s); });

  InequalityTolerances tol;
  tol.mean_curvature = s.mean_curvature_tol;
  tol.f_constant = s.f_constant_tol;
  tol.area_relative = s.area_relative_tol;
  tol.umbilical_factor = s.umbilical_factor;
  tol.epsilon_h = rep.epsilon_h;

  rep.inequality = detail::staged("hypothesis", [&] {
    if (s.inequality == "main") {
      const MeanCurvatureCheck hc = check_unit_mean_curvature(curv, tol.mean_curvature);
      if (!hc.ok) {
        throw Error(ErrorKind::MeanCurvatureHypothesis, "max | |H| - 1 | = " + std::to_string(hc.max_deviation) +
                                                            " exceeds " + std::to_string(tol.mean_curvature));
      }
      if (!g.connected()) {
        throw Error(ErrorKind::Disconnected, std::to_string(g.component_count()) + " connected components");
      }
      return evaluate_log_sobolev(g, curv, f, log_sobolev_constant(g.dim(), g.codim(), s.theta), tol);
    }
    if (s.inequality == "beckner") return evaluate_baseline(g, curv, f, InequalityKind::Beckner, tol);
    const int sphere_codim = g.ambient_dim() - 1 - g.dim();
    return evaluate_baseline(g, curv, f, sphere_codim <= 2 ? InequalityKind::PhamM12 : InequalityKind::PhamM3Plus,
                             tol);
  });
  rep.inequality.scenario = s.name;
  rep.checks.push_back({"deficit", rep.inequality.deficit_ok() ? "pass" : "fail",
                        "deficit >= -epsilon_h * int f", rep.inequality.deficit});

  const NormalizedDensity nd = detail::staged("normalize", [&] { return normalize_density(g, f); });
  PotentialOptions popt;
  popt.tolerance = s.cg_tol;
  const PotentialSolution sol = detail::staged("potential", [&] { return solve_potential(g, nd, popt); });
  rep.potential.scale_log = nd.scale_log;
  rep.potential.normalization_residual = nd.residual;
  rep.potential.solver_residual = sol.solver_residual;
  rep.potential.iterations = sol.iterations;
  rep.potential.max_grad_u = sol.grad_u.colwise().norm().maxCoeff();
  for (bool b : sol.omega_mask) rep.potential.omega_count += b ? 1 : 0;
  rep.checks.push_back({"solver_residual", sol.solver_residual <= 1e-8 ? "pass" : "fail",
                        "weak residual |L u - M b| / |M b| <= 1e-8, constant mode removed", sol.solver_residual});

  const LemmaCheck lc = detail::staged("lemma", [&] { return lemma_delta_u_check(g, sol, nd, rep.epsilon_h); });
  rep.lemma = {lc.min_slack, lc.min_intermediate_slack, lc.argmin, lc.omega_count, lc.intermediate_tighter, lc.pass};
  rep.checks.push_back({"lemma_delta_u", lc.pass ? "pass" : "fail", "min slack over Omega >= -epsilon_h",
                        lc.min_slack});

  const std::vector<std::string> hessian_checks{"transport_positivity", "transport_trace", "transport_am_hm"};
  const std::vector<std::string> jacobian_checks{"transport_jacobian_bound", "transport_ratio_monotone",
                                                 "transport_small_s_limit"};
  auto skip = [&](const std::vector<std::string>& names, const std::string& reason) {
    for (const auto& n : names) rep.checks.push_back({n, "skipped", reason});
  };
  const TransportModel model(g, curv, nd, sol, rep.epsilon_h);
  if (s.transport) {
    SweepOptions so;
    so.radii = s.radii;
    so.members_per_r = s.members;
    so.max_candidates_per_r = s.max_candidates;
    so.seed = s.seed;
    so.jacobians = s.jacobians;
    rep.sweep = detail::staged("transport", [&] { return run_transport_sweep(model, so); });
    rep.sweep_ran = true;
    const SweepResult& sw = rep.sweep;
    auto verdict = [&](const std::string& name, int RadiusSummary::*field, const std::string& reason) {
      const int v = sw.total(field);
      rep.checks.push_back({name, v == 0 ? "pass" : "fail", reason, static_cast<double>(v)});
    };
    verdict("transport_bound_argument", &RadiusSummary::bound_argument_violations,
            "1 + r (f^{1/(n+1)} - sqrt(1 - |grad u|^2) - t) >= -epsilon_h for members");
    verdict("transport_t_range", &RadiusSummary::t_range_violations, "t range for members");
    if (sw.hessian_checked) {
      verdict("transport_positivity", &RadiusSummary::positivity_violations, "min eig of g + r A >= -epsilon_h");
      verdict("transport_trace", &RadiusSummary::trace_violations, "|tr A - (Delta u - n t)| <= epsilon_h");
      verdict("transport_am_hm", &RadiusSummary::am_hm_violations, "AM-HM on eigenvalues of A to 1e-12");
    } else {
      skip(hessian_checks, "needs D^2 u, available on chart geometries only");
    }
    if (sw.jacobians_checked) {
      verdict("transport_jacobian_bound", &RadiusSummary::bound_violations,
              "jac_numeric <= jac_bound (1 + epsilon_h) + r^m epsilon_h^n");
      verdict("transport_ratio_monotone", &RadiusSummary::monotonicity_violations,
              "ratio non-increasing in s up to epsilon_h");
      verdict("transport_small_s_limit", &RadiusSummary::small_s_violations,
              "|s^-m det - 1| <= 1% at the smallest rung");
    } else {
      skip(jacobian_checks, s.jacobians ? "needs an analytic chart" : "disabled in config");
    }
  } else {
    skip({"transport_bound_argument", "transport_t_range"}, "transport disabled in config");
    skip(hessian_checks, "transport disabled in config");
    skip(jacobian_checks, "transport disabled in config");
  }

  if (s.covering) {
    rep.coverage = detail::staged("covering", [&] {
      return covering_montecarlo(model, s.covering_r, s.sigma, s.trials, s.seed);
    });
    rep.covering_ran = true;
    rep.checks.push_back({"covering", rep.coverage.pass() ? "pass" : "fail",
                          rep.coverage.empty_region ? "empty sampling region (vacuous)" : "coverage fraction 1.0",
                          rep.coverage.fraction});
  } else {
    rep.checks.push_back({"covering", "skipped", "disabled in config"});
  }
  return rep;
}

inline double max_bound_violation(const RunReport& r) {
  double v = 0.0;
  if (!r.sweep_ran || !r.sweep.jacobians_checked) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : r.sweep.per_radius) v = std::max(v, s.max_bound_ratio - 1.0);
  return v;
}

/// Runs `s` at each level and reports empirical orders log2(e_k / e_{k+1})
/// for the deficit error |deficit - reference| and for max(0, -min slack).
/// Orders assume each level halves the mesh size.
inline std::vector<ConvergenceRow> refinement_study(const Scenario& s, const std::vector<int>& levels,
                                                    double reference = 0.0, RunReport* finest = nullptr) {
  if (levels.size() < 2) throw Error(ErrorKind::InvalidArgument, "a refinement study needs at least two levels");
  std::vector<ConvergenceRow> rows;
  for (int level : levels) {
    RunReport r = run_scenario(with_level(s, level));
    ConvergenceRow row;
    row.level = level;
    row.samples = r.inequality.samples;
    row.epsilon_h = r.epsilon_h;
    row.deficit = r.inequality.deficit;
    row.deficit_error = std::abs(r.inequality.deficit - reference);
    row.min_slack = r.lemma.min_slack;
    row.max_bound_violation = max_bound_violation(r);
    if (!rows.empty()) {
      const ConvergenceRow& prev = rows.back();
      row.deficit_order = std::log2(prev.deficit_error / row.deficit_error);
      row.slack_order = std::log2(std::max(0.0, -prev.min_slack) / std::max(0.0, -row.min_slack));
    }
    rows.push_back(row);
    if (finest) *finest = std::move(r);
  }
  if (finest) finest->convergence = rows;
  return rows;
}

inline nlohmann::json to_json(const RunReport& r) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = to_json(r.inequality);
  j["potential"] = {{"scale_log", r.potential.scale_log},
                    {"normalization_residual", r.potential.normalization_residual},
                    {"solver_residual", r.potential.solver_residual},
                    {"iterations", r.potential.iterations},
                    {"omega_count", r.potential.omega_count},
                    {"max_grad_u", r.potential.max_grad_u}};
  j["lemma"] = {{"min_slack", num(r.lemma.min_slack)},
                {"min_intermediate_slack", num(r.lemma.min_intermediate_slack)},
                {"argmin", r.lemma.argmin},
                {"omega_count", r.lemma.omega_count},
                {"intermediate_tighter", r.lemma.intermediate_tighter},
                {"pass", r.lemma.pass}};
  if (r.sweep_ran) {
    nlohmann::json radii = nlohmann::json::array();
    for (const RadiusSummary& s : r.sweep.per_radius) {
      radii.push_back({{"r", s.r},
                       {"candidates", s.candidates},
                       {"members", s.members},
                       {"bound_violations", s.bound_violations},
                       {"monotonicity_violations", s.monotonicity_violations},
                       {"positivity_violations", s.positivity_violations},
                       {"t_range_violations", s.t_range_violations},
                       {"bound_argument_violations", s.bound_argument_violations},
                       {"trace_violations", s.trace_violations},
                       {"am_hm_violations", s.am_hm_violations},
                       {"small_s_violations", s.small_s_violations},
                       {"min_min_eig", num(s.min_min_eig)},
                       {"max_bound_ratio", num(s.max_bound_ratio)},
                       {"max_ratio_increase", num(s.max_ratio_increase)},
                       {"max_trace_error", num(s.max_trace_error)},
                       {"max_small_s_error", num(s.max_small_s_error)},
                       {"min_bound_argument", num(s.min_bound_argument)}});
    }
    j["transport"] = {{"epsilon_h", r.sweep.epsilon_h},
                      {"samples", r.sweep.samples.size()},
                      {"hessian_checked", r.sweep.hessian_checked},
                      {"jacobians_checked", r.sweep.jacobians_checked},
                      {"per_radius", radii}};
  } else {
    j["transport"] = nullptr;
  }
  if (r.covering_ran) {
    j["covering"] = {{"r", r.scenario.covering_r},
                     {"sigma", r.scenario.sigma},
                     {"trials", r.coverage.trials},
                     {"sampled", r.coverage.sampled},
                     {"covered", r.coverage.covered},
                     {"fraction", r.coverage.fraction},
                     {"empty_region", r.coverage.empty_region},
                     {"max_match_error", r.coverage.max_match_error},
                     {"matcher_tolerance", r.coverage.matcher_tolerance}};
  } else {
    j["covering"] = nullptr;
  }
  nlohmann::json conv = nlohmann::json::array();
  for (const ConvergenceRow& c : r.convergence) {
    conv.push_back({{"level", c.level},
                    {"samples", c.samples},
                    {"epsilon_h", c.epsilon_h},
                    {"deficit", c.deficit},
                    {"deficit_error", c.deficit_error},
                    {"min_slack", num(c.min_slack)},
                    {"max_bound_violation", num(c.max_bound_violation)},
                    {"deficit_order", num(c.deficit_order)},
                    {"slack_order", num(c.slack_order)}});
  }
  j["convergence"] = conv;
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckResult& c : r.checks) {
    checks.push_back({{"name", c.name}, {"status", c.status}, {"reason", c.reason}, {"value", num(c.value)}});
  }
  j["checks"] = checks;
  j["all_pass"] = r.all_pass();
  j["provenance"] = {{"config_hash", r.provenance.config_hash},
                     {"seed", r.provenance.seed},
                     {"version", r.provenance.version},
                     {"timestamp", r.provenance.timestamp}};
  return j;
}

struct EmitFormats {
  bool json = true;
  bool csv = true;
  bool plotscript = true;
};

/// Writes report.json, transport.csv, ratio_scan.csv, convergence.csv and
/// plot.gp into `dir` as applicable. Returns the written paths.
inline std::vector<std::string> emit(const RunReport& r, const std::string& dir, EmitFormats formats = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
    written.push_back(path);
    return os;
  };
  auto close = [](std::ofstream& os, const std::string& name) {
    os.flush();
    if (!os) throw Error(ErrorKind::Io, "failed writing " + name);
  };
  if (formats.json) {
    auto os = open("report.json");
    os << to_json(r).dump(2) << '\n';
    close(os, "report.json");
  }
  bool transport_csv = false, ratio_csv = false, convergence_csv = false;
  if (formats.csv && r.sweep_ran) {
    auto os = open("transport.csv");
    write_sweep_csv(os, r.sweep, r.codim);
    close(os, "transport.csv");
    transport_csv = true;
    if (r.sweep.jacobians_checked) {
      auto rs = open("ratio_scan.csv");
      rs << "sample,x_index,r,s,ratio\n";
      rs.precision(17);
      for (std::size_t i = 0; i < r.sweep.samples.size(); ++i) {
        const TransportSample& t = r.sweep.samples[i];
        double sv = t.r;
        for (double q : t.ratio_scan) {
          rs << i << ',' << t.x_index << ',' << t.r << ',' << sv << ',' << q << '\n';
          sv *= 0.5;
        }
      }
      close(rs, "ratio_scan.csv");
      ratio_csv = true;
    }
  }
  if (formats.csv && !r.convergence.empty()) {
    auto os = open("convergence.csv");
    os << "level,samples,epsilon_h,deficit,deficit_error,min_slack,max_bound_violation,deficit_order,slack_order\n";
    os.precision(17);
    for (const ConvergenceRow& c : r.convergence) {
      os << c.level << ',' << c.samples << ',' << c.epsilon_h << ',' << c.deficit << ',' << c.deficit_error << ','
         << c.min_slack << ',' << c.max_bound_violation << ',' << c.deficit_order << ',' << c.slack_order << '\n';
    }
    close(os, "convergence.csv");
    convergence_csv = true;
  }
  if (formats.plotscript) {
    auto os = open("plot.gp");
    os << "set datafile separator ','\nset terminal pngcairo size 900,600\n";
    if (convergence_csv) {
      os << "set output 'deficit_vs_refinement.png'\nset logscale y\nset xlabel 'level'\nset ylabel '|deficit - reference|'\n"
         << "plot 'convergence.csv' using 1:5 skip 1 with linespoints title 'deficit error'\nunset logscale y\n";
    }
    if (ratio_csv) {
      os << "set output 'ratio_scan.png'\nset logscale x\nset xlabel 's'\nset ylabel 'det / bound'\n"
         << "plot 'ratio_scan.csv' using 4:5 skip 1 with dots title 'ratio scan'\nunset logscale x\n";
    }
    if (transport_csv && !ratio_csv) {
      // columns: x_index, y_1..y_{m-1}, t, r, in_U, in_A_r, jac_numeric, jac_bound, min_eig, slack_min
      os << "set output 'transport.png'\nset xlabel 't'\nset ylabel 'slack_min'\n"
         << "plot 'transport.csv' using " << r.codim + 1 << ':' << r.codim + 8
         << " skip 1 with dots title 'membership slack'\n";
    }
    close(os, "plot.gp");
  }
  return written;
}

}  // namespace abplab
