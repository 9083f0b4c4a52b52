#pragma once

// Scenario configuration: flat key = value text with [section] headers.
//
//   [scenario]   name
//   [geometry]   kind n m refinement grid radius file
//   [density]    f                       ("constant" or an expression)
//   [inequality] kind theta              (main | pham | beckner)
//   [transport]  enabled radii members max_candidates jacobians
//                covering covering_r sigma trials seed
//   [tolerances] mean_curvature cg_tol f_constant area_relative umbilical_factor
//
// Lines starting with # or ; are comments. Unknown sections or keys are errors.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "abplab/error.hpp"
#include "abplab/scenario/expression.hpp"

namespace abplab {

struct Scenario {
  std::string name = "scenario";
  // geometry: sphere (icosphere for n = 2, polygon for n = 1) | sphere_chart |
  // circle | clifford | two_spheres | file
  std::string geometry = "sphere";
  int n = 0;  // 0 means the natural one (2 for sphere kinds)
  int m = 0;  // codimension in R^{n+m}; 0 means the natural one
  int refinement = 4;
  int grid = 128;  // clifford samples per axis
  double radius = 1.0;
  std::string file;

  std::string density = "constant";
  std::string inequality = "main";
  double theta = 1.0;

  bool transport = true;
  std::vector<double> radii{0.5, 2.0, 8.0};
  int members = 1000;
  int max_candidates = 20000;
  bool jacobians = true;
  bool covering = false;
  double covering_r = 10.0;
  double sigma = 0.3;
  int trials = 1000;
  std::uint64_t seed = 1;

  double mean_curvature_tol = 1e-2;
  double cg_tol = 1e-10;
  double f_constant_tol = 1e-6;
  double area_relative_tol = 1e-2;
  double umbilical_factor = 5.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::Parse, key + ": expected a number, got '" + v + "'");
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::Parse, key + ": expected an integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Parse, key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw Error(ErrorKind::Parse, key + ": empty list");
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Checks the invariants that do not need a geometry.
inline void validate(const Scenario& s) {
  static const std::set<std::string> kinds{"sphere", "sphere_chart", "circle", "clifford", "two_spheres", "file"};
  if (!kinds.count(s.geometry)) throw Error(ErrorKind::InvalidArgument, "unknown geometry kind '" + s.geometry + "'");
  if (s.geometry == "file" && s.file.empty()) throw Error(ErrorKind::InvalidArgument, "geometry.file is required");
  if (s.n < 0) throw Error(ErrorKind::InvalidArgument, "n must be >= 0");
  if (s.m < 0) throw Error(ErrorKind::InvalidArgument, "m must be >= 0");
  if (s.refinement < 0) throw Error(ErrorKind::InvalidArgument, "refinement must be >= 0");
  if (!(s.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (s.inequality != "main" && s.inequality != "pham" && s.inequality != "beckner") {
    throw Error(ErrorKind::InvalidArgument, "inequality must be main, pham or beckner");
  }
  if (!(s.theta > 0.0 && s.theta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "theta must lie in (0, 1]");
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (!(s.radii[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "radii must be positive");
    if (i > 0 && !(s.radii[i] > s.radii[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "r ladder must be strictly increasing");
    }
  }
  if (!(s.sigma >= 0.0 && s.sigma < 1.0)) throw Error(ErrorKind::InvalidArgument, "sigma must lie in [0, 1)");
  if (!(s.covering_r > 0.0)) throw Error(ErrorKind::InvalidArgument, "covering_r must be positive");
  if (s.members < 1 || s.max_candidates < s.members || s.trials < 1) {
    throw Error(ErrorKind::InvalidArgument, "sample counts must be positive with max_candidates >= members");
  }
  if (s.density != "constant") Expression::parse(s.density);
}

inline Scenario parse_scenario(std::istream& is) {
  Scenario s;
  std::string section;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::Parse, where + "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> sections{"scenario", "geometry", "density", "inequality", "transport",
                                                  "tolerances"};
      if (!sections.count(section)) throw Error(ErrorKind::Parse, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Parse, where + "expected key = value");
    if (section.empty()) throw Error(ErrorKind::Parse, where + "key outside any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    if (!seen.insert(full).second) throw Error(ErrorKind::Parse, where + "duplicate key " + full);
    auto as_int = [&] { return static_cast<int>(detail::parse_int(full, value)); };
    auto as_double = [&] { return detail::parse_double(full, value); };

    if (full == "scenario.name") s.name = value;
    else if (full == "geometry.kind") s.geometry = value;
    else if (full == "geometry.n") s.n = as_int();
    else if (full == "geometry.m") s.m = as_int();
    else if (full == "geometry.refinement") s.refinement = as_int();
    else if (full == "geometry.grid") s.grid = as_int();
    else if (full == "geometry.radius") s.radius = as_double();
    else if (full == "geometry.file") s.file = value;
    else if (full == "density.f") s.density = value;
    else if (full == "inequality.kind") s.inequality = value;
    else if (full == "inequality.theta") s.theta = as_double();
    else if (full == "transport.enabled") s.transport = detail::parse_bool(full, value);
    else if (full == "transport.radii") s.radii = detail::parse_list(full, value);
    else if (full == "transport.members") s.members = as_int();
    else if (full == "transport.max_candidates") s.max_candidates = as_int();
    else if (full == "transport.jacobians") s.jacobians = detail::parse_bool(full, value);
    else if (full == "transport.covering") s.covering = detail::parse_bool(full, value);
    else if (full == "transport.covering_r") s.covering_r = as_double();
    else if (full == "transport.sigma") s.sigma = as_double();
    else if (full == "transport.trials") s.trials = as_int();
    else if (full == "transport.seed") s.seed = static_cast<std::uint64_t>(detail::parse_int(full, value));
    else if (full == "tolerances.mean_curvature") s.mean_curvature_tol = as_double();
    else if (full == "tolerances.cg_tol") s.cg_tol = as_double();
    else if (full == "tolerances.f_constant") s.f_constant_tol = as_double();
    else if (full == "tolerances.area_relative") s.area_relative_tol = as_double();
    else if (full == "tolerances.umbilical_factor") s.umbilical_factor = as_double();
    else throw Error(ErrorKind::Parse, where + "unknown key " + full);
  }
  validate(s);
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(is);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  return parse_scenario(is);
}

/// Canonical text: every field in a fixed order, doubles at full precision.
/// Parsing it back yields the same Scenario.
inline std::string canonical(const Scenario& s) {
  using detail::format_double;
  std::ostringstream os;
  std::string radii;
  for (std::size_t i = 0; i < s.radii.size(); ++i) radii += (i ? "," : "") + format_double(s.radii[i]);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[scenario]\nname = " << s.name << "\n"
     << "[geometry]\nkind = " << s.geometry << "\nn = " << s.n << "\nm = " << s.m << "\nrefinement = " << s.refinement
     << "\ngrid = " << s.grid << "\nradius = " << format_double(s.radius) << "\nfile = " << s.file << "\n"
     << "[density]\nf = " << s.density << "\n"
     << "[inequality]\nkind = " << s.inequality << "\ntheta = " << format_double(s.theta) << "\n"
     << "[transport]\nenabled = " << b(s.transport) << "\nradii = " << radii << "\nmembers = " << s.members
     << "\nmax_candidates = " << s.max_candidates << "\njacobians = " << b(s.jacobians)
     << "\ncovering = " << b(s.covering) << "\ncovering_r = " << format_double(s.covering_r)
     << "\nsigma = " << format_double(s.sigma) << "\ntrials = " << s.trials << "\nseed = " << s.seed << "\n"
     << "[tolerances]\nmean_curvature = " << format_double(s.mean_curvature_tol)
     << "\ncg_tol = " << format_double(s.cg_tol) << "\nf_constant = " << format_double(s.f_constant_tol)
     << "\narea_relative = " << format_double(s.area_relative_tol)
     << "\numbilical_factor = " << format_double(s.umbilical_factor) << "\n";
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const Scenario& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical(s))));
  return buf;
}

}  // namespace abplab
