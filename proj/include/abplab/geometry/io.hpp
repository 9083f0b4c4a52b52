#pragma once

// Plain-text geometry tables.
//
//   # abplab-geometry dim_n=2 ambient_dim=3 kind=mesh samples=642 faces=1280
//   x_1 ... x_N weight          (one line per sample)
//   f a b c                     (mesh faces, zero-based)
//
// Charts replace faces= by grid=, periodic=, lower= and spacing=, one value
// per axis separated by commas. Imported charts carry positions only, so
// their derivatives come from central differences. Weights are written for
// downstream tools and recomputed on import.

#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "abplab/geometry/geometry.hpp"

namespace abplab {

inline void write_geometry(std::ostream& os, const Geometry& g) {
  os << "# abplab-geometry dim_n=" << g.dim() << " ambient_dim=" << g.ambient_dim()
     << " kind=" << (g.is_chart() ? "chart" : "mesh") << " samples=" << g.num_samples();
  if (g.is_mesh()) {
    os << " faces=" << g.mesh().faces().size();
  } else {
    const ChartGeometry& c = g.chart();
    const int n = c.dim();
    auto list = [&](auto get) {
      std::ostringstream s;
      s << std::setprecision(17);
      for (int d = 0; d < n; ++d) s << (d ? "," : "") << get(c.axis(d));
      return s.str();
    };
    os << " grid=" << list([](const ChartAxis& a) { return a.count; })
       << " periodic=" << list([](const ChartAxis& a) { return a.periodic ? 1 : 0; })
       << " lower=" << list([](const ChartAxis& a) { return a.lower; })
       << " spacing=" << list([](const ChartAxis& a) { return a.spacing; });
  }
  os << '\n' << std::setprecision(17);
  const Matrix& x = g.positions();
  const Vector& w = g.weights();
  for (Index k = 0; k < x.cols(); ++k) {
    for (Index i = 0; i < x.rows(); ++i) os << x(i, k) << ' ';
    os << w(k) << '\n';
  }
  if (g.is_mesh()) {
    for (const Face& f : g.mesh().faces()) os << "f " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing geometry table");
}

namespace detail {

inline std::vector<double> split_numbers(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, "bad value '" + item + "' for " + key);
    }
  }
  return out;
}

}  // namespace detail

inline Geometry read_geometry(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Parse, "empty geometry table");
  std::istringstream head(line);
  std::string hash, tag;
  head >> hash >> tag;
  if (hash != "#" || tag != "abplab-geometry") throw Error(ErrorKind::Parse, "missing abplab-geometry header");
  std::map<std::string, std::string> fields;
  for (std::string kv; head >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Parse, "header entry '" + kv + "' is not key=value");
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto need = [&](const std::string& key) {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorKind::Parse, "header lacks " + key);
    return it->second;
  };
  auto need_int = [&](const std::string& key) {
    const auto v = detail::split_numbers(need(key), key);
    if (v.size() != 1 || v[0] != static_cast<double>(static_cast<long long>(v[0])) || v[0] < 0) {
      throw Error(ErrorKind::Parse, key + " must be a nonnegative integer");
    }
    return static_cast<Index>(v[0]);
  };
  const int n = static_cast<int>(need_int("dim_n"));
  const int ambient = static_cast<int>(need_int("ambient_dim"));
  const std::string kind = need("kind");
  const Index samples = need_int("samples");
  if (n < 1 || n > 2) throw Error(ErrorKind::UnsupportedDimension, "dim_n must be 1 or 2");
  if (ambient <= n) throw Error(ErrorKind::Parse, "ambient_dim must exceed dim_n");

  Matrix x(ambient, samples);
  for (Index k = 0; k < samples; ++k) {
    if (!std::getline(is, line)) throw Error(ErrorKind::Parse, "table ends after " + std::to_string(k) + " samples");
    std::istringstream row(line);
    for (int i = 0; i < ambient; ++i) {
      if (!(row >> x(i, k))) throw Error(ErrorKind::Parse, "sample line " + std::to_string(k) + " is short");
    }
    double weight;
    if (!(row >> weight)) throw Error(ErrorKind::Parse, "sample line " + std::to_string(k) + " lacks a weight");
  }

  if (kind == "mesh") {
    if (n != 2) throw Error(ErrorKind::UnsupportedDimension, "meshes carry surfaces only");
    const Index count = need_int("faces");
    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
      if (!std::getline(is, line)) throw Error(ErrorKind::Parse, "table ends after " + std::to_string(k) + " faces");
      std::istringstream row(line);
      std::string f;
      Face face;
      if (!(row >> f >> face[0] >> face[1] >> face[2]) || f != "f") {
        throw Error(ErrorKind::Parse, "bad face line '" + line + "'");
      }
      for (Index v : face) {
        if (v < 0 || v >= samples) throw Error(ErrorKind::Parse, "face index " + std::to_string(v) + " out of range");
      }
      faces.push_back(face);
    }
    return Geometry(TriangleMeshGeometry(std::move(x), std::move(faces)), -1, "imported");
  }
  if (kind != "chart") throw Error(ErrorKind::Parse, "kind must be mesh or chart, got " + kind);

  const auto grid = detail::split_numbers(need("grid"), "grid");
  const auto periodic = detail::split_numbers(need("periodic"), "periodic");
  const auto lower = detail::split_numbers(need("lower"), "lower");
  const auto spacing = detail::split_numbers(need("spacing"), "spacing");
  const std::size_t nn = static_cast<std::size_t>(n);
  if (grid.size() != nn || periodic.size() != nn || lower.size() != nn || spacing.size() != nn) {
    throw Error(ErrorKind::Parse, "chart header needs one grid, periodic, lower and spacing value per axis");
  }
  std::array<ChartAxis, 2> axes{};
  Index nodes = 1;
  for (std::size_t d = 0; d < nn; ++d) {
    if (grid[d] < 1 || !(spacing[d] > 0.0)) throw Error(ErrorKind::Parse, "chart axes need count >= 1, spacing > 0");
    axes[d] = ChartAxis{static_cast<int>(grid[d]), lower[d], spacing[d], periodic[d] != 0.0};
    nodes *= static_cast<Index>(grid[d]);
  }
  if (nodes != samples) throw Error(ErrorKind::Parse, "grid shape does not match the sample count");
  return Geometry(ChartGeometry(n, axes, std::move(x)), -1, "imported");
}

}  // namespace abplab
