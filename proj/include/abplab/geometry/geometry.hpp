#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <variant>

#include "abplab/geometry/chart.hpp"
#include "abplab/geometry/mesh.hpp"

namespace abplab {

/// An embedded closed n-submanifold carried either by a chart grid or by a
/// triangle mesh. Immutable once built; copies share the same id.
class Geometry {
 public:
  Geometry(ChartGeometry chart, int refinement = -1, std::string label = "chart")
      : rep_(std::move(chart)), id_(next_id()), refinement_(refinement), label_(std::move(label)) {}
  Geometry(TriangleMeshGeometry mesh, int refinement = -1, std::string label = "mesh")
      : rep_(std::move(mesh)), id_(next_id()), refinement_(refinement), label_(std::move(label)) {}

  bool is_chart() const { return std::holds_alternative<ChartGeometry>(rep_); }
  bool is_mesh() const { return !is_chart(); }
  const ChartGeometry& chart() const {
    if (!is_chart()) throw Error(ErrorKind::InvalidArgument, "geometry is not a chart");
    return std::get<ChartGeometry>(rep_);
  }
  const TriangleMeshGeometry& mesh() const {
    if (!is_mesh()) throw Error(ErrorKind::InvalidArgument, "geometry is not a mesh");
    return std::get<TriangleMeshGeometry>(rep_);
  }

  int dim() const { return std::visit([](const auto& g) { return g.dim(); }, rep_); }
  int ambient_dim() const { return std::visit([](const auto& g) { return g.ambient_dim(); }, rep_); }
  int codim() const { return ambient_dim() - dim(); }

  Index num_samples() const { return positions().cols(); }
  const Matrix& positions() const {
    if (is_chart()) return chart().positions();
    return mesh().vertices();
  }
  const Vector& weights() const {
    if (is_chart()) return chart().weights();
    return mesh().vertex_areas();
  }
  double total_volume() const { return weights().sum(); }

  bool connected() const { return is_chart() || mesh().connected(); }
  int component_count() const { return is_chart() ? 1 : mesh().component_count(); }

  /// Typical distance between neighbouring samples.
  double spacing() const {
    if (is_chart()) return chart().max_spacing();
    return mesh().max_edge_length();
  }

  std::uint64_t id() const { return id_; }
  int refinement() const { return refinement_; }
  const std::string& label() const { return label_; }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
  }

  std::variant<ChartGeometry, TriangleMeshGeometry> rep_;
  std::uint64_t id_;
  int refinement_;
  std::string label_;
};

}  // namespace abplab
