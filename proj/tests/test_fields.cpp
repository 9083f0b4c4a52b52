#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "abplab/fields.hpp"
#include "abplab/geometry/curvature.hpp"
#include "abplab/geometry/generators.hpp"
#include "support.hpp"

using namespace abplab;
constexpr double pi = std::numbers::pi;

namespace {

Vector random_field(Index count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(count);
  for (Index i = 0; i < count; ++i) v(i) = u(rng);
  return v;
}

std::vector<Geometry> carriers() {
  return {make_circle(64), make_icosphere(3), make_sphere_chart(2, 2), make_clifford_torus(24)};
}

}  // namespace

TEST(Integrate, ConstantsGiveMultiplesOfTheVolume) {
  const Geometry s2 = make_icosphere(4);
  EXPECT_NEAR(integrate(s2, ScalarField::constant(s2, 1.0)), 4.0 * pi, 0.005 * 4.0 * pi);
  EXPECT_EQ(integrate(s2, ScalarField::constant(s2, 0.0)), 0.0);
  const Geometry c = make_circle(1024);
  EXPECT_NEAR(integrate(c, ScalarField::constant(c, 2.0)), 4.0 * pi, 1e-6);
}

TEST(Integrate, FieldsAreBoundToTheirGeometry) {
  const Geometry a = make_circle(16), b = make_circle(16);
  const ScalarField f = ScalarField::constant(a, 1.0);
  EXPECT_THROW(integrate(b, f), Error);
  EXPECT_THROW(ScalarField(a, Vector::Ones(15)), Error);
}

TEST(Gradient, ConstantFieldHasZeroGradient) {
  for (const Geometry& g : carriers()) EXPECT_LT(gradient(g, Vector::Constant(g.num_samples(), 3.5)).norm(), 1e-12);
}

TEST(Gradient, HeightOnTheSphereMatchesTangentialProjection) {
  const Geometry g = make_icosphere(4);
  const Vector x3 = g.positions().row(2).transpose();
  const Matrix grad = gradient(g, x3);
  double worst = 0.0;
  for (Index k = 0; k < g.num_samples(); ++k) {
    const double exact = 1.0 - x3(k) * x3(k);
    worst = std::max(worst, std::abs(grad.col(k).squaredNorm() - exact));
  }
  EXPECT_LE(worst, 0.02);
}

TEST(Gradient, CoordinateGradientsSumToDimension) {
  for (const Geometry& g : {make_icosphere(4), make_sphere_chart(2, 4)}) {
    Vector total = Vector::Zero(g.num_samples());
    for (int k = 0; k < 3; ++k) total += gradient(g, Vector(g.positions().row(k).transpose())).colwise().squaredNorm().transpose();
    EXPECT_LE((total.array() - 2.0).abs().maxCoeff(), 0.04);
  }
}

TEST(Gradient, IsLinear) {
  for (const Geometry& g : carriers()) {
    const Vector a = random_field(g.num_samples(), 1), b = random_field(g.num_samples(), 2);
    const Matrix lhs = gradient(g, Vector(2.5 * a - 0.75 * b));
    const Matrix rhs = 2.5 * gradient(g, a) - 0.75 * gradient(g, b);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gradient, IsTangent) {
  for (const Geometry& g : carriers()) {
    const CurvatureData c = compute_curvature(g);
    const Matrix grad = gradient(g, random_field(g.num_samples(), 5));
    for (Index k = 0; k < g.num_samples(); ++k) {
      const Matrix& t = c.tangent_basis[static_cast<std::size_t>(k)];
      EXPECT_LT((grad.col(k) - t * (t.transpose() * grad.col(k))).norm(), 1e-10 * (1.0 + grad.col(k).norm()));
    }
  }
}

TEST(WeightedLaplacian, CircleCosineOracle) {
  // the three-point stencil gives (2 cos h - 2) / h^2 cos theta exactly
  for (int nodes : {32, 64, 128}) {
    const Geometry g = make_circle(nodes);
    const double h = 2.0 * pi / nodes;
    Vector c(nodes);
    for (int k = 0; k < nodes; ++k) c(k) = std::cos(k * h);
    const Vector lc = build_laplacian(g).pointwise(c);
    const double factor = (2.0 * std::cos(h) - 2.0) / (h * h);
    EXPECT_LT((lc - factor * c).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((lc + c).cwiseAbs().maxCoeff(), h * h / 12.0 + 1e-10);
  }
}

TEST(WeightedLaplacian, SymmetricWithConstantsInTheKernel) {
  for (const Geometry& g : carriers()) {
    const Vector f = (0.3 * g.positions().row(0).transpose()).array().exp();
    const WeightedLaplacian op = build_weighted_laplacian(g, f);
    const Eigen::SparseMatrix<double> diff = op.matrix - Eigen::SparseMatrix<double>(op.matrix.transpose());
    double asym = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
    EXPECT_LE(asym, 1e-12);
    EXPECT_LE(op.apply(Vector::Ones(g.num_samples())).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WeightedLaplacian, IntegrationByPartsAndSemidefiniteness) {
  for (const Geometry& g : carriers()) {
    const Vector f = (0.2 * g.positions().row(1).transpose()).array().exp();
    const WeightedLaplacian op = build_weighted_laplacian(g, f);
    const double scale = std::abs(op.min_diagonal) * g.num_samples();
    for (unsigned seed = 0; seed < 5; ++seed) {
      const Vector p = random_field(g.num_samples(), 10 + seed), q = random_field(g.num_samples(), 20 + seed);
      EXPECT_LE(std::abs(op.apply(p).dot(q) - p.dot(op.apply(q))), 1e-10 * scale);
      EXPECT_LE(std::abs(op.apply(p).sum()), 1e-10 * scale);
      EXPECT_LE(op.apply(p).dot(p), 1e-10 * scale);
    }
  }
}

TEST(WeightedLaplacian, RejectsNonPositiveDensity) {
  const Geometry g = make_circle(16);
  Vector f = Vector::Ones(16);
  f(3) = 0.0;
  try {
    build_weighted_laplacian(g, f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveDensity);
  }
  f(3) = std::nan("");
  EXPECT_THROW(build_weighted_laplacian(g, f), Error);
}

TEST(WeightedLaplacian, CoordinateConsistencyConverges) {
  std::vector<double> mesh_err, chart_err;
  for (int level : {3, 4, 5}) {
    const Geometry g = make_icosphere(level);
    mesh_err.push_back(operator_consistency_error(g, compute_curvature(g)));
  }
  for (int grid : {32, 64, 128}) {
    const Geometry g = make_clifford_torus(grid);
    chart_err.push_back(operator_consistency_error(g, compute_curvature(g)));
  }
  for (std::size_t k = 0; k + 1 < mesh_err.size(); ++k) EXPECT_GT(std::log2(mesh_err[k] / mesh_err[k + 1]), 0.8);
  for (std::size_t k = 0; k + 1 < chart_err.size(); ++k) EXPECT_GT(std::log2(chart_err[k] / chart_err[k + 1]), 1.8);
}

TEST(ChartLocalJet, ReproducesCentralDifferencesAtNodesAndIsContinuous) {
  const Geometry g = make_clifford_torus(16);
  const ChartGeometry& chart = g.chart();
  const Vector v = random_field(g.num_samples(), 3);
  const Index k = chart.node(5, 7);
  const ChartLocalJet at = chart_local_jet(chart, v, chart.node_point(k));
  const double h0 = chart.axis(0).spacing;
  EXPECT_NEAR(at.value, v(k), 1e-14);
  EXPECT_NEAR(at.d1(0), (v(chart.neighbor(k, 0, 1)) - v(chart.neighbor(k, 0, -1))) / (2 * h0), 1e-11);
  EXPECT_NEAR(at.d2(0, 0), (v(chart.neighbor(k, 0, 1)) - 2 * v(k) + v(chart.neighbor(k, 0, -1))) / (h0 * h0), 1e-9);
  // values and slopes agree from both sides of an interpolation midpoint region
  ChartPoint xi = chart.node_point(k);
  xi[0] += 0.5 * h0;
  const ChartLocalJet mid = chart_local_jet(chart, v, xi);
  ChartPoint left = xi, right = xi;
  left[0] -= 1e-7;
  right[0] += 1e-7;
  EXPECT_NEAR(chart_local_jet(chart, v, left).value, mid.value, 1e-5);
  EXPECT_NEAR(chart_local_jet(chart, v, right).value, mid.value, 1e-5);
  ChartPoint near_node = chart.node_point(k);
  near_node[0] += 1e-9;
  EXPECT_NEAR(chart_local_jet(chart, v, near_node).d2(0, 0), at.d2(0, 0), 1e-3);
}
