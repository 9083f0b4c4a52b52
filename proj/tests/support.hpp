#pragma once

// Shared oracles and random inputs for the test suites.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "abplab/geometry/curvature.hpp"
#include "abplab/geometry/generators.hpp"

namespace abplab::oracle {

/// Haar-ish random rotation from the QR factor of a Gaussian matrix.
inline Matrix random_rotation(int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

/// f = exp(sum_k c_k x_k + sum_{k<=l} d_kl x_k x_l) with |c|, |d| <= amplitude.
struct SmoothDensity {
  Vector linear;
  Matrix quadratic;

  double operator()(const Vector& x) const { return std::exp(linear.dot(x) + x.dot(quadratic * x)); }
  Vector on(const Geometry& g) const {
    Vector f(g.num_samples());
    for (Index k = 0; k < g.num_samples(); ++k) f(k) = (*this)(g.positions().col(k));
    return f;
  }
};

inline SmoothDensity random_density(int ambient, unsigned seed, double amplitude = 0.4) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  SmoothDensity d;
  d.linear = Vector(ambient);
  for (int k = 0; k < ambient; ++k) d.linear(k) = u(rng);
  d.quadratic = Matrix::Zero(ambient, ambient);
  for (int k = 0; k < ambient; ++k)
    for (int l = k; l < ambient; ++l) d.quadratic(k, l) = 0.5 * u(rng);
  return d;
}

/// Potential on the unit circle for f = c exp(a cos theta) normalized, from
/// 1-D quadrature of (f u')' = b: u' = (B + C) / f with B = int_0^theta b and C
/// fixed by periodicity of u. Values on a fine uniform grid of `fine` cells.
struct CirclePotentialOracle {
  int fine;
  std::vector<double> u;  // u at theta_i = 2 pi i / fine, i = 0..fine

  CirclePotentialOracle(double a, int fine_cells) : fine(fine_cells), u(static_cast<std::size_t>(fine_cells) + 1, 0.0) {
    const double h = 2.0 * std::numbers::pi / fine;
    // normalization with n = 1: log c = (int f'^2/f - int f log f) / int f, by the midpoint rule
    double mass = 0.0, fisher = 0.0, entropy = 0.0;
    for (int i = 0; i < fine; ++i) {
      const double t = (i + 0.5) * h, f = std::exp(a * std::cos(t)), fp = -a * std::sin(t) * f;
      mass += f * h;
      fisher += fp * fp / f * h;
      entropy += f * std::log(f) * h;
    }
    const double c = std::exp((fisher - entropy) / mass);
    auto f = [&](double t) { return c * std::exp(a * std::cos(t)); };
    auto b = [&](double t) {
      const double v = f(t), vp = -a * std::sin(t) * v;
      return 0.5 * v * std::log(v) - vp * vp / (2.0 * v);
    };
    std::vector<double> big_b(static_cast<std::size_t>(fine) + 1, 0.0);
    for (int i = 0; i < fine; ++i) {
      const double t = i * h;
      big_b[static_cast<std::size_t>(i) + 1] = big_b[static_cast<std::size_t>(i)] + h / 6.0 * (b(t) + 4.0 * b(t + 0.5 * h) + b(t + h));
    }
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < fine; ++i) {
      s1 += big_b[static_cast<std::size_t>(i)] / f(i * h);
      s2 += 1.0 / f(i * h);
    }
    const double cc = -s1 / s2;
    std::vector<double> up(static_cast<std::size_t>(fine) + 1);
    for (int i = 0; i <= fine; ++i) up[static_cast<std::size_t>(i)] = (big_b[static_cast<std::size_t>(i)] + cc) / f(i * h);
    for (int i = 0; i < fine; ++i)
      u[static_cast<std::size_t>(i) + 1] = u[static_cast<std::size_t>(i)] + 0.5 * h * (up[static_cast<std::size_t>(i)] + up[static_cast<std::size_t>(i) + 1]);
  }

  /// Oracle at the nodes of `g` (a circle chart whose node count divides `fine`),
  /// with the mass-weighted mean removed.
  Vector at_nodes(const Geometry& g) const {
    const Index count = g.num_samples();
    Vector out(count);
    for (Index k = 0; k < count; ++k) out(k) = u[static_cast<std::size_t>(k * (fine / count))];
    out.array() -= g.weights().dot(out) / g.total_volume();
    return out;
  }
};

}  // namespace abplab::oracle
