#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <sstream>

#include "abplab/geometry/curvature.hpp"
#include "abplab/geometry/generators.hpp"
#include "abplab/potential.hpp"
#include "abplab/transport.hpp"

using namespace abplab;

namespace {

/// Geometry, potential and transport model held in place (the model keeps pointers).
struct Pipeline {
  Geometry g;
  CurvatureData c;
  NormalizedDensity nd;
  PotentialSolution sol;
  double eps = 0.0;
  std::unique_ptr<TransportModel> model;

  Pipeline(Geometry geometry, const std::function<Vector(const Geometry&)>& density)
      : g(std::move(geometry)), c(compute_curvature(g)) {
    eps = epsilon_h(g, c);
    nd = normalize_density(g, ScalarField(g, density(g)));
    sol = solve_potential(g, nd);
    model = std::make_unique<TransportModel>(g, c, nd, sol, eps);
  }
  Pipeline(const Pipeline&) = delete;
};

Vector constant(const Geometry& g) { return Vector::Ones(g.num_samples()); }

Vector torus_density(const Geometry& g) {
  Vector f(g.num_samples());
  for (Index k = 0; k < g.num_samples(); ++k) f(k) = std::exp(0.3 * std::cos(g.chart().node_point(k)[0]));
  return f;
}

ErrorKind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no abplab::Error thrown";
  return ErrorKind::Io;
}

const Vector none = Vector(0);

}  // namespace

TEST(PhiMap, IdentityAtZeroRadiusAndRadialOnTheSphere) {
  const Pipeline p(make_sphere_chart(2, 3), constant);
  for (Index k : {0, 17, 200}) {
    const PointState s = p.model->at_sample(k);
    EXPECT_LT((phi_map(s, none, 0.4, 0.0) - s.position).norm(), 1e-15);
    // u = 0 and H = -x
    for (double t : {-0.7, 0.0, 0.3}) {
      for (double r : {0.5, 2.0}) {
        EXPECT_LT((phi_map(s, none, t, r) - (1.0 - r * t) * s.position).norm(), 1e-10);
        EXPECT_NEAR(u_norm2(s, none, t), t * t, 1e-12);
      }
    }
  }
}

TEST(PhiMap, DisplacementHasTheExpectedNorm) {
  const Pipeline p(make_clifford_torus(32), torus_density);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const PointState s = p.model->at_sample(static_cast<Index>(trial * 37 % p.g.num_samples()));
    const Vector y = Vector::Constant(1, u(rng));
    const double t = u(rng), r = 3.0;
    // grad u, y and H are mutually orthogonal with |H| = 1
    const double expect = std::sqrt(s.grad_u.squaredNorm() + y.squaredNorm() + t * t);
    EXPECT_NEAR((phi_map(s, y, t, r) - s.position).norm(), r * expect, 1e-10);
    EXPECT_NEAR(u_norm2(s, y, t), expect * expect, 1e-10);
  }
  const PointState s = p.model->at_sample(0);
  EXPECT_EQ(error_kind([&] { phi_map(s, Vector::Zero(2), 0.0, 1.0); }), ErrorKind::InvalidArgument);
}

TEST(Membership, SphereMembershipIsThePositivityOfTheRadialFactor) {
  const Pipeline p(make_sphere_chart(2, 3), constant);
  const PointState s = p.model->at_sample(40);
  for (double r : {0.5, 2.0, 8.0}) {
    for (double t : {-0.9, -0.2, 0.0, 0.05, 0.1}) {
      const Membership m = a_r_membership(*p.model, s, none, t, r);
      EXPECT_EQ(m.member, 1.0 - r * t > 0.0) << "r " << r << " t " << t;
    }
  }
  // the antipodal image of t r > 1 is not a minimizer
  const Membership far = a_r_membership(*p.model, s, none, 0.9, 8.0);
  EXPECT_FALSE(far.member);
  EXPECT_LT(far.slack_min, 0.0);
}

TEST(Membership, TorusHasNonMembersForLargeNormalOffsets) {
  const Pipeline p(make_clifford_torus(48), torus_density);
  int members = 0, outsiders = 0;
  for (Index k = 0; k < p.g.num_samples(); k += 97) {
    const PointState s = p.model->at_sample(k);
    const double root = std::sqrt(1.0 - s.grad_u.squaredNorm());
    for (double t : {-0.95 * root, 0.95 * root}) {
      const Membership m = a_r_membership(*p.model, s, Vector::Zero(1), t, 2.0);
      (m.member ? members : outsiders) += 1;
    }
  }
  EXPECT_GT(members, 0);
  EXPECT_GT(outsiders, 0);
}

TEST(ShiftedHessian, SphereWithConstantDensity) {
  const Pipeline p(make_sphere_chart(2, 3), constant);
  const PointState s = p.model->at_sample(77);
  for (double t : {-0.5, 0.0, 0.8}) {
    const ShiftedHessianA a = shifted_hessian(s, none, t);
    EXPECT_LT((a.A + t * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(a.trace_sff_h, 2.0, 1e-8);
    EXPECT_NEAR(positivity_check(a, 1.5), 1.0 - 1.5 * t, 1e-8);
  }
  EXPECT_NEAR(positivity_check(shifted_hessian(s, none, 0.0), 4.0), 1.0, 1e-8);
}

TEST(ShiftedHessian, TraceMatchesLaplacianMinusNt) {
  const Pipeline p(make_clifford_torus(64), torus_density);
  for (Index k = 0; k < p.g.num_samples(); k += 211) {
    const PointState s = p.model->at_sample(k);
    const ShiftedHessianA a = shifted_hessian(s, Vector::Constant(1, 0.3), -0.2);
    EXPECT_NEAR(a.trace_sff_y, 0.0, 1e-8);
    EXPECT_NEAR(a.A.trace(), p.sol.laplacian_u(k) + 2.0 * 0.2, p.eps);
  }
}

TEST(ShiftedHessian, UnavailableOnMeshes) {
  const Pipeline p(make_icosphere(2), constant);
  const PointState s = p.model->at_sample(3);
  EXPECT_EQ(error_kind([&] { shifted_hessian(s, none, 0.0); }), ErrorKind::HessianUnavailable);
  EXPECT_EQ(error_kind([&] { numeric_jacobian(*p.model, s, none, 0.0, 1.0); }), ErrorKind::HessianUnavailable);
}

TEST(Jacobian, SphereClosedForm) {
  const Pipeline p(make_sphere_chart(2, 3), constant);
  const PointState s = p.model->at_sample(55);
  for (double r : {0.5, 2.0}) {
    for (double t : {-0.6, 0.0, 0.2}) {
      const Membership m = a_r_membership(*p.model, s, none, t, r);
      ASSERT_TRUE(m.member);
      const JacobianResult j = jacobian_and_bound(*p.model, s, none, t, r, m);
      const double exact = r * std::pow(1.0 - r * t, 2);
      EXPECT_NEAR(j.jac_numeric, exact, 1e-8 * exact);
      EXPECT_NEAR(j.jac_bound, exact, 1e-12 * exact);
      EXPECT_NEAR(j.scaled_det.back(), 1.0, 0.01);
      EXPECT_LE(j.max_ratio_increase, 1e-8);
      EXPECT_NEAR(j.ladder.back(), r / 8192.0, 1e-15 * r);
    }
  }
  const Membership not_member = a_r_membership(*p.model, s, none, 0.9, 8.0);
  EXPECT_EQ(error_kind([&] { jacobian_and_bound(*p.model, s, none, 0.9, 8.0, not_member); }), ErrorKind::NotAMember);
}

TEST(Jacobian, BoundHelpers) {
  EXPECT_NEAR(bound_rate(1.0, 0.0, 2, 0.25), -0.25, 1e-15);
  EXPECT_NEAR(bound_rate(8.0, 0.75, 2, 0.0), 1.5, 1e-15);
  EXPECT_NEAR(jacobian_bound(2.0, 2, 2, -0.25), 4.0 * 0.25, 1e-15);
  EXPECT_EQ(jacobian_bound(2.0, 2, 1, -1.0), 0.0);
}

TEST(AmHm, HoldsForRandomSpectra) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 5;
    Vector l(n);
    for (int i = 0; i < n; ++i) l(i) = u(rng);
    for (double s : {0.1, 0.4, 1.0}) EXPECT_TRUE(am_hm_holds(l, s));
  }
  // equal eigenvalues are the equality case
  EXPECT_TRUE(am_hm_holds(Vector::Constant(3, 0.7), 0.5, 0.0));
}

TEST(TRange, Bounds) {
  const TRangeCheck c = t_range_check(0.1, 2.0, 1.0, 0.36, 2, 0.0);
  EXPECT_NEAR(c.lower, -0.8, 1e-15);
  EXPECT_NEAR(c.upper, 1.0 - 0.8 + 0.5, 1e-15);
  EXPECT_TRUE(c.ok);
  EXPECT_FALSE(t_range_check(-0.8, 2.0, 1.0, 0.36, 2, 0.0).ok);
  EXPECT_FALSE(t_range_check(0.71, 2.0, 1.0, 0.36, 2, 0.0).ok);
  EXPECT_TRUE(t_range_check(0.71, 2.0, 1.0, 0.36, 2, 0.05).ok);
}

TEST(Halton, PointsLieInTheUnitBall) {
  for (int dim = 1; dim <= 10; ++dim) {
    HaltonBall h(dim);
    Vector mean = Vector::Zero(dim);
    for (int i = 0; i < 500; ++i) {
      const Vector v = h.next();
      ASSERT_EQ(v.size(), dim);
      EXPECT_LT(v.squaredNorm(), 1.0);
      mean += v / 500.0;
    }
    EXPECT_LT(mean.norm(), 0.1);
  }
  EXPECT_NEAR(radical_inverse(1, 2), 0.5, 1e-15);
  EXPECT_NEAR(radical_inverse(5, 3), 7.0 / 9.0, 1e-15);
  EXPECT_EQ(error_kind([] { HaltonBall(0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(error_kind([] { HaltonBall(11); }), ErrorKind::InvalidArgument);
}

TEST(Sweep, TorusMembersSatisfyThePointwiseClaims) {
  const Pipeline p(make_clifford_torus(64), torus_density);
  SweepOptions opt;
  opt.members_per_r = 60;
  const SweepResult sweep = run_transport_sweep(*p.model, opt);
  EXPECT_TRUE(sweep.hessian_checked);
  EXPECT_TRUE(sweep.jacobians_checked);
  ASSERT_EQ(sweep.per_radius.size(), 3u);
  for (const RadiusSummary& r : sweep.per_radius) {
    EXPECT_EQ(r.members, 60);
    EXPECT_EQ(r.positivity_violations, 0) << r.r;
    EXPECT_EQ(r.t_range_violations, 0) << r.r;
    EXPECT_EQ(r.trace_violations, 0) << r.r;
    EXPECT_EQ(r.am_hm_violations, 0) << r.r;
    EXPECT_EQ(r.bound_argument_violations, 0) << r.r;
    EXPECT_EQ(r.bound_violations, 0) << r.r;
    EXPECT_EQ(r.monotonicity_violations, 0) << r.r;
    EXPECT_EQ(r.small_s_violations, 0) << r.r;
  }
  EXPECT_GT(sweep.per_radius.back().candidates, sweep.per_radius.back().members);
  for (const TransportSample& s : sweep.samples) {
    if (!s.in_A_r) continue;
    EXPECT_LE(s.jac_numeric, s.jac_bound * (1.0 + p.eps) + std::pow(s.r, 2) * std::pow(p.eps, 2));
    EXPECT_GE(s.min_eig, -p.eps);
  }
}

TEST(Sweep, IsDeterministicForAFixedSeed) {
  const Pipeline p(make_clifford_torus(32), torus_density);
  SweepOptions opt;
  opt.members_per_r = 20;
  opt.jacobians = false;
  const SweepResult a = run_transport_sweep(*p.model, opt);
  const SweepResult b = run_transport_sweep(*p.model, opt);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].x_index, b.samples[i].x_index);
    EXPECT_EQ(a.samples[i].t, b.samples[i].t);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, a, 2);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x_index,y1,t,r,in_U,in_A_r,jac_numeric,jac_bound,min_eig,slack_min");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), a.samples.size() + 1);
}

TEST(Sweep, MeshesCheckMembershipAndTRangeOnly) {
  const Pipeline p(make_icosphere(3), [](const Geometry& g) {
    return Vector((0.3 * g.positions().row(2).transpose()).array().exp().matrix());
  });
  SweepOptions opt;
  opt.members_per_r = 30;
  const SweepResult sweep = run_transport_sweep(*p.model, opt);
  EXPECT_FALSE(sweep.hessian_checked);
  EXPECT_FALSE(sweep.jacobians_checked);
  EXPECT_EQ(sweep.total(&RadiusSummary::t_range_violations), 0);
  EXPECT_EQ(sweep.total(&RadiusSummary::members), 90);
  EXPECT_EQ(error_kind([&] {
              SweepOptions bad;
              bad.radii = {-1.0};
              run_transport_sweep(*p.model, bad);
            }),
            ErrorKind::InvalidArgument);
}

TEST(Covering, EmptyRegionIsVacuous) {
  const Pipeline p(make_sphere_chart(2, 2), constant);
  const CoverageResult c = covering_montecarlo(*p.model, 0.5, 0.3, 100, 1);
  EXPECT_TRUE(c.empty_region);
  EXPECT_TRUE(c.pass());
  EXPECT_EQ(c.sampled, 0);
  EXPECT_EQ(error_kind([&] { covering_montecarlo(*p.model, 10.0, 1.0, 10, 1); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(error_kind([&] { covering_montecarlo(*p.model, 0.0, 0.3, 10, 1); }), ErrorKind::InvalidArgument);
}

TEST(Covering, SphereImagesCoverTheShell) {
  const Pipeline p(make_sphere_chart(2, 3), constant);
  const CoverageResult c = covering_montecarlo(*p.model, 10.0, 0.3, 150, 5);
  EXPECT_FALSE(c.empty_region);
  EXPECT_EQ(c.sampled, 150);
  EXPECT_EQ(c.covered, c.sampled);
  EXPECT_DOUBLE_EQ(c.fraction, 1.0);
  EXPECT_LE(c.max_match_error, c.matcher_tolerance);
  EXPECT_TRUE(c.failures.empty());
}
