#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cma/grid.hpp"

using namespace cma;

namespace {

double abs2(const RealPoint& x) { return x.squaredNorm(); }

}  // namespace

TEST(Grid, BallResolution129InteriorCountMatchesArea) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 129);
  EXPECT_DOUBLE_EQ(d->h(), 2.0 / 128.0);
  const double expected = std::numbers::pi / (d->h() * d->h());
  EXPECT_NEAR(static_cast<double>(d->interior_nodes().size()), expected, 0.01 * expected);
}

TEST(Grid, CenterIsInteriorAtResolution9) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 9);
  const std::size_t c = d->center_node();
  EXPECT_TRUE(d->is_interior(c));
  EXPECT_NEAR(d->coords(c).norm(), 0.0, 1e-15);
}

TEST(Grid, PerturbedBoundaryNodesStayNearSphere) {
  auto d = make_domain(2, ShapeSpec::perturbed_ball(0.05), 17);
  ASSERT_FALSE(d->boundary_nodes().empty());
  for (std::size_t b : d->boundary_nodes()) {
    const double r = d->coords(b).norm();
    EXPECT_GE(r, 1.0 - 0.05);
    EXPECT_LE(r, 1.0 + 0.05 + std::sqrt(2.0) * d->h());
  }
}

TEST(Grid, MasksDisjointAndStencilClosed) {
  auto d = make_domain(1, ShapeSpec::perturbed_ball(0.1), 33);
  for (std::size_t i : d->interior_nodes()) {
    EXPECT_FALSE(d->is_boundary(i));
    for (const auto& o : stencil_offsets(d->dims())) {
      const auto j = d->offset(i, o);
      ASSERT_TRUE(j.has_value());
      EXPECT_TRUE(d->in_domain(*j));
    }
  }
}

TEST(Grid, RejectsBadInputs) {
  EXPECT_THROW(make_domain(3, ShapeSpec::ball(1.0), 17), PreconditionError);
  EXPECT_THROW(make_domain(1, ShapeSpec::ball(1.0), 7), PreconditionError);
  EXPECT_THROW(make_domain(1, ShapeSpec::perturbed_ball(0.5), 17), PreconditionError);
  DomainLimits lim;
  lim.max_nodes = 1000;
  EXPECT_THROW(make_domain(2, ShapeSpec::ball(1.0), 17, std::nullopt, lim), ResourceError);
}

TEST(Grid, ComplexHessianOfSquaredNormIsIdentity) {
  auto d = make_domain(2, ShapeSpec::ball(1.0), 13);
  const auto u = GridFunction::sample(d, abs2);
  for (std::size_t i : d->interior_nodes()) {
    const HermitianMatrix H = complex_hessian(u, i);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(std::abs(H(a, b) - cplx(a == b ? 1.0 : 0.0)), 0.0, 1e-9);
  }
}

TEST(Grid, PluriharmonicHasZeroHessian) {
  auto d = make_domain(2, ShapeSpec::ball(1.0), 13);
  // Re(z1^2) = x1^2 - y1^2
  const auto u = GridFunction::sample(d, [](const RealPoint& x) { return x(0) * x(0) - x(1) * x(1); });
  for (std::size_t i : d->interior_nodes()) EXPECT_LT(complex_hessian(u, i).max_abs_entry(), 1e-10);
  EXPECT_THROW(trace_inverse(u, d->interior_nodes().front()), DegenerateHessianError);
}

TEST(Grid, QuarticHessianAtUnitPoint) {
  // u = |z1|^4 -> u_{1 1bar} = 4 |z1|^2; evaluate near z = (1, 0) on a box of half width 1.5.
  auto d = make_domain(2, ShapeSpec::ball(1.2), 25, 1.5);
  const auto u = GridFunction::sample(d, [](const RealPoint& x) {
    const double r2 = x(0) * x(0) + x(1) * x(1);
    return r2 * r2;
  });
  RealPoint p = RealPoint::Zero(4);
  p(0) = 1.0;
  const std::size_t i = d->nearest_node(p);
  ASSERT_NEAR((d->coords(i) - p).norm(), 0.0, 1e-12);
  const HermitianMatrix H = complex_hessian(u, i);
  // centered differences of x^4 carry an exact h^2 term: 4 + 2 h^2 (sum of the two planes / 4)
  EXPECT_NEAR(H(0, 0).real(), 4.0, 2.0 * d->h() * d->h() + 1e-9);
  EXPECT_NEAR(std::abs(H(1, 1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(H(0, 1)), 0.0, 1e-12);
}

TEST(Grid, LaplacianAndTraceInverseClosedForms) {
  auto d = make_domain(2, ShapeSpec::ball(1.0), 11);
  const auto u1 = GridFunction::sample(d, abs2);
  const auto u2 = GridFunction::sample(d, [](const RealPoint& x) {
    return 2.0 * (x(0) * x(0) + x(1) * x(1)) + 0.5 * (x(2) * x(2) + x(3) * x(3));
  });
  const std::size_t c = d->center_node();
  EXPECT_NEAR(laplacian(u1, c), 8.0, 1e-9);
  EXPECT_NEAR(trace_inverse(u1, c), 2.0, 1e-9);
  EXPECT_NEAR(laplacian(u2, c), 10.0, 1e-9);
  EXPECT_NEAR(trace_inverse(u2, c), 2.5, 1e-9);
}

TEST(Grid, CubicInterpolationExactOnCubics) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 21);
  auto fn = [](const RealPoint& x) { return 1.0 + x(0) - 2.0 * x(1) * x(1) + 0.5 * x(0) * x(0) * x(1); };
  const auto u = GridFunction::sample(d, fn);
  RealPoint p(2);
  p << 0.123, -0.311;
  EXPECT_NEAR(interpolate(u, p, Interpolation::Cubic), fn(p), 1e-12);
  RealPoint far(2);
  far << 3.0, 0.0;
  EXPECT_THROW(interpolate(u, far), DomainEscapeError);
}

TEST(Grid, InterpolationCheckConstantAndQuadratic) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 41);
  const double mu = 0.01;
  const auto c = GridFunction::constant(d, mu);
  const double lam = optimal_lambda(mu);
  auto rep = interpolation_check(c, d->center_node(), mu, lam, 1.0, 0.5);
  EXPECT_TRUE(rep.pass());

  // u = |z|^2, mu = sup over B_r0 = 1/4; |D^2 u| = 2 <= 2 (l^2 + mu / l^2) at l = 0.45.
  const double r0 = 0.5;
  const auto q = GridFunction::sample(d, abs2);
  const double mq = r0 * r0;
  auto rq = interpolation_check(q, d->center_node(), mq, 0.45, 1.0, r0);
  EXPECT_NEAR(rq.rows[1].derivative, 2.0, 1e-9);
  EXPECT_TRUE(rq.pass());
  EXPECT_THROW(interpolation_check(q, d->center_node(), mq, 0.9, 1.0, 0.5), PreconditionError);
}

TEST(Grid, BallVolumeAndMeasure) {
  EXPECT_NEAR(ball_volume(2, 1.0), std::numbers::pi, 1e-14);
  EXPECT_NEAR(ball_volume(4, 1.0), std::numbers::pi * std::numbers::pi / 2.0, 1e-14);
  auto d = make_domain(1, ShapeSpec::ball(1.0), 9);
  EXPECT_DOUBLE_EQ(measure(*d, 3), 3.0 * d->h() * d->h());
}
