#include <gtest/gtest.h>

#include <cmath>

#include "cma/solver.hpp"

using namespace cma;

namespace {

double sup_error_vs_quadratic(const GridFunction& u) {
  double e = 0.0;
  const GridDomain& d = *u.domain;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.in_domain(i)) e = std::max(e, std::abs(u.values[i] - (d.coords(i).squaredNorm() - 1.0)));
  return e;
}

}  // namespace

TEST(Solver, ExactBallOneDimension) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33);
  auto r = solve_dirichlet(d, GridFunction::constant(d, 1.0), zero_boundary_data(d));
  EXPECT_LE(sup_error_vs_quadratic(r.u), 5.0 * d->h() * d->h());
  EXPECT_LE(r.report.residual, 1e-8);
  EXPECT_GE(r.report.min_eigenvalue, 1e-6);
}

TEST(Solver, ExactBallTwoDimensions) {
  auto d = make_domain(2, ShapeSpec::ball(1.0), 11);
  auto r = solve_dirichlet(d, GridFunction::constant(d, 1.0), zero_boundary_data(d));
  EXPECT_LE(sup_error_vs_quadratic(r.u), 5.0 * d->h() * d->h());
}

TEST(Solver, BarrierOnPerturbedBall) {
  const double gamma = 0.05;
  auto d = make_domain(2, ShapeSpec::perturbed_ball(gamma), 13);
  auto r = solve_dirichlet(d, GridFunction::constant(d, 1.0), zero_boundary_data(d));
  EXPECT_LE(barrier_violation(r.u, gamma), 10.0 * d->h() * d->h());
}

TEST(Solver, SandwichWithConstantRightSide) {
  const double eps = 0.01;
  auto d = make_domain(2, ShapeSpec::perturbed_ball(0.05), 13);
  const auto g = zero_boundary_data(d);
  auto v0 = solve_dirichlet(d, GridFunction::constant(d, 1.0), g);
  auto u = solve_dirichlet(d, GridFunction::constant(d, 1.0 + eps), g);
  const double slack = 10.0 * d->h() * d->h();
  const auto cert = comparison_sandwich(u.u, v0.u, eps, 2, slack);
  EXPECT_TRUE(cert.pass());
  EXPECT_LE(cert.max_abs_difference, 4 * eps + slack);

  const auto self = comparison_sandwich(v0.u, v0.u, 0.0, 2, 0.0);
  EXPECT_EQ(self.lower_violation, 0.0);
  EXPECT_EQ(self.upper_violation, 0.0);

  GridFunction shifted = v0.u;
  for (auto& v : shifted.values)
    if (std::isfinite(v)) v += 0.1;
  EXPECT_THROW(comparison_sandwich(shifted, v0.u, eps, 2, slack), PreconditionError);
}

TEST(Solver, StabilityGapZeroForEqualData) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 25);
  auto f = GridFunction::constant(d, 1.0);
  auto r = solve_dirichlet(d, f, zero_boundary_data(d));
  const auto gap = stability_gap(r.u, r.u, f, f, 2.0);
  EXPECT_EQ(gap.lhs, 0.0);
  EXPECT_EQ(gap.rhs, 0.0);
}

TEST(Solver, StabilityRatioStableUnderRefinement) {
  auto ratio = [](int res) {
    auto d = make_domain(1, ShapeSpec::ball(1.0), res);
    // u carries the larger right side, so v - u >= 0 and the sup is attained inside
    auto f = GridFunction::constant(d, 1.02);
    auto g = GridFunction::constant(d, 1.0);
    auto u = solve_dirichlet(d, f, zero_boundary_data(d));
    auto v = solve_dirichlet(d, g, zero_boundary_data(d));
    return stability_gap(u.u, v.u, f, g, 2.0).ratio();
  };
  const double r1 = ratio(33), r2 = ratio(65);
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r2, r1, 0.2 * r1);
}

TEST(Solver, ConfigAndInputValidation) {
  SolveConfig c;
  c.damping = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.newton_tol = -1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  auto d = make_domain(1, ShapeSpec::ball(1.0), 17);
  auto bad = GridFunction::constant(d, -1.0);
  EXPECT_THROW(solve_dirichlet(d, bad, zero_boundary_data(d)), PreconditionError);
}

TEST(Solver, SuppliedInitialGuessConverges) {
  auto d = make_domain(1, ShapeSpec::perturbed_ball(0.05), 25);
  auto f = GridFunction::sample(d, [](const RealPoint& x) { return 1.0 + 0.01 * std::cos(4 * x(0)); });
  auto first = solve_dirichlet(d, f, zero_boundary_data(d));
  SolveConfig c;
  c.init_mode = SolveConfig::InitMode::Supplied;
  auto again = solve_dirichlet(d, f, zero_boundary_data(d), c, &first.u);
  EXPECT_EQ(again.report.iterations, 0);
  EXPECT_LE(cma_residual(again.u, f), 1e-8);
}
