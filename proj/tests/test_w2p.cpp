#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cma/w2p.hpp"

using namespace cma;

namespace {

RealPoint origin(int dims) { return RealPoint::Zero(dims); }

}  // namespace

TEST(W2p, LpNormOfConstant) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.5);
  const auto c = GridFunction::constant(d, -3.0);
  const double m = region.size() * d->h() * d->h();
  EXPECT_NEAR(lp_norm(c, 2.0, region), 3.0 * std::sqrt(m), 1e-12);
  EXPECT_NEAR(lp_norm(c, 1.0, region), 3.0 * m, 1e-12);
  EXPECT_THROW(lp_norm(c, 0.5, region), PreconditionError);
}

TEST(W2p, LaplacianOfSquaredNormOnHalfBall) {
  // real Laplacian of |z|^2 is 4; ||4||_{L^2(B_1/2)} = 4 sqrt(pi / 4)
  auto d = make_domain(1, ShapeSpec::ball(1.0), 129, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.5);
  GridFunction lap(d);
  const auto q = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm(); });
  for (std::size_t i : region) lap.values[i] = real_hessian(q, i).trace();
  const double expected = 4.0 * std::sqrt(std::numbers::pi / 4.0);
  EXPECT_NEAR(expected, 3.5449077, 1e-6);
  EXPECT_NEAR(lp_norm(lap, 2.0, region), expected, 0.01 * expected);
}

TEST(W2p, HolderMonotonicityOfAverages) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.3);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  GridFunction f(d);
  for (std::size_t i : region) f.values[i] = U(g);
  const double m = region.size() * d->h() * d->h();
  double prev = 0.0;
  for (double p : {1.0, 1.5, 2.0, 3.0, 6.0}) {
    const double avg = lp_norm(f, p, region) * std::pow(m, -1.0 / p);
    EXPECT_GE(avg, prev - 1e-12);
    prev = avg;
  }
}

TEST(W2p, DirectQuadratureClosedForm) {
  auto d = make_domain(2, ShapeSpec::ball(1.0), 13, 1.0);
  const auto u = GridFunction::sample(d, [](const RealPoint& x) {
    return 2.0 * (x(0) * x(0) + x(1) * x(1)) + 0.5 * (x(2) * x(2) + x(3) * x(3));
  });
  const auto region = nodes_in_ball(*d, origin(4), 0.5);
  const auto q = direct_quadrature(u, 2.0, region);
  const double m = region.size() * d->node_volume();
  EXPECT_EQ(q.nodes, region.size());
  EXPECT_EQ(q.am_hm_violations, 0u);
  EXPECT_NEAR(q.laplacian_p, 2.5 * 2.5 * m, 1e-9);
  EXPECT_NEAR(q.trace_inv_p, 2.5 * 2.5 * m, 1e-9);
  // AM-HM: tr(A) tr(A^-1) = 6.25 >= n^2
  EXPECT_GE(2.5 * 2.5, 4.0);
}

TEST(W2p, DyadicBoundIsBaseOnlyWhenBadSetsEmpty) {
  BadSetReport rep;
  rep.n = 1;
  rep.eps_bar = eps_bar_recipe(1, 2);
  for (int k = 1; k <= 3; ++k) {
    BadSetRow r;
    r.k = k;
    r.pass = true;
    r.vacuous = true;
    rep.rows.push_back(r);
  }
  const auto b = dyadic_bound(rep, 2.0, rep.eps_bar);
  ASSERT_EQ(b.terms.size(), 4u);
  EXPECT_DOUBLE_EQ(b.ratio, 0.5);
  // n = 1: complex trace bound 2, trace-inverse bound 1
  EXPECT_NEAR(b.terms[0].term, (4.0 + 1.0) * std::numbers::pi * 0.36, 1e-12);
  EXPECT_TRUE(b.tail_valid);
  EXPECT_EQ(b.tail, 0.0);
  EXPECT_NEAR(b.total, b.terms[0].term, 1e-12);

  rep.rows[1].pass = false;
  EXPECT_FALSE(dyadic_bound(rep, 2.0, rep.eps_bar).tail_valid);
  EXPECT_THROW(dyadic_bound(rep, 2.0, 0.01), PreconditionError);
  EXPECT_THROW(dyadic_bound(rep, 2.0, rep.eps_bar, 0.0), PreconditionError);
}

TEST(W2p, DyadicTailGeometric) {
  BadSetReport rep;
  rep.n = 1;
  rep.eps_bar = 1.0 / 576.0;  // ratio 1/4
  BadSetRow r;
  r.k = 1;
  r.pass = true;
  r.measure_06 = 0.1;
  rep.rows.push_back(r);
  const auto b = dyadic_bound(rep, 1.0, rep.eps_bar);
  EXPECT_DOUBLE_EQ(b.ratio, 0.25);
  // k = 1 shell: trace bound 2, inverse bound 1 -> (2 + 1) * 0.1
  EXPECT_NEAR(b.terms[1].term, 0.3, 1e-12);
  EXPECT_NEAR(b.tail, 0.3 * 0.25 / 0.75, 1e-12);
}

TEST(W2p, FullNormOfQuadratics) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 65, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.5);
  const double vol = d->h() * d->h();
  const double m = region.size() * vol;
  const auto q = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm(); });
  double su = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i : region) {
    const RealPoint x = d->coords(i);
    su += std::pow(x.squaredNorm(), 2);
    sx += 4 * x(0) * x(0);
    sy += 4 * x(1) * x(1);
  }
  const auto w = full_w2p(q, 2.0, region);
  EXPECT_NEAR(w.u_norm, std::sqrt(su * vol), 1e-12);
  EXPECT_NEAR(w.lap_norm, 4.0 * std::sqrt(m), 1e-9);
  const double expected = std::sqrt(su * vol) + std::sqrt(sx * vol) + std::sqrt(sy * vol) + 2 * 2.0 * std::sqrt(m);
  EXPECT_NEAR(w.value, expected, 1e-9);
  EXPECT_GT(w.ratio, 1.0);

  // Re(z^2): zero Laplacian, Hessian entries +-2
  const auto h = GridFunction::sample(d, [](const RealPoint& x) { return x(0) * x(0) - x(1) * x(1); });
  const auto wh = full_w2p(h, 2.0, region);
  EXPECT_NEAR(wh.lap_norm, 0.0, 1e-9);
  EXPECT_GT(wh.ratio, 10.0);
}

TEST(W2p, DirectQuadratureStableUnderRefinement) {
  auto run = [](int res) {
    auto d = make_domain(1, ShapeSpec::ball(1.0), res, 1.0);
    const auto u = GridFunction::sample(d, [](const RealPoint& x) {
      const double r2 = x.squaredNorm();
      return r2 + 0.5 * r2 * r2;
    });
    return direct_quadrature(u, 2.0, nodes_in_ball(*d, RealPoint::Zero(2), 0.5)).total();
  };
  const double a = run(65), b = run(129);
  EXPECT_NEAR(a, b, 0.03 * b);
}
