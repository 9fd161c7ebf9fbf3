#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cma/badset.hpp"

using namespace cma;

namespace {

// Lower convex hull of (i, v_i) at every index by checking all chords.
std::vector<double> brute_hull(const std::vector<double>& v) {
  const int m = static_cast<int>(v.size());
  std::vector<double> out(v);
  for (int i = 0; i < m; ++i)
    for (int a = 0; a <= i; ++a)
      for (int b = i; b < m; ++b) {
        if (a == b) continue;
        const double t = static_cast<double>(i - a) / (b - a);
        out[i] = std::min(out[i], (1 - t) * v[a] + t * v[b]);
      }
  return out;
}

// Lower hull at x over all triangles / segments / points of the data.
double brute_hull_2d(const std::vector<Eigen::Vector2d>& p, const std::vector<double>& w, const Eigen::Vector2d& x) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t N = p.size();
  for (std::size_t a = 0; a < N; ++a) {
    if ((p[a] - x).norm() < 1e-12) best = std::min(best, w[a]);
    for (std::size_t b = a + 1; b < N; ++b) {
      const Eigen::Vector2d e = p[b] - p[a], r = x - p[a];
      const double cr = e.x() * r.y() - e.y() * r.x();
      const double t = e.dot(r) / e.squaredNorm();
      if (std::abs(cr) < 1e-12 && t >= -1e-12 && t <= 1 + 1e-12) best = std::min(best, (1 - t) * w[a] + t * w[b]);
      for (std::size_t c = b + 1; c < N; ++c) {
        Eigen::Matrix2d M;
        M.col(0) = p[b] - p[a];
        M.col(1) = p[c] - p[a];
        const double det = M.determinant();
        if (std::abs(det) < 1e-12) continue;
        const Eigen::Vector2d l = M.inverse() * r;
        if (l.minCoeff() < -1e-12 || l.sum() > 1 + 1e-12) continue;
        best = std::min(best, (1 - l.sum()) * w[a] + l(0) * w[b] + l(1) * w[c]);
      }
    }
  }
  return best;
}

RealPoint origin(int dims) { return RealPoint::Zero(dims); }

}  // namespace

TEST(BadSet, HullLineMatchesBruteForce) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(3 + t % 15);
    for (auto& x : v) x = U(g);
    const auto oracle = brute_hull(v);
    auto w = v;
    detail::hull_line(w);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w[i], oracle[i], 1e-12);
  }
}

TEST(BadSet, EnvelopeDirections) {
  EXPECT_EQ(envelope_directions(2).size(), 4u);
  EXPECT_EQ(envelope_directions(4).size(), 16u);
}

TEST(BadSet, EnvelopeOfConvexFunctionIsItself) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto w = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm() + 0.3 * x(0); });
  const auto region = nodes_in_ball(*d, origin(2), 0.8);
  EnvelopeStats st;
  const auto g = convex_envelope(w, region, 1e-12, 100, &st);
  for (std::size_t i : region) EXPECT_NEAR(g.values[i], w.values[i], 1e-12);
  EXPECT_LE(st.sweeps, 2);
  EXPECT_EQ(contact_set(w, g, region).size(), region.size());
}

TEST(BadSet, DoubleWellEnvelopeAgainstClosedForm) {
  // w = (x^2 - 1/4)^2 + y^2; on |x|, |y| <= 1/2 both envelopes equal y^2.
  auto d = make_domain(1, ShapeSpec::ball(1.0), 21, 1.0);
  auto fn = [](const RealPoint& x) { return std::pow(x(0) * x(0) - 0.25, 2) + x(1) * x(1); };
  const auto w = GridFunction::sample(d, fn);
  const auto region = nodes_in_ball(*d, origin(2), 0.9);
  const auto line = convex_envelope(w, region);
  const auto exact = exact_envelope_2d(w, region);
  for (std::size_t i : region) {
    const RealPoint x = d->coords(i);
    EXPECT_LE(exact.values[i], line.values[i] + 1e-9);
    EXPECT_LE(line.values[i], w.values[i] + 1e-12);
    if (std::abs(x(0)) <= 0.5 + 1e-9 && std::abs(x(1)) <= 0.5 + 1e-9) {
      EXPECT_NEAR(line.values[i], x(1) * x(1), 1e-9);
      EXPECT_NEAR(exact.values[i], x(1) * x(1), 1e-9);
    }
  }
  const auto contact = contact_set(w, line, region);
  EXPECT_FALSE(std::binary_search(contact.begin(), contact.end(), d->center_node()));
  RealPoint p(2);
  p << 0.5, 0.0;
  EXPECT_TRUE(std::binary_search(contact.begin(), contact.end(), d->nearest_node(p)));
}

TEST(BadSet, ExactHullMatchesTriangleEnumeration) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto d = make_domain(1, ShapeSpec::ball(1.0), 9, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.9);
  for (int t = 0; t < 3; ++t) {
    GridFunction w(d);
    for (std::size_t i : region) w.values[i] = U(g);
    std::vector<Eigen::Vector2d> pts;
    std::vector<double> vals;
    for (std::size_t i : region) {
      pts.emplace_back(d->coords(i)(0), d->coords(i)(1));
      vals.push_back(w.values[i]);
    }
    const auto e = exact_envelope_2d(w, region);
    for (std::size_t k = 0; k < region.size(); ++k)
      EXPECT_NEAR(e.values[region[k]], brute_hull_2d(pts, vals, pts[k]), 1e-10);
  }
}

TEST(BadSet, EnvelopeRejectsNonFiniteInput) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 17, 1.0);
  GridFunction w = GridFunction::constant(d, 0.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.5);
  w.values[region.front()] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(convex_envelope(w, region), PreconditionError);
}

TEST(BadSet, MongeAmpereMeasureOfParaboloid) {
  // gradient image of B_r under |x|^2 is B_{2r}: area 4 pi r^2
  auto d = make_domain(1, ShapeSpec::ball(1.0), 41, 1.0);
  const auto q = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm(); });
  const auto region = nodes_in_ball(*d, origin(2), 0.9);
  const double r = 0.5;
  const auto E = nodes_in_ball(*d, origin(2), r);
  const auto m = ma_measure(q, E, region);
  EXPECT_EQ(m.unbounded_nodes, 0u);
  EXPECT_FALSE(m.approximate);
  EXPECT_NEAR(m.value, 4 * d->h() * d->h() * E.size(), 1e-6);
  EXPECT_NEAR(m.value, 4 * std::numbers::pi * r * r, 0.05 * 4 * std::numbers::pi * r * r);

  const auto aff = GridFunction::sample(d, [](const RealPoint& x) { return 1.0 + 2.0 * x(0) - x(1); });
  EXPECT_NEAR(ma_measure(aff, E, region).value, 0.0, 1e-6);

  const auto concave = GridFunction::sample(d, [](const RealPoint& x) { return -x.squaredNorm(); });
  EXPECT_THROW(ma_measure(concave, E, region), PreconditionError);
}

TEST(BadSet, TouchingParaboloidOpening) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto region = nodes_in_ball(*d, origin(2), 0.8);
  const double k0 = 0.37;
  const auto u = GridFunction::sample(d, [&](const RealPoint& x) { return k0 * x.squaredNorm() + x(0) - 2 * x(1); });
  RealPoint p(2);
  p << 0.25, -0.125;
  const auto o = touching_paraboloid_opening(u, d->nearest_node(p), region);
  EXPECT_TRUE(o.positive);
  EXPECT_NEAR(o.kappa, k0, 1e-10);

  // anisotropic: the opening is the smaller eigenvalue
  const auto a = GridFunction::sample(d, [](const RealPoint& x) { return x(0) * x(0) + 0.2 * x(1) * x(1); });
  EXPECT_NEAR(touching_paraboloid_opening(a, d->center_node(), region).kappa, 0.2, 1e-10);

  const auto c = GridFunction::sample(d, [](const RealPoint& x) { return -x.squaredNorm(); });
  const auto oc = touching_paraboloid_opening(c, d->center_node(), region);
  EXPECT_FALSE(oc.positive);
  EXPECT_EQ(oc.kappa, 0.0);
}

TEST(BadSet, StridedSampling) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 65, 1.0);
  const auto all = strided_ball_nodes(*d, 0.8, 1);
  const auto s4 = strided_ball_nodes(*d, 0.8, 4);
  EXPECT_NEAR(strided_measure(*d, s4.size(), 4), std::numbers::pi * 0.64, 0.06 * std::numbers::pi * 0.64);
  EXPECT_NEAR(strided_measure(*d, all.size(), 1), std::numbers::pi * 0.64, 0.02 * std::numbers::pi * 0.64);
  EXPECT_TRUE(std::binary_search(s4.begin(), s4.end(), d->center_node()));
  EXPECT_THROW(strided_ball_nodes(*d, 0.8, 0), PreconditionError);
}

TEST(BadSet, ClassifyDkOnSyntheticExtents) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto sampled = strided_ball_nodes(*d, 0.8, 4);
  ASSERT_GE(sampled.size(), 2u);
  ExtentTable round, mixed;
  for (std::size_t i : sampled) {
    round[i] = {{0.04, 0.2}, {0.01, 0.1}};  // sections of |z|^2: radius sqrt(mu)
    mixed[i] = round[i];
  }
  // axis ratio 10: radius 10 sqrt(mu)
  mixed[sampled[0]] = {{0.0004, 0.2}};
  for (int k = 1; k <= 3; ++k) {
    const auto m = classify_Dk(*d, sampled, round, k);
    EXPECT_TRUE(std::all_of(m.begin(), m.end(), [](char c) { return c != 0; }));
  }
  const auto m1 = classify_Dk(*d, sampled, mixed, 1, 0.0);
  const auto m2 = classify_Dk(*d, sampled, mixed, 2, 0.0);
  const auto m3 = classify_Dk(*d, sampled, mixed, 3, 0.0);
  EXPECT_FALSE(m1[0]);
  EXPECT_TRUE(m2[0]);
  EXPECT_TRUE(m3[0]);
  for (std::size_t j = 0; j < sampled.size(); ++j) {
    EXPECT_LE(m1[j], m2[j]);
    EXPECT_LE(m2[j], m3[j]);
  }
  ExtentTable missing = round;
  missing.erase(sampled[1]);
  EXPECT_THROW(classify_Dk(*d, sampled, missing, 1), PreconditionError);
  EXPECT_THROW(classify_Dk(*d, sampled, round, 0), PreconditionError);
}

TEST(BadSet, HessianBounds) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto nodes = nodes_in_ball(*d, origin(2), 0.5);
  auto scaled = [&](double s) {
    return GridFunction::sample(d, [s](const RealPoint& x) { return s * x.squaredNorm(); });
  };
  const auto ok = hessian_bounds_on_Dk(scaled(1.0), nodes, 1);
  EXPECT_TRUE(ok.pass());
  EXPECT_EQ(ok.checked, nodes.size());
  EXPECT_NEAR(ok.min_eigenvalue, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(ok.lower, 0.1);
  EXPECT_DOUBLE_EQ(ok.upper, 2.0);
  EXPECT_EQ(hessian_bounds_on_Dk(scaled(0.05), nodes, 1).violations, nodes.size());
  EXPECT_EQ(hessian_bounds_on_Dk(scaled(3.0), nodes, 1).violations, nodes.size());
  EXPECT_TRUE(hessian_bounds_on_Dk(scaled(0.05), nodes, 2).pass());
}

TEST(BadSet, RecipesAndRadii) {
  EXPECT_DOUBLE_EQ(eps_bar_recipe(1, 2), 1.0 / 288.0);
  EXPECT_DOUBLE_EQ(eps_bar_recipe(2, 2), 0.5 / (100.0 * 20736.0));
  EXPECT_DOUBLE_EQ(decay_radius(0), 0.7);
  EXPECT_DOUBLE_EQ(decay_radius(1), 0.65);
  EXPECT_DOUBLE_EQ(decay_radius(2), 0.625);
  EXPECT_GT(decay_radius(30), 0.6);
}

TEST(BadSet, DecayExperimentVacuousAndFailing) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 65, 1.0);
  const int stride = 2;
  const auto sampled = strided_ball_nodes(*d, 0.8, stride);
  ExtentTable good, bad;
  for (std::size_t i : sampled) {
    good[i] = {{0.01, 0.1}};
    bad[i] = {{0.01, 5.0}};
  }
  const double eb = eps_bar_recipe(1, 2);
  const auto rg = badset_decay_experiment(*d, sampled, good, eb, 3, stride);
  EXPECT_TRUE(rg.pass());
  for (const auto& r : rg.rows) {
    EXPECT_TRUE(r.vacuous);
    EXPECT_EQ(r.measure, 0.0);
    EXPECT_EQ(r.dk_count, sampled.size());
  }
  EXPECT_NEAR(rg.rows[1].bound, ball_volume(2, 0.7) * 0.5, 1e-12);

  // everything bad: A_k is all of B_0.8, so k = 2 exceeds half of m(B_0.7)
  const auto rb = badset_decay_experiment(*d, sampled, bad, eb, 2, stride);
  EXPECT_TRUE(rb.rows[0].pass);
  EXPECT_FALSE(rb.rows[1].pass);
  EXPECT_FALSE(rb.pass());
  EXPECT_NEAR(rb.rows[0].measure, ball_volume(2, 0.65), 0.05 * ball_volume(2, 0.65));
  EXPECT_NEAR(rb.rows[1].measure_06, ball_volume(2, 0.6), 0.05 * ball_volume(2, 0.6));
}

TEST(BadSet, ContactDensityOfExactBall) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto q = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm() - 1.0; });
  const auto c = contact_density(q, q, 0.0, 0.0);
  EXPECT_EQ(c.fraction, 1.0);
  EXPECT_EQ(c.constant, 0.0);
  EXPECT_TRUE(contact_constant_stable(0.0, 0.0));
  EXPECT_TRUE(contact_constant_stable(1.0, 1.25));
  EXPECT_FALSE(contact_constant_stable(1.0, 2.0));

  // a dent in u0 leaves a hole in the contact set
  auto u = q;
  const auto dent = nodes_in_ball(*d, origin(2), 0.2);
  for (std::size_t i : dent) u.values[i] += 0.05 * (0.04 - d->coords(i).squaredNorm()) / 0.04;
  const auto cd = contact_density(u, q, 0.0, 0.01);
  EXPECT_LT(cd.fraction, 1.0);
  EXPECT_NEAR(cd.constant, (1.0 - cd.fraction) / 0.1, 1e-12);
}

TEST(BadSet, SubdeterminantOnQuadratics) {
  auto d = make_domain(1, ShapeSpec::ball(1.0), 33, 1.0);
  const auto u0 = GridFunction::sample(d, [](const RealPoint& x) { return 2.0 * x.squaredNorm(); });
  const auto v0 = GridFunction::sample(d, [](const RealPoint& x) { return x.squaredNorm(); });
  GridFunction w(d);
  for (std::size_t i = 0; i < d->size(); ++i)
    if (d->in_domain(i)) w.values[i] = u0.values[i] - 0.5 * v0.values[i];
  const auto region = nodes_in_ball(*d, origin(2), 0.9);
  const auto g = convex_envelope(w, region);
  const auto contact = contact_set(w, g, region);
  const auto s = subdeterminant_check(u0, v0, g, contact);
  EXPECT_GT(s.checked, 0u);
  EXPECT_EQ(s.violations, 0u);
}
