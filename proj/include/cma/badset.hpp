#pragma once

// Good/bad set classification, convex envelopes and contact sets, Monge-Ampere
// measures of convex grid functions, touching paraboloids and the dyadic
// decay experiment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cma/error.hpp"
#include "cma/grid.hpp"
#include "cma/sections.hpp"

namespace cma {

// ---------------------------------------------------------------------------
// D_k / A_k

/// Height and outer radius max |z - x0| of one section at a base point.
struct SectionExtent {
  double mu = 0.0;
  double radius = 0.0;
};

using ExtentTable = std::map<std::size_t, std::vector<SectionExtent>>;

inline std::vector<SectionExtent> extents_from_chain(const SectionChain& c) {
  std::vector<SectionExtent> out;
  for (const auto& lv : c.levels) out.push_back({lv.mu, lv.radius});
  return out;
}

/// Nodes of the closed ball B(0, r) whose multi-index is congruent to the
/// center index modulo `stride` in every axis.
inline std::vector<std::size_t> strided_ball_nodes(const GridDomain& d, double r, int stride) {
  if (stride < 1) throw PreconditionError("strided_ball_nodes: stride must be positive");
  const int c = d.resolution() / 2;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.in_domain(i)) continue;
    const Offset m = d.multi_index(i);
    bool on = true;
    for (int a = 0; a < d.dims() && on; ++a) on = ((m[a] - c) % stride) == 0;
    if (on && d.coords(i).norm() <= r + 1e-12) out.push_back(i);
  }
  return out;
}

/// Measure of a strided node set: count * (stride h)^{2n}.
inline double strided_measure(const GridDomain& d, std::size_t count, int stride) {
  return static_cast<double>(count) * std::pow(stride * d.h(), d.dims());
}

/// D_k membership per sampled node: every available section fits in
/// B(z0, sqrt(10^k mu)) up to `slack` (one lattice cell by default).
inline std::vector<char> classify_Dk(const GridDomain& d, const std::vector<std::size_t>& sampled,
                                     const ExtentTable& extents, int k, double slack = -1.0) {
  if (k < 1) throw PreconditionError("classify_Dk: k must be at least 1");
  const double s = slack >= 0.0 ? slack : d.h();
  std::vector<char> mask(sampled.size(), 0);
  for (std::size_t j = 0; j < sampled.size(); ++j) {
    const auto it = extents.find(sampled[j]);
    if (it == extents.end() || it->second.empty()) {
      std::ostringstream os;
      os << "classify_Dk: no section chain at node " << sampled[j];
      throw PreconditionError(os.str());
    }
    bool good = true;
    for (const auto& e : it->second) good = good && e.radius <= std::sqrt(std::pow(10.0, k) * e.mu) + s;
    mask[j] = good;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Convex envelope

/// Lattice directions e_a and e_a +- e_b.
inline std::vector<Offset> envelope_directions(int dims) {
  std::vector<Offset> out;
  for (int a = 0; a < dims; ++a) {
    Offset o{};
    o[a] = 1;
    out.push_back(o);
  }
  for (int a = 0; a < dims; ++a)
    for (int b = a + 1; b < dims; ++b)
      for (int s : {1, -1}) {
        Offset o{};
        o[a] = 1;
        o[b] = s;
        out.push_back(o);
      }
  return out;
}

namespace detail {

/// Replaces values along one lattice line by their lower convex hull; returns the largest decrease.
inline double hull_line(std::vector<double>& vals) {
  const std::size_t m = vals.size();
  if (m < 3) return 0.0;
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < m; ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      // drop b when it lies on or above the chord a-i
      const double lhs = (vals[b] - vals[a]) * static_cast<double>(i - a);
      const double rhs = (vals[i] - vals[a]) * static_cast<double>(b - a);
      if (lhs >= rhs)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }
  double change = 0.0;
  for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
    const std::size_t a = hull[s], b = hull[s + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
      const double v = (1.0 - t) * vals[a] + t * vals[b];
      if (v < vals[i]) {
        change = std::max(change, vals[i] - v);
        vals[i] = v;
      }
    }
  }
  return change;
}

}  // namespace detail

struct EnvelopeStats {
  int sweeps = 0;
  double last_change = 0.0;
};

/// Largest function below w on `region` that is convex along every lattice
/// line in the directions e_a, e_a +- e_b. Each sweep replaces the values on
/// every line by their exact 1D lower hull. Nodes outside `region` keep NaN.
inline GridFunction convex_envelope(const GridFunction& w, const std::vector<std::size_t>& region,
                                    double tol = 1e-10, int max_sweeps = 10000, EnvelopeStats* stats = nullptr) {
  const GridDomain& d = *w.domain;
  std::vector<char> in(d.size(), 0);
  for (std::size_t i : region) {
    if (!std::isfinite(w.values[i])) throw PreconditionError("convex_envelope: w is not finite on the region");
    in[i] = 1;
  }
  GridFunction g(w.domain);
  for (std::size_t i : region) g.values[i] = w.values[i];

  // Precompute the lines once.
  std::vector<std::vector<std::size_t>> lines;
  for (const auto& dir : envelope_directions(d.dims())) {
    Offset back{};
    for (int a = 0; a < d.dims(); ++a) back[a] = -dir[a];
    for (std::size_t i : region) {
      const auto p = d.offset(i, back);
      if (p && in[*p]) continue;
      std::vector<std::size_t> line{i};
      for (auto q = d.offset(i, dir); q && in[*q]; q = d.offset(*q, dir)) line.push_back(*q);
      if (line.size() >= 3) lines.push_back(std::move(line));
    }
  }
  EnvelopeStats st;
  std::vector<double> buf;
  for (;;) {
    double change = 0.0;
    for (const auto& line : lines) {
      buf.resize(line.size());
      for (std::size_t t = 0; t < line.size(); ++t) buf[t] = g.values[line[t]];
      const double c = detail::hull_line(buf);
      if (c > 0.0) {
        for (std::size_t t = 0; t < line.size(); ++t) g.values[line[t]] = buf[t];
        change = std::max(change, c);
      }
    }
    ++st.sweeps;
    st.last_change = change;
    if (change < tol) break;
    if (st.sweeps >= max_sweeps) {
      if (stats) *stats = st;
      throw ConvergenceError("convex_envelope: sweep limit reached", change, st.sweeps);
    }
  }
  if (stats) *stats = st;
  return g;
}

/// Value at x of the lower convex hull of the points (p_i, w_i) in R^2 x R:
/// min sum l_i w_i subject to sum l_i = 1, sum l_i p_i = x, l >= 0, by a
/// two-phase revised simplex on the 3 equality rows (Bland's rule).
inline double lower_hull_value_2d(const std::vector<Eigen::Vector2d>& pts, const std::vector<double>& w,
                                  const Eigen::Vector2d& x) {
  const int N = static_cast<int>(pts.size());
  const int total = N + 3;  // columns N..N+2 are artificial
  Eigen::Vector3d b(1.0, x(0), x(1));
  Eigen::Vector3d sign(1.0, 1.0, 1.0);
  for (int r = 0; r < 3; ++r)
    if (b(r) < 0.0) sign(r) = -1.0, b(r) = -b(r);
  auto column = [&](int j) -> Eigen::Vector3d {
    if (j >= N) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e(j - N) = 1.0;
      return e;
    }
    return Eigen::Vector3d(sign(0), sign(1) * pts[j](0), sign(2) * pts[j](1));
  };
  std::array<int, 3> basis{N, N + 1, N + 2};
  auto run = [&](auto cost, bool allow_artificial) {
    for (int iter = 0; iter < 50 * total + 1000; ++iter) {
      Eigen::Matrix3d B;
      for (int r = 0; r < 3; ++r) B.col(r) = column(basis[r]);
      const Eigen::Matrix3d Binv = B.inverse();
      const Eigen::Vector3d xb = Binv * b;
      Eigen::Vector3d cb;
      for (int r = 0; r < 3; ++r) cb(r) = cost(basis[r]);
      const Eigen::RowVector3d y = cb.transpose() * Binv;
      int enter = -1;
      for (int j = 0; j < total; ++j) {
        if (!allow_artificial && j >= N) continue;
        if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
        if (cost(j) - y * column(j) < -1e-12) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      const Eigen::Vector3d dcol = Binv * column(enter);
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < 3; ++r)
        if (dcol(r) > 1e-12) {
          const double ratio = std::max(0.0, xb(r)) / dcol(r);
          if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis[r] < basis[leave])) {
            best = ratio;
            leave = r;
          }
        }
      if (leave < 0) throw ConvergenceError("lower_hull_value_2d: unbounded program", 0.0, iter);
      basis[leave] = enter;
    }
    throw ConvergenceError("lower_hull_value_2d: iteration limit", 0.0, 0);
  };
  run([&](int j) { return j >= N ? 1.0 : 0.0; }, true);
  {
    Eigen::Matrix3d B;
    for (int r = 0; r < 3; ++r) B.col(r) = column(basis[r]);
    const Eigen::Vector3d xb = B.inverse() * b;
    for (int r = 0; r < 3; ++r)
      if (basis[r] >= N && xb(r) > 1e-9) throw PreconditionError("lower_hull_value_2d: point outside the hull");
    // pivot remaining (zero-level) artificials out
    for (int r = 0; r < 3; ++r) {
      if (basis[r] < N) continue;
      const Eigen::Matrix3d Binv = B.inverse();
      for (int j = 0; j < N; ++j) {
        if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
        if (std::abs((Binv * column(j))(r)) > 1e-9) {
          basis[r] = j;
          B.col(r) = column(j);
          break;
        }
      }
    }
  }
  run([&](int j) { return j >= N ? 0.0 : w[j]; }, false);
  Eigen::Matrix3d B;
  for (int r = 0; r < 3; ++r) B.col(r) = column(basis[r]);
  const Eigen::Vector3d xb = B.inverse() * b;
  double v = 0.0;
  for (int r = 0; r < 3; ++r)
    if (basis[r] < N) v += xb(r) * w[basis[r]];
  return v;
}

/// Exact convex envelope on a planar region (n = 1), node by node.
inline GridFunction exact_envelope_2d(const GridFunction& w, const std::vector<std::size_t>& region) {
  const GridDomain& d = *w.domain;
  if (d.n() != 1) throw PreconditionError("exact_envelope_2d: requires n = 1");
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> vals;
  for (std::size_t i : region) {
    const RealPoint x = d.coords(i);
    pts.emplace_back(x(0), x(1));
    vals.push_back(w.values[i]);
  }
  GridFunction g(w.domain);
  for (std::size_t k = 0; k < region.size(); ++k) g.values[region[k]] = lower_hull_value_2d(pts, vals, pts[k]);
  return g;
}

inline std::vector<std::size_t> contact_set(const GridFunction& w, const GridFunction& gamma,
                                            const std::vector<std::size_t>& region, double tol = 1e-9) {
  std::vector<std::size_t> out;
  for (std::size_t i : region)
    if (w.values[i] - gamma.values[i] <= tol) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Monge-Ampere measure

struct MAMeasure {
  double value = 0.0;
  std::size_t unbounded_nodes = 0;  // subgradient cell reaches the clipping box
  bool approximate = false;         // n = 2 determinant quadrature
};

namespace detail {

using Polygon = std::vector<Eigen::Vector2d>;

/// Keeps {p : a . p <= c}.
inline Polygon clip(const Polygon& poly, const Eigen::Vector2d& a, double c) {
  Polygon out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Vector2d& P = poly[i];
    const Eigen::Vector2d& Q = poly[(i + 1) % m];
    const double fp = a.dot(P) - c, fq = a.dot(Q) - c;
    if (fp <= 0.0) out.push_back(P);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(P + (Q - P) * (fp / (fp - fq)));
  }
  return out;
}

inline double polygon_area(const Polygon& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& P = p[i];
    const auto& Q = p[(i + 1) % p.size()];
    a += P(0) * Q(1) - P(1) * Q(0);
  }
  return 0.5 * std::abs(a);
}

}  // namespace detail

/// m(subgradient image of E) for a lattice-convex gamma on `region`. For n = 1
/// each node's subgradient cell is the polygon {p : gamma(y) >= gamma(x) + p.(y - x)};
/// for n = 2 the sum of det(D^2 gamma)^+ h^4 is returned and flagged approximate.
inline MAMeasure ma_measure(const GridFunction& gamma, const std::vector<std::size_t>& E,
                            const std::vector<std::size_t>& region, double box = 0.0) {
  const GridDomain& d = *gamma.domain;
  MAMeasure out;
  if (d.n() == 2) {
    out.approximate = true;
    for (std::size_t i : E) {
      const double det = real_hessian(gamma, i).determinant();
      out.value += std::max(0.0, det) * d.node_volume();
    }
    return out;
  }
  double maxslope = 1.0;
  for (std::size_t i : region)
    for (int a = 0; a < 2; ++a) {
      Offset o{};
      o[a] = 1;
      const auto j = d.offset(i, o);
      if (j && d.in_domain(*j) && std::isfinite(gamma.values[*j]))
        maxslope = std::max(maxslope, std::abs(gamma.values[*j] - gamma.values[i]) / d.h());
    }
  const double P = box > 0.0 ? box : 1e3 * maxslope;
  for (std::size_t i : E) {
    const RealPoint x = d.coords(i);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j : region)
      if (j != i) order.emplace_back((d.coords(j) - x).squaredNorm(), j);
    std::sort(order.begin(), order.end());
    detail::Polygon poly{{-P, -P}, {P, -P}, {P, P}, {-P, P}};
    const double scale = 1e-12 * (1.0 + std::abs(gamma.values[i]));
    for (const auto& [dist, j] : order) {
      const RealPoint y = d.coords(j);
      const Eigen::Vector2d a(y(0) - x(0), y(1) - x(1));
      poly = detail::clip(poly, a, gamma.values[j] - gamma.values[i] + scale);
      if (poly.size() < 3) {
        std::ostringstream os;
        os << "ma_measure: empty subgradient at node " << i << " (function is not convex on the lattice)";
        throw PreconditionError(os.str());
      }
    }
    bool unbounded = false;
    for (const auto& p : poly) unbounded = unbounded || p.cwiseAbs().maxCoeff() >= P * (1.0 - 1e-9);
    if (unbounded) ++out.unbounded_nodes;
    out.value += detail::polygon_area(poly);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Touching paraboloids

struct Opening {
  double kappa = 0.0;
  bool positive = false;  // false: no positive opening, kappa reported as 0
};

/// Largest kappa with kappa |y - x0|^2 + u(x0) + p.(y - x0) <= u(y) on the
/// region, p the centered gradient at x0.
inline Opening touching_paraboloid_opening(const GridFunction& u, std::size_t x0,
                                           const std::vector<std::size_t>& region) {
  const GridDomain& d = *u.domain;
  const RealPoint p = gradient(u, x0);
  const RealPoint c = d.coords(x0);
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t j : region) {
    if (j == x0) continue;
    const RealPoint dy = d.coords(j) - c;
    kappa = std::min(kappa, (u.values[j] - u.values[x0] - p.dot(dy)) / dy.squaredNorm());
  }
  Opening o;
  if (kappa > 0.0 && std::isfinite(kappa)) {
    o.kappa = kappa;
    o.positive = true;
  }
  return o;
}

// ---------------------------------------------------------------------------
// Hessian bounds on D_k

struct HessianBoundVerdict {
  int k = 0;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_eigenvalue = 0.0;
  double lower = 0.0;  // 10^{-k}
  double upper = 0.0;  // 2 * 10^{(n-1)k}
  bool pass() const { return violations == 0; }
};

inline HessianBoundVerdict hessian_bounds_on_Dk(const GridFunction& u, const std::vector<std::size_t>& dk_nodes, int k,
                                                double slack = 0.1) {
  const int n = u.domain->n();
  HessianBoundVerdict v;
  v.k = k;
  v.lower = std::pow(10.0, -k);
  v.upper = 2.0 * std::pow(10.0, (n - 1) * k);
  for (std::size_t i : dk_nodes) {
    const Eigen::VectorXd ev = complex_hessian(u, i).eigenvalues();
    ++v.checked;
    v.min_eigenvalue = std::min(v.min_eigenvalue, ev(0));
    v.max_eigenvalue = std::max(v.max_eigenvalue, ev(ev.size() - 1));
    if (ev(0) < (1.0 - slack) * v.lower || ev(ev.size() - 1) > (1.0 + slack) * v.upper) ++v.violations;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Decay experiment

/// eps_bar with 10^{(n-1)p} 12^{2n} eps_bar = 1/2.
inline double eps_bar_recipe(int n, double p) { return 0.5 / (std::pow(10.0, (n - 1) * p) * std::pow(12.0, 2 * n)); }

inline double decay_radius(int k) {
  double r = 0.7;
  for (int j = 1; j <= k; ++j) r -= 0.1 * std::pow(2.0, -j);
  return r;
}

struct BadSetRow {
  int k = 0;
  double r = 0.0;
  double measure = 0.0;  // m(A_k n B_{r_k})
  double bound = 0.0;    // m(B_0.7) (12^{2n} eps_bar)^{k-1}
  double ratio = 0.0;
  double measure_06 = 0.0;  // m(A_k n B_0.6)
  std::size_t dk_count = 0;
  std::size_t ak_count = 0;
  bool pass = false;
  bool vacuous = false;  // A_k n B_{r_k} empty
};

struct BadSetReport {
  int n = 1;
  int stride = 1;
  double eps_bar = 0.0;
  double sigma = 0.0;
  double eps = 0.0;
  double gamma = 0.0;
  std::size_t sampled = 0;
  std::vector<BadSetRow> rows;
  bool monotone = true;
  bool pass() const {
    return monotone && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  }
};

inline BadSetReport badset_decay_experiment(const GridDomain& d, const std::vector<std::size_t>& sampled,
                                            const ExtentTable& extents, double eps_bar, int k_max, int stride) {
  if (k_max < 1) throw PreconditionError("badset_decay_experiment: k_max must be at least 1");
  BadSetReport rep;
  rep.n = d.n();
  rep.stride = stride;
  rep.eps_bar = eps_bar;
  rep.sampled = sampled.size();
  const double mb07 = ball_volume(d.dims(), 0.7);
  const double q = std::pow(12.0, 2 * d.n()) * eps_bar;
  for (int k = 1; k <= k_max; ++k) {
    const auto mask = classify_Dk(d, sampled, extents, k);
    BadSetRow row;
    row.k = k;
    row.r = decay_radius(k);
    std::size_t in_r = 0, in_06 = 0;
    for (std::size_t j = 0; j < sampled.size(); ++j) {
      if (mask[j]) {
        ++row.dk_count;
        continue;
      }
      ++row.ak_count;
      const double rad = d.coords(sampled[j]).norm();
      if (rad < row.r) ++in_r;
      if (rad < 0.6) ++in_06;
    }
    row.measure = strided_measure(d, in_r, stride);
    row.measure_06 = strided_measure(d, in_06, stride);
    row.bound = mb07 * std::pow(q, k - 1);
    row.ratio = row.bound > 0.0 ? row.measure / row.bound : 0.0;
    row.vacuous = in_r == 0;
    row.pass = row.measure <= row.bound;
    if (!rep.rows.empty() && row.measure > rep.rows.back().measure) rep.monotone = false;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Contact density

struct ContactDensity {
  double fraction = 0.0;  // m(contact n B_1/2) / m(B_1/2)
  double constant = 0.0;  // (1 - fraction) / (sqrt(eps) + sqrt(gamma)); 0 when both vanish
  std::size_t contact_nodes = 0;
  std::size_t ball_nodes = 0;
  int sweeps = 0;
};

/// Contact set of the convex envelope of u0 - v0/2 on B_0.9, measured on B_1/2.
inline ContactDensity contact_density(const GridFunction& u0, const GridFunction& v0, double eps, double gamma,
                                      double tol = 1e-9) {
  const GridDomain& d = *u0.domain;
  GridFunction w(u0.domain);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.in_domain(i)) w.values[i] = u0.values[i] - 0.5 * v0.values[i];
  const RealPoint zero = RealPoint::Zero(d.dims());
  const auto region = nodes_in_ball(d, zero, 0.9);
  EnvelopeStats st;
  const GridFunction g = convex_envelope(w, region, 1e-12, 10000, &st);
  const auto contact = contact_set(w, g, region, tol);
  ContactDensity c;
  c.sweeps = st.sweeps;
  for (std::size_t i : region)
    if (d.coords(i).norm() < 0.5) ++c.ball_nodes;
  for (std::size_t i : contact)
    if (d.coords(i).norm() < 0.5) ++c.contact_nodes;
  c.fraction = c.ball_nodes ? static_cast<double>(c.contact_nodes) / static_cast<double>(c.ball_nodes) : 0.0;
  const double denom = std::sqrt(eps) + std::sqrt(gamma);
  c.constant = denom > 0.0 ? (1.0 - c.fraction) / denom : 0.0;
  return c;
}

/// Contact density constants agree within 30% of the larger (both zero counts as stable).
inline bool contact_constant_stable(double c1, double c2) {
  return std::abs(c1 - c2) <= 0.3 * std::max(std::abs(c1), std::abs(c2));
}

struct SubDeterminantCheck {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst = 0.0;  // max of lhs - rhs
};

/// det(D^2 G)^{1/2n} + det(D^2 (v0/2))^{1/2n} <= det(D^2 u0)^{1/2n} (real Hessians) at
/// contact nodes whose full stencil lies in the contact set and where all three are PSD.
inline SubDeterminantCheck subdeterminant_check(const GridFunction& u0, const GridFunction& v0,
                                                const GridFunction& gamma, const std::vector<std::size_t>& contact,
                                                double slack = 1e-6) {
  const GridDomain& d = *u0.domain;
  std::vector<char> inC(d.size(), 0);
  for (std::size_t i : contact) inC[i] = 1;
  const auto offs = stencil_offsets(d.dims());
  const double e = 1.0 / d.dims();
  SubDeterminantCheck out;
  for (std::size_t i : contact) {
    bool full = true;
    for (const auto& o : offs) {
      const auto j = d.offset(i, o);
      full = full && j && inC[*j];
    }
    if (!full) continue;
    const RealMatrix Hg = real_hessian(gamma, i);
    const RealMatrix Hv = 0.5 * real_hessian(v0, i);
    const RealMatrix Hu = real_hessian(u0, i);
    auto psd = [](const RealMatrix& m) {
      return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(m)).eigenvalues()(0) >= -1e-12;
    };
    if (!psd(Hg) || !psd(Hv) || !psd(Hu)) continue;
    ++out.checked;
    const double lhs = std::pow(std::max(0.0, Hg.determinant()), e) + std::pow(std::max(0.0, Hv.determinant()), e);
    const double rhs = std::pow(std::max(0.0, Hu.determinant()), e);
    out.worst = std::max(out.worst, lhs - rhs);
    if (lhs > rhs + slack) ++out.violations;
  }
  return out;
}

}  // namespace cma
