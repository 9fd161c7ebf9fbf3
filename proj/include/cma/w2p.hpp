#pragma once

// L^p norms of second derivatives: direct quadrature, dyadic bad-set bound,
// full real Hessian norm.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cma/badset.hpp"
#include "cma/error.hpp"
#include "cma/grid.hpp"

namespace cma {

/// (sum |field|^p h^{2n})^{1/p} over region.
inline double lp_norm(const GridFunction& field, double p, const std::vector<std::size_t>& region) {
  if (!(p >= 1.0)) throw PreconditionError("lp_norm: p must be at least 1");
  double acc = 0.0;
  for (std::size_t i : region) {
    const double v = field.values[i];
    if (!std::isfinite(v)) throw PreconditionError("lp_norm: field is not finite on the region");
    acc += std::pow(std::abs(v), p);
  }
  return std::pow(acc * field.domain->node_volume(), 1.0 / p);
}

struct DirectQuadrature {
  double laplacian_p = 0.0;  // sum (tr u_{i jbar})^p h^{2n}
  double trace_inv_p = 0.0;  // sum (tr_u omega)^p h^{2n}
  std::size_t nodes = 0;
  std::size_t am_hm_violations = 0;  // tr(A) tr(A^{-1}) < n^2
  double total() const { return laplacian_p + trace_inv_p; }
};

/// Node sums of (tr H)^p and (tr H^{-1})^p, H the complex Hessian.
inline DirectQuadrature direct_quadrature(const GridFunction& u, double p, const std::vector<std::size_t>& region) {
  if (!(p >= 1.0)) throw PreconditionError("direct_quadrature: p must be at least 1");
  const int n = u.domain->n();
  DirectQuadrature q;
  for (std::size_t i : region) {
    const HermitianMatrix H = complex_hessian(u, i);
    const double tr = H.trace();
    const double ti = trace_inverse(H);
    q.laplacian_p += std::pow(std::abs(tr), p);
    q.trace_inv_p += std::pow(std::abs(ti), p);
    if (tr * ti < n * n * (1.0 - 1e-12)) ++q.am_hm_violations;
    ++q.nodes;
  }
  q.laplacian_p *= u.domain->node_volume();
  q.trace_inv_p *= u.domain->node_volume();
  return q;
}

struct DyadicTerm {
  int k = 0;
  double trace_bound = 0.0;  // sup of tr H on the shell
  double measure = 0.0;
  double term = 0.0;
};

struct DyadicBound {
  double p = 0.0;
  double ratio = 0.0;  // 10^{(n-1)p} 12^{2n} eps_bar
  std::vector<DyadicTerm> terms;
  double truncated = 0.0;
  double tail = 0.0;
  double total = 0.0;
  bool tail_valid = true;  // false when rows fail or ratio >= 1
};

/// On D_1 n B_0.6 the complex trace is at most b_0 = 2n 10^{n-1}; on A_k n B_0.6
/// at most b_k = 2n 10^{(n-1)(k+1)}. tr_u omega <= n (b/n)^{n-1} / f_min on the
/// same shells. The series over k <= k_max is closed by the geometric tail
/// last_term * ratio / (1 - ratio).
inline DyadicBound dyadic_bound(const BadSetReport& rep, double p, double eps_bar, double f_min = 1.0) {
  if (!(p >= 1.0)) throw PreconditionError("dyadic_bound: p must be at least 1");
  if (!(f_min > 0.0)) throw PreconditionError("dyadic_bound: f_min must be positive");
  if (rep.rows.empty()) throw PreconditionError("dyadic_bound: report has no rows");
  if (std::abs(eps_bar - rep.eps_bar) > 1e-12 * std::max(1.0, eps_bar))
    throw PreconditionError("dyadic_bound: eps_bar differs from the report");
  const int n = rep.n;
  DyadicBound b;
  b.p = p;
  b.ratio = std::pow(10.0, (n - 1) * p) * std::pow(12.0, 2 * n) * eps_bar;
  auto shell = [&](int k, double m) {
    DyadicTerm t;
    t.k = k;
    t.trace_bound = 2.0 * n * std::pow(10.0, (n - 1) * (k + 1));
    t.measure = m;
    const double inv = n * std::pow(t.trace_bound / n, n - 1) / f_min;
    t.term = (std::pow(t.trace_bound, p) + std::pow(inv, p)) * m;
    return t;
  };
  b.terms.push_back(shell(0, ball_volume(2 * n, 0.6)));
  for (const auto& row : rep.rows) b.terms.push_back(shell(row.k, row.measure_06));
  for (const auto& t : b.terms) b.truncated += t.term;
  b.tail_valid = rep.pass() && b.ratio < 1.0;
  b.tail = b.tail_valid ? b.terms.back().term * b.ratio / (1.0 - b.ratio) : std::numeric_limits<double>::infinity();
  b.total = b.truncated + b.tail;
  return b;
}

struct FullW2p {
  double value = 0.0;       // ||u||_p + ||Du||_p + sum_ab ||D_ab u||_p
  double u_norm = 0.0;      // ||u||_p
  double lap_norm = 0.0;    // ||Delta u||_p, real Laplacian
  double ratio = 0.0;       // value / (u_norm + lap_norm)
};

inline FullW2p full_w2p(const GridFunction& u, double p, const std::vector<std::size_t>& region) {
  if (!(p >= 1.0)) throw PreconditionError("full_w2p: p must be at least 1");
  const GridDomain& d = *u.domain;
  const int D = d.dims();
  std::vector<double> acc(D * D + D + 2, 0.0);
  for (std::size_t i : region) {
    const RealMatrix H = real_hessian(u, i);
    const RealPoint g = gradient(u, i);
    acc[0] += std::pow(std::abs(u.values[i]), p);
    acc[1] += std::pow(std::abs(H.trace()), p);
    for (int a = 0; a < D; ++a) acc[2 + a] += std::pow(std::abs(g(a)), p);
    for (int a = 0; a < D; ++a)
      for (int c = 0; c < D; ++c) acc[2 + D + a * D + c] += std::pow(std::abs(H(a, c)), p);
  }
  const double vol = d.node_volume();
  auto norm = [&](double s) { return std::pow(s * vol, 1.0 / p); };
  FullW2p w;
  w.u_norm = norm(acc[0]);
  w.lap_norm = norm(acc[1]);
  w.value = w.u_norm;
  for (std::size_t k = 2; k < acc.size(); ++k) w.value += norm(acc[k]);
  const double den = w.u_norm + w.lap_norm;
  w.ratio = den > 0.0 ? w.value / den : std::numeric_limits<double>::infinity();
  return w;
}

}  // namespace cma
