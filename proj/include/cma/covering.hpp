#pragma once

// Greedy Vitali selection over finite section families, maximal functions
// and the X/Y measure comparison.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cma/engulfing.hpp"
#include "cma/error.hpp"
#include "cma/grid.hpp"

namespace cma {

/// A family member: scale() is sqrt(mu); contains/dilation_contains act on
/// lattice nodes (dilations with one-cell slack); members_intersect is
/// found by ADL.
template <class M>
concept CoverMember = requires(const M& m, const M& o, std::size_t i, double c) {
  { m.scale() } -> std::convertible_to<double>;
  { m.contains(i) } -> std::convertible_to<bool>;
  { m.dilation_contains(i, c) } -> std::convertible_to<bool>;
  { members_intersect(m, o) } -> std::convertible_to<bool>;
};

struct SectionMember {
  PointedSet set;
  double mu = 0.0;

  double scale() const { return std::sqrt(mu); }
  bool contains(std::size_t i) const { return set.contains_node(i); }
  bool dilation_contains(std::size_t i, double c) const { return dilation_contains_with_slack(set, c, i); }
  double measure() const { return set.measure(); }
};

inline bool members_intersect(const SectionMember& a, const SectionMember& b) { return intersects(a.set, b.set); }

/// Lattice ball of radius sqrt(mu) as a family member (the sections of |z|^2).
inline SectionMember ball_member(const DomainPtr& d, std::size_t center, double mu) {
  const RealPoint c = d->coords(center);
  const double r = std::sqrt(mu);
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < d->size(); ++i)
    if ((d->coords(i) - c).norm() <= r) nodes.push_back(i);
  SectionMember m{make_pointed_set(d, center, std::move(nodes)), mu};
  m.set.predicate = [c, r](const RealPoint& x) { return (x - c).norm() <= r; };
  return m;
}

struct VolumeCheck {
  double worst_ratio = 1.0;  // max over members of max(m/m_B, m_B/m)
  bool pass = true;
};

/// Every member's measure within [m(B_sqrt(mu))/C, C m(B_sqrt(mu))].
inline VolumeCheck volume_comparability(const std::vector<SectionMember>& F, double C) {
  VolumeCheck v;
  for (const auto& m : F) {
    const double ball = ball_volume(m.set.domain->dims(), m.scale());
    const double r = m.measure() / ball;
    v.worst_ratio = std::max({v.worst_ratio, r, 1.0 / r});
  }
  v.pass = v.worst_ratio <= C;
  return v;
}

struct SelectionWitness {
  std::size_t index = 0;
  double scale = 0.0;
  double sup_scale = 0.0;  // sup over the members still admissible at that round
};

struct Selection {
  std::vector<std::size_t> selected;
  std::vector<SelectionWitness> witnesses;
  bool disjoint = false;
  bool covered = false;
  std::vector<std::size_t> uncovered;  // nodes of X outside every 10-dilation
};

/// Greedy: repeatedly take the largest remaining scale (lowest index on ties,
/// which satisfies scale > sup/2), then drop every member meeting it.
template <CoverMember M>
Selection vitali_select(const std::vector<M>& F, const std::vector<std::size_t>& X, double factor = 10.0) {
  for (std::size_t x : X) {
    bool in = false;
    for (const auto& m : F)
      if (m.contains(x)) {
        in = true;
        break;
      }
    if (!in) {
      std::ostringstream os;
      os << "vitali_select: node " << x << " of X is not covered by the family";
      throw CoverageError(os.str());
    }
  }
  Selection sel;
  std::vector<char> alive(F.size(), 1);
  for (;;) {
    std::size_t best = F.size();
    for (std::size_t i = 0; i < F.size(); ++i)
      if (alive[i] && (best == F.size() || F[i].scale() > F[best].scale())) best = i;
    if (best == F.size()) break;
    sel.selected.push_back(best);
    sel.witnesses.push_back({best, F[best].scale(), F[best].scale()});
    for (std::size_t i = 0; i < F.size(); ++i)
      if (alive[i] && (i == best || members_intersect(F[i], F[best]))) alive[i] = 0;
  }
  sel.disjoint = true;
  for (std::size_t a = 0; a < sel.selected.size() && sel.disjoint; ++a)
    for (std::size_t b = a + 1; b < sel.selected.size(); ++b)
      if (members_intersect(F[sel.selected[a]], F[sel.selected[b]])) {
        sel.disjoint = false;
        break;
      }
  for (std::size_t x : X) {
    bool in = false;
    for (std::size_t i : sel.selected)
      if (F[i].dilation_contains(x, factor)) {
        in = true;
        break;
      }
    if (!in) sel.uncovered.push_back(x);
  }
  sel.covered = sel.uncovered.empty();
  return sel;
}

// ---------------------------------------------------------------------------
// Maximal function

/// M(f)(x) = max over members containing x of the member average of f.
/// Nodes of `region` outside every member raise CoverageError; other nodes get 0.
inline GridFunction maximal_function(const GridFunction& f, const std::vector<SectionMember>& F,
                                     const std::vector<std::size_t>& region) {
  const GridDomain& d = *f.domain;
  GridFunction M(f.domain);
  std::vector<double> best(d.size(), -std::numeric_limits<double>::infinity());
  for (const auto& m : F) {
    if (m.set.nodes.empty()) continue;
    double s = 0.0;
    for (std::size_t i : m.set.nodes) s += f.values[i];
    const double avg = s / static_cast<double>(m.set.nodes.size());
    for (std::size_t i : m.set.nodes) best[i] = std::max(best[i], avg);
  }
  for (std::size_t i : region)
    if (best[i] == -std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "maximal_function: evaluation node " << i << " is not covered by the family";
      throw CoverageError(os.str());
    }
  for (std::size_t i = 0; i < d.size(); ++i)
    M.values[i] = best[i] == -std::numeric_limits<double>::infinity() ? 0.0 : best[i];
  return M;
}

struct WeakLevel {
  double t = 0.0;
  double level_measure = 0.0;  // m{x in region : M|f|(x) > t}
  double bound = 0.0;          // (1 + slack) 10^{2n} ||f||_1 / t
  bool pass = false;
};

struct WeakTypeReport {
  double l1_norm = 0.0;
  double constant = 0.0;
  std::vector<WeakLevel> levels;
  bool pass() const {
    return std::all_of(levels.begin(), levels.end(), [](const auto& l) { return l.pass; });
  }
};

/// Weak (1,1) sweep of M|f| with constant 10^{2n}.
inline WeakTypeReport weak_type_check(const GridFunction& f, const std::vector<SectionMember>& F,
                                      const std::vector<std::size_t>& region, const std::vector<double>& ts,
                                      double slack = 0.1) {
  const GridDomain& d = *f.domain;
  GridFunction af = f;
  for (auto& v : af.values)
    if (std::isfinite(v)) v = std::abs(v);
  const GridFunction M = maximal_function(af, F, region);
  WeakTypeReport rep;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.in_domain(i)) rep.l1_norm += af.values[i];
  rep.l1_norm *= d.node_volume();
  rep.constant = std::pow(10.0, 2 * d.n());
  for (double t : ts) {
    WeakLevel w;
    w.t = t;
    std::size_t count = 0;
    for (std::size_t i : region)
      if (M.values[i] > t) ++count;
    w.level_measure = measure(d, count);
    w.bound = (1.0 + slack) * rep.constant * rep.l1_norm / t;
    w.pass = w.level_measure <= w.bound;
    rep.levels.push_back(w);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Measure comparison

enum class ComparisonStatus { Pass, Fail, HypothesisViolated };

inline std::string to_string(ComparisonStatus s) {
  switch (s) {
    case ComparisonStatus::Pass:
      return "pass";
    case ComparisonStatus::Fail:
      return "fail";
    case ComparisonStatus::HypothesisViolated:
      return "hypothesis-violated";
  }
  return "?";
}

struct ComparisonVerdict {
  ComparisonStatus status = ComparisonStatus::Pass;
  double m_x = 0.0;
  double m_y = 0.0;
  double bound = 0.0;  // 12^{2n} eps_bar m(Y)
  std::vector<std::size_t> density_violations;   // members breaking the small-density hypothesis
  std::vector<std::size_t> inclusion_violations;  // dense members not inside Y
};

/// Hypotheses: members with mu0/484 <= mu <= mu0/4 have m(S n X) < eps_bar m(S);
/// members with mu <= mu0/2 and m(S n X) >= eps_bar m(S) lie in Y.
/// Conclusion tested: m(X) <= 12^{2n} eps_bar m(Y) + slack.
inline ComparisonVerdict measure_comparison(const GridDomain& d, const std::vector<std::size_t>& X,
                                            const std::vector<std::size_t>& Y, const std::vector<SectionMember>& F,
                                            double eps_bar, double mu0, double slack = 0.0) {
  std::vector<char> inX(d.size(), 0), inY(d.size(), 0);
  for (std::size_t i : X) inX[i] = 1;
  for (std::size_t i : Y) inY[i] = 1;
  ComparisonVerdict v;
  const double tol = 1e-12;
  for (std::size_t k = 0; k < F.size(); ++k) {
    const auto& m = F[k];
    if (m.set.nodes.empty()) continue;
    std::size_t hit = 0;
    bool insideY = true;
    for (std::size_t i : m.set.nodes) {
      hit += inX[i];
      insideY = insideY && inY[i];
    }
    const bool dense = static_cast<double>(hit) >= eps_bar * static_cast<double>(m.set.nodes.size());
    if (m.mu >= mu0 / 484.0 * (1 - tol) && m.mu <= mu0 / 4.0 * (1 + tol) && dense) v.density_violations.push_back(k);
    if (m.mu <= mu0 / 2.0 * (1 + tol) && dense && !insideY) v.inclusion_violations.push_back(k);
  }
  v.m_x = measure(d, X.size());
  v.m_y = measure(d, Y.size());
  v.bound = std::pow(12.0, 2 * d.n()) * eps_bar * v.m_y;
  if (!v.density_violations.empty() || !v.inclusion_violations.empty())
    v.status = ComparisonStatus::HypothesisViolated;
  else
    v.status = v.m_x <= v.bound + slack ? ComparisonStatus::Pass : ComparisonStatus::Fail;
  return v;
}

}  // namespace cma
