#pragma once

// Dilations of pointed node sets, the engulfing check and shape comparisons.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cma/error.hpp"
#include "cma/grid.hpp"
#include "cma/sections.hpp"

namespace cma {

/// Node set with a distinguished center. `predicate`, when present, is a
/// continuous membership test (true inside); otherwise membership off the
/// lattice uses the multilinearly interpolated indicator with threshold 1/2.
struct PointedSet {
  DomainPtr domain;
  std::size_t center_node = 0;
  RealPoint center;
  std::vector<std::size_t> nodes;  // sorted
  std::function<bool(const RealPoint&)> predicate;

  bool contains_node(std::size_t idx) const { return std::binary_search(nodes.begin(), nodes.end(), idx); }
  double measure() const { return cma::measure(*domain, nodes.size()); }
};

inline PointedSet make_pointed_set(DomainPtr d, std::size_t center, std::vector<std::size_t> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  PointedSet s;
  s.center = d->coords(center);
  s.center_node = center;
  s.domain = std::move(d);
  s.nodes = std::move(nodes);
  if (!s.contains_node(center)) throw PreconditionError("PointedSet: center is not a member");
  return s;
}

/// Section as a pointed set; membership off the lattice uses u - h - u(x0) - mu <= 0.
inline PointedSet to_pointed(const Section& s) {
  PointedSet p;
  p.domain = s.field->domain;
  p.center_node = s.center_node;
  p.center = s.center;
  p.nodes = s.nodes;
  p.predicate = [s](const RealPoint& x) {
    try {
      return s.phi(x) <= 0.0;
    } catch (const DomainEscapeError&) {
      return false;
    }
  };
  return p;
}

namespace detail {

/// Multilinear interpolation of a node indicator over the whole box; 0 outside.
inline double indicator_value(const PointedSet& s, const RealPoint& x) {
  const GridDomain& d = *s.domain;
  Offset base{};
  double frac[kMaxRealDim];
  for (int a = 0; a < d.dims(); ++a) {
    const double t = (x(a) + d.half_width()) / d.h();
    if (t < 0.0 || t > d.resolution() - 1) return 0.0;
    int i = static_cast<int>(std::floor(t));
    if (i == d.resolution() - 1) i -= 1;
    base[a] = i;
    frac[a] = t - i;
  }
  double acc = 0.0;
  for (int code = 0; code < (1 << d.dims()); ++code) {
    Offset m{};
    double w = 1.0;
    for (int a = 0; a < d.dims(); ++a) {
      const int bit = (code >> a) & 1;
      m[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w != 0.0 && s.contains_node(d.index(m))) acc += w;
  }
  return acc;
}

inline bool is_box_face(const GridDomain& d, std::size_t idx) {
  const Offset m = d.multi_index(idx);
  for (int a = 0; a < d.dims(); ++a)
    if (m[a] == 0 || m[a] == d.resolution() - 1) return true;
  return false;
}

}  // namespace detail

/// Continuum membership of x in S.
inline bool pointed_contains(const PointedSet& s, const RealPoint& x) {
  if (s.predicate) return s.predicate(x);
  return detail::indicator_value(s, x) >= 0.5;
}

/// Membership of x in cS: the pre-image x0 + (x - x0)/c lies in S.
inline bool dilation_contains(const PointedSet& s, double c, const RealPoint& x) {
  return pointed_contains(s, s.center + (x - s.center) / c);
}

/// dilation_contains at a node, or at one of its Chebyshev neighbours.
inline bool dilation_contains_with_slack(const PointedSet& s, double c, std::size_t idx) {
  const GridDomain& d = *s.domain;
  if (dilation_contains(s, c, d.coords(idx))) return true;
  for (const auto& o : chebyshev_offsets(d.dims())) {
    const auto j = d.offset(idx, o);
    if (j && dilation_contains(s, c, d.coords(*j))) return true;
  }
  return false;
}

inline PointedSet dilate(const PointedSet& s, double c) {
  if (!(c > 0.0)) throw PreconditionError("dilate: factor must be positive");
  const GridDomain& d = *s.domain;
  PointedSet out;
  out.domain = s.domain;
  out.center_node = s.center_node;
  out.center = s.center;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!dilation_contains(s, c, d.coords(i))) continue;
    if (detail::is_box_face(d, i)) throw DomainEscapeError("dilate: dilated set reaches the edge of the grid box");
    out.nodes.push_back(i);
  }
  if (!out.contains_node(out.center_node)) out.nodes.insert(std::lower_bound(out.nodes.begin(), out.nodes.end(), out.center_node), out.center_node);
  if (s.predicate) {
    const auto pred = s.predicate;
    const RealPoint x0 = s.center;
    out.predicate = [pred, x0, c](const RealPoint& x) { return pred(x0 + (x - x0) / c); };
  }
  return out;
}

/// Node sets intersect when they share a node or lie within Chebyshev distance 1.
inline bool intersects(const PointedSet& a, const PointedSet& b) {
  if (a.nodes.empty() || b.nodes.empty()) return false;
  const PointedSet& small = a.nodes.size() <= b.nodes.size() ? a : b;
  const PointedSet& large = a.nodes.size() <= b.nodes.size() ? b : a;
  const GridDomain& d = *small.domain;
  const auto offs = chebyshev_offsets(d.dims());
  for (std::size_t i : small.nodes) {
    if (large.contains_node(i)) return true;
    for (const auto& o : offs) {
      const auto j = d.offset(i, o);
      if (j && large.contains_node(*j)) return true;
    }
  }
  return false;
}

/// Every node of `inner` lies in `outer` or within Chebyshev distance 1 of it.
inline bool subset_with_slack(const PointedSet& inner, const PointedSet& outer) {
  const GridDomain& d = *inner.domain;
  const auto offs = chebyshev_offsets(d.dims());
  for (std::size_t i : inner.nodes) {
    if (outer.contains_node(i)) continue;
    bool near = false;
    for (const auto& o : offs) {
      const auto j = d.offset(i, o);
      if (j && outer.contains_node(*j)) {
        near = true;
        break;
      }
    }
    if (!near) return false;
  }
  return true;
}

enum class EngulfStatus { NotApplicable, Pass, Fail };

inline std::string to_string(EngulfStatus s) {
  switch (s) {
    case EngulfStatus::NotApplicable:
      return "not-applicable";
    case EngulfStatus::Pass:
      return "pass";
    case EngulfStatus::Fail:
      return "fail";
  }
  return "?";
}

struct EngulfVerdict {
  EngulfStatus status = EngulfStatus::NotApplicable;
  std::size_t offending_nodes = 0;  // nodes of S1 outside 10 S2 even with slack
  std::size_t strict_misses = 0;    // nodes of S1 outside 10 S2 before slack
};

/// S1 subset of 10 S2 up to one-cell slack, for intersecting S1, S2 with mu1 <= 4 mu2.
inline EngulfVerdict check_engulfing(const PointedSet& s1, double mu1, const PointedSet& s2, double mu2,
                                     double factor = 10.0) {
  if (!(mu1 <= 4.0 * mu2 * (1.0 + 1e-12))) throw PreconditionError("check_engulfing: requires mu1 <= 4 mu2");
  EngulfVerdict v;
  if (!intersects(s1, s2)) return v;
  for (std::size_t i : s1.nodes) {
    if (dilation_contains(s2, factor, s1.domain->coords(i))) continue;
    ++v.strict_misses;
    if (!dilation_contains_with_slack(s2, factor, i)) ++v.offending_nodes;
  }
  v.status = v.offending_nodes == 0 ? EngulfStatus::Pass : EngulfStatus::Fail;
  return v;
}

inline EngulfVerdict check_engulfing(const Section& s1, const Section& s2, double factor = 10.0) {
  return check_engulfing(to_pointed(s1), s1.mu, to_pointed(s2), s2.mu, factor);
}

struct ShapeVerdict {
  double norm_12 = 0.0;  // ||T1^{-1} T2||
  double norm_21 = 0.0;  // ||T2^{-1} T1||
  double bound = 0.0;    // (1+gamma)^2 / (1-gamma)^2
  bool pass = false;
};

inline ShapeVerdict shape_compatibility(const HermitianTransform& T1, const HermitianTransform& T2, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw PreconditionError("shape_compatibility: gamma must lie in [0, 1)");
  ShapeVerdict v;
  v.norm_12 = operator_norm(T1.inverse().T * T2.T);
  v.norm_21 = operator_norm(T2.inverse().T * T1.T);
  v.bound = std::pow((1.0 + gamma) / (1.0 - gamma), 2);
  v.pass = v.norm_12 <= v.bound && v.norm_21 <= v.bound;
  return v;
}

enum class ProbeStatus { Pass, Fail, PreconditionUnmet };

inline std::string to_string(ProbeStatus s) {
  switch (s) {
    case ProbeStatus::Pass:
      return "pass";
    case ProbeStatus::Fail:
      return "fail";
    case ProbeStatus::PreconditionUnmet:
      return "precondition-unmet";
  }
  return "?";
}

struct ProbeVerdict {
  ProbeStatus status = ProbeStatus::PreconditionUnmet;
  FitReport fit1, fit2;
  double fit_slack = 0.0;
  std::optional<ShapeVerdict> shape;
};

/// Two (shift, form) representations of the section at x0 of height mu: if
/// both fit within 1 +- gamma, their normalizing transforms must be compatible.
inline ProbeVerdict shape_uniqueness_probe(const FieldPtr& u, std::size_t x0, double mu, const PluriharmonicPoly& h1,
                                           const PluriharmonicPoly& h2, const HermitianMatrix& A1,
                                           const HermitianMatrix& A2, double gamma) {
  const HermitianMatrix N1 = normalize_det(A1);
  const HermitianMatrix N2 = normalize_det(A2);
  ProbeVerdict v;
  v.fit_slack = 2.0 * u->domain->h() / std::sqrt(mu);
  v.fit1 = fit_ellipsoid(build_section(u, x0, mu, h1), N1);
  v.fit2 = fit_ellipsoid(build_section(u, x0, mu, h2), N2);
  auto ok = [&](const FitReport& f) {
    return f.c_in >= 1.0 - gamma - v.fit_slack && f.c_out <= 1.0 + gamma + v.fit_slack;
  };
  if (!ok(v.fit1) || !ok(v.fit2)) return v;
  v.shape = shape_compatibility(normalize_transform(N1), normalize_transform(N2), gamma);
  v.status = v.shape->pass ? ProbeStatus::Pass : ProbeStatus::Fail;
  return v;
}

}  // namespace cma
