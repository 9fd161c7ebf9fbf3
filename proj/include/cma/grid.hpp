#pragma once

// Uniform lattices in R^{2n} = C^n (n = 1, 2), grid functions on them, and
// the finite-difference complex calculus used by every other module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cma/error.hpp"
#include "cma/linalg.hpp"

namespace cma {

using Offset = std::array<int, kMaxRealDim>;

/// Continuum domain description. Every shape is star-shaped about the origin.
struct ShapeSpec {
  enum class Kind { Ball, PerturbedBall, LevelSet };

  Kind kind = Kind::Ball;
  double radius = 1.0;  // Ball
  double gamma = 0.0;   // PerturbedBall: boundary radius 1 + gamma * Re(zhat_1^mode)
  int mode = 3;
  // LevelSet: negative inside; `bound` caps the radial search.
  std::function<double(const RealPoint&)> level;
  double bound = 1.0;
  std::string label;

  static ShapeSpec ball(double r) {
    ShapeSpec s;
    s.kind = Kind::Ball;
    s.radius = r;
    return s;
  }
  static ShapeSpec perturbed_ball(double gamma, int mode = 3) {
    ShapeSpec s;
    s.kind = Kind::PerturbedBall;
    s.gamma = gamma;
    s.mode = mode;
    return s;
  }
  static ShapeSpec level_set(std::function<double(const RealPoint&)> fn, double bound,
                             std::string label = "level set") {
    ShapeSpec s;
    s.kind = Kind::LevelSet;
    s.level = std::move(fn);
    s.bound = bound;
    s.label = std::move(label);
    return s;
  }

  /// Radius of the continuum boundary along the unit direction `dir`.
  double boundary_radius(const RealPoint& dir) const {
    switch (kind) {
      case Kind::Ball:
        return radius;
      case Kind::PerturbedBall: {
        const cplx z1(dir(0), dir(1));
        return 1.0 + gamma * std::pow(z1, mode).real();
      }
      case Kind::LevelSet:
        return level_set_radius(dir, 0.5 * bound);
    }
    return radius;
  }

  /// Root of t -> level(t dir) on (0, bound], bracketed by stepping from `hint`
  /// and refined by Illinois false position.
  double level_set_radius(const RealPoint& dir, double hint) const {
    const double step = bound / 32.0;
    double t = std::clamp(hint, step, bound);
    double ft = level(t * dir);
    double lo, hi, flo, fhi;
    if (ft < 0.0) {
      lo = t, flo = ft;
      for (;;) {
        if (lo >= bound) return bound;
        hi = std::min(bound, lo + step);
        fhi = level(hi * dir);
        if (fhi >= 0.0) break;
        lo = hi, flo = fhi;
      }
    } else {
      hi = t, fhi = ft;
      for (;;) {
        lo = std::max(0.0, hi - step);
        flo = level(lo * dir);
        if (flo < 0.0) break;
        if (lo <= 0.0) return 0.0;
        hi = lo, fhi = flo;
      }
    }
    int side = 0;
    for (int it = 0; it < 100 && hi - lo > 1e-13 * bound; ++it) {
      double m = (lo * fhi - hi * flo) / (fhi - flo);
      if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
      const double fm = level(m * dir);
      if (fm < 0.0) {
        lo = m, flo = fm;
        if (side == -1) fhi *= 0.5;
        side = -1;
      } else {
        hi = m, fhi = fm;
        if (side == 1) flo *= 0.5;
        side = 1;
      }
      if (fm == 0.0) return m;
    }
    return 0.5 * (lo + hi);
  }

  double max_radius() const {
    switch (kind) {
      case Kind::Ball:
        return radius;
      case Kind::PerturbedBall:
        return 1.0 + gamma;
      case Kind::LevelSet:
        return bound;
    }
    return radius;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::Ball:
        os << "ball(r=" << radius << ")";
        break;
      case Kind::PerturbedBall:
        os << "perturbed_ball(gamma=" << gamma << ",mode=" << mode << ")";
        break;
      case Kind::LevelSet:
        os << "level_set(" << label << ")";
        break;
    }
    return os.str();
  }
};

inline RealPoint unit_direction(const RealPoint& x) {
  const double r = x.norm();
  if (r == 0.0) {
    RealPoint e = RealPoint::Zero(x.size());
    e(0) = 1.0;
    return e;
  }
  return x / r;
}

struct DomainLimits {
  std::size_t max_nodes = 20'000'000;
};

/// Offsets of the second-difference stencil: +-e_a and +-e_a +- e_b (a < b).
inline std::vector<Offset> stencil_offsets(int dims) {
  std::vector<Offset> out;
  for (int a = 0; a < dims; ++a) {
    for (int s : {-1, 1}) {
      Offset o{};
      o[a] = s;
      out.push_back(o);
    }
  }
  for (int a = 0; a < dims; ++a)
    for (int b = a + 1; b < dims; ++b)
      for (int sa : {-1, 1})
        for (int sb : {-1, 1}) {
          Offset o{};
          o[a] = sa;
          o[b] = sb;
          out.push_back(o);
        }
  return out;
}

/// All offsets of the 3^d neighbourhood except zero.
inline std::vector<Offset> chebyshev_offsets(int dims) {
  std::vector<Offset> out;
  int total = 1;
  for (int a = 0; a < dims; ++a) total *= 3;
  for (int code = 0; code < total; ++code) {
    Offset o{};
    int c = code;
    bool zero = true;
    for (int a = 0; a < dims; ++a) {
      o[a] = c % 3 - 1;
      c /= 3;
      zero = zero && o[a] == 0;
    }
    if (!zero) out.push_back(o);
  }
  return out;
}

class GridDomain {
 public:
  enum class NodeKind : std::uint8_t { Outside = 0, Boundary = 1, Interior = 2 };

  int n() const { return n_; }
  int dims() const { return 2 * n_; }
  int resolution() const { return res_; }
  double half_width() const { return half_width_; }
  double h() const { return h_; }
  std::size_t size() const { return size_; }
  const ShapeSpec& shape() const { return shape_; }
  double node_volume() const { return std::pow(h_, dims()); }

  double coordinate(int i) const { return -half_width_ + h_ * i; }

  Offset multi_index(std::size_t idx) const {
    Offset m{};
    for (int a = 0; a < dims(); ++a) {
      m[a] = static_cast<int>(idx % res_);
      idx /= res_;
    }
    return m;
  }

  std::size_t index(const Offset& m) const {
    std::size_t idx = 0;
    for (int a = dims() - 1; a >= 0; --a) idx = idx * res_ + static_cast<std::size_t>(m[a]);
    return idx;
  }

  RealPoint coords(std::size_t idx) const {
    RealPoint x(dims());
    for (int a = 0; a < dims(); ++a) {
      x(a) = coordinate(static_cast<int>(idx % res_));
      idx /= res_;
    }
    return x;
  }

  std::optional<std::size_t> offset(std::size_t idx, const Offset& delta) const {
    std::size_t out = idx;
    std::size_t stride = 1;
    for (int a = 0; a < dims(); ++a) {
      const int i = static_cast<int>((idx / stride) % res_) + delta[a];
      if (i < 0 || i >= res_) return std::nullopt;
      out = out + static_cast<std::size_t>(static_cast<long long>(delta[a]) * static_cast<long long>(stride));
      stride *= res_;
    }
    return out;
  }

  NodeKind kind(std::size_t idx) const { return static_cast<NodeKind>(mask_[idx]); }
  bool is_interior(std::size_t idx) const { return kind(idx) == NodeKind::Interior; }
  bool is_boundary(std::size_t idx) const { return kind(idx) == NodeKind::Boundary; }
  bool in_domain(std::size_t idx) const { return kind(idx) != NodeKind::Outside; }

  const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  const std::vector<std::size_t>& boundary_nodes() const { return boundary_; }
  std::vector<std::size_t> domain_nodes() const {
    std::vector<std::size_t> all;
    all.reserve(interior_.size() + boundary_.size());
    for (std::size_t i = 0; i < size_; ++i)
      if (in_domain(i)) all.push_back(i);
    return all;
  }

  std::size_t nearest_node(const RealPoint& x) const {
    Offset m{};
    for (int a = 0; a < dims(); ++a) {
      const long i = std::lround((x(a) + half_width_) / h_);
      m[a] = static_cast<int>(std::clamp<long>(i, 0, res_ - 1));
    }
    return index(m);
  }

  std::size_t center_node() const {
    if (res_ % 2 == 0) throw PreconditionError("center_node: the lattice has no node at the origin (even resolution)");
    Offset m{};
    for (int a = 0; a < dims(); ++a) m[a] = res_ / 2;
    return index(m);
  }

  /// Continuum boundary radius along the direction of a boundary node (cached).
  double projected_radius(std::size_t idx) const {
    if (idx < radius_cache_.size() && !std::isnan(radius_cache_[idx])) return radius_cache_[idx];
    return shape_.boundary_radius(unit_direction(coords(idx)));
  }

  /// Largest distance of a boundary node from the continuum boundary.
  double boundary_offset() const {
    double worst = 0.0;
    for (std::size_t b : boundary_) worst = std::max(worst, std::abs(coords(b).norm() - projected_radius(b)));
    return worst;
  }

  /// Lattice with explicit per-node kinds; used when reloading cached fields.
  static GridDomain from_mask(int n, int resolution, double half_width, std::vector<std::uint8_t> mask,
                              ShapeSpec shape) {
    GridDomain d(n, resolution, half_width, std::move(shape));
    if (mask.size() != d.size_) throw FormatError("GridDomain::from_mask: mask size mismatch");
    d.mask_ = std::move(mask);
    d.collect_lists();
    d.cache_radii();
    return d;
  }

  friend GridDomain build_domain(int n, const ShapeSpec& shape, int resolution,
                                 std::optional<double> half_width, DomainLimits limits);

 private:
  GridDomain(int n, int resolution, double half_width, ShapeSpec shape)
      : n_(n), res_(resolution), half_width_(half_width), shape_(std::move(shape)) {
    h_ = 2.0 * half_width_ / (res_ - 1);
    size_ = 1;
    for (int a = 0; a < dims(); ++a) size_ *= static_cast<std::size_t>(res_);
    mask_.assign(size_, 0);
  }

  void collect_lists() {
    interior_.clear();
    boundary_.clear();
    for (std::size_t i = 0; i < size_; ++i) {
      if (is_interior(i)) interior_.push_back(i);
      if (is_boundary(i)) boundary_.push_back(i);
    }
  }

  void cache_radii() {
    radius_cache_.assign(size_, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t b : boundary_) {
      const RealPoint x = coords(b);
      radius_cache_[b] = shape_.kind == ShapeSpec::Kind::LevelSet
                             ? shape_.level_set_radius(unit_direction(x), x.norm())
                             : shape_.boundary_radius(unit_direction(x));
    }
  }

  int n_;
  int res_;
  double half_width_;
  double h_ = 0.0;
  std::size_t size_ = 0;
  ShapeSpec shape_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> boundary_;
  std::vector<double> radius_cache_;
};

/// Builds the lattice on [-L, L]^{2n}, L = half_width or the shape's maximal
/// radius. Interior nodes lie strictly inside the continuum domain and, for
/// radial shapes, every stencil neighbour lies within h of it; boundary
/// nodes are the non-interior stencil neighbours of interior nodes.
inline GridDomain build_domain(int n, const ShapeSpec& shape, int resolution,
                               std::optional<double> half_width = std::nullopt,
                               DomainLimits limits = {}) {
  if (n != 1 && n != 2) throw PreconditionError("build_domain: complex dimension must be 1 or 2");
  if (resolution < 9) throw PreconditionError("build_domain: resolution must be at least 9");
  if (shape.kind == ShapeSpec::Kind::PerturbedBall && !(shape.gamma >= 0.0 && shape.gamma < 0.5))
    throw PreconditionError("build_domain: perturbed ball requires 0 <= gamma < 0.5");
  if (shape.kind == ShapeSpec::Kind::Ball && !(shape.radius > 0.0))
    throw PreconditionError("build_domain: ball radius must be positive");
  const double nodes = std::pow(static_cast<double>(resolution), 2 * n);
  if (nodes > static_cast<double>(limits.max_nodes)) {
    std::ostringstream os;
    os << "build_domain: " << resolution << "^" << 2 * n << " nodes exceed the configured cap of "
       << limits.max_nodes;
    throw ResourceError(os.str());
  }
  const double L = half_width.value_or(shape.max_radius());
  if (L < shape.max_radius() - 1e-12)
    throw PreconditionError("build_domain: box must contain the continuum domain");

  GridDomain d(n, resolution, L, shape);
  const int dims = 2 * n;
  const auto offsets = stencil_offsets(dims);
  const double h = d.h();

  std::vector<double> level_values;
  if (shape.kind == ShapeSpec::Kind::LevelSet) {
    level_values.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) level_values[i] = shape.level(d.coords(i));
  }

  auto strictly_inside = [&](std::size_t idx) {
    if (shape.kind == ShapeSpec::Kind::LevelSet) return level_values[idx] < 0.0;
    const RealPoint x = d.coords(idx);
    return x.norm() < shape.boundary_radius(unit_direction(x));
  };
  // diagonal stencil offsets reach sqrt(2) h
  const double reach = std::sqrt(2.0) * h * (1.0 + 1e-12);
  auto near_boundary = [&](std::size_t idx) {
    const RealPoint x = d.coords(idx);
    return x.norm() < shape.boundary_radius(unit_direction(x)) + reach;
  };

  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!strictly_inside(i)) continue;
    bool ok = true;
    for (const auto& o : offsets) {
      const auto j = d.offset(i, o);
      if (!j) {
        ok = false;
        break;
      }
      if (shape.kind != ShapeSpec::Kind::LevelSet && !near_boundary(*j)) {
        ok = false;
        break;
      }
    }
    if (ok) d.mask_[i] = static_cast<std::uint8_t>(GridDomain::NodeKind::Interior);
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.is_interior(i)) continue;
    for (const auto& o : offsets) {
      const std::size_t j = *d.offset(i, o);
      if (!d.is_interior(j)) d.mask_[j] = static_cast<std::uint8_t>(GridDomain::NodeKind::Boundary);
    }
  }
  d.collect_lists();
  d.cache_radii();
  return d;
}

using DomainPtr = std::shared_ptr<const GridDomain>;

inline DomainPtr make_domain(int n, const ShapeSpec& shape, int resolution,
                             std::optional<double> half_width = std::nullopt, DomainLimits limits = {}) {
  return std::make_shared<const GridDomain>(build_domain(n, shape, resolution, half_width, limits));
}

/// Real scalar field on a domain. Nodes outside the domain hold NaN.
struct GridFunction {
  DomainPtr domain;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(DomainPtr d) : domain(std::move(d)) {
    values.assign(domain->size(), std::numeric_limits<double>::quiet_NaN());
  }

  template <typename Fn>
  static GridFunction sample(DomainPtr d, Fn&& fn) {
    GridFunction g(std::move(d));
    for (std::size_t i = 0; i < g.values.size(); ++i)
      if (g.domain->in_domain(i)) g.values[i] = fn(g.domain->coords(i));
    return g;
  }

  static GridFunction constant(DomainPtr d, double c) {
    return sample(std::move(d), [c](const RealPoint&) { return c; });
  }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

inline bool same_lattice(const GridDomain& a, const GridDomain& b) {
  return a.n() == b.n() && a.resolution() == b.resolution() && a.half_width() == b.half_width();
}

// ---------------------------------------------------------------------------
// Interpolation

enum class Interpolation { Multilinear, Cubic };

namespace detail {

inline void lagrange4(double s, double w[4]) {
  w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
  w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  w[2] = -(s + 1.0) * s * (s - 2.0) / 2.0;
  w[3] = (s + 1.0) * s * (s - 1.0) / 6.0;
}

inline std::optional<double> tensor_interpolate(const GridFunction& u, const Offset& base, const double frac[],
                                                int width) {
  const GridDomain& d = *u.domain;
  const int dims = d.dims();
  double weights[kMaxRealDim][4];
  const int lo = width == 4 ? -1 : 0;
  for (int a = 0; a < dims; ++a) {
    if (width == 4) {
      lagrange4(frac[a], weights[a]);
    } else {
      weights[a][0] = 1.0 - frac[a];
      weights[a][1] = frac[a];
    }
  }
  int total = 1;
  for (int a = 0; a < dims; ++a) total *= width;
  double acc = 0.0;
  for (int code = 0; code < total; ++code) {
    int c = code;
    Offset m{};
    double w = 1.0;
    for (int a = 0; a < dims; ++a) {
      const int k = c % width;
      c /= width;
      m[a] = base[a] + lo + k;
      if (m[a] < 0 || m[a] >= d.resolution()) return std::nullopt;
      w *= weights[a][k];
    }
    const std::size_t idx = d.index(m);
    if (!d.in_domain(idx)) return std::nullopt;
    if (w != 0.0) acc += w * u.values[idx];
  }
  return acc;
}

}  // namespace detail

/// Value of u at an arbitrary point. Cubic mode uses tensor 4-point Lagrange
/// weights and falls back to multilinear where the wider stencil leaves the
/// domain.
inline double interpolate(const GridFunction& u, const RealPoint& x, Interpolation mode = Interpolation::Cubic) {
  const GridDomain& d = *u.domain;
  Offset base{};
  double frac[kMaxRealDim];
  for (int a = 0; a < d.dims(); ++a) {
    const double t = (x(a) + d.half_width()) / d.h();
    int i = static_cast<int>(std::floor(t));
    if (i == d.resolution() - 1) i -= 1;
    base[a] = i;
    frac[a] = t - i;
  }
  if (mode == Interpolation::Cubic) {
    if (auto v = detail::tensor_interpolate(u, base, frac, 4)) return *v;
  }
  if (auto v = detail::tensor_interpolate(u, base, frac, 2)) return *v;
  std::ostringstream os;
  os << "interpolate: point at radius " << x.norm() << " lies outside the data region";
  throw DomainEscapeError(os.str());
}

// ---------------------------------------------------------------------------
// Finite differences

namespace detail {

inline double node_value(const GridFunction& u, std::size_t idx, const Offset& delta) {
  const auto j = u.domain->offset(idx, delta);
  if (!j || !u.domain->in_domain(*j)) throw StencilError("finite difference stencil leaves the domain");
  return u.values[*j];
}

}  // namespace detail

/// Centered first difference along real axis a.
inline double first_difference(const GridFunction& u, std::size_t idx, int a) {
  Offset p{}, m{};
  p[a] = 1;
  m[a] = -1;
  return (detail::node_value(u, idx, p) - detail::node_value(u, idx, m)) / (2.0 * u.domain->h());
}

/// Centered second difference: 3-point for a == b, 4-point diagonal otherwise.
inline double second_difference(const GridFunction& u, std::size_t idx, int a, int b) {
  const double h = u.domain->h();
  if (a == b) {
    Offset p{}, m{};
    p[a] = 1;
    m[a] = -1;
    return (detail::node_value(u, idx, p) - 2.0 * u.values[idx] + detail::node_value(u, idx, m)) / (h * h);
  }
  Offset pp{}, pm{}, mp{}, mm{};
  pp[a] = 1, pp[b] = 1;
  pm[a] = 1, pm[b] = -1;
  mp[a] = -1, mp[b] = 1;
  mm[a] = -1, mm[b] = -1;
  return (detail::node_value(u, idx, pp) - detail::node_value(u, idx, pm) - detail::node_value(u, idx, mp) +
          detail::node_value(u, idx, mm)) /
         (4.0 * h * h);
}

inline RealPoint gradient(const GridFunction& u, std::size_t idx) {
  RealPoint g(u.domain->dims());
  for (int a = 0; a < u.domain->dims(); ++a) g(a) = first_difference(u, idx, a);
  return g;
}

inline RealMatrix real_hessian(const GridFunction& u, std::size_t idx) {
  const int d = u.domain->dims();
  RealMatrix m(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) m(a, b) = m(b, a) = second_difference(u, idx, a, b);
  return m;
}

/// u_{z_i zbar_j} = 1/4 [(u_{x_i x_j} + u_{y_i y_j}) + i (u_{x_i y_j} - u_{y_i x_j})].
inline HermitianMatrix complex_hessian_from_real(const RealMatrix& d2) {
  const int n = static_cast<int>(d2.rows()) / 2;
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int xi = 2 * i, yi = 2 * i + 1, xj = 2 * j, yj = 2 * j + 1;
      m(i, j) = 0.25 * cplx(d2(xi, xj) + d2(yi, yj), d2(xi, yj) - d2(yi, xj));
    }
  return HermitianMatrix(m);
}

/// u_{z_i z_j} = 1/4 [(u_{x_i x_j} - u_{y_i y_j}) - i (u_{x_i y_j} + u_{y_i x_j})].
inline CMat holomorphic_hessian_from_real(const RealMatrix& d2) {
  const int n = static_cast<int>(d2.rows()) / 2;
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int xi = 2 * i, yi = 2 * i + 1, xj = 2 * j, yj = 2 * j + 1;
      m(i, j) = 0.25 * cplx(d2(xi, xj) - d2(yi, yj), -(d2(xi, yj) + d2(yi, xj)));
    }
  return m;
}

inline HermitianMatrix complex_hessian(const GridFunction& u, std::size_t idx) {
  return complex_hessian_from_real(real_hessian(u, idx));
}

/// Real Laplacian, 4 * trace of the complex Hessian.
inline double laplacian(const GridFunction& u, std::size_t idx) { return 4.0 * complex_hessian(u, idx).trace(); }

inline double degeneracy_threshold(const HermitianMatrix& m) { return 1e-9 * std::max(1.0, m.max_abs_entry()); }

/// Trace of the inverse complex Hessian (sum of 1/lambda_i).
inline double trace_inverse(const HermitianMatrix& m) {
  const Eigen::VectorXd ev = m.eigenvalues();
  if (ev(0) <= degeneracy_threshold(m)) {
    std::ostringstream os;
    os << "trace_inverse: complex Hessian is not positive definite (smallest eigenvalue " << ev(0) << ")";
    throw DegenerateHessianError(os.str(), ev(0));
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) s += 1.0 / ev(i);
  return s;
}

inline double trace_inverse(const GridFunction& u, std::size_t idx) { return trace_inverse(complex_hessian(u, idx)); }

// ---------------------------------------------------------------------------
// Interpolation estimate check

struct InterpolationCheckRow {
  int order = 0;
  double derivative = 0.0;  // max |partial derivative| of that order
  double bound = 0.0;       // slack * C * (lambda^{4-m} + mu / lambda^m)
  bool pass = false;
};

struct InterpolationCheckReport {
  double mu = 0.0;
  double lambda = 0.0;
  double constant = 0.0;
  double slack = 0.0;
  std::array<InterpolationCheckRow, 3> rows{};
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  }
};

namespace detail {

inline double composed_difference(const GridFunction& u, std::size_t idx, const int* axes, int count) {
  if (count == 0) return u.values[idx];
  Offset p{}, m{};
  p[axes[0]] = 1;
  m[axes[0]] = -1;
  const auto jp = u.domain->offset(idx, p);
  const auto jm = u.domain->offset(idx, m);
  if (!jp || !jm || !u.domain->in_domain(*jp) || !u.domain->in_domain(*jm))
    throw StencilError("interpolation_check: derivative stencil leaves the domain");
  return (composed_difference(u, *jp, axes + 1, count - 1) - composed_difference(u, *jm, axes + 1, count - 1)) /
         (2.0 * u.domain->h());
}

}  // namespace detail

/// Largest |partial derivative| of the given order at a node, by composed
/// centered differences.
inline double max_partial_derivative(const GridFunction& u, std::size_t idx, int order) {
  const int d = u.domain->dims();
  if (order == 2) return real_hessian(u, idx).cwiseAbs().maxCoeff();
  int axes[3] = {0, 0, 0};
  double best = 0.0;
  int total = 1;
  for (int k = 0; k < order; ++k) total *= d;
  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int k = 0; k < order; ++k) axes[k] = c % d, c /= d;
    best = std::max(best, std::abs(detail::composed_difference(u, idx, axes, order)));
  }
  return best;
}

/// The lambda minimising lambda^2 + mu / lambda^2.
inline double optimal_lambda(double mu) { return std::pow(mu, 0.25); }

/// Checks |D^m u(x)| <= slack * C * (lambda^{4-m} + mu / lambda^m) for m = 1, 2, 3.
inline InterpolationCheckReport interpolation_check(const GridFunction& u, std::size_t idx, double mu, double lambda,
                                                    double constant, double r0, double slack = 2.0) {
  if (!(lambda > 0.0 && lambda < r0)) throw PreconditionError("interpolation_check: requires 0 < lambda < r0");
  InterpolationCheckReport rep;
  rep.mu = mu;
  rep.lambda = lambda;
  rep.constant = constant;
  rep.slack = slack;
  for (int m = 1; m <= 3; ++m) {
    auto& row = rep.rows[m - 1];
    row.order = m;
    row.derivative = max_partial_derivative(u, idx, m);
    row.bound = slack * constant * (std::pow(lambda, 4 - m) + mu / std::pow(lambda, m));
    row.pass = row.derivative <= row.bound;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Measures (node count times h^{2n})

inline double ball_volume(int real_dims, double r) {
  // pi^{d/2} r^d / Gamma(d/2 + 1)
  return std::pow(std::numbers::pi, real_dims / 2.0) * std::pow(r, real_dims) / std::tgamma(real_dims / 2.0 + 1.0);
}

inline std::vector<std::size_t> nodes_in_ball(const GridDomain& d, const RealPoint& center, double r,
                                              bool require_domain = true) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (require_domain && !d.in_domain(i)) continue;
    if ((d.coords(i) - center).norm() <= r) out.push_back(i);
  }
  return out;
}

inline double measure(const GridDomain& d, std::size_t node_count) {
  return static_cast<double>(node_count) * d.node_volume();
}

}  // namespace cma
