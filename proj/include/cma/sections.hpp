#pragma once

// Pluriharmonic shifts, ellipsoid normalization, sections and the level-by-level
// section chain.

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "cma/error.hpp"
#include "cma/grid.hpp"
#include "cma/linalg.hpp"
#include "cma/solver.hpp"

namespace cma {

/// h(z) = Re(sum_i l_i w_i + sum_ij b_ij w_i w_j), w = z - center.
struct PluriharmonicPoly {
  CVec center;
  CVec l;
  CMat b;

  static PluriharmonicPoly zero(const CVec& c) {
    PluriharmonicPoly p;
    p.center = c;
    p.l = CVec::Zero(c.size());
    p.b = CMat::Zero(c.size(), c.size());
    return p;
  }
  static PluriharmonicPoly zero(int n) { return zero(CVec::Zero(n)); }

  int dim() const { return static_cast<int>(center.size()); }

  double evaluate(const CVec& z) const {
    const CVec w = z - center;
    return ((l.transpose() * w)(0, 0) + (w.transpose() * b * w)(0, 0)).real();
  }
  double operator()(const RealPoint& x) const { return evaluate(to_complex(x)); }

  PluriharmonicPoly scaled(double s) const {
    PluriharmonicPoly p = *this;
    p.l *= s;
    p.b *= s;
    return p;
  }

  PluriharmonicPoly operator+(const PluriharmonicPoly& o) const {
    if ((center - o.center).norm() > 1e-14) throw PreconditionError("PluriharmonicPoly: centers differ");
    PluriharmonicPoly p = *this;
    p.l += o.l;
    p.b += o.b;
    return p;
  }

  /// The polynomial z -> p(M^{-1}(z - new_center)) for p centered at 0.
  PluriharmonicPoly pushforward(const CMat& M, const CVec& new_center) const {
    const CMat Minv = M.inverse();
    PluriharmonicPoly p;
    p.center = new_center;
    p.l = Minv.transpose() * l;
    p.b = Minv.transpose() * b * Minv;
    p.b = 0.5 * (p.b + p.b.transpose()).eval();
    return p;
  }
};

struct TaylorSplit {
  PluriharmonicPoly h;
  HermitianMatrix A;  // v_{i jbar}(x0)
};

/// Splits the second-order Taylor polynomial of v at x0 into its pluriharmonic
/// part h and the Hermitian form sum A_ij w_i conj(w_j).
inline TaylorSplit taylor_split(const GridFunction& v, std::size_t x0) {
  const GridDomain& d = *v.domain;
  if (!d.is_interior(x0)) throw StencilError("taylor_split: base node is not interior");
  const int n = d.n();
  const RealPoint g = gradient(v, x0);
  const RealMatrix d2 = real_hessian(v, x0);
  TaylorSplit out;
  out.h = PluriharmonicPoly::zero(to_complex(d.coords(x0)));
  for (int i = 0; i < n; ++i) out.h.l(i) = cplx(g(2 * i), -g(2 * i + 1));
  out.h.b = holomorphic_hessian_from_real(d2);
  out.A = complex_hessian_from_real(d2);
  return out;
}

/// Complex-linear map with |det T| = 1 (up to the normalization tolerance).
struct HermitianTransform {
  CMat T;

  static HermitianTransform identity(int n) { return {CMat::Identity(n, n)}; }
  int dim() const { return static_cast<int>(T.rows()); }
  double abs_det() const { return std::abs(T.determinant()); }
  double norm() const { return operator_norm(T); }
  double deviation() const { return operator_norm(T - CMat::Identity(T.rows(), T.cols())); }
  HermitianTransform inverse() const {
    if (abs_det() < 1e-12) throw PreconditionError("HermitianTransform: singular transform");
    return {T.inverse()};
  }
  HermitianTransform compose(const HermitianTransform& o) const { return {T * o.T}; }
  CVec apply(const CVec& z) const { return T * z; }
};

/// A scaled to determinant one.
inline HermitianMatrix normalize_det(const HermitianMatrix& A) {
  const double det = A.determinant();
  if (!(det > 0.0) || !A.is_positive_definite()) {
    std::ostringstream os;
    os << "normalize_det: matrix is not positive definite (smallest eigenvalue " << A.min_eigenvalue() << ")";
    throw DegenerateHessianError(os.str(), A.min_eigenvalue());
  }
  return A.scaled(1.0 / std::pow(det, 1.0 / A.dim()));
}

/// T with T^T A conj(T) = I, so T maps B_r(0) onto {sum a_ij w_i conj(w_j) <= r^2}.
/// From A = U diag(lambda) U^*, T = conj(U diag(lambda^{-1/2}) U^*).
inline HermitianTransform normalize_transform(const HermitianMatrix& A, double det_tol = 1e-6) {
  const Eigen::SelfAdjointEigenSolver<CMat> es(A.matrix());
  const Eigen::VectorXd lam = es.eigenvalues();
  if (lam(0) <= 0.0) {
    std::ostringstream os;
    os << "normalize_transform: matrix is not positive definite (smallest eigenvalue " << lam(0) << ")";
    throw DegenerateHessianError(os.str(), lam(0));
  }
  if (std::abs(A.determinant() - 1.0) > det_tol)
    throw PreconditionError("normalize_transform: determinant differs from 1 beyond tolerance");
  const CMat& U = es.eigenvectors();
  CMat D = CMat::Zero(A.dim(), A.dim());
  for (int i = 0; i < A.dim(); ++i) D(i, i) = 1.0 / std::sqrt(lam(i));
  return {(U * D * U.adjoint()).conjugate()};
}

/// Coefficient matrix of the ellipsoid T(B_1(0)).
inline HermitianMatrix ellipsoid_matrix(const HermitianTransform& T) {
  const CMat Ti = T.inverse().T;
  return HermitianMatrix(Ti.transpose() * Ti.conjugate());
}

struct Ellipsoid {
  CVec center;
  HermitianMatrix A;
  double height = 1.0;

  bool contains(const RealPoint& x) const { return A.quadratic_form(to_complex(x) - center) <= height; }
  Ellipsoid dilate(double c) const { return {center, A, c * c * height}; }
};

/// mu0 = (min(sigma, gamma_n) / (20 * 3^{3/2}))^2, capped below 0.009.
inline double mu0_from_sigma(double sigma, double gamma_n) {
  if (!(sigma > 0.0 && sigma < 1.0 + 1e-15) || !(gamma_n > 0.0 && gamma_n < 1.0 + 1e-15))
    throw PreconditionError("mu0_from_sigma: sigma and gamma_n must lie in (0, 1]");
  const double root = std::min(sigma, gamma_n) / (20.0 * std::pow(3.0, 1.5));
  return std::min(root * root, std::nextafter(0.009, 0.0));
}

// ---------------------------------------------------------------------------
// Sections

using FieldPtr = std::shared_ptr<const GridFunction>;

struct Section {
  FieldPtr field;
  std::size_t center_node = 0;
  RealPoint center;
  double mu = 0.0;
  double base_value = 0.0;  // u(x0)
  PluriharmonicPoly shift;
  std::vector<std::size_t> nodes;  // sorted
  std::optional<Ellipsoid> fitted;
  std::optional<HermitianTransform> transform;

  const GridDomain& domain() const { return *field->domain; }

  bool contains_node(std::size_t idx) const { return std::binary_search(nodes.begin(), nodes.end(), idx); }

  /// Continuous defining function u - h - u(x0) - mu (cubic interpolation);
  /// nonpositive on the section.
  double phi(const RealPoint& x) const { return interpolate(*field, x) - shift(x) - base_value - mu; }

  double measure() const { return cma::measure(domain(), nodes.size()); }
};

/// Connected component containing x0 of {u - h <= u(x0) + mu}.
inline Section build_section(const FieldPtr& u, std::size_t x0, double mu, const PluriharmonicPoly& h) {
  if (!(mu > 0.0)) throw PreconditionError("build_section: mu must be positive");
  const GridDomain& d = *u->domain;
  if (!d.in_domain(x0)) throw PreconditionError("build_section: base node outside the domain");
  const RealPoint c = d.coords(x0);
  if ((to_complex(c) - h.center).norm() > 1e-9 * std::max(1.0, c.norm()))
    throw PreconditionError("build_section: shift is not centered at the base point");
  Section s;
  s.field = u;
  s.center_node = x0;
  s.center = c;
  s.mu = mu;
  s.base_value = u->values[x0];
  s.shift = h;
  const double level = s.base_value + mu;

  std::vector<char> seen(d.size(), 0);
  std::deque<std::size_t> queue{x0};
  seen[x0] = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    if (!d.is_interior(i)) throw SectionEscapeError("build_section: sublevel set reaches the domain boundary");
    s.nodes.push_back(i);
    for (int a = 0; a < d.dims(); ++a)
      for (int sg : {-1, 1}) {
        Offset o{};
        o[a] = sg;
        const auto j = d.offset(i, o);
        if (!j || seen[*j] || !d.in_domain(*j)) continue;
        seen[*j] = 1;
        if (u->values[*j] - h(d.coords(*j)) <= level) queue.push_back(*j);
      }
  }
  std::sort(s.nodes.begin(), s.nodes.end());
  return s;
}

struct FitReport {
  double c_in = 0.0;   // largest c with c E inside the set (on the lattice)
  double c_out = 0.0;  // smallest c with the set inside c E
};

/// Fit of a node set against E = {sum a_ij w_i conj(w_j) <= mu} centered at `center`.
inline FitReport fit_ellipsoid_nodes(const GridDomain& d, const std::vector<std::size_t>& sorted_nodes,
                                     const RealPoint& center, const HermitianMatrix& A, double mu) {
  if (!A.is_positive_definite()) throw DegenerateHessianError("fit_ellipsoid: A is not positive definite", A.min_eigenvalue());
  const CVec c0 = to_complex(center);
  FitReport r;
  r.c_in = std::numeric_limits<double>::infinity();
  std::vector<char> member(d.size(), 0);
  for (std::size_t i : sorted_nodes) member[i] = 1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double c = std::sqrt(std::max(0.0, A.quadratic_form(to_complex(d.coords(i)) - c0)) / mu);
    if (member[i])
      r.c_out = std::max(r.c_out, c);
    else
      r.c_in = std::min(r.c_in, c);
  }
  return r;
}

inline FitReport fit_ellipsoid(const Section& S, const HermitianMatrix& A) {
  return fit_ellipsoid_nodes(S.domain(), S.nodes, S.center, A, S.mu);
}

// ---------------------------------------------------------------------------
// Renormalization

/// zeta -> (u - h - u(x0) - mu)(x0 + sqrt(mu) T zeta) / (mu |det T|^{2/n}).
struct RescaledEvaluator {
  FieldPtr u;
  RealPoint x0;
  double base_value = 0.0;
  double mu = 1.0;
  PluriharmonicPoly h;
  CMat T;
  Interpolation mode = Interpolation::Cubic;

  RealPoint image(const RealPoint& zeta) const {
    return x0 + to_real(std::sqrt(mu) * (T * to_complex(zeta)));
  }
  double operator()(const RealPoint& zeta) const {
    const RealPoint x = image(zeta);
    const double scale = mu * std::pow(std::abs(T.determinant()), 2.0 / T.rows());
    return (interpolate(*u, x, mode) - h(x) - base_value - mu) / scale;
  }
};

/// Samples the rescaled function on a ball lattice of radius `half_width`.
inline GridFunction rescale_to_unit(const FieldPtr& u, std::size_t x0, double mu, const PluriharmonicPoly& h,
                                    const HermitianTransform& T, int resolution, double half_width = 1.25,
                                    Interpolation mode = Interpolation::Cubic) {
  if (T.abs_det() < 1e-12) throw PreconditionError("rescale_to_unit: T is singular");
  RescaledEvaluator ev{u, u->domain->coords(x0), u->values[x0], mu, h, T.T, mode};
  auto dom = make_domain(u->domain->n(), ShapeSpec::ball(half_width), resolution, half_width);
  return GridFunction::sample(dom, ev);
}

// ---------------------------------------------------------------------------
// Section chains

struct ChainConfig {
  double sigma = 0.2;
  double gamma_n = 0.2;   // regime constant for the reported formula value of mu0
  double mu0 = 0.1;       // practical level ratio
  int k_max = 3;
  int level_resolution = 33;
  double level_half_width = 1.15;
  double margin = 0.0;    // required distance of x0 from the boundary (0: two lattice cells)
  Interpolation transport = Interpolation::Cubic;
  SolveConfig solve;

  void validate() const {
    if (!(sigma > 0.0 && sigma < 1.0)) throw ValidationError("ChainConfig: sigma must lie in (0, 1)");
    if (!(mu0 >= 0.01 - 1e-15 && mu0 <= 0.25 + 1e-15)) throw ValidationError("ChainConfig: mu0 must lie in [0.01, 0.25]");
    if (k_max < 1) throw ValidationError("ChainConfig: k_max must be at least 1");
    if (level_resolution < 9) throw ValidationError("ChainConfig: level resolution must be at least 9");
    if (!(level_half_width > 1.0)) throw ValidationError("ChainConfig: level lattice must contain the unit ball");
    solve.validate();
  }
};

struct ChainLevel {
  int k = 0;
  double mu = 0.0;
  CMat T_tilde;
  CMat T;                         // T_1 ... T_k composed
  PluriharmonicPoly increment;    // h~_k in the previous level's normalized coordinates
  PluriharmonicPoly shift;        // accumulated shift in original coordinates
  double raw_det = 0.0;           // det of the unnormalized ellipsoid coefficients
  double t_tilde_deviation = 0.0; // ||T~_k - I||
  double composite_abs_det = 0.0;
  FitReport fit;
  double inner_radius = 0.0;      // continuous radii of the normalized domain
  double outer_radius = 0.0;
  double radius = 0.0;            // max |z - x0| over the section, original coordinates
  double lattice_h = 0.0;
  bool fit_pass = false;
  std::optional<SolveReport> next_solve;
};

struct SectionChain {
  RealPoint x0;
  std::size_t x0_node = 0;
  double sigma = 0.0;
  double mu0 = 0.0;
  double mu0_formula = 0.0;
  std::vector<ChainLevel> levels;
  double measured_c_prime = 0.0;  // max_k ||T~_k - I|| / sqrt(sigma)

  int depth() const { return static_cast<int>(levels.size()); }

  /// Level whose shift governs height mu: mu0^{j+1} < mu <= mu0^j, clamped to the built levels.
  const ChainLevel& level_for(double mu) const {
    if (levels.empty()) throw PreconditionError("SectionChain: empty chain");
    int j = static_cast<int>(std::floor(std::log(mu) / std::log(mu0) + 1e-9));
    j = std::clamp(j, 1, depth());
    return levels[j - 1];
  }

  Section section(const FieldPtr& u, double mu) const {
    const ChainLevel& lv = level_for(mu);
    Section s = build_section(u, x0_node, mu, lv.shift);
    const HermitianTransform T{lv.T};
    s.transform = T;
    s.fitted = Ellipsoid{to_complex(x0), ellipsoid_matrix(T), mu};
    return s;
  }
};

namespace detail {

struct LevelGeometry {
  double inner = std::numeric_limits<double>::infinity();
  double outer = 0.0;
  double extent = 0.0;  // max |T zeta| over boundary projections
};

inline LevelGeometry level_geometry(const GridDomain& d, const CMat& T) {
  LevelGeometry g;
  for (std::size_t b : d.boundary_nodes()) {
    const RealPoint dir = unit_direction(d.coords(b));
    const double rho = d.projected_radius(b);
    g.inner = std::min(g.inner, rho);
    g.outer = std::max(g.outer, rho);
    g.extent = std::max(g.extent, (T * to_complex(RealPoint(rho * dir))).norm());
  }
  return g;
}

}  // namespace detail

/// Inductive construction: at level k the unit-right-side solution of the
/// previous level is split at the center, its form normalized, and the
/// section of height mu0^k renormalized to a near-unit domain.
inline SectionChain construct_section_chain(const FieldPtr& u, const GridFunction& v0, std::size_t x0,
                                            const ChainConfig& cfg) {
  cfg.validate();
  const GridDomain& d = *u->domain;
  const int n = d.n();
  if (!same_lattice(d, *v0.domain)) throw PreconditionError("construct_section_chain: u and v0 on different lattices");
  if (!d.is_interior(x0)) throw PreconditionError("construct_section_chain: base point is not an interior node");
  const RealPoint xc = d.coords(x0);
  const double margin = cfg.margin > 0.0 ? cfg.margin : 2.0 * d.h();
  if (d.shape().boundary_radius(unit_direction(xc)) - xc.norm() < margin)
    throw PreconditionError("construct_section_chain: base point too close to the boundary");

  SectionChain chain;
  chain.x0 = xc;
  chain.x0_node = x0;
  chain.sigma = cfg.sigma;
  chain.mu0 = cfg.mu0;
  chain.mu0_formula = mu0_from_sigma(cfg.sigma, cfg.gamma_n);

  const CVec z0 = to_complex(xc);
  CMat T = CMat::Identity(n, n);
  PluriharmonicPoly shift = PluriharmonicPoly::zero(z0);
  std::optional<GridFunction> v_prev;  // previous level's unit solution (normalized coordinates)

  for (int k = 1; k <= cfg.k_max; ++k) {
    auto broken = [k](const std::string& why) {
      std::ostringstream os;
      os << "section chain broken at level " << k << ": " << why;
      return ChainBrokenError(os.str(), k);
    };
    ChainLevel lv;
    lv.k = k;
    lv.mu = std::pow(cfg.mu0, k);

    TaylorSplit split;
    try {
      split = v_prev ? taylor_split(*v_prev, v_prev->domain->center_node()) : taylor_split(v0, x0);
    } catch (const Error& e) {
      throw broken(e.what());
    }
    lv.raw_det = split.A.determinant();
    HermitianTransform Tt;
    try {
      Tt = normalize_transform(normalize_det(split.A), 1e-9);
    } catch (const Error& e) {
      throw broken(e.what());
    }
    lv.T_tilde = Tt.T;
    lv.t_tilde_deviation = Tt.deviation();
    lv.increment = split.h;
    if (k == 1) {
      shift = split.h;
    } else {
      const CMat M = std::pow(cfg.mu0, 0.5 * (k - 1)) * T;
      shift = shift + split.h.pushforward(M, z0).scaled(std::pow(cfg.mu0, k - 1));
    }
    T = T * Tt.T;
    lv.T = T;
    lv.shift = shift;
    lv.composite_abs_det = std::abs(T.determinant());

    const RescaledEvaluator ev{u, xc, u->values[x0], lv.mu, shift, T, cfg.transport};
    GridFunction U;
    DomainPtr omega;
    try {
      U = GridFunction::sample(make_domain(n, ShapeSpec::ball(cfg.level_half_width), cfg.level_resolution,
                                           cfg.level_half_width),
                               ev);
      omega = make_domain(n, ShapeSpec::level_set(ev, cfg.level_half_width, "section level"),
                          cfg.level_resolution, cfg.level_half_width);
    } catch (const Error& e) {
      throw broken(e.what());
    }
    lv.lattice_h = U.domain->h();

    auto Uptr = std::make_shared<const GridFunction>(std::move(U));
    try {
      const Section S = build_section(Uptr, Uptr->domain->center_node(), -Uptr->values[Uptr->domain->center_node()],
                                      PluriharmonicPoly::zero(n));
      lv.fit = fit_ellipsoid_nodes(*Uptr->domain, S.nodes, RealPoint::Zero(2 * n), HermitianMatrix::identity(n), 1.0);
    } catch (const Error& e) {
      throw broken(e.what());
    }
    if (omega->interior_nodes().empty() || !omega->is_interior(omega->center_node()))
      throw broken("normalized domain does not contain the origin");
    const auto geo = detail::level_geometry(*omega, T);
    lv.inner_radius = geo.inner;
    lv.outer_radius = geo.outer;
    lv.radius = std::sqrt(lv.mu) * geo.extent;
    const double slack = 2.0 * lv.lattice_h;
    lv.fit_pass = lv.fit.c_in >= 1.0 - 0.1 * cfg.sigma - slack && lv.fit.c_out <= 1.0 + 0.1 * cfg.sigma + slack;
    if (geo.inner < 1.0 - 0.5 * cfg.sigma || geo.outer > 1.0 + 0.5 * cfg.sigma) {
      std::ostringstream os;
      os << "normalized domain radii [" << geo.inner << ", " << geo.outer << "] leave 1 +- " << 0.5 * cfg.sigma;
      throw broken(os.str());
    }

    if (k < cfg.k_max) {
      try {
        auto one = GridFunction::constant(omega, 1.0);
        auto res = solve_dirichlet(omega, one, zero_boundary_data(omega), cfg.solve);
        lv.next_solve = res.report;
        v_prev = std::move(res.u);
      } catch (const Error& e) {
        throw broken(e.what());
      }
    }
    chain.measured_c_prime = std::max(chain.measured_c_prime, lv.t_tilde_deviation / std::sqrt(cfg.sigma));
    chain.levels.push_back(std::move(lv));
  }
  return chain;
}

}  // namespace cma
