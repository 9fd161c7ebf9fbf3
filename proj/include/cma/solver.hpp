#pragma once

// Damped Newton solver for det(u_{i jbar}) = f with Dirichlet data, plus the
// comparison certificates built on top of it.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "cma/error.hpp"
#include "cma/grid.hpp"

namespace cma {

struct SolveConfig {
  enum class InitMode { QuadraticPlusHarmonic, Supplied };

  double newton_tol = 1e-8;
  int max_iters = 40;
  double damping = 1.0;
  double psh_floor = 1e-6;
  InitMode init_mode = InitMode::QuadraticPlusHarmonic;

  void validate() const {
    if (!(newton_tol > 0.0)) throw ValidationError("SolveConfig: newton_tol must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw ValidationError("SolveConfig: damping must lie in (0, 1]");
    if (!(psh_floor > 0.0)) throw ValidationError("SolveConfig: psh_floor must be positive");
    if (max_iters < 1) throw ValidationError("SolveConfig: max_iters must be at least 1");
  }
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;        // sup |log det u_{i jbar} - log f| over the interior
  double min_eigenvalue = 0.0;  // smallest complex-Hessian eigenvalue over the interior
  double boundary_max_error = 0.0;
  double boundary_offset = 0.0;  // lattice boundary vs continuum boundary
  std::vector<double> residual_history;
};

using BoundaryData = std::function<double(const RealPoint&)>;

/// Extends data given on the continuum boundary to nearby lattice nodes by
/// g(pi x) + |x|^2 - |pi x|^2, pi the radial projection. Reproduces
/// |z|^2 - 1 exactly on the unit ball for g = 0.
inline BoundaryData radial_extension(const ShapeSpec& shape, BoundaryData g) {
  return [shape, g = std::move(g)](const RealPoint& x) {
    const RealPoint dir = unit_direction(x);
    const double rho = shape.boundary_radius(dir);
    const RealPoint px = rho * dir;
    return g(px) + x.squaredNorm() - rho * rho;
  };
}

inline BoundaryData zero_boundary_data(const ShapeSpec& shape) {
  return radial_extension(shape, [](const RealPoint&) { return 0.0; });
}

/// Zero data extended radially, using the domain's cached boundary radii at lattice nodes.
inline BoundaryData zero_boundary_data(const DomainPtr& domain) {
  return [domain](const RealPoint& x) {
    const std::size_t idx = domain->nearest_node(x);
    const double rho = (domain->coords(idx) - x).norm() < 1e-12 * domain->h()
                           ? domain->projected_radius(idx)
                           : domain->shape().boundary_radius(unit_direction(x));
    return x.squaredNorm() - rho * rho;
  };
}

namespace detail {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline std::vector<long> interior_numbering(const GridDomain& d) {
  std::vector<long> num(d.size(), -1);
  long k = 0;
  for (std::size_t i : d.interior_nodes()) num[i] = k++;
  return num;
}

inline Eigen::VectorXd sparse_solve(const SparseMatrix& A, const Eigen::VectorXd& b, int n) {
  if (n == 2) {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> it;
    it.setTolerance(1e-13);
    it.setMaxIterations(2000);
    it.compute(A);
    if (it.info() == Eigen::Success) {
      Eigen::VectorXd x = it.solve(b);
      if (it.info() == Eigen::Success) return x;
    }
  }
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw ConvergenceError("linear solve: factorization failed", 0.0, 0);
  return lu.solve(b);
}

/// Discrete harmonic extension of boundary values into the interior.
inline std::vector<double> harmonic_extension(const GridDomain& d, const std::vector<double>& boundary_values) {
  const auto num = interior_numbering(d);
  const long m = static_cast<long>(d.interior_nodes().size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (std::size_t i : d.interior_nodes()) {
    const long row = num[i];
    trips.emplace_back(row, row, -2.0 * d.dims());
    for (int a = 0; a < d.dims(); ++a)
      for (int s : {-1, 1}) {
        Offset o{};
        o[a] = s;
        const std::size_t j = *d.offset(i, o);
        if (num[j] >= 0)
          trips.emplace_back(row, num[j], 1.0);
        else
          rhs(row) -= boundary_values[j];
      }
  }
  SparseMatrix A(m, m);
  A.setFromTriplets(trips.begin(), trips.end());
  const Eigen::VectorXd x = sparse_solve(A, rhs, d.n());
  std::vector<double> out = boundary_values;
  for (std::size_t i : d.interior_nodes()) out[i] = x(num[i]);
  return out;
}

struct NewtonState {
  Eigen::VectorXd residual;  // log det H - log f per interior node
  double sup_residual = 0.0;
  double min_eigenvalue = 0.0;
};

inline NewtonState evaluate_state(const GridFunction& u, const GridFunction& f, bool allow_degenerate) {
  const GridDomain& d = *u.domain;
  NewtonState st;
  st.residual.resize(static_cast<long>(d.interior_nodes().size()));
  st.min_eigenvalue = std::numeric_limits<double>::infinity();
  long k = 0;
  for (std::size_t i : d.interior_nodes()) {
    const HermitianMatrix H = complex_hessian(u, i);
    const double lmin = H.min_eigenvalue();
    st.min_eigenvalue = std::min(st.min_eigenvalue, lmin);
    const double det = H.determinant();
    if (det <= 0.0 || lmin <= 0.0) {
      if (!allow_degenerate) throw DegeneracyError("solver: complex Hessian lost positivity", lmin);
      st.residual(k++) = std::numeric_limits<double>::infinity();
      continue;
    }
    st.residual(k++) = std::log(det) - std::log(f.values[i]);
  }
  st.sup_residual = st.residual.size() ? st.residual.cwiseAbs().maxCoeff() : 0.0;
  return st;
}

/// Jacobian of u -> log det u_{i jbar}: the operator delta -> tr(H^{-1} dH[delta]).
inline SparseMatrix newton_jacobian(const GridFunction& u, const std::vector<long>& num) {
  const GridDomain& d = *u.domain;
  const int n = d.n();
  const int dims = d.dims();
  const double h2 = d.h() * d.h();
  const long m = static_cast<long>(d.interior_nodes().size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * (1 + 2 * dims + 2 * dims * (dims - 1)));

  for (std::size_t i : d.interior_nodes()) {
    const long row = num[i];
    const CMat Hinv = complex_hessian(u, i).inverse().matrix();
    // Coefficient of the real second derivative D_ab in tr(H^{-1} dH).
    RealMatrix M = RealMatrix::Zero(dims, dims);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const cplx w = Hinv(q, p);
        const int xp = 2 * p, yp = 2 * p + 1, xq = 2 * q, yq = 2 * q + 1;
        M(xp, xq) += (0.25 * w).real();
        M(yp, yq) += (0.25 * w).real();
        M(xp, yq) += (cplx(0.0, 0.25) * w).real();
        M(yp, xq) += (cplx(0.0, -0.25) * w).real();
      }
    auto add = [&](const Offset& o, double coef) {
      const std::size_t j = *d.offset(i, o);
      if (num[j] >= 0) trips.emplace_back(row, num[j], coef);
    };
    double diag = 0.0;
    for (int a = 0; a < dims; ++a) {
      const double c = M(a, a) / h2;
      diag -= 2.0 * c;
      Offset p{}, q{};
      p[a] = 1;
      q[a] = -1;
      add(p, c);
      add(q, c);
    }
    for (int a = 0; a < dims; ++a)
      for (int b = a + 1; b < dims; ++b) {
        const double c = (M(a, b) + M(b, a)) / (4.0 * h2);
        if (c == 0.0) continue;
        for (int sa : {-1, 1})
          for (int sb : {-1, 1}) {
            Offset o{};
            o[a] = sa;
            o[b] = sb;
            add(o, sa * sb * c);
          }
      }
    trips.emplace_back(row, row, diag);
  }
  SparseMatrix J(m, m);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

}  // namespace detail

struct SolveResult {
  GridFunction u;
  SolveReport report;
};

/// Solves det(u_{i jbar}) = f on the interior with u = g on boundary nodes.
/// `initial` is used when cfg.init_mode is Supplied.
inline SolveResult solve_dirichlet(const DomainPtr& domain, const GridFunction& f, const BoundaryData& g,
                                   const SolveConfig& cfg = {}, const GridFunction* initial = nullptr) {
  cfg.validate();
  const GridDomain& d = *domain;
  if (d.interior_nodes().empty()) throw PreconditionError("solve_dirichlet: domain has no interior nodes");
  if (!same_lattice(*f.domain, d)) throw PreconditionError("solve_dirichlet: f lives on a different lattice");
  for (std::size_t i : d.interior_nodes())
    if (!(f.values[i] > 0.0) || !std::isfinite(f.values[i]))
      throw PreconditionError("solve_dirichlet: f must be positive and finite on the interior");

  GridFunction u(domain);
  std::vector<double> bvals(d.size(), 0.0);
  for (std::size_t b : d.boundary_nodes()) {
    bvals[b] = g(d.coords(b));
    if (!std::isfinite(bvals[b])) throw PreconditionError("solve_dirichlet: boundary data is not finite");
  }

  if (cfg.init_mode == SolveConfig::InitMode::Supplied) {
    if (!initial || !same_lattice(*initial->domain, d))
      throw PreconditionError("solve_dirichlet: supplied initial guess missing or on another lattice");
    for (std::size_t i : d.interior_nodes()) u.values[i] = initial->values[i];
    for (std::size_t b : d.boundary_nodes()) u.values[b] = bvals[b];
  } else {
    std::vector<double> mismatch(d.size(), 0.0);
    for (std::size_t b : d.boundary_nodes()) mismatch[b] = bvals[b] - (d.coords(b).squaredNorm() - 1.0);
    const auto ext = detail::harmonic_extension(d, mismatch);
    for (std::size_t i : d.interior_nodes()) u.values[i] = d.coords(i).squaredNorm() - 1.0 + ext[i];
    for (std::size_t b : d.boundary_nodes()) u.values[b] = bvals[b];
  }

  const auto num = detail::interior_numbering(d);
  SolveReport rep;
  rep.boundary_offset = d.boundary_offset();
  auto state = detail::evaluate_state(u, f, false);
  rep.residual_history.push_back(state.sup_residual);

  int it = 0;
  while (state.sup_residual > cfg.newton_tol) {
    if (it >= cfg.max_iters) {
      std::ostringstream os;
      os << "solve_dirichlet: no convergence after " << it << " Newton steps (residual " << state.sup_residual << ")";
      throw ConvergenceError(os.str(), state.sup_residual, it);
    }
    const auto J = detail::newton_jacobian(u, num);
    const Eigen::VectorXd delta = detail::sparse_solve(J, -state.residual, d.n());

    double alpha = cfg.damping;
    bool accepted = false;
    double worst = 0.0;
    for (int halving = 0; halving <= 5; ++halving) {
      GridFunction trial = u;
      for (std::size_t i : d.interior_nodes()) trial.values[i] += alpha * delta(num[i]);
      auto ts = detail::evaluate_state(trial, f, true);
      worst = ts.min_eigenvalue;
      if (ts.min_eigenvalue >= cfg.psh_floor && std::isfinite(ts.sup_residual)) {
        u = std::move(trial);
        state = std::move(ts);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "solve_dirichlet: plurisubharmonicity lost after 5 damping halvings (smallest eigenvalue " << worst
         << ")";
      throw DegeneracyError(os.str(), worst);
    }
    ++it;
    rep.residual_history.push_back(state.sup_residual);
  }

  rep.iterations = it;
  rep.residual = state.sup_residual;
  rep.min_eigenvalue = state.min_eigenvalue;
  if (rep.min_eigenvalue < cfg.psh_floor) {
    std::ostringstream os;
    os << "solve_dirichlet: solution is not strictly plurisubharmonic (smallest eigenvalue " << rep.min_eigenvalue
       << ")";
    throw DegeneracyError(os.str(), rep.min_eigenvalue);
  }
  for (std::size_t b : d.boundary_nodes())
    rep.boundary_max_error = std::max(rep.boundary_max_error, std::abs(u.values[b] - bvals[b]));
  return {std::move(u), rep};
}

/// Maximum interior residual |log det u_{i jbar} - log f|.
inline double cma_residual(const GridFunction& u, const GridFunction& f) {
  return detail::evaluate_state(u, f, true).sup_residual;
}

// ---------------------------------------------------------------------------
// Certificates

struct SandwichCertificate {
  double eps = 0.0;
  double lower_violation = 0.0;  // max of (1+eps)^{1/n} v0 - u
  double upper_violation = 0.0;  // max of u - (1-eps)^{1/n} v0
  double max_abs_difference = 0.0;
  double slack = 0.0;
  bool sandwich_pass = false;
  bool difference_pass = false;  // |u - v0| <= 4 eps + slack
  bool pass() const { return sandwich_pass && difference_pass; }
};

inline SandwichCertificate comparison_sandwich(const GridFunction& u, const GridFunction& v0, double eps, int n,
                                               double slack, double boundary_tol = 1e-9) {
  if (!same_lattice(*u.domain, *v0.domain) || u.domain->interior_nodes() != v0.domain->interior_nodes())
    throw PreconditionError("comparison_sandwich: u and v0 live on different domains");
  if (!(eps >= 0.0 && eps < 0.5)) throw PreconditionError("comparison_sandwich: eps must lie in [0, 0.5)");
  for (std::size_t b : u.domain->boundary_nodes())
    if (std::abs(u.values[b] - v0.values[b]) > boundary_tol)
      throw PreconditionError("comparison_sandwich: u and v0 disagree on the boundary");
  SandwichCertificate c;
  c.eps = eps;
  c.slack = slack;
  const double lo = std::pow(1.0 + eps, 1.0 / n);
  const double hi = std::pow(1.0 - eps, 1.0 / n);
  c.lower_violation = -std::numeric_limits<double>::infinity();
  c.upper_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i : u.domain->interior_nodes()) {
    c.lower_violation = std::max(c.lower_violation, lo * v0.values[i] - u.values[i]);
    c.upper_violation = std::max(c.upper_violation, u.values[i] - hi * v0.values[i]);
    c.max_abs_difference = std::max(c.max_abs_difference, std::abs(u.values[i] - v0.values[i]));
  }
  c.lower_violation = std::max(0.0, c.lower_violation);
  c.upper_violation = std::max(0.0, c.upper_violation);
  c.sandwich_pass = c.lower_violation <= slack && c.upper_violation <= slack;
  c.difference_pass = c.max_abs_difference <= 4.0 * eps + slack;
  return c;
}

struct StabilityGap {
  double lhs = 0.0;  // sup_int (v - u) - sup_bdry (v - u)
  double rhs = 0.0;  // ||f - g||_{L^q}^{1/n}
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

inline StabilityGap stability_gap(const GridFunction& u, const GridFunction& v, const GridFunction& f,
                                  const GridFunction& g, double q) {
  if (!(q > 1.0)) throw PreconditionError("stability_gap: q must exceed 1");
  const GridDomain& d = *u.domain;
  double sup_int = -std::numeric_limits<double>::infinity();
  double sup_bdry = -std::numeric_limits<double>::infinity();
  for (std::size_t i : d.interior_nodes()) sup_int = std::max(sup_int, v.values[i] - u.values[i]);
  for (std::size_t b : d.boundary_nodes()) sup_bdry = std::max(sup_bdry, v.values[b] - u.values[b]);
  double acc = 0.0;
  for (std::size_t i : d.interior_nodes()) acc += std::pow(std::abs(f.values[i] - g.values[i]), q);
  acc *= d.node_volume();
  StabilityGap s;
  s.lhs = sup_int - sup_bdry;
  s.rhs = std::pow(std::pow(acc, 1.0 / q), 1.0 / d.n());
  return s;
}

/// Largest node-wise violation of |z|^2 - 1 - 3 gamma <= v0 <= |z|^2 - 1 + 3 gamma.
inline double barrier_violation(const GridFunction& v0, double gamma) {
  const GridDomain& d = *v0.domain;
  double worst = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.in_domain(i)) continue;
    const double q = d.coords(i).squaredNorm() - 1.0;
    worst = std::max(worst, (q - 3.0 * gamma) - v0.values[i]);
    worst = std::max(worst, v0.values[i] - (q + 3.0 * gamma));
  }
  return worst;
}

}  // namespace cma
