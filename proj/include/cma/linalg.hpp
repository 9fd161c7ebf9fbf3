#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#include "cma/error.hpp"

namespace cma {

using cplx = std::complex<double>;

// Fixed upper bounds keep every small vector and matrix on the stack:
// at most two complex dimensions, four real ones.
inline constexpr int kMaxComplexDim = 2;
inline constexpr int kMaxRealDim = 4;

using RealPoint = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxRealDim, 1>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRealDim, kMaxRealDim>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, kMaxComplexDim, 1>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxComplexDim, kMaxComplexDim>;

/// Real coordinates are ordered (x_1, y_1, ..., x_n, y_n) with z_i = x_i + i y_i.
inline CVec to_complex(const RealPoint& x) {
  const auto n = x.size() / 2;
  CVec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = cplx(x(2 * i), x(2 * i + 1));
  return z;
}

inline RealPoint to_real(const CVec& z) {
  RealPoint x(2 * z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    x(2 * i) = z(i).real();
    x(2 * i + 1) = z(i).imag();
  }
  return x;
}

/// Largest singular value.
inline double operator_norm(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

/// Hermitian n x n matrix. Construction symmetrizes the input so that
/// entries[i][j] == conj(entries[j][i]) holds bit-exactly.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const CMat& m) : m_(m) {
    if (m.rows() != m.cols()) throw PreconditionError("HermitianMatrix: matrix must be square");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      m_(i, i) = cplx(m(i, i).real(), 0.0);
      for (Eigen::Index j = i + 1; j < m_.cols(); ++j) {
        const cplx avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
        m_(i, j) = avg;
        m_(j, i) = std::conj(avg);
      }
    }
  }

  static HermitianMatrix identity(int n) { return HermitianMatrix(CMat::Identity(n, n)); }
  static HermitianMatrix diagonal(std::initializer_list<double> d) {
    CMat m = CMat::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double v : d) m(i, i) = v, ++i;
    return HermitianMatrix(m);
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMat& matrix() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double determinant() const { return m_.determinant().real(); }

  /// Eigenvalues in ascending order.
  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<CMat> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  double min_eigenvalue() const { return eigenvalues()(0); }
  double max_eigenvalue() const { return eigenvalues()(dim() - 1); }

  bool is_positive_definite() const { return dim() > 0 && min_eigenvalue() > 0.0; }

  HermitianMatrix scaled(double s) const { return HermitianMatrix(m_ * s); }
  HermitianMatrix inverse() const { return HermitianMatrix(m_.inverse()); }

  /// The form sum_ij a_ij w_i conj(w_j), which equals w^T A conj(w).
  double quadratic_form(const CVec& w) const {
    return (w.transpose() * m_ * w.conjugate())(0, 0).real();
  }

  double max_abs_entry() const { return m_.cwiseAbs().maxCoeff(); }

 private:
  CMat m_;
};

}  // namespace cma
