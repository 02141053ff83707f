// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace advinfer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ridge added to every PD matrix built from a square-root factor.
inline constexpr double kPdRidge = 1e-8;

/// Throws kNonFinite if any entry is NaN/inf and kInvalidArgument if empty.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

/// Positive-definite matrix kept together with a square-root factor.
///
/// Two ways to build one:
///  - from_factor(F): product = FᵀF + ridge·I, factor = F.
///  - from_product(P): product = P (symmetrized), factor = upper Cholesky R.
/// Either way `root()` is an upper-triangular R with RᵀR == product(), which
/// is what the analytic attack uses.
class PDMatrix {
 public:
  static PDMatrix from_factor(const Matrix& factor, double ridge = kPdRidge);
  static PDMatrix from_product(const Matrix& product);
  static PDMatrix identity(Index n) { return from_product(Matrix::Identity(n, n)); }

  Index dim() const { return product_.rows(); }
  const Matrix& factor() const { return factor_; }
  const Matrix& product() const { return product_; }
  const Matrix& root() const { return root_; }

  /// Smallest eigenvalue of product().
  double min_eigenvalue() const;
  double log_det() const;
  /// product()⁻¹·B via the cached Cholesky factorization.
  Matrix solve(const Matrix& rhs) const;

 private:
  PDMatrix(Matrix factor, Matrix product);

  Matrix factor_;
  Matrix product_;
  Matrix root_;
};

PDMatrix pd_from_factor(const Matrix& factor);

/// √(vᵀAv).
double mahalanobis_norm(const Vector& v, const PDMatrix& a);

struct SpectralTop {
  double sigma1 = 0.0;
  Vector s1;         // unit, canonical sign
  double gap = 0.0;  // sigma1 - sigma2
};

/// Largest singular value of `a` and its right singular vector.
SpectralTop top_right_singular(const Matrix& a);

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is >= 0.
void apply_canonical_sign(Vector& v);
Vector canonical_sign(Vector v);

/// Square orthogonal Q whose first column is the unit vector `u`.
Matrix complete_orthonormal(const Vector& u);

/// Log-density of the matrix-normal MN(mean, rowCov, colCov) at X.
double matrix_normal_logpdf(const Matrix& x, const Matrix& mean, const PDMatrix& row_cov,
                            const PDMatrix& col_cov);

/// Log-density of N(mean, cov) at v.
double gaussian_logpdf(const Vector& v, const Vector& mean, const PDMatrix& cov);

}  // namespace advinfer
