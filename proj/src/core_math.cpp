// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/core_math.hpp"

#include <cmath>
#include <string>

#include "advinfer/error.hpp"

namespace advinfer {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2π)

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (m.size() == 0) fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty matrix");
  if (!m.allFinite()) fail(ErrorCode::kNonFinite, std::string(what) + ": non-finite entry");
}

void require_finite(const Vector& v, std::string_view what) {
  if (v.size() == 0) fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty vector");
  if (!v.allFinite()) fail(ErrorCode::kNonFinite, std::string(what) + ": non-finite entry");
}

// ---------------------------------------------------------------------------
// PDMatrix

PDMatrix::PDMatrix(Matrix factor, Matrix product)
    : factor_(std::move(factor)), product_(std::move(product)) {
  Eigen::LLT<Matrix> llt(product_);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::kDegenerate, "PDMatrix: matrix is not positive definite");
  }
  root_ = llt.matrixU();
  if (min_eigenvalue() < kPdRidge * (1.0 - 1e-6)) {
    fail(ErrorCode::kDegenerate, "PDMatrix: smallest eigenvalue below the PD floor");
  }
}

PDMatrix PDMatrix::from_factor(const Matrix& factor, double ridge) {
  require_finite(factor, "pd_from_factor");
  if (factor.rows() != factor.cols()) {
    fail(ErrorCode::kDimensionMismatch, "pd_from_factor: factor must be square, got " +
                                            shape_of(factor));
  }
  Matrix product = factor.transpose() * factor;
  product = 0.5 * (product + product.transpose()).eval();
  product.diagonal().array() += ridge;
  return PDMatrix(factor, std::move(product));
}

PDMatrix PDMatrix::from_product(const Matrix& product) {
  require_finite(product, "PDMatrix::from_product");
  if (product.rows() != product.cols()) {
    fail(ErrorCode::kDimensionMismatch, "PDMatrix::from_product: matrix must be square, got " +
                                            shape_of(product));
  }
  const double scale = std::max(1.0, product.cwiseAbs().maxCoeff());
  if ((product - product.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(ErrorCode::kInvalidArgument, "PDMatrix::from_product: matrix is not symmetric");
  }
  Matrix sym = 0.5 * (product + product.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::kDegenerate, "PDMatrix::from_product: matrix is not positive definite");
  }
  Matrix upper = llt.matrixU();
  return PDMatrix(std::move(upper), std::move(sym));
}

double PDMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(product_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

double PDMatrix::log_det() const {
  return 2.0 * root_.diagonal().array().log().sum();
}

Matrix PDMatrix::solve(const Matrix& rhs) const {
  if (rhs.rows() != dim()) {
    fail(ErrorCode::kDimensionMismatch, "PDMatrix::solve: rhs has wrong row count");
  }
  Matrix y = root_.transpose().triangularView<Eigen::Lower>().solve(rhs);
  return root_.triangularView<Eigen::Upper>().solve(y);
}

PDMatrix pd_from_factor(const Matrix& factor) { return PDMatrix::from_factor(factor); }

// ---------------------------------------------------------------------------

double mahalanobis_norm(const Vector& v, const PDMatrix& a) {
  require_finite(v, "mahalanobis_norm");
  if (v.size() != a.dim()) {
    fail(ErrorCode::kDimensionMismatch, "mahalanobis_norm: vector has dim " +
                                            std::to_string(v.size()) + ", metric has dim " +
                                            std::to_string(a.dim()));
  }
  const double quad = v.dot(a.product() * v);
  return std::sqrt(std::max(0.0, quad));
}

void apply_canonical_sign(Vector& v) {
  if (v.size() == 0) return;
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0.0) v = -v;
}

Vector canonical_sign(Vector v) {
  apply_canonical_sign(v);
  return v;
}

SpectralTop top_right_singular(const Matrix& a) {
  require_finite(a, "top_right_singular");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  SpectralTop top;
  top.sigma1 = sv(0);
  top.s1 = svd.matrixV().col(0);
  top.s1.normalize();
  apply_canonical_sign(top.s1);
  const double sigma2 = sv.size() > 1 ? sv(1) : 0.0;
  top.gap = top.sigma1 - sigma2;
  return top;
}

Matrix complete_orthonormal(const Vector& u) {
  require_finite(u, "complete_orthonormal");
  if (std::abs(u.norm() - 1.0) > 1e-8) {
    fail(ErrorCode::kInvalidArgument, "complete_orthonormal: input is not a unit vector");
  }
  const Index n = u.size();
  Matrix q(n, n);
  q.col(0) = u.normalized();
  Index filled = 1;
  for (Index k = 0; k < n && filled < n; ++k) {
    if (std::abs(u(k)) > 0.9) continue;  // nearly parallel to u
    Vector cand = Vector::Unit(n, k);
    // Two passes of modified Gram-Schmidt keep QᵀQ = I to working precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < filled; ++j) cand -= q.col(j).dot(cand) * q.col(j);
    }
    const double norm = cand.norm();
    if (norm < 1e-8) continue;
    q.col(filled++) = cand / norm;
  }
  if (filled != n) fail(ErrorCode::kNumeric, "complete_orthonormal: basis completion failed");
  return q;
}

double matrix_normal_logpdf(const Matrix& x, const Matrix& mean, const PDMatrix& row_cov,
                            const PDMatrix& col_cov) {
  require_finite(x, "matrix_normal_logpdf");
  require_finite(mean, "matrix_normal_logpdf mean");
  if (x.rows() != mean.rows() || x.cols() != mean.cols() || row_cov.dim() != x.rows() ||
      col_cov.dim() != x.cols()) {
    fail(ErrorCode::kDimensionMismatch, "matrix_normal_logpdf: inconsistent shapes");
  }
  const double q = static_cast<double>(x.rows());
  const double d = static_cast<double>(x.cols());
  const Matrix dev = x - mean;
  const Matrix left = row_cov.solve(dev);                          // Σ⁻¹(X−μ)
  const Matrix right = col_cov.solve(dev.transpose()).transpose();  // (X−μ)Ψ⁻¹
  const double trace = (left.array() * right.array()).sum();
  return -0.5 * d * q * kLog2Pi - 0.5 * d * row_cov.log_det() - 0.5 * q * col_cov.log_det() -
         0.5 * trace;
}

double gaussian_logpdf(const Vector& v, const Vector& mean, const PDMatrix& cov) {
  require_finite(v, "gaussian_logpdf");
  require_finite(mean, "gaussian_logpdf mean");
  if (v.size() != mean.size() || cov.dim() != v.size()) {
    fail(ErrorCode::kDimensionMismatch, "gaussian_logpdf: inconsistent shapes");
  }
  const Vector dev = v - mean;
  const double quad = dev.dot(cov.solve(dev).col(0));
  return -0.5 * static_cast<double>(v.size()) * kLog2Pi - 0.5 * cov.log_det() - 0.5 * quad;
}

}  // namespace advinfer
