// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/identifiability.hpp"

#include <cmath>
#include <random>
#include <string>

#include "advinfer/error.hpp"

namespace advinfer {

namespace {

constexpr double kSaturationTol = 1e-6;
constexpr double kMaxCondition = 1e8;

/// Unit vector R·α/c; requires ‖α‖_C = c.
Vector saturating_direction(const Vector& alpha, const PDMatrix& C, double c, const char* who) {
  require_finite(alpha, who);
  if (alpha.size() != C.dim()) {
    fail(ErrorCode::kDimensionMismatch, std::string(who) + ": alpha dimension does not match C");
  }
  if (!(c > 0.0)) fail(ErrorCode::kInvalidArgument, std::string(who) + ": c must be positive");
  const double norm = mahalanobis_norm(alpha, C);
  if (std::abs(norm - c) > kSaturationTol * std::max(1.0, c)) {
    fail(ErrorCode::kInvalidArgument,
         std::string(who) + ": attack does not saturate the constraint (‖α‖_C = " +
             std::to_string(norm) + ", c = " + std::to_string(c) + ")");
  }
  Vector u = C.root() * alpha / c;
  u.normalize();
  return u;
}

/// q×d matrix with singular values 1, ½, ¼, … whose top right singular
/// vector is u.
Matrix placeholder_with_top_right(const Vector& u, Index rows) {
  const Matrix Q = complete_orthonormal(u);
  const Index d = u.size();
  const Index k = std::min(rows, d);
  Matrix p = Matrix::Zero(rows, d);
  double sigma = 1.0;
  for (Index i = 0; i < k; ++i, sigma *= 0.5) p.row(i) = sigma * Q.col(i).transpose();
  return p;
}

}  // namespace

PDMatrix construct_objective(const Vector& alpha, const Matrix& M, const PDMatrix& C, double c) {
  require_finite(M, "construct_objective M");
  if (M.rows() != M.cols()) {
    fail(ErrorCode::kDimensionMismatch, "construct_objective: M must be square");
  }
  if (M.cols() != C.dim()) {
    fail(ErrorCode::kDimensionMismatch, "construct_objective: M and C dimensions differ");
  }
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) >= kMaxCondition) {
    fail(ErrorCode::kDegenerate, "construct_objective: M is not invertible");
  }
  const Vector u = saturating_direction(alpha, C, c, "construct_objective");
  const Matrix V = placeholder_with_top_right(u, M.rows());
  // V′ = V·R·M⁻¹ so that V′·M·R⁻¹ = V.
  const Matrix VR = V * C.root();
  Matrix V_prime = M.transpose().partialPivLu().solve(VR.transpose()).transpose();
  // Scaling W leaves the optimal attack unchanged; lifting its spectrum to
  // ≥ 1 makes the PD ridge negligible next to it.
  Eigen::JacobiSVD<Matrix> vsvd(V_prime);
  const double smin = vsvd.singularValues()(vsvd.singularValues().size() - 1);
  if (smin < 1.0) V_prime /= smin;
  return pd_from_factor(V_prime);
}

std::pair<PDMatrix, double> construct_capability(const Vector& alpha, const Matrix& M,
                                                 const PDMatrix& W) {
  require_finite(M, "construct_capability M");
  require_finite(alpha, "construct_capability alpha");
  if (M.rows() != W.dim() || alpha.size() != M.cols()) {
    fail(ErrorCode::kDimensionMismatch, "construct_capability: inconsistent shapes");
  }
  if (M.rows() < M.cols()) {
    fail(ErrorCode::kDegenerate, "construct_capability: M is rank-deficient (fewer rows than columns)");
  }
  // Square root of MᵀWM from the R factor of V·M (RᵀR = MᵀVᵀVM).
  const Matrix VM = W.root() * M;
  Eigen::HouseholderQR<Matrix> qr(VM);
  const Matrix r = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
  PDMatrix C = [&] {
    try {
      return PDMatrix::from_factor(r, 0.0);
    } catch (const Error&) {
      fail(ErrorCode::kDegenerate, "construct_capability: M is rank-deficient");
    }
  }();
  const double c = mahalanobis_norm(alpha, C);
  if (!(c > 0.0)) fail(ErrorCode::kDegenerate, "construct_capability: attack has zero objective");
  return {std::move(C), c};
}

Matrix construct_knowledge(const Vector& alpha, const PDMatrix& C, double c, const PDMatrix& W) {
  const Vector u = saturating_direction(alpha, C, c, "construct_knowledge");
  const Matrix P = placeholder_with_top_right(u, W.dim());
  // M′ = V⁻¹·P·R with RᵀR = C and VᵀV = W.
  const Matrix PR = P * C.root();
  return W.root().triangularView<Eigen::Upper>().solve(PR);
}

MembershipReport verify_membership(const LinearAttacker& a, const Vector& alpha, int samples,
                                   double tol, std::uint64_t seed) {
  a.validate();
  require_finite(alpha, "verify_membership alpha");
  if (alpha.size() != a.input_dim()) {
    fail(ErrorCode::kDimensionMismatch, "verify_membership: alpha dimension mismatch");
  }
  if (mahalanobis_norm(alpha, a.C) > a.c * (1.0 + tol)) {
    fail(ErrorCode::kInvalidArgument, "verify_membership: alpha is outside the feasible set");
  }
  MembershipReport report;
  report.objective_at_alpha = linear_attack_objective(a, alpha);
  report.best_found_objective = linear_attack_objective(a, optimal_attack_linear(a));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(a.input_dim());
  for (int s = 0; s < samples; ++s) {
    for (Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
    const double norm = mahalanobis_norm(w, a.C);
    if (norm == 0.0) continue;
    const Vector v = (a.c / norm) * w;
    report.best_found_objective = std::max(report.best_found_objective, linear_attack_objective(a, v));
  }
  report.gap = report.best_found_objective - report.objective_at_alpha;
  report.is_member = report.gap <= tol * std::max(1.0, report.objective_at_alpha);
  return report;
}

}  // namespace advinfer
