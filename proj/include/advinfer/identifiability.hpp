// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>

#include "advinfer/attackers.hpp"

namespace advinfer {

// Constructive non-identifiability for linear attackers: given any attack α
// and two of the three parameter groups, build the third so that α is the
// optimal attack.

struct MembershipReport {
  bool is_member = false;
  double objective_at_alpha = 0.0;
  double best_found_objective = 0.0;
  double gap = 0.0;  // best_found_objective - objective_at_alpha
};

/// Loss metric W making α optimal for (M, C, c). M must be square and
/// invertible, and α must saturate the constraint (‖α‖_C = c).
PDMatrix construct_objective(const Vector& alpha, const Matrix& M, const PDMatrix& C, double c);

/// Capability (C, c) with C = MᵀWM and c = ‖Mα‖_W. The constraint boundary
/// then coincides with a level set of the objective, so every boundary
/// point, α included, is optimal.
std::pair<PDMatrix, double> construct_capability(const Vector& alpha, const Matrix& M,
                                                 const PDMatrix& W);

/// Model belief M′ making α optimal for (C, c, W). α must saturate the
/// constraint.
Matrix construct_knowledge(const Vector& alpha, const PDMatrix& C, double c, const PDMatrix& W);

/// Checks α against the analytic optimum and `samples` random points on the
/// constraint boundary {v : ‖v‖_C = c}.
MembershipReport verify_membership(const LinearAttacker& a, const Vector& alpha, int samples,
                                   double tol, std::uint64_t seed = 0);

}  // namespace advinfer
