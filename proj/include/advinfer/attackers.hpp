// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "advinfer/core_math.hpp"

namespace advinfer {

/// Repulsive attacker against a linear regressor: maximize ‖Mα‖²_W subject
/// to ‖α‖_C ≤ c. Knowledge = M, capability = (C, c), objective = W.
struct LinearAttacker {
  Matrix M;  // q×d
  PDMatrix C;
  double c = 1.0;
  PDMatrix W;

  Index input_dim() const { return M.cols(); }
  Index output_dim() const { return M.rows(); }
  void validate() const;
};

enum class Activation { kIdentity, kRelu, kTanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct LogisticModel {
  Matrix M;  // q×d; class probabilities = softmax(M·x)
};

/// Layer ℓ computes h_ℓ = σ_ℓ(W_ℓ h_{ℓ−1}); softmax is applied to the last
/// layer's output. The last activation is normally kIdentity.
struct MLPModel {
  std::vector<Matrix> layers;
  std::vector<Activation> activations;
};

using ModelBelief = std::variant<LogisticModel, MLPModel>;

Index input_dim(const ModelBelief& model);
Index class_count(const ModelBelief& model);
void validate_model(const ModelBelief& model);

/// Attractive attacker: maximize the probability of class `target` at x+α
/// within the box c1 ⪯ α ⪯ c2.
struct BoxAttacker {
  ModelBelief model;
  Vector c1;
  Vector c2;
  int target = 0;

  void validate() const;
};

enum class PgdInit { kZero, kMidpoint, kRandom };

std::string_view to_string(PgdInit init);
PgdInit pgd_init_from_string(std::string_view s);

struct PGDConfig {
  int steps = 300;
  double step_size = 0.05;
  PgdInit init = PgdInit::kZero;
  std::uint64_t seed = 0;
  /// Accept a step only if the objective does not decrease; halve the step on
  /// rejection, double it (up to 1024·step_size) on acceptance.
  bool backtracking = true;

  void validate() const;
};

/// ‖Mα‖²_W.
double linear_attack_objective(const LinearAttacker& a, const Vector& alpha);

/// Closed-form optimum c·R⁻¹s₁ where RᵀR = C and s₁ is the top right singular
/// vector of V·M·R⁻¹. The result is returned in canonical sign; −α is
/// equally optimal.
Vector optimal_attack_linear(const LinearAttacker& a);

/// Softmax class probabilities of the model at x.
Vector class_probabilities(const ModelBelief& model, const Vector& x);

/// Index of the most probable class (lowest index on ties).
int predict_class(const ModelBelief& model, const Vector& x);

/// Projected gradient ascent on log z_target(x+α) with componentwise clamping.
Vector optimal_attack_box(const BoxAttacker& a, const Vector& x, const PGDConfig& cfg);

}  // namespace advinfer
