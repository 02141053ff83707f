// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "advinfer/attackers.hpp"
#include "advinfer/priors.hpp"

namespace advinfer {

enum class GradMode { kFiniteDiff, kUnrolled };
enum class OuterOptimizer { kAdam, kGd };
/// kArgmax: y† = argmax z each epoch. kExhaustive: one run per class with the
/// target pinned, lowest final objective wins.
enum class TargetMode { kArgmax, kExhaustive };

std::string_view to_string(GradMode m);
GradMode grad_mode_from_string(std::string_view s);
std::string_view to_string(OuterOptimizer o);
OuterOptimizer optimizer_from_string(std::string_view s);
std::string_view to_string(TargetMode m);
TargetMode target_mode_from_string(std::string_view s);

struct InferenceConfig {
  double lambda = 0.1;
  double learning_rate = 0.01;
  int epochs = 5000;
  GradMode grad_mode = GradMode::kUnrolled;
  double fd_step = 1e-4;
  PGDConfig inner;
  OuterOptimizer optimizer = OuterOptimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  TargetMode target_mode = TargetMode::kArgmax;

  void validate() const;
};

using AttackerParams = std::variant<LinearAttacker, BoxAttacker>;

struct InferenceResult {
  AttackerParams estimate;
  /// Outer objective at the start of every epoch.
  std::vector<double> loss_trace;
  Vector alpha_opt_final;
  bool converged = false;
  double initial_objective = 0.0;
  /// Objective of `estimate` (the lowest seen over the run).
  double final_objective = 0.0;
  /// Continuous class surrogate (box parameterizations only).
  Vector z;
};

// ---------------------------------------------------------------------------
// Linear regression defender

/// λ·(‖M−μM‖² + ‖C−μC‖² + ‖W−μW‖²) + ‖α_obs − c·G⁻¹s₁‖², where C = GᵀG+εI,
/// W = VᵀV+εI, c = ‖α_obs‖_C and s₁ is the top right singular vector of
/// V·M·G⁻¹ with its sign chosen to minimize the residual.
double outer_objective_linear(const Matrix& M, const Matrix& G, const Matrix& V,
                              const Vector& alpha_obs, const LinearPrior& prior, double lambda);

struct LinearObjective {
  double value = 0.0;
  Matrix grad_M;
  Matrix grad_G;
  Matrix grad_V;
};

/// Same objective plus its exact gradient with respect to (M, G, V).
LinearObjective outer_objective_linear_with_gradient(const Matrix& M, const Matrix& G,
                                                     const Matrix& V, const Vector& alpha_obs,
                                                     const LinearPrior& prior, double lambda);

/// MAP estimate of the linear attacker from one observed attack. Optimizes
/// the square-root factors (G, V) so every iterate stays PD.
InferenceResult infer_linear(const Vector& alpha_obs, const LinearPrior& prior,
                             const InferenceConfig& cfg);

// ---------------------------------------------------------------------------
// Box (logistic / MLP) defender

struct BoxParams {
  ModelBelief model;
  Vector c1;
  Vector c2;
  Vector z;
};

/// Parameter vector layout: layer weights (row-major, layer order), c1, c2, z.
std::vector<double> flatten(const BoxParams& p);
BoxParams unflatten(std::span<const double> theta, const BoxParams& like);

/// λ·(‖θ_model−μ‖² + ‖c1−μc1‖² + ‖c2−μc2‖² + ‖z−μz‖²) + ‖α_obs − α_opt‖²,
/// where α_opt solves the inner attack for y† = argmax z (or `target` when
/// given) over the box [min(c1,c2), max(c1,c2)].
double outer_objective_box(const BoxParams& params, const Vector& alpha_obs, const Vector& x,
                           const BoxPrior& prior, double lambda, const PGDConfig& inner,
                           std::optional<int> target = std::nullopt);

struct BoxObjective {
  double value = 0.0;
  std::vector<double> gradient;  // flatten() layout
  Vector alpha_opt;
  int target = 0;
};

/// Gradient by reverse-mode differentiation through the unrolled inner PGD
/// (along the accepted path when inner.backtracking is set). z only receives
/// its prior gradient since y† = argmax z is piecewise constant.
BoxObjective outer_objective_box_unrolled(const BoxParams& params, const Vector& alpha_obs,
                                          const Vector& x, const BoxPrior& prior, double lambda,
                                          const PGDConfig& inner,
                                          std::optional<int> target = std::nullopt);

/// Gradient by central differences of outer_objective_box on every scalar.
BoxObjective outer_objective_box_finite_diff(const BoxParams& params, const Vector& alpha_obs,
                                             const Vector& x, const BoxPrior& prior,
                                             double lambda, const PGDConfig& inner, double step,
                                             std::optional<int> target = std::nullopt);

/// MAP estimate of the box attacker (family taken from the prior's model).
InferenceResult infer_box(const Vector& alpha_obs, const Vector& x, const BoxPrior& prior,
                          const InferenceConfig& cfg);

}  // namespace advinfer
