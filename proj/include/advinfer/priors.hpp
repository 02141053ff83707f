// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "advinfer/attackers.hpp"
#include "advinfer/core_math.hpp"

namespace advinfer {

/// Gaussian prior over linear attackers. All row/column covariances are
/// identity, so only the means are stored.
struct LinearPrior {
  Matrix muM;  // defender's model M*, q×d
  Matrix muC;  // I_d
  Matrix muW;  // I_q

  Index input_dim() const { return muM.cols(); }
  Index output_dim() const { return muM.rows(); }
};

LinearPrior make_linear_prior(const Matrix& model_star);

/// Gaussian prior over box attackers (identity covariances).
struct BoxPrior {
  ModelBelief muModel;
  Vector muC1;
  Vector muC2;
  Vector muZ;  // one-hot at the observed attacked prediction
};

struct SampleConfig {
  double scale = 0.25;
  std::uint64_t seed = 0;
};

struct Box {
  Vector lower;
  Vector upper;
};

/// Centers the box prior on the observed attack: c1 = min(α)·1, c2 = max(α)·1,
/// z = one-hot at the model's prediction for x+α.
BoxPrior build_box_prior(const Vector& alpha_obs, const ModelBelief& model_star, const Vector& x);

/// Additive constant of the linear prior log-density: the sum of the three
/// matrix-normal normalizers with identity covariances, −½·log(2π)·(qd + d² + q²).
double linear_prior_log_normalizer(Index d, Index q);

/// λ-free log prior of (M, C, W); C and W are the PD products. Equals the sum
/// of matrix_normal_logpdf over the three matrices.
double prior_logdensity_linear(const Matrix& M, const Matrix& C, const Matrix& W,
                               const LinearPrior& prior);

/// Log prior of (model weights, c1, c2, z), identity covariances.
double prior_logdensity_box(const ModelBelief& model, const Vector& c1, const Vector& c2,
                            const Vector& z, const BoxPrior& prior);

/// Draws a "true" linear attacker near the prior mode. C and W are sampled in
/// square-root space so they are PD by construction.
LinearAttacker sample_linear_attacker(const LinearPrior& prior, const SampleConfig& cfg);

/// Draws a "true" box attacker: weights and box jittered, target uniform.
BoxAttacker sample_box_attacker(const BoxPrior& prior, const Box& base_box, const SampleConfig& cfg);

/// The attacker at the prior mode (K₀, C₀, O₀).
LinearAttacker linear_prior_mode(const LinearPrior& prior);
BoxAttacker box_prior_mode(const BoxPrior& prior);

}  // namespace advinfer
