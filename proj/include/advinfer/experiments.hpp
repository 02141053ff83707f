// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "advinfer/data_io.hpp"
#include "advinfer/inference.hpp"

namespace advinfer {

/// splitmix64 finalizer; used to derive independent per-trial seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// ‖α_opt(candidate) − α_opt(truth)‖₂ with both attacks computed by the same
/// solver and canonicalized. x is required for box attackers.
double err(const AttackerParams& candidate, const AttackerParams& truth,
           const std::optional<Vector>& x, const PGDConfig& inner);

/// 100·(err_prior − err_estimate)/err_prior. Throws when err_prior is 0.
double per(double err_prior, double err_estimate);

/// M* with i.i.d. standard normal entries and n standard normal inputs.
std::pair<Matrix, std::vector<Vector>> generate_synthetic_regression(int d, int q, int n,
                                                                     std::uint64_t seed);

/// Isotropic Gaussian blobs: q centers uniform in [0,1]^d, `per_class`
/// points around each with standard deviation `spread`. Stand-in for pen
/// digits when no dataset file is available.
LabeledDataset generate_blobs(int d, int q, int per_class, double spread, std::uint64_t seed);

/// Deterministic shuffle-split; `test_fraction` of the records go to the
/// second dataset.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data,
                                                        double test_fraction, std::uint64_t seed);

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 0.5;
  std::vector<int> hidden_sizes;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

/// Full-batch gradient descent on the mean cross-entropy of softmax(M·x).
LogisticModel train_logistic(const LabeledDataset& data, const TrainConfig& cfg,
                             TrainReport* report = nullptr);

/// Same for an MLP with the given hidden sizes; the output layer is linear.
/// With no hidden layers this is train_logistic wrapped as a one-layer MLP.
MLPModel train_mlp(const LabeledDataset& data, const TrainConfig& cfg,
                   TrainReport* report = nullptr);

double accuracy(const ModelBelief& model, const LabeledDataset& data);
double mean_cross_entropy(const ModelBelief& model, const LabeledDataset& data);

/// Called once per finished trial: (completed count, total, record).
using TrialProgress = std::function<void(int, int, const TrialRecord&)>;

/// Defender model and held-out points shared by every box trial.
struct BoxSetup {
  ModelBelief model_star;
  LabeledDataset test;
  TrainReport train_report;
};

BoxSetup prepare_box_setup(const ExperimentConfig& cfg);

/// Runs cfg.trials seeded trials on `threads` workers (0 = hardware
/// concurrency). Results do not depend on the thread count.
TrialSummary run_trials(const ExperimentConfig& cfg, int threads = 1,
                        const TrialProgress& progress = {});

/// One trial; exposed for tests.
TrialRecord run_linear_trial(const ExperimentConfig& cfg, const LinearPrior& prior, int trial_id);
TrialRecord run_box_trial(const ExperimentConfig& cfg, const BoxSetup& setup, int trial_id);

}  // namespace advinfer
