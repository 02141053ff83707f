// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "advinfer/error.hpp"

namespace advinfer {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamTrial = 2;
constexpr std::uint64_t kStreamData = 3;
constexpr std::uint64_t kStreamTrain = 4;

// err_prior at or below this (relative to ‖α_truth‖) counts as an exact prior.
constexpr double kDegenerateErr = 1e-12;

}  // namespace

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return mix_seed(mix_seed(mix_seed(master) ^ stream) + index);
}

// ---------------------------------------------------------------------------
// Err / PER

namespace {

Vector attack_of(const AttackerParams& a, const std::optional<Vector>& x, const PGDConfig& inner) {
  if (const auto* lin = std::get_if<LinearAttacker>(&a)) return optimal_attack_linear(*lin);
  if (!x) fail(ErrorCode::kInvalidArgument, "err: box attackers need a test point x");
  return optimal_attack_box(std::get<BoxAttacker>(a), *x, inner);
}

}  // namespace

double err(const AttackerParams& candidate, const AttackerParams& truth,
           const std::optional<Vector>& x, const PGDConfig& inner) {
  if (candidate.index() != truth.index()) {
    fail(ErrorCode::kInvalidArgument, "err: candidate and truth use different parameterizations");
  }
  Vector a = attack_of(candidate, x, inner);
  Vector b = attack_of(truth, x, inner);
  if (a.size() != b.size()) fail(ErrorCode::kDimensionMismatch, "err: attack dimensions differ");
  apply_canonical_sign(a);
  apply_canonical_sign(b);
  return (a - b).norm();
}

double per(double err_prior, double err_estimate) {
  if (!std::isfinite(err_prior) || !std::isfinite(err_estimate) || err_estimate < 0.0 ||
      err_prior < 0.0) {
    fail(ErrorCode::kInvalidArgument, "per: errors must be finite and non-negative");
  }
  if (err_prior == 0.0) fail(ErrorCode::kDegenerate, "prior already exact");
  return 100.0 * (err_prior - err_estimate) / err_prior;
}

// ---------------------------------------------------------------------------
// Data

std::pair<Matrix, std::vector<Vector>> generate_synthetic_regression(int d, int q, int n,
                                                                     std::uint64_t seed) {
  if (d < 1 || q < 1 || n < 1) {
    fail(ErrorCode::kInvalidArgument, "generate_synthetic_regression: d, q, n must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(q, d);
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = normal(rng);
  }
  std::vector<Vector> xs(static_cast<std::size_t>(n), Vector(d));
  for (auto& x : xs) {
    for (Index j = 0; j < d; ++j) x(j) = normal(rng);
  }
  return {std::move(m), std::move(xs)};
}

LabeledDataset generate_blobs(int d, int q, int per_class, double spread, std::uint64_t seed) {
  if (d < 1 || q < 2 || per_class < 1 || !(spread > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "generate_blobs: bad arguments");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> centers(static_cast<std::size_t>(q), Vector(d));
  for (auto& c : centers) {
    for (Index j = 0; j < d; ++j) c(j) = unit(rng);
  }
  LabeledDataset ds;
  ds.d = d;
  ds.q = q;
  for (int i = 0; i < per_class; ++i) {
    for (int k = 0; k < q; ++k) {
      Vector x = centers[static_cast<std::size_t>(k)];
      for (Index j = 0; j < d; ++j) x(j) += spread * normal(rng);
      ds.features.push_back(std::move(x));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data,
                                                        double test_fraction, std::uint64_t seed) {
  data.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "split_dataset: test_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size()))));
  if (n_test >= data.size()) fail(ErrorCode::kInvalidArgument, "split_dataset: too few records");
  LabeledDataset train, test;
  train.d = test.d = data.d;
  train.q = test.q = data.q;
  for (std::size_t i = 0; i < order.size(); ++i) {
    LabeledDataset& dst = i < n_test ? test : train;
    dst.features.push_back(data.features[order[i]]);
    dst.labels.push_back(data.labels[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "TrainConfig: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kInvalidArgument, "TrainConfig: learning_rate must be positive");
  }
  for (int h : hidden_sizes) {
    if (h < 1) fail(ErrorCode::kInvalidArgument, "TrainConfig: hidden sizes must be >= 1");
  }
}

namespace {

struct BatchNet {
  std::vector<Matrix> w;
  std::vector<Activation> act;
};

Matrix apply_act(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kTanh: return z.array().tanh().matrix();
  }
  return z;
}

Matrix act_derivative(const Matrix& z, const Matrix& h, Activation a) {
  switch (a) {
    case Activation::kIdentity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::kRelu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - h.array().square()).matrix();
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Matrix column_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).maxCoeff();
    p.col(j) = (z.col(j).array() - m).exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

struct Batch {
  Matrix x;       // d×n
  Matrix onehot;  // q×n
};

Batch make_batch(const LabeledDataset& data) {
  data.validate();
  Batch b{Matrix(data.d, static_cast<Index>(data.size())),
          Matrix::Zero(data.q, static_cast<Index>(data.size()))};
  for (std::size_t i = 0; i < data.size(); ++i) {
    require_finite(data.features[i], "training features");
    b.x.col(static_cast<Index>(i)) = data.features[i];
    b.onehot(data.labels[i], static_cast<Index>(i)) = 1.0;
  }
  return b;
}

/// Mean cross-entropy; fills grads when given.
double loss_and_grad(const BatchNet& net, const Batch& b, std::vector<Matrix>* grads) {
  const std::size_t L = net.w.size();
  std::vector<Matrix> zs(L), hs(L + 1);
  hs[0] = b.x;
  for (std::size_t l = 0; l < L; ++l) {
    zs[l] = net.w[l] * hs[l];
    hs[l + 1] = apply_act(zs[l], net.act[l]);
  }
  const Matrix& logits = hs[L];
  const double n = static_cast<double>(b.x.cols());
  double loss = 0.0;
  for (Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    loss += lse - logits.col(j).dot(b.onehot.col(j));
  }
  loss /= n;
  if (grads == nullptr) return loss;
  grads->assign(L, Matrix());
  Matrix delta = (column_softmax(logits) - b.onehot) / n;  // dloss/dh_L
  for (std::size_t l = L; l-- > 0;) {
    delta = delta.cwiseProduct(act_derivative(zs[l], hs[l + 1], net.act[l]));
    (*grads)[l] = delta * hs[l].transpose();
    if (l > 0) delta = net.w[l].transpose() * delta;
  }
  return loss;
}

BatchNet train_network(const LabeledDataset& data, const TrainConfig& cfg, TrainReport* report) {
  cfg.validate();
  const Batch batch = make_batch(data);
  BatchNet net;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Index fan_in = data.d;
  std::vector<int> sizes = cfg.hidden_sizes;
  sizes.push_back(static_cast<int>(data.q));
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    const bool last = l + 1 == sizes.size();
    // He-style scaling for hidden layers, small weights for the output layer.
    const double sd = last ? 0.01 : std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(sizes[l], fan_in);
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = sd * normal(rng);
    }
    net.w.push_back(std::move(w));
    net.act.push_back(last ? Activation::kIdentity : cfg.activation);
    fan_in = sizes[l];
  }
  std::vector<Matrix> grads;
  const double initial = loss_and_grad(net, batch, nullptr);
  for (int e = 0; e < cfg.epochs; ++e) {
    loss_and_grad(net, batch, &grads);
    for (std::size_t l = 0; l < net.w.size(); ++l) net.w[l] -= cfg.learning_rate * grads[l];
  }
  if (report != nullptr) {
    report->initial_loss = initial;
    report->final_loss = loss_and_grad(net, batch, nullptr);
  }
  return net;
}

}  // namespace

LogisticModel train_logistic(const LabeledDataset& data, const TrainConfig& cfg,
                             TrainReport* report) {
  TrainConfig flat = cfg;
  flat.hidden_sizes.clear();
  BatchNet net = train_network(data, flat, report);
  LogisticModel model{std::move(net.w[0])};
  if (report != nullptr) report->train_accuracy = accuracy(model, data);
  return model;
}

MLPModel train_mlp(const LabeledDataset& data, const TrainConfig& cfg, TrainReport* report) {
  BatchNet net = train_network(data, cfg, report);
  MLPModel model{std::move(net.w), std::move(net.act)};
  if (report != nullptr) report->train_accuracy = accuracy(model, data);
  return model;
}

double accuracy(const ModelBelief& model, const LabeledDataset& data) {
  data.validate();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict_class(model, data.features[i]) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double mean_cross_entropy(const ModelBelief& model, const LabeledDataset& data) {
  data.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total -= std::log(class_probabilities(model, data.features[i])(data.labels[i]));
  }
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Trials

namespace {

TrialRecord make_record(int trial_id, std::uint64_t seed, double err_prior, double err_estimate,
                        double scale) {
  TrialRecord r;
  r.trial_id = trial_id;
  r.seed = seed;
  r.err_prior = err_prior;
  r.err_estimate = err_estimate;
  if (err_prior > kDegenerateErr * std::max(1.0, scale)) r.per = per(err_prior, err_estimate);
  return r;
}

}  // namespace

TrialRecord run_linear_trial(const ExperimentConfig& cfg, const LinearPrior& prior, int trial_id) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, kStreamTrial, static_cast<std::uint64_t>(trial_id));
  const LinearAttacker truth = sample_linear_attacker(prior, SampleConfig{cfg.sample_scale, seed});
  const Vector alpha_obs = optimal_attack_linear(truth);
  InferenceConfig icfg = cfg.inference();
  icfg.seed = seed;
  const InferenceResult res = infer_linear(alpha_obs, prior, icfg);
  const PGDConfig inner = cfg.inner();
  const double e0 = err(linear_prior_mode(prior), truth, std::nullopt, inner);
  const double e1 = err(res.estimate, truth, std::nullopt, inner);
  return make_record(trial_id, seed, e0, e1, alpha_obs.norm());
}

BoxSetup prepare_box_setup(const ExperimentConfig& cfg) {
  LabeledDataset all;
  if (!cfg.dataset_path.empty()) {
    all = load_pendigits(cfg.dataset_path, cfg.normalize_features);
  } else {
    all = generate_blobs(16, 10, 200, 0.15, derive_seed(cfg.master_seed, kStreamData, 0));
  }
  auto [train, test] = split_dataset(all, 0.25, derive_seed(cfg.master_seed, kStreamData, 1));
  TrainConfig tcfg;
  tcfg.epochs = cfg.train_epochs;
  tcfg.learning_rate = cfg.train_lr;
  tcfg.activation = cfg.activation;
  tcfg.seed = derive_seed(cfg.master_seed, kStreamTrain, 0);
  BoxSetup setup;
  if (cfg.parameterization == Parameterization::kLogistic) {
    setup.model_star = train_logistic(train, tcfg, &setup.train_report);
  } else {
    tcfg.hidden_sizes = cfg.hidden_sizes;
    setup.model_star = train_mlp(train, tcfg, &setup.train_report);
  }
  setup.test = std::move(test);
  return setup;
}

TrialRecord run_box_trial(const ExperimentConfig& cfg, const BoxSetup& setup, int trial_id) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, kStreamTrial, static_cast<std::uint64_t>(trial_id));
  const auto pick = static_cast<std::size_t>(mix_seed(seed) % setup.test.size());
  const Vector& x = setup.test.features[pick];
  const Index d = x.size();

  const Box base{Vector::Constant(d, -cfg.box_halfwidth), Vector::Constant(d, cfg.box_halfwidth)};
  BoxPrior sampling_prior{setup.model_star, base.lower, base.upper,
                          Vector::Zero(class_count(setup.model_star))};
  const BoxAttacker truth = sample_box_attacker(sampling_prior, base, SampleConfig{cfg.sample_scale, seed});
  const PGDConfig inner = cfg.inner();
  const Vector alpha_obs = optimal_attack_box(truth, x, inner);

  const BoxPrior prior = build_box_prior(alpha_obs, setup.model_star, x);
  InferenceConfig icfg = cfg.inference();
  icfg.seed = seed;
  const InferenceResult res = infer_box(alpha_obs, x, prior, icfg);
  const double e0 = err(box_prior_mode(prior), truth, x, inner);
  const double e1 = err(res.estimate, truth, x, inner);
  return make_record(trial_id, seed, e0, e1, alpha_obs.norm());
}

TrialSummary run_trials(const ExperimentConfig& cfg, int threads, const TrialProgress& progress) {
  cfg.validate();
  const int n = cfg.trials;
  std::vector<TrialRecord> records(static_cast<std::size_t>(n));

  std::function<TrialRecord(int)> one;
  LinearPrior linear_prior;
  BoxSetup box_setup;
  if (cfg.parameterization == Parameterization::kLinear) {
    const Matrix m_star = generate_synthetic_regression(
        cfg.d, cfg.q, 1, derive_seed(cfg.master_seed, kStreamModel, 0)).first;
    linear_prior = make_linear_prior(m_star);
    one = [&](int t) { return run_linear_trial(cfg, linear_prior, t); };
  } else {
    box_setup = prepare_box_setup(cfg);
    one = [&](int t) { return run_box_trial(cfg, box_setup, t); };
  }

  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(1, n));

  std::atomic<int> next{0};
  std::mutex mu;
  int done = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= n) return;
      try {
        TrialRecord r = one(t);
        std::lock_guard<std::mutex> lock(mu);
        records[static_cast<std::size_t>(t)] = r;
        ++done;
        if (progress) progress(done, n, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return TrialSummary::from_records(std::move(records));
}

}  // namespace advinfer
