// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scalar-generic dense network kernels. Instantiated with double for plain
// evaluation and with ad::Var when the inner attack has to be differentiated
// end to end (unrolled PGD).

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "advinfer/attackers.hpp"
#include "advinfer/autodiff.hpp"

namespace advinfer::detail {

template <class T>
struct DenseLayer {
  Index rows = 0;
  Index cols = 0;
  std::vector<T> w;  // row-major rows×cols
  Activation act = Activation::kIdentity;
};

template <class T>
using Network = std::vector<DenseLayer<T>>;

Network<double> to_network(const ModelBelief& model);

/// Rebuilds a model of the same family as `like` from network weights.
ModelBelief model_from_network(const Network<double>& net, const ModelBelief& like);

/// Number of scalar weights in the network.
std::size_t weight_count(const Network<double>& net);

template <class T>
T activate(Activation act, const T& v) {
  using std::tanh;
  switch (act) {
    case Activation::kRelu:
      return value_of(v) > 0.0 ? v : T(0.0);
    case Activation::kTanh:
      return tanh(v);
    case Activation::kIdentity:
      break;
  }
  return v;
}

/// Scratch buffers reused across calls of target_log_prob.
template <class T>
struct NetworkScratch {
  std::vector<std::vector<T>> pre;
  std::vector<std::vector<T>> post;
  std::vector<T> delta;
  std::vector<T> next;
};

/// Log-probability of `target` at input u; when `grad_u` is non-null it also
/// receives ∂ log p_target / ∂u, computed by an explicit backward pass written
/// in T arithmetic (so it can itself be differentiated when T = ad::Var).
template <class T>
T target_log_prob(const Network<T>& net, std::span<const T> u, int target,
                  NetworkScratch<T>& s, std::vector<T>* grad_u) {
  using std::exp;
  using std::log;
  const std::size_t layers = net.size();
  s.pre.resize(layers);
  s.post.resize(layers + 1);
  s.post[0].assign(u.begin(), u.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseLayer<T>& layer = net[l];
    auto& pre = s.pre[l];
    auto& out = s.post[l + 1];
    pre.resize(static_cast<std::size_t>(layer.rows));
    out.resize(static_cast<std::size_t>(layer.rows));
    for (Index i = 0; i < layer.rows; ++i) {
      pre[static_cast<std::size_t>(i)] = dot(layer.w.data() + i * layer.cols, 1, s.post[l].data(), 1,
                                             static_cast<std::size_t>(layer.cols));
      out[static_cast<std::size_t>(i)] = activate(layer.act, pre[static_cast<std::size_t>(i)]);
    }
  }
  const std::vector<T>& logit = s.post[layers];
  const std::size_t q = logit.size();
  double shift = value_of(logit[0]);
  for (const T& v : logit) shift = std::max(shift, value_of(v));
  std::vector<T> e(q);
  for (std::size_t i = 0; i < q; ++i) e[i] = exp(logit[i] - T(shift));
  const T total = sum(std::span<const T>(e));
  const T log_prob = logit[static_cast<std::size_t>(target)] - (log(total) + T(shift));
  if (grad_u == nullptr) return log_prob;

  // ∂ log p_t / ∂ logits = e_t − p.
  s.delta.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    const T p = e[i] / total;
    s.delta[i] = (i == static_cast<std::size_t>(target) ? T(1.0) : T(0.0)) - p;
  }
  for (std::size_t l = layers; l-- > 0;) {
    const DenseLayer<T>& layer = net[l];
    for (Index i = 0; i < layer.rows; ++i) {
      T& d = s.delta[static_cast<std::size_t>(i)];
      switch (layer.act) {
        case Activation::kRelu:
          if (!(value_of(s.pre[l][static_cast<std::size_t>(i)]) > 0.0)) d = T(0.0);
          break;
        case Activation::kTanh: {
          const T& h = s.post[l + 1][static_cast<std::size_t>(i)];
          d = d * (T(1.0) - h * h);
          break;
        }
        case Activation::kIdentity:
          break;
      }
    }
    s.next.resize(static_cast<std::size_t>(layer.cols));
    for (Index j = 0; j < layer.cols; ++j) {
      s.next[static_cast<std::size_t>(j)] =
          dot(layer.w.data() + j, layer.cols, s.delta.data(), 1, static_cast<std::size_t>(layer.rows));
    }
    s.delta.swap(s.next);
  }
  grad_u->assign(s.delta.begin(), s.delta.end());
  return log_prob;
}

/// Starting point of PGD inside [lo, hi].
template <class T>
std::vector<T> pgd_start(std::span<const T> lo, std::span<const T> hi, const PGDConfig& cfg) {
  const std::size_t n = lo.size();
  std::vector<T> alpha(n);
  switch (cfg.init) {
    case PgdInit::kZero:
      for (std::size_t i = 0; i < n; ++i) alpha[i] = clamp_select(T(0.0), lo[i], hi[i]);
      break;
    case PgdInit::kMidpoint:
      for (std::size_t i = 0; i < n; ++i) alpha[i] = T(0.5) * (lo[i] + hi[i]);
      break;
    case PgdInit::kRandom: {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t i = 0; i < n; ++i) alpha[i] = lo[i] + T(unit(rng)) * (hi[i] - lo[i]);
      break;
    }
  }
  return alpha;
}

/// Fixed-step PGD, the computation that gets unrolled for differentiation.
template <class T>
std::vector<T> pgd_fixed_step(const Network<T>& net, const Vector& x, std::span<const T> lo,
                              std::span<const T> hi, int target, const PGDConfig& cfg) {
  const std::size_t n = lo.size();
  std::vector<T> alpha = pgd_start(lo, hi, cfg);
  std::vector<T> u(n);
  std::vector<T> grad;
  NetworkScratch<T> scratch;
  const T step(cfg.step_size);
  for (int k = 0; k < cfg.steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) u[i] = T(x(static_cast<Index>(i))) + alpha[i];
    target_log_prob(net, std::span<const T>(u), target, scratch, &grad);
    for (std::size_t i = 0; i < n; ++i) {
      alpha[i] = clamp_select(alpha[i] + step * grad[i], lo[i], hi[i]);
    }
  }
  return alpha;
}

/// PGD with step acceptance: a step is taken only if the objective does not
/// decrease. Rejection halves the step, acceptance doubles it (capped at
/// kMaxStepGrowth·step_size). With T = ad::Var the accepted path is what gets
/// differentiated; the accept/reject decisions are treated as constants.
inline constexpr double kMaxStepGrowth = 1024.0;

template <class T>
std::vector<T> pgd_backtracking(const Network<T>& net, const Vector& x, std::span<const T> lo,
                                std::span<const T> hi, int target, const PGDConfig& cfg) {
  const std::size_t n = lo.size();
  NetworkScratch<T> scratch;
  std::vector<T> alpha = pgd_start(lo, hi, cfg);
  std::vector<T> u(n);
  std::vector<T> grad;
  std::vector<T> cand_grad;
  std::vector<T> cand(n);

  auto evaluate = [&](const std::vector<T>& a, std::vector<T>* g) {
    for (std::size_t i = 0; i < n; ++i) u[i] = T(x(static_cast<Index>(i))) + a[i];
    return target_log_prob(net, std::span<const T>(u), target, scratch, g);
  };

  T value = evaluate(alpha, &grad);
  double step = cfg.step_size;
  const double max_step = kMaxStepGrowth * cfg.step_size;
  for (int k = 0; k < cfg.steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) cand[i] = clamp_select(alpha[i] + T(step) * grad[i], lo[i], hi[i]);
    T cand_value = evaluate(cand, &cand_grad);
    if (value_of(cand_value) >= value_of(value)) {
      alpha.swap(cand);
      grad.swap(cand_grad);
      value = cand_value;
      step = std::min(2.0 * step, max_step);
    } else {
      step *= 0.5;
    }
  }
  return alpha;
}

}  // namespace advinfer::detail
