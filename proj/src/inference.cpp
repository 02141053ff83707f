// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "advinfer/autodiff.hpp"
#include "advinfer/detail/network.hpp"
#include "advinfer/error.hpp"

namespace advinfer {

std::string_view to_string(GradMode m) {
  return m == GradMode::kFiniteDiff ? "finite_diff" : "unrolled";
}

GradMode grad_mode_from_string(std::string_view s) {
  if (s == "finite_diff") return GradMode::kFiniteDiff;
  if (s == "unrolled") return GradMode::kUnrolled;
  fail(ErrorCode::kParse, "unknown grad_mode '" + std::string(s) + "'");
}

std::string_view to_string(OuterOptimizer o) { return o == OuterOptimizer::kAdam ? "adam" : "gd"; }

OuterOptimizer optimizer_from_string(std::string_view s) {
  if (s == "adam") return OuterOptimizer::kAdam;
  if (s == "gd") return OuterOptimizer::kGd;
  fail(ErrorCode::kParse, "unknown optimizer '" + std::string(s) + "'");
}

std::string_view to_string(TargetMode m) {
  return m == TargetMode::kArgmax ? "argmax" : "exhaustive";
}

TargetMode target_mode_from_string(std::string_view s) {
  if (s == "argmax") return TargetMode::kArgmax;
  if (s == "exhaustive") return TargetMode::kExhaustive;
  fail(ErrorCode::kParse, "unknown target_mode '" + std::string(s) + "'");
}

void InferenceConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::kInvalidArgument, "InferenceConfig: lambda must be >= 0");
  }
  if (!(learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "InferenceConfig: learning_rate must be > 0");
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "InferenceConfig: epochs must be >= 1");
  if (!(fd_step > 0.0)) fail(ErrorCode::kInvalidArgument, "InferenceConfig: fd_step must be > 0");
  inner.validate();
}

namespace {

// ---------------------------------------------------------------------------
// Outer optimization loop shared by both defenders.

using Objective = std::function<double(const std::vector<double>&, std::vector<double>*)>;
using Projection = std::function<void(std::vector<double>&)>;

struct OuterRun {
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  double initial_value = 0.0;
  std::vector<double> trace;
  bool converged = false;
};

bool converged_trace(const std::vector<double>& trace) {
  constexpr std::size_t kWindow = 50;
  if (trace.size() <= kWindow) return false;
  return std::abs(trace.back() - trace[trace.size() - 1 - kWindow]) < 1e-10;
}

OuterRun run_outer(std::vector<double> theta, const Objective& objective, const Projection& project,
                   const InferenceConfig& cfg) {
  const std::size_t n = theta.size();
  OuterRun run;
  run.trace.reserve(static_cast<std::size_t>(cfg.epochs));
  std::vector<double> grad(n, 0.0);
  std::vector<double> m(n, 0.0);
  std::vector<double> v(n, 0.0);
  std::vector<double> cand(n);
  double b1t = 1.0;
  double b2t = 1.0;

  auto note = [&](const std::vector<double>& at, double value) {
    if (value < run.best_value) {
      run.best_value = value;
      run.best = at;
    }
  };

  double value = objective(theta, &grad);
  run.initial_value = value;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    run.trace.push_back(value);
    note(theta, value);
    if (!std::isfinite(value)) break;
    if (cfg.optimizer == OuterOptimizer::kAdam) {
      b1t *= cfg.adam_beta1;
      b2t *= cfg.adam_beta2;
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / (1.0 - b1t);
        const double v_hat = v[i] / (1.0 - b2t);
        theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
      }
      project(theta);
      value = objective(theta, &grad);
    } else {
      // Gradient descent with backtracking: never accept an increase.
      double step = cfg.learning_rate;
      bool accepted = false;
      for (int attempt = 0; attempt < 40 && !accepted; ++attempt, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) cand[i] = theta[i] - step * grad[i];
        project(cand);
        const double cand_value = objective(cand, nullptr);
        if (cand_value <= value) {
          theta.swap(cand);
          value = objective(theta, &grad);
          accepted = true;
        }
      }
    }
  }
  note(theta, value);
  run.converged = converged_trace(run.trace);
  return run;
}

// ---------------------------------------------------------------------------
// Linear objective pieces

struct LinearState {
  Matrix C, W, H;  // products and G⁻¹
  double c = 0.0;
};

LinearState linear_state(const Matrix& G, const Matrix& V, const Vector& alpha_obs) {
  LinearState st;
  st.C = G.transpose() * G;
  st.C.diagonal().array() += kPdRidge;
  st.W = V.transpose() * V;
  st.W.diagonal().array() += kPdRidge;
  st.H = G.partialPivLu().inverse();
  st.c = std::sqrt(std::max(0.0, alpha_obs.dot(st.C * alpha_obs)));
  return st;
}

void check_linear_shapes(const Matrix& M, const Matrix& G, const Matrix& V, const Vector& alpha_obs,
                         const LinearPrior& prior) {
  const Index q = prior.output_dim();
  const Index d = prior.input_dim();
  if (M.rows() != q || M.cols() != d || G.rows() != d || G.cols() != d || V.rows() != q ||
      V.cols() != q || alpha_obs.size() != d) {
    fail(ErrorCode::kDimensionMismatch, "outer_objective_linear: inconsistent shapes");
  }
}

double linear_prior_term(const Matrix& M, const LinearState& st, const LinearPrior& prior) {
  return (M - prior.muM).squaredNorm() + (st.C - prior.muC).squaredNorm() +
         (st.W - prior.muW).squaredNorm();
}

}  // namespace

double outer_objective_linear(const Matrix& M, const Matrix& G, const Matrix& V,
                              const Vector& alpha_obs, const LinearPrior& prior, double lambda) {
  check_linear_shapes(M, G, V, alpha_obs, prior);
  const LinearState st = linear_state(G, V, alpha_obs);
  const SpectralTop top = top_right_singular(V * M * st.H);
  const Vector direction = st.c * (st.H * top.s1);
  const double residual =
      std::min((alpha_obs - direction).squaredNorm(), (alpha_obs + direction).squaredNorm());
  return lambda * linear_prior_term(M, st, prior) + residual;
}

LinearObjective outer_objective_linear_with_gradient(const Matrix& M, const Matrix& G,
                                                     const Matrix& V, const Vector& alpha_obs,
                                                     const LinearPrior& prior, double lambda) {
  check_linear_shapes(M, G, V, alpha_obs, prior);
  const Index d = G.rows();
  const LinearState st = linear_state(G, V, alpha_obs);
  const Matrix MH = M * st.H;
  const Matrix VM = V * M;
  const Matrix A = V * MH;

  // Top eigenpair of B = AᵀA gives s₁; the remaining eigenpairs give the
  // derivative of s₁ through the reduced resolvent (μ₁I − B)⁺.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A.transpose() * A);
  const Vector& mu = eig.eigenvalues();
  const Matrix& U = eig.eigenvectors();
  const Vector v1 = U.col(d - 1);

  const Vector Hv = st.H * v1;
  const Vector r_plus = alpha_obs - st.c * Hv;
  const Vector r_minus = alpha_obs + st.c * Hv;
  const bool use_plus = r_plus.squaredNorm() <= r_minus.squaredNorm();
  const double sign = use_plus ? 1.0 : -1.0;
  const Vector s = sign * v1;
  const Vector r = use_plus ? r_plus : r_minus;

  LinearObjective out;
  out.value = lambda * linear_prior_term(M, st, prior) + r.squaredNorm();

  // Reverse pass. β = c·H·s, residual = ‖α − β‖².
  const Vector beta_bar = -2.0 * r;
  const double c_bar = beta_bar.dot(st.H * s);
  Matrix H_bar = st.c * beta_bar * s.transpose();
  const Vector s_bar = st.c * (st.H.transpose() * beta_bar);
  const Vector v1_bar = sign * s_bar;

  Vector w = Vector::Zero(d);
  for (Index j = 0; j + 1 < d; ++j) {
    const double denom = std::max(mu(d - 1) - mu(j), 1e-12);
    w += (U.col(j).dot(v1_bar) / denom) * U.col(j);
  }
  const Matrix B_bar = w * v1.transpose();
  const Matrix A_bar = A * (B_bar + B_bar.transpose());

  out.grad_V = A_bar * MH.transpose();
  out.grad_M = V.transpose() * A_bar * st.H.transpose();
  H_bar += VM.transpose() * A_bar;
  out.grad_G = -st.H.transpose() * H_bar * st.H.transpose();

  Matrix C_bar = 2.0 * lambda * (st.C - prior.muC);
  if (st.c > 0.0) C_bar += (c_bar / (2.0 * st.c)) * alpha_obs * alpha_obs.transpose();
  out.grad_G += G * (C_bar + C_bar.transpose());
  const Matrix W_bar = 2.0 * lambda * (st.W - prior.muW);
  out.grad_V += V * (W_bar + W_bar.transpose());
  out.grad_M += 2.0 * lambda * (M - prior.muM);
  return out;
}

InferenceResult infer_linear(const Vector& alpha_obs, const LinearPrior& prior,
                             const InferenceConfig& cfg) {
  cfg.validate();
  require_finite(alpha_obs, "infer_linear alpha_obs");
  if (alpha_obs.size() != prior.input_dim()) {
    fail(ErrorCode::kDimensionMismatch, "infer_linear: alpha_obs dimension does not match prior");
  }
  if (alpha_obs.squaredNorm() == 0.0) fail(ErrorCode::kDegenerate, "degenerate observation");

  const Index q = prior.output_dim();
  const Index d = prior.input_dim();
  const Index nM = q * d;
  const Index nG = d * d;
  const Index nV = q * q;

  auto pack = [&](const Matrix& M, const Matrix& G, const Matrix& V) {
    std::vector<double> theta(static_cast<std::size_t>(nM + nG + nV));
    Eigen::Map<Matrix>(theta.data(), q, d) = M;
    Eigen::Map<Matrix>(theta.data() + nM, d, d) = G;
    Eigen::Map<Matrix>(theta.data() + nM + nG, q, q) = V;
    return theta;
  };
  auto unpack = [&](const std::vector<double>& theta) {
    return std::tuple<Matrix, Matrix, Matrix>{
        Eigen::Map<const Matrix>(theta.data(), q, d),
        Eigen::Map<const Matrix>(theta.data() + nM, d, d),
        Eigen::Map<const Matrix>(theta.data() + nM + nG, q, q)};
  };

  const Matrix G0 = PDMatrix::from_product(prior.muC).root();
  const Matrix V0 = PDMatrix::from_product(prior.muW).root();

  Objective objective = [&](const std::vector<double>& theta, std::vector<double>* grad) {
    auto [M, G, V] = unpack(theta);
    if (grad == nullptr) return outer_objective_linear(M, G, V, alpha_obs, prior, cfg.lambda);
    const LinearObjective lo = outer_objective_linear_with_gradient(M, G, V, alpha_obs, prior, cfg.lambda);
    *grad = pack(lo.grad_M, lo.grad_G, lo.grad_V);
    return lo.value;
  };
  const OuterRun run = run_outer(pack(prior.muM, G0, V0), objective, [](std::vector<double>&) {}, cfg);

  auto [M, G, V] = unpack(run.best);
  const PDMatrix C = pd_from_factor(G);
  LinearAttacker estimate{M, C, mahalanobis_norm(alpha_obs, C), pd_from_factor(V)};
  Vector alpha_opt = optimal_attack_linear(estimate);
  InferenceResult result{std::move(estimate), run.trace, std::move(alpha_opt), run.converged,
                         run.initial_value, run.best_value, Vector()};
  return result;
}

// ---------------------------------------------------------------------------
// Box defender

std::vector<double> flatten(const BoxParams& p) {
  std::vector<double> theta;
  for (const auto& layer : detail::to_network(p.model)) {
    theta.insert(theta.end(), layer.w.begin(), layer.w.end());
  }
  theta.insert(theta.end(), p.c1.data(), p.c1.data() + p.c1.size());
  theta.insert(theta.end(), p.c2.data(), p.c2.data() + p.c2.size());
  theta.insert(theta.end(), p.z.data(), p.z.data() + p.z.size());
  return theta;
}

BoxParams unflatten(std::span<const double> theta, const BoxParams& like) {
  auto net = detail::to_network(like.model);
  const std::size_t expected = detail::weight_count(net) +
                               static_cast<std::size_t>(like.c1.size() + like.c2.size() + like.z.size());
  if (theta.size() != expected) {
    fail(ErrorCode::kDimensionMismatch, "unflatten: parameter vector has wrong length");
  }
  std::size_t k = 0;
  for (auto& layer : net) {
    for (double& w : layer.w) w = theta[k++];
  }
  BoxParams out;
  out.model = detail::model_from_network(net, like.model);
  auto take = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = theta[k++];
    return v;
  };
  out.c1 = take(like.c1.size());
  out.c2 = take(like.c2.size());
  out.z = take(like.z.size());
  return out;
}

namespace {

int argmax_of(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

void check_box_shapes(const BoxParams& p, const Vector& alpha_obs, const Vector& x,
                      const BoxPrior& prior) {
  validate_model(p.model);
  const Index d = input_dim(p.model);
  const Index q = class_count(p.model);
  if (alpha_obs.size() != d || x.size() != d || p.c1.size() != d || p.c2.size() != d ||
      p.z.size() != q || prior.muC1.size() != d || prior.muC2.size() != d ||
      prior.muZ.size() != q) {
    fail(ErrorCode::kDimensionMismatch, "outer_objective_box: inconsistent shapes");
  }
}

/// Squared deviation from the prior mean and its gradient, flatten() layout.
double box_prior_term(const std::vector<double>& theta, const std::vector<double>& mu,
                      std::vector<double>* grad) {
  double sq = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double dev = theta[i] - mu[i];
    sq += dev * dev;
    if (grad != nullptr) (*grad)[i] = 2.0 * dev;
  }
  return sq;
}

BoxParams prior_params(const BoxPrior& prior) {
  return BoxParams{prior.muModel, prior.muC1, prior.muC2, prior.muZ};
}

}  // namespace

double outer_objective_box(const BoxParams& params, const Vector& alpha_obs, const Vector& x,
                           const BoxPrior& prior, double lambda, const PGDConfig& inner,
                           std::optional<int> target) {
  check_box_shapes(params, alpha_obs, x, prior);
  const std::vector<double> theta = flatten(params);
  const std::vector<double> mu = flatten(prior_params(prior));
  const double prior_sq = box_prior_term(theta, mu, nullptr);

  BoxAttacker attacker{params.model, params.c1.cwiseMin(params.c2), params.c1.cwiseMax(params.c2),
                       target.value_or(argmax_of(params.z))};
  const Vector alpha_opt = optimal_attack_box(attacker, x, inner);
  return lambda * prior_sq + (alpha_obs - alpha_opt).squaredNorm();
}

BoxObjective outer_objective_box_unrolled(const BoxParams& params, const Vector& alpha_obs,
                                          const Vector& x, const BoxPrior& prior, double lambda,
                                          const PGDConfig& inner, std::optional<int> target) {
  check_box_shapes(params, alpha_obs, x, prior);
  inner.validate();
  const std::vector<double> theta = flatten(params);
  const std::vector<double> mu = flatten(prior_params(prior));
  BoxObjective out;
  out.gradient.assign(theta.size(), 0.0);
  const double prior_sq = box_prior_term(theta, mu, &out.gradient);
  for (double& g : out.gradient) g *= lambda;
  out.target = target.value_or(argmax_of(params.z));

  thread_local ad::Tape tape;
  tape.clear();
  ad::ActiveTape scope(tape);

  // Leaves are created first, so leaf k has tape index k.
  const auto net_d = detail::to_network(params.model);
  detail::Network<ad::Var> net(net_d.size());
  std::size_t k = 0;
  for (std::size_t l = 0; l < net_d.size(); ++l) {
    net[l].rows = net_d[l].rows;
    net[l].cols = net_d[l].cols;
    net[l].act = net_d[l].act;
    net[l].w.reserve(net_d[l].w.size());
    for (std::size_t i = 0; i < net_d[l].w.size(); ++i) net[l].w.push_back(tape.variable(theta[k++]));
  }
  const std::size_t d = static_cast<std::size_t>(params.c1.size());
  std::vector<ad::Var> c1(d);
  std::vector<ad::Var> c2(d);
  for (std::size_t i = 0; i < d; ++i) c1[i] = tape.variable(theta[k++]);
  for (std::size_t i = 0; i < d; ++i) c2[i] = tape.variable(theta[k++]);
  const std::size_t leaves = k;

  std::vector<ad::Var> lo(d);
  std::vector<ad::Var> hi(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = min_select(c1[i], c2[i]);
    hi[i] = max_select(c1[i], c2[i]);
  }
  const std::vector<ad::Var> alpha =
      inner.backtracking ? detail::pgd_backtracking<ad::Var>(net, x, lo, hi, out.target, inner)
                         : detail::pgd_fixed_step<ad::Var>(net, x, lo, hi, out.target, inner);

  std::vector<ad::Var> sq(d);
  out.alpha_opt.resize(static_cast<Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    sq[i] = square(ad::Var(alpha_obs(static_cast<Index>(i))) - alpha[i]);
    out.alpha_opt(static_cast<Index>(i)) = alpha[i].value;
  }
  const ad::Var residual = ad::sum(sq);
  const std::vector<double> adj = tape.gradient(residual);
  for (std::size_t i = 0; i < leaves; ++i) out.gradient[i] += adj[i];
  out.value = lambda * prior_sq + residual.value;
  return out;
}

BoxObjective outer_objective_box_finite_diff(const BoxParams& params, const Vector& alpha_obs,
                                             const Vector& x, const BoxPrior& prior,
                                             double lambda, const PGDConfig& inner, double step,
                                             std::optional<int> target) {
  check_box_shapes(params, alpha_obs, x, prior);
  BoxObjective out;
  out.target = target.value_or(argmax_of(params.z));
  out.value = outer_objective_box(params, alpha_obs, x, prior, lambda, inner, out.target);
  BoxAttacker attacker{params.model, params.c1.cwiseMin(params.c2), params.c1.cwiseMax(params.c2),
                       out.target};
  out.alpha_opt = optimal_attack_box(attacker, x, inner);

  std::vector<double> theta = flatten(params);
  const std::vector<double> mu = flatten(prior_params(prior));
  out.gradient.assign(theta.size(), 0.0);
  const std::size_t z_begin = theta.size() - static_cast<std::size_t>(params.z.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i >= z_begin) {
      // argmax z is held fixed; only the prior term depends on z.
      out.gradient[i] = 2.0 * lambda * (theta[i] - mu[i]);
      continue;
    }
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up =
        outer_objective_box(unflatten(theta, params), alpha_obs, x, prior, lambda, inner, out.target);
    theta[i] = saved - step;
    const double down =
        outer_objective_box(unflatten(theta, params), alpha_obs, x, prior, lambda, inner, out.target);
    theta[i] = saved;
    out.gradient[i] = (up - down) / (2.0 * step);
  }
  return out;
}

namespace {

InferenceResult infer_box_once(const Vector& alpha_obs, const Vector& x, const BoxPrior& prior,
                               const InferenceConfig& cfg, std::optional<int> forced_target) {
  const BoxParams like = prior_params(prior);
  const std::size_t d = static_cast<std::size_t>(prior.muC1.size());
  const std::size_t q = static_cast<std::size_t>(prior.muZ.size());
  const PGDConfig& inner = cfg.inner;

  Objective objective = [&](const std::vector<double>& theta, std::vector<double>* grad) {
    const BoxParams p = unflatten(theta, like);
    if (grad == nullptr) {
      return outer_objective_box(p, alpha_obs, x, prior, cfg.lambda, inner, forced_target);
    }
    BoxObjective bo = cfg.grad_mode == GradMode::kUnrolled
                          ? outer_objective_box_unrolled(p, alpha_obs, x, prior, cfg.lambda, inner,
                                                         forced_target)
                          : outer_objective_box_finite_diff(p, alpha_obs, x, prior, cfg.lambda,
                                                            inner, cfg.fd_step, forced_target);
    *grad = std::move(bo.gradient);
    return bo.value;
  };
  Projection project = [d, q](std::vector<double>& theta) {
    const std::size_t c1 = theta.size() - q - 2 * d;
    const std::size_t c2 = c1 + d;
    for (std::size_t i = 0; i < d; ++i) {
      if (theta[c1 + i] > theta[c2 + i]) std::swap(theta[c1 + i], theta[c2 + i]);
    }
  };

  const OuterRun run = run_outer(flatten(like), objective, project, cfg);
  const BoxParams best = unflatten(run.best, like);
  const int target = forced_target.value_or(argmax_of(best.z));
  BoxAttacker estimate{best.model, best.c1.cwiseMin(best.c2), best.c1.cwiseMax(best.c2), target};
  Vector alpha_opt = optimal_attack_box(estimate, x, inner);
  return InferenceResult{std::move(estimate), run.trace,      std::move(alpha_opt), run.converged,
                         run.initial_value,   run.best_value, best.z};
}

}  // namespace

InferenceResult infer_box(const Vector& alpha_obs, const Vector& x, const BoxPrior& prior,
                          const InferenceConfig& cfg) {
  cfg.validate();
  check_box_shapes(prior_params(prior), alpha_obs, x, prior);
  if (cfg.target_mode == TargetMode::kArgmax) return infer_box_once(alpha_obs, x, prior, cfg, std::nullopt);

  std::optional<InferenceResult> best;
  for (int k = 0; k < static_cast<int>(prior.muZ.size()); ++k) {
    InferenceResult r = infer_box_once(alpha_obs, x, prior, cfg, k);
    if (!best || r.final_objective < best->final_objective) best = std::move(r);
  }
  return std::move(*best);
}

}  // namespace advinfer
