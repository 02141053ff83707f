// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/attackers.hpp"

#include <string>

#include "advinfer/detail/network.hpp"
#include "advinfer/error.hpp"

namespace advinfer {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Validation

void LinearAttacker::validate() const {
  require_finite(M, "LinearAttacker.M");
  if (M.cols() != C.dim()) {
    fail(ErrorCode::kDimensionMismatch, "LinearAttacker: M has " + std::to_string(M.cols()) +
                                            " columns but C has dim " + std::to_string(C.dim()));
  }
  if (M.rows() != W.dim()) {
    fail(ErrorCode::kDimensionMismatch, "LinearAttacker: M has " + std::to_string(M.rows()) +
                                            " rows but W has dim " + std::to_string(W.dim()));
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    fail(ErrorCode::kInvalidArgument, "LinearAttacker: radius c must be positive");
  }
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

Activation activation_from_string(std::string_view s) {
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  fail(ErrorCode::kParse, "unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(PgdInit init) {
  switch (init) {
    case PgdInit::kZero:
      return "zero";
    case PgdInit::kMidpoint:
      return "midpoint";
    case PgdInit::kRandom:
      return "random";
  }
  return "zero";
}

PgdInit pgd_init_from_string(std::string_view s) {
  if (s == "zero") return PgdInit::kZero;
  if (s == "midpoint") return PgdInit::kMidpoint;
  if (s == "random") return PgdInit::kRandom;
  fail(ErrorCode::kParse, "unknown PGD init '" + std::string(s) + "'");
}

void validate_model(const ModelBelief& model) {
  std::visit(Overloaded{
                 [](const LogisticModel& m) { require_finite(m.M, "LogisticModel.M"); },
                 [](const MLPModel& m) {
                   if (m.layers.empty()) fail(ErrorCode::kInvalidArgument, "MLPModel: no layers");
                   if (m.layers.size() != m.activations.size()) {
                     fail(ErrorCode::kDimensionMismatch,
                          "MLPModel: one activation per layer required");
                   }
                   for (std::size_t l = 0; l < m.layers.size(); ++l) {
                     require_finite(m.layers[l], "MLPModel layer");
                     if (l > 0 && m.layers[l].cols() != m.layers[l - 1].rows()) {
                       fail(ErrorCode::kDimensionMismatch,
                            "MLPModel: layer " + std::to_string(l) + " does not chain");
                     }
                   }
                 },
             },
             model);
}

Index input_dim(const ModelBelief& model) {
  return std::visit(Overloaded{
                        [](const LogisticModel& m) { return m.M.cols(); },
                        [](const MLPModel& m) { return m.layers.front().cols(); },
                    },
                    model);
}

Index class_count(const ModelBelief& model) {
  return std::visit(Overloaded{
                        [](const LogisticModel& m) { return m.M.rows(); },
                        [](const MLPModel& m) { return m.layers.back().rows(); },
                    },
                    model);
}

void BoxAttacker::validate() const {
  validate_model(model);
  require_finite(c1, "BoxAttacker.c1");
  require_finite(c2, "BoxAttacker.c2");
  if (c1.size() != input_dim(model) || c2.size() != input_dim(model)) {
    fail(ErrorCode::kDimensionMismatch, "BoxAttacker: box dimension does not match model input");
  }
  for (Index i = 0; i < c1.size(); ++i) {
    if (c1(i) > c2(i)) {
      fail(ErrorCode::kInvalidArgument,
           "BoxAttacker: empty box (c1[" + std::to_string(i) + "] > c2[" + std::to_string(i) + "])");
    }
  }
  if (target < 0 || target >= class_count(model)) {
    fail(ErrorCode::kInvalidArgument, "BoxAttacker: target class out of range");
  }
}

void PGDConfig::validate() const {
  if (steps < 1) fail(ErrorCode::kInvalidArgument, "PGDConfig: steps must be >= 1");
  if (!(step_size > 0.0)) fail(ErrorCode::kInvalidArgument, "PGDConfig: step_size must be > 0");
}

// ---------------------------------------------------------------------------
// Linear attacker

double linear_attack_objective(const LinearAttacker& a, const Vector& alpha) {
  const Vector m_alpha = a.M * alpha;
  return m_alpha.dot(a.W.product() * m_alpha);
}

Vector optimal_attack_linear(const LinearAttacker& a) {
  a.validate();
  const Matrix& r = a.C.root();  // RᵀR = C
  // A = V·M·R⁻¹, computed as (R⁻ᵀ (V M)ᵀ)ᵀ.
  const Matrix vm = a.W.root() * a.M;
  const Matrix a_mat =
      r.transpose().triangularView<Eigen::Lower>().solve(vm.transpose()).transpose();
  const SpectralTop top = top_right_singular(a_mat);
  Vector alpha = a.c * r.triangularView<Eigen::Upper>().solve(top.s1);
  apply_canonical_sign(alpha);
  return alpha;
}

// ---------------------------------------------------------------------------
// Box attacker

namespace detail {

Network<double> to_network(const ModelBelief& model) {
  auto layer_of = [](const Matrix& w, Activation act) {
    DenseLayer<double> layer;
    layer.rows = w.rows();
    layer.cols = w.cols();
    layer.act = act;
    layer.w.resize(static_cast<std::size_t>(w.size()));
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) layer.w[static_cast<std::size_t>(i * w.cols() + j)] = w(i, j);
    }
    return layer;
  };
  Network<double> net;
  std::visit(Overloaded{
                 [&](const LogisticModel& m) { net.push_back(layer_of(m.M, Activation::kIdentity)); },
                 [&](const MLPModel& m) {
                   for (std::size_t l = 0; l < m.layers.size(); ++l) {
                     net.push_back(layer_of(m.layers[l], m.activations[l]));
                   }
                 },
             },
             model);
  return net;
}

ModelBelief model_from_network(const Network<double>& net, const ModelBelief& like) {
  auto matrix_of = [](const DenseLayer<double>& layer) {
    Matrix w(layer.rows, layer.cols);
    for (Index i = 0; i < layer.rows; ++i) {
      for (Index j = 0; j < layer.cols; ++j) w(i, j) = layer.w[static_cast<std::size_t>(i * layer.cols + j)];
    }
    return w;
  };
  if (std::holds_alternative<LogisticModel>(like)) {
    return LogisticModel{matrix_of(net.front())};
  }
  MLPModel mlp;
  for (const auto& layer : net) {
    mlp.layers.push_back(matrix_of(layer));
    mlp.activations.push_back(layer.act);
  }
  return mlp;
}

std::size_t weight_count(const Network<double>& net) {
  std::size_t n = 0;
  for (const auto& layer : net) n += layer.w.size();
  return n;
}

}  // namespace detail

Vector class_probabilities(const ModelBelief& model, const Vector& x) {
  validate_model(model);
  require_finite(x, "class_probabilities input");
  if (x.size() != input_dim(model)) {
    fail(ErrorCode::kDimensionMismatch, "class_probabilities: input has dim " +
                                            std::to_string(x.size()) + ", model expects " +
                                            std::to_string(input_dim(model)));
  }
  Vector h = x;
  std::visit(Overloaded{
                 [&](const LogisticModel& m) { h = m.M * h; },
                 [&](const MLPModel& m) {
                   for (std::size_t l = 0; l < m.layers.size(); ++l) {
                     h = m.layers[l] * h;
                     for (Index i = 0; i < h.size(); ++i) h(i) = detail::activate(m.activations[l], h(i));
                   }
                 },
             },
             model);
  const double shift = h.maxCoeff();
  Vector p = (h.array() - shift).exp();
  p /= p.sum();
  return p;
}

int predict_class(const ModelBelief& model, const Vector& x) {
  const Vector p = class_probabilities(model, x);
  Index best = 0;
  for (Index i = 1; i < p.size(); ++i) {
    if (p(i) > p(best)) best = i;
  }
  return static_cast<int>(best);
}

Vector optimal_attack_box(const BoxAttacker& a, const Vector& x, const PGDConfig& cfg) {
  a.validate();
  cfg.validate();
  require_finite(x, "optimal_attack_box input");
  if (x.size() != a.c1.size()) {
    fail(ErrorCode::kDimensionMismatch, "optimal_attack_box: input dimension does not match box");
  }
  const detail::Network<double> net = detail::to_network(a.model);
  const std::vector<double> lo = to_std(a.c1);
  const std::vector<double> hi = to_std(a.c2);
  if (cfg.backtracking) {
    return to_eigen(detail::pgd_backtracking<double>(net, x, lo, hi, a.target, cfg));
  }
  return to_eigen(detail::pgd_fixed_step<double>(net, x, lo, hi, a.target, cfg));
}

}  // namespace advinfer
