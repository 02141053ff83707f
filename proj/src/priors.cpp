// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/priors.hpp"

#include <cmath>
#include <random>
#include <string>

#include "advinfer/detail/network.hpp"
#include "advinfer/error.hpp"

namespace advinfer {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_shape(const Matrix& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + ": expected " + std::to_string(rows) +
                                            "x" + std::to_string(cols) + ", got " +
                                            std::to_string(m.rows()) + "x" +
                                            std::to_string(m.cols()));
  }
}

Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Row-major draw order so the stream layout does not depend on Eigen storage.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
  }
  return m;
}

int argmax(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace

LinearPrior make_linear_prior(const Matrix& model_star) {
  require_finite(model_star, "make_linear_prior");
  return LinearPrior{model_star, Matrix::Identity(model_star.cols(), model_star.cols()),
                     Matrix::Identity(model_star.rows(), model_star.rows())};
}

BoxPrior build_box_prior(const Vector& alpha_obs, const ModelBelief& model_star, const Vector& x) {
  require_finite(alpha_obs, "build_box_prior alpha_obs");
  if (alpha_obs.size() != x.size() || x.size() != input_dim(model_star)) {
    fail(ErrorCode::kDimensionMismatch, "build_box_prior: inconsistent dimensions");
  }
  const Index d = alpha_obs.size();
  BoxPrior prior;
  prior.muModel = model_star;
  prior.muC1 = Vector::Constant(d, alpha_obs.minCoeff());
  prior.muC2 = Vector::Constant(d, alpha_obs.maxCoeff());
  prior.muZ = Vector::Zero(class_count(model_star));
  prior.muZ(predict_class(model_star, x + alpha_obs)) = 1.0;
  return prior;
}

double linear_prior_log_normalizer(Index d, Index q) {
  const double dd = static_cast<double>(d);
  const double qq = static_cast<double>(q);
  return -0.5 * kLog2Pi * (qq * dd + dd * dd + qq * qq);
}

double prior_logdensity_linear(const Matrix& M, const Matrix& C, const Matrix& W,
                               const LinearPrior& prior) {
  const Index q = prior.output_dim();
  const Index d = prior.input_dim();
  require_shape(M, q, d, "prior_logdensity_linear M");
  require_shape(C, d, d, "prior_logdensity_linear C");
  require_shape(W, q, q, "prior_logdensity_linear W");
  const double sq = (M - prior.muM).squaredNorm() + (C - prior.muC).squaredNorm() +
                    (W - prior.muW).squaredNorm();
  return linear_prior_log_normalizer(d, q) - 0.5 * sq;
}

double prior_logdensity_box(const ModelBelief& model, const Vector& c1, const Vector& c2,
                            const Vector& z, const BoxPrior& prior) {
  const auto net = detail::to_network(model);
  const auto mu = detail::to_network(prior.muModel);
  if (net.size() != mu.size()) {
    fail(ErrorCode::kDimensionMismatch, "prior_logdensity_box: model structure differs from prior");
  }
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < net.size(); ++l) {
    if (net[l].rows != mu[l].rows || net[l].cols != mu[l].cols) {
      fail(ErrorCode::kDimensionMismatch, "prior_logdensity_box: layer shape differs from prior");
    }
    for (std::size_t k = 0; k < net[l].w.size(); ++k) sq += square(net[l].w[k] - mu[l].w[k]);
    count += net[l].w.size();
  }
  if (c1.size() != prior.muC1.size() || c2.size() != prior.muC2.size() ||
      z.size() != prior.muZ.size()) {
    fail(ErrorCode::kDimensionMismatch, "prior_logdensity_box: vector shape differs from prior");
  }
  sq += (c1 - prior.muC1).squaredNorm() + (c2 - prior.muC2).squaredNorm() +
        (z - prior.muZ).squaredNorm();
  count += static_cast<std::size_t>(c1.size() + c2.size() + z.size());
  return -0.5 * kLog2Pi * static_cast<double>(count) - 0.5 * sq;
}

LinearAttacker linear_prior_mode(const LinearPrior& prior) {
  const Matrix g = PDMatrix::from_product(prior.muC).root();
  const Matrix v = PDMatrix::from_product(prior.muW).root();
  return LinearAttacker{prior.muM, pd_from_factor(g), 1.0, pd_from_factor(v)};
}

LinearAttacker sample_linear_attacker(const LinearPrior& prior, const SampleConfig& cfg) {
  if (!(cfg.scale > 0.0)) fail(ErrorCode::kInvalidArgument, "SampleConfig: scale must be > 0");
  std::mt19937_64 rng(cfg.seed);
  const Index q = prior.output_dim();
  const Index d = prior.input_dim();
  const Matrix m = prior.muM + gaussian_matrix(rng, q, d, cfg.scale);
  const Matrix g = PDMatrix::from_product(prior.muC).root() + gaussian_matrix(rng, d, d, cfg.scale);
  const Matrix v = PDMatrix::from_product(prior.muW).root() + gaussian_matrix(rng, q, q, cfg.scale);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double c = std::max(0.1, std::abs(1.0 + cfg.scale * normal(rng)));
  return LinearAttacker{m, pd_from_factor(g), c, pd_from_factor(v)};
}

BoxAttacker box_prior_mode(const BoxPrior& prior) {
  return BoxAttacker{prior.muModel, prior.muC1, prior.muC2, argmax(prior.muZ)};
}

BoxAttacker sample_box_attacker(const BoxPrior& prior, const Box& base_box, const SampleConfig& cfg) {
  if (!(cfg.scale > 0.0)) fail(ErrorCode::kInvalidArgument, "SampleConfig: scale must be > 0");
  const Index d = input_dim(prior.muModel);
  if (base_box.lower.size() != d || base_box.upper.size() != d) {
    fail(ErrorCode::kDimensionMismatch, "sample_box_attacker: base box dimension mismatch");
  }
  for (Index i = 0; i < d; ++i) {
    if (base_box.lower(i) > base_box.upper(i)) {
      fail(ErrorCode::kInvalidArgument, "sample_box_attacker: base box is empty");
    }
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto net = detail::to_network(prior.muModel);
  for (auto& layer : net) {
    for (double& w : layer.w) w += cfg.scale * normal(rng);
  }
  Vector c1 = base_box.lower;
  Vector c2 = base_box.upper;
  for (Index i = 0; i < d; ++i) c1(i) += cfg.scale * normal(rng);
  for (Index i = 0; i < d; ++i) c2(i) += cfg.scale * normal(rng);
  for (Index i = 0; i < d; ++i) {
    if (c1(i) > c2(i)) std::swap(c1(i), c2(i));
  }
  const int q = static_cast<int>(class_count(prior.muModel));
  std::uniform_int_distribution<int> pick(0, q - 1);
  const int target = pick(rng);
  return BoxAttacker{detail::model_from_network(net, prior.muModel), c1, c2, target};
}

}  // namespace advinfer
