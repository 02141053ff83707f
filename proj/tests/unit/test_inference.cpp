// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "advinfer/error.hpp"
#include "advinfer/experiments.hpp"
#include "advinfer/inference.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advinfer;
using advinfer::testing::Rng;

namespace {

// Objective rebuilt from its ingredients: explicit ridge, explicit inverse,
// naive Frobenius sums.
double linear_objective_oracle(const Matrix& M, const Matrix& G, const Matrix& V, const Vector& alpha,
                               const LinearPrior& prior, double lambda) {
  const Index d = G.rows(), q = V.rows();
  const Matrix C = Rng::naive_gram(G) + kPdRidge * Matrix::Identity(d, d);
  const Matrix W = Rng::naive_gram(V) + kPdRidge * Matrix::Identity(q, q);
  const double c = std::sqrt(testing::naive_quad(alpha, C));
  const Matrix Ginv = G.inverse();
  const Vector s1 = top_right_singular(V * M * Ginv).s1;
  const Vector dir = c * testing::naive_matvec(Ginv, s1);
  const double residual = std::min((alpha - dir).squaredNorm(), (alpha + dir).squaredNorm());
  const double prior_sq = testing::naive_sqnorm(M - prior.muM) + testing::naive_sqnorm(C - prior.muC) +
                          testing::naive_sqnorm(W - prior.muW);
  return lambda * prior_sq + residual;
}

InferenceConfig quick_config(int epochs) {
  InferenceConfig cfg;
  cfg.epochs = epochs;
  return cfg;
}

}  // namespace

TEST_CASE("outer_objective_linear vanishes at the truth") {
  Rng rng(51);
  for (int t = 0; t < 10; ++t) {
    const Index d = 3, q = 2;
    const Matrix G = rng.matrix(d, d) + 2.0 * Matrix::Identity(d, d);
    const Matrix V = rng.matrix(q, q) + 2.0 * Matrix::Identity(q, q);
    const Matrix M = rng.matrix(q, d);
    const LinearAttacker truth{M, pd_from_factor(G), 1.3, pd_from_factor(V)};
    const Vector alpha = optimal_attack_linear(truth);
    LinearPrior prior{M, truth.C.product(), truth.W.product()};
    CHECK(outer_objective_linear(M, G, V, alpha, prior, 0.1) <= 1e-12);
    // λ = 0 needs only the residual to vanish.
    prior = make_linear_prior(rng.matrix(q, d));
    CHECK(outer_objective_linear(M, G, V, alpha, prior, 0.0) <= 1e-12);
  }
}

TEST_CASE("outer_objective_linear at the prior mode") {
  Rng rng(52);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 4));
  const Vector alpha = optimal_attack_linear(LinearAttacker{prior.muM, PDMatrix::identity(4), 1.0, PDMatrix::identity(3)});
  CHECK(outer_objective_linear(prior.muM, Matrix::Identity(4, 4), Matrix::Identity(3, 3), alpha, prior, 0.0) <= 1e-12);
}

TEST_CASE("outer_objective_linear matches the compositional oracle") {
  Rng rng(53);
  for (int t = 0; t < 50; ++t) {
    const Index d = rng.integer(1, 4), q = rng.integer(1, 4);
    const LinearPrior prior = make_linear_prior(rng.matrix(q, d));
    const Matrix M = rng.matrix(q, d);
    const Matrix G = rng.matrix(d, d) + 2.0 * Matrix::Identity(d, d);
    const Matrix V = rng.matrix(q, q) + 2.0 * Matrix::Identity(q, q);
    const Vector alpha = rng.vector(d);
    const double lambda = rng.uniform(0.0, 1.0);
    const double expected = linear_objective_oracle(M, G, V, alpha, prior, lambda);
    CHECK(std::abs(outer_objective_linear(M, G, V, alpha, prior, lambda) - expected) <=
          1e-10 * std::max(1.0, expected));
  }
}

TEST_CASE("outer_objective_linear gradient matches central differences") {
  Rng rng(54);
  for (int t = 0; t < 20; ++t) {
    const Index d = 3, q = 3;
    const LinearPrior prior = make_linear_prior(rng.matrix(q, d));
    const Matrix M = rng.matrix(q, d);
    const Matrix G = rng.matrix(d, d) + 2.0 * Matrix::Identity(d, d);
    const Matrix V = rng.matrix(q, q) + 2.0 * Matrix::Identity(q, q);
    const Vector alpha = rng.vector(d);
    const LinearObjective lo = outer_objective_linear_with_gradient(M, G, V, alpha, prior, 0.1);
    CHECK(lo.value == doctest::Approx(outer_objective_linear(M, G, V, alpha, prior, 0.1)).epsilon(1e-12));

    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    auto probe = [&](const Matrix& analytic, auto&& bump) {
      for (Index i = 0; i < analytic.rows(); ++i) {
        for (Index j = 0; j < analytic.cols(); ++j) {
          const double fd = (bump(i, j, h) - bump(i, j, -h)) / (2.0 * h);
          num += std::pow(analytic(i, j) - fd, 2);
          den += fd * fd;
        }
      }
    };
    probe(lo.grad_M, [&](Index i, Index j, double e) {
      Matrix m = M;
      m(i, j) += e;
      return outer_objective_linear(m, G, V, alpha, prior, 0.1);
    });
    probe(lo.grad_G, [&](Index i, Index j, double e) {
      Matrix g = G;
      g(i, j) += e;
      return outer_objective_linear(M, g, V, alpha, prior, 0.1);
    });
    probe(lo.grad_V, [&](Index i, Index j, double e) {
      Matrix v = V;
      v(i, j) += e;
      return outer_objective_linear(M, G, v, alpha, prior, 0.1);
    });
    CHECK(std::sqrt(num) <= 1e-5 * std::max(1.0, std::sqrt(den)));
  }
}

TEST_CASE("infer_linear recovers an observation from the prior mode") {
  Rng rng(55);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 3));
  const LinearAttacker mode = linear_prior_mode(prior);
  const Vector alpha = optimal_attack_linear(mode);
  const InferenceResult r = infer_linear(alpha, prior, quick_config(200));
  CHECK(r.final_objective <= 1e-6);
  CHECK(r.final_objective <= r.initial_objective);
  const double err_est = err(r.estimate, mode, std::nullopt, PGDConfig{});
  CHECK(err_est <= 1e-6);
}

TEST_CASE("infer_linear with a huge prior weight stays at the prior means") {
  Rng rng(56);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 4));
  const LinearAttacker truth = sample_linear_attacker(prior, SampleConfig{0.25, 9});
  Vector alpha = optimal_attack_linear(truth);
  alpha *= 0.4 / alpha.norm();
  InferenceConfig cfg = quick_config(300);
  cfg.lambda = 1e6;
  const InferenceResult r = infer_linear(alpha, prior, cfg);
  const auto& est = std::get<LinearAttacker>(r.estimate);
  CHECK((est.M - prior.muM).norm() <= 1e-3);
  CHECK((est.C.product() - prior.muC).norm() <= 1e-3);
  CHECK((est.W.product() - prior.muW).norm() <= 1e-3);
}

TEST_CASE("infer_linear trace: gd never increases, adam ends no worse than it started") {
  Rng rng(57);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LinearPrior prior = make_linear_prior(rng.matrix(3, 3));
    const Vector alpha = optimal_attack_linear(sample_linear_attacker(prior, SampleConfig{0.25, seed}));
    InferenceConfig gd = quick_config(100);
    gd.optimizer = OuterOptimizer::kGd;
    const InferenceResult rg = infer_linear(alpha, prior, gd);
    CHECK(rg.loss_trace.size() == 100);
    for (std::size_t i = 1; i < rg.loss_trace.size(); ++i) CHECK(rg.loss_trace[i] <= rg.loss_trace[i - 1]);

    const InferenceResult ra = infer_linear(alpha, prior, quick_config(300));
    CHECK(ra.loss_trace.size() == 300);
    CHECK(ra.final_objective <= ra.loss_trace.front());
    const auto& est = std::get<LinearAttacker>(ra.estimate);
    CHECK(est.C.min_eigenvalue() >= kPdRidge * (1.0 - 1e-6));
    CHECK(est.W.min_eigenvalue() >= kPdRidge * (1.0 - 1e-6));
    CHECK(std::abs(mahalanobis_norm(alpha, est.C) - est.c) <= 1e-12);
  }
}

TEST_CASE("infer_linear rejects a zero observation") {
  const LinearPrior prior = make_linear_prior(Matrix::Identity(2, 2));
  CHECK_THROWS_WITH_AS(infer_linear(Vector::Zero(2), prior, quick_config(10)), "degenerate observation", Error);
}

TEST_CASE("flatten / unflatten round trip") {
  Rng rng(58);
  const BoxParams p{MLPModel{{rng.matrix(4, 3), rng.matrix(2, 4)}, {Activation::kTanh, Activation::kIdentity}},
                    rng.vector(3), rng.vector(3), rng.vector(2)};
  const std::vector<double> theta = flatten(p);
  CHECK(theta.size() == 12 + 8 + 3 + 3 + 2);
  CHECK(flatten(unflatten(theta, p)) == theta);
  CHECK_THROWS_AS(unflatten(std::vector<double>(3, 0.0), p), Error);
}

namespace {

struct BoxInstance {
  BoxPrior prior;
  Vector x;
  Vector alpha_obs;
};

BoxInstance logistic_instance(Rng& rng, Index d, Index q) {
  const ModelBelief star = LogisticModel{rng.matrix(q, d)};
  BoxInstance in;
  in.x = rng.vector(d);
  in.alpha_obs = 0.3 * rng.vector(d);
  in.prior = build_box_prior(in.alpha_obs, star, in.x);
  return in;
}

BoxParams at_means(const BoxPrior& p) { return BoxParams{p.muModel, p.muC1, p.muC2, p.muZ}; }

}  // namespace

TEST_CASE("outer_objective_box vanishes at the means for the inner solution") {
  Rng rng(59);
  for (int t = 0; t < 10; ++t) {
    BoxInstance in = logistic_instance(rng, 3, 3);
    const BoxAttacker mode = box_prior_mode(in.prior);
    const Vector alpha = optimal_attack_box(mode, in.x, PGDConfig{});
    CHECK(outer_objective_box(at_means(in.prior), alpha, in.x, in.prior, 0.1, PGDConfig{}) == 0.0);
  }
}

TEST_CASE("outer_objective_box with a singleton box") {
  Rng rng(60);
  BoxInstance in = logistic_instance(rng, 3, 4);
  BoxParams p = at_means(in.prior);
  p.c1.setZero();
  p.c2.setZero();
  CHECK(outer_objective_box(p, in.alpha_obs, in.x, in.prior, 0.0, PGDConfig{}) ==
        doctest::Approx(in.alpha_obs.squaredNorm()).epsilon(1e-15));
}

TEST_CASE("outer_objective_box against the grid-search inner oracle") {
  Rng rng(61);
  for (int t = 0; t < 5; ++t) {
    const Matrix M = rng.matrix(3, 2);
    const Vector x = rng.vector(2);
    const Vector alpha_obs = 0.3 * rng.vector(2);
    const BoxPrior prior = build_box_prior(alpha_obs, LogisticModel{M}, x);
    BoxParams p{LogisticModel{M + 0.2 * rng.matrix(3, 2)}, Vector::Constant(2, -0.5), Vector::Constant(2, 0.5),
                prior.muZ};
    const int target = static_cast<int>(std::max_element(p.z.data(), p.z.data() + 3) - p.z.data());
    const Matrix Mp = std::get<LogisticModel>(p.model).M;
    // Grid argmax of the target probability.
    double best = -1.0;
    Vector best_a(2);
    for (int i = 0; i <= 200; ++i) {
      for (int j = 0; j <= 200; ++j) {
        const Vector a{{-0.5 + i / 200.0, -0.5 + j / 200.0}};
        const double pr = testing::naive_softmax(testing::naive_matvec(Mp, x + a))(target);
        if (pr > best) {
          best = pr;
          best_a = a;
        }
      }
    }
    const double prior_sq = testing::naive_sqnorm(Mp - M) + testing::naive_sqnorm(p.c1 - prior.muC1) +
                            testing::naive_sqnorm(p.c2 - prior.muC2) + testing::naive_sqnorm(p.z - prior.muZ);
    const double oracle = 0.1 * prior_sq + (alpha_obs - best_a).squaredNorm();
    CHECK(std::abs(outer_objective_box(p, alpha_obs, x, prior, 0.1, PGDConfig{}) - oracle) <= 2e-3);
  }
}

TEST_CASE("unrolled box gradient matches independent central differences") {
  Rng rng(62);
  PGDConfig inner;
  inner.steps = 20;
  inner.backtracking = false;
  for (int t = 0; t < 10; ++t) {
    const Index d = 3, q = 3;
    BoxInstance in = logistic_instance(rng, d, q);
    const Matrix M = std::get<LogisticModel>(in.prior.muModel).M;
    BoxParams p{LogisticModel{M + 0.3 * rng.matrix(q, d)}, in.prior.muC1 - Vector::Constant(d, 0.2),
                in.prior.muC2 + Vector::Constant(d, 0.2), in.prior.muZ + 0.1 * rng.vector(q)};
    const int target = t % 3;
    const BoxObjective g = outer_objective_box_unrolled(p, in.alpha_obs, in.x, in.prior, 0.1, inner, target);
    CHECK(g.value == doctest::Approx(outer_objective_box(p, in.alpha_obs, in.x, in.prior, 0.1, inner, target)));

    std::vector<double> theta = flatten(p);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + 1e-4;
      const double up = outer_objective_box(unflatten(theta, p), in.alpha_obs, in.x, in.prior, 0.1, inner, target);
      theta[i] = keep - 1e-4;
      const double down = outer_objective_box(unflatten(theta, p), in.alpha_obs, in.x, in.prior, 0.1, inner, target);
      theta[i] = keep;
      const double fd = (up - down) / 2e-4;
      num += std::pow(g.gradient[i] - fd, 2);
      den += fd * fd;
    }
    CHECK(std::sqrt(num) <= 1e-3 * std::sqrt(den));
  }
}

TEST_CASE("infer_box at the prior mode stays put") {
  Rng rng(63);
  BoxInstance in = logistic_instance(rng, 3, 3);
  const Vector alpha = optimal_attack_box(box_prior_mode(in.prior), in.x, PGDConfig{});
  for (GradMode mode : {GradMode::kUnrolled, GradMode::kFiniteDiff}) {
    InferenceConfig cfg = quick_config(20);
    cfg.grad_mode = mode;
    cfg.inner.steps = 50;
    const InferenceResult r = infer_box(alpha, in.x, in.prior, cfg);
    CHECK(r.final_objective <= r.initial_objective);
    const auto& est = std::get<BoxAttacker>(r.estimate);
    CHECK((std::get<LogisticModel>(est.model).M - std::get<LogisticModel>(in.prior.muModel).M).norm() <= 1e-2);
    CHECK((est.c1 - in.prior.muC1).norm() <= 1e-2);
    CHECK((est.c2 - in.prior.muC2).norm() <= 1e-2);
    CHECK((est.c2 - est.c1).minCoeff() >= 0.0);
  }
}

TEST_CASE("infer_box with a huge prior weight keeps the observed class") {
  Rng rng(64);
  BoxInstance in = logistic_instance(rng, 3, 4);
  InferenceConfig cfg = quick_config(30);
  cfg.lambda = 1e6;
  cfg.inner.steps = 50;
  const InferenceResult r = infer_box(in.alpha_obs, in.x, in.prior, cfg);
  CHECK((r.z - in.prior.muZ).lpNorm<Eigen::Infinity>() <= 1e-3);
  Index observed = 0;
  in.prior.muZ.maxCoeff(&observed);
  CHECK(std::get<BoxAttacker>(r.estimate).target == static_cast<int>(observed));
}

TEST_CASE("infer_box exhaustive target mode is no worse than argmax") {
  Rng rng(65);
  BoxInstance in = logistic_instance(rng, 2, 3);
  InferenceConfig cfg = quick_config(15);
  cfg.inner.steps = 40;
  const InferenceResult a = infer_box(in.alpha_obs, in.x, in.prior, cfg);
  cfg.target_mode = TargetMode::kExhaustive;
  const InferenceResult e = infer_box(in.alpha_obs, in.x, in.prior, cfg);
  CHECK(e.final_objective <= a.final_objective + 1e-12);
}

TEST_CASE("InferenceConfig validation") {
  InferenceConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = InferenceConfig{};
  cfg.fd_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = InferenceConfig{};
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
