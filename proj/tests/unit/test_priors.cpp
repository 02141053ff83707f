// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "advinfer/error.hpp"
#include "advinfer/priors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advinfer;
using advinfer::testing::Rng;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

BoxPrior logistic_prior(Rng& rng, Index d, Index q) {
  BoxPrior p;
  p.muModel = LogisticModel{rng.matrix(q, d)};
  p.muC1 = Vector::Constant(d, -0.2);
  p.muC2 = Vector::Constant(d, 0.3);
  p.muZ = Vector::Zero(q);
  p.muZ(1) = 1.0;
  return p;
}

}  // namespace

TEST_CASE("build_box_prior examples") {
  const ModelBelief eye3 = LogisticModel{Matrix::Identity(3, 3)};
  const BoxPrior p = build_box_prior(Vector{{-0.2, 0.5, 0.1}}, eye3, Vector::Zero(3));
  CHECK(p.muC1 == Vector::Constant(3, -0.2));
  CHECK(p.muC2 == Vector::Constant(3, 0.5));
  CHECK(p.muZ == Vector{{0.0, 1.0, 0.0}});

  const BoxPrior z = build_box_prior(Vector::Zero(3), eye3, Vector{{0.0, 0.0, 1.0}});
  CHECK(z.muC1 == Vector::Zero(3));
  CHECK(z.muC2 == Vector::Zero(3));

  const ModelBelief eye2 = LogisticModel{Matrix::Identity(2, 2)};
  CHECK(build_box_prior(Vector{{1.0, -1.0}}, eye2, Vector::Zero(2)).muZ == Vector{{1.0, 0.0}});
}

TEST_CASE("build_box_prior box is invariant to permuting the attack") {
  Rng rng(31);
  const ModelBelief m = LogisticModel{rng.matrix(4, 5)};
  for (int t = 0; t < 20; ++t) {
    Vector a = rng.vector(5);
    const BoxPrior p = build_box_prior(a, m, rng.vector(5));
    std::vector<double> v(a.data(), a.data() + a.size());
    std::shuffle(v.begin(), v.end(), rng.engine());
    const Vector perm = Eigen::Map<Vector>(v.data(), 5);
    const BoxPrior pp = build_box_prior(perm, m, rng.vector(5));
    CHECK(pp.muC1 == p.muC1);
    CHECK(pp.muC2 == p.muC2);
    CHECK(p.muZ.sum() == 1.0);
    CHECK(p.muZ.maxCoeff() == 1.0);
  }
}

TEST_CASE("prior_logdensity_linear: mode, unit perturbation, Frobenius oracle") {
  Rng rng(32);
  const Index d = 3, q = 2;
  const LinearPrior prior = make_linear_prior(rng.matrix(q, d));
  const double mode = prior_logdensity_linear(prior.muM, prior.muC, prior.muW, prior);
  CHECK(mode == doctest::Approx(-0.5 * kLog2Pi * (q * d + d * d + q * q)).epsilon(1e-14));

  Matrix dM = rng.matrix(q, d);
  dM /= dM.norm();
  CHECK(prior_logdensity_linear(prior.muM + dM, prior.muC, prior.muW, prior) - mode ==
        doctest::Approx(-0.5).epsilon(1e-12));

  for (int t = 0; t < 50; ++t) {
    const Matrix M = rng.matrix(q, d), C = rng.matrix(d, d), W = rng.matrix(q, q);
    const double expected = -0.5 * (testing::naive_sqnorm(M - prior.muM) + testing::naive_sqnorm(C - prior.muC) +
                                    testing::naive_sqnorm(W - prior.muW));
    CHECK(std::abs(prior_logdensity_linear(M, C, W, prior) - mode - expected) <= 1e-10);
  }
  CHECK_THROWS_AS(prior_logdensity_linear(Matrix::Zero(3, 3), prior.muC, prior.muW, prior), Error);
}

TEST_CASE("prior_logdensity_linear equals the sum of matrix-normal densities") {
  Rng rng(33);
  const LinearPrior prior = make_linear_prior(rng.matrix(2, 4));
  const PDMatrix i2 = PDMatrix::identity(2), i4 = PDMatrix::identity(4);
  const Matrix M = rng.matrix(2, 4), C = rng.matrix(4, 4), W = rng.matrix(2, 2);
  const double sum = matrix_normal_logpdf(M, prior.muM, i2, i4) + matrix_normal_logpdf(C, prior.muC, i4, i4) +
                     matrix_normal_logpdf(W, prior.muW, i2, i2);
  CHECK(std::abs(prior_logdensity_linear(M, C, W, prior) - sum) <= 1e-10);
}

TEST_CASE("prior_logdensity_box: mode, unit z offset, sum-of-squares oracle") {
  Rng rng(34);
  const BoxPrior prior = logistic_prior(rng, 3, 4);
  const double mode = prior_logdensity_box(prior.muModel, prior.muC1, prior.muC2, prior.muZ, prior);
  CHECK(mode == doctest::Approx(-0.5 * kLog2Pi * (12 + 3 + 3 + 4)).epsilon(1e-14));
  Vector z = prior.muZ;
  z(3) += 1.0;
  CHECK(prior_logdensity_box(prior.muModel, prior.muC1, prior.muC2, z, prior) - mode ==
        doctest::Approx(-0.5).epsilon(1e-12));

  const Matrix muM = std::get<LogisticModel>(prior.muModel).M;
  for (int t = 0; t < 20; ++t) {
    const Matrix M = rng.matrix(4, 3);
    const Vector c1 = rng.vector(3), c2 = rng.vector(3), zz = rng.vector(4);
    const double sq = testing::naive_sqnorm(M - muM) + testing::naive_sqnorm(c1 - prior.muC1) +
                      testing::naive_sqnorm(c2 - prior.muC2) + testing::naive_sqnorm(zz - prior.muZ);
    CHECK(std::abs(prior_logdensity_box(LogisticModel{M}, c1, c2, zz, prior) - mode + 0.5 * sq) <= 1e-10);
  }
}

TEST_CASE("prior_logdensity_box sums MLP layers") {
  Rng rng(35);
  const Matrix w1 = rng.matrix(5, 3), w2 = rng.matrix(4, 5);
  BoxPrior prior;
  prior.muModel = MLPModel{{w1, w2}, {Activation::kRelu, Activation::kIdentity}};
  prior.muC1 = Vector::Zero(3);
  prior.muC2 = Vector::Zero(3);
  prior.muZ = Vector::Unit(4, 0);
  const Matrix d1 = rng.matrix(5, 3), d2 = rng.matrix(4, 5);
  const ModelBelief moved = MLPModel{{w1 + d1, w2 + d2}, {Activation::kRelu, Activation::kIdentity}};
  const double mode = prior_logdensity_box(prior.muModel, prior.muC1, prior.muC2, prior.muZ, prior);
  const double got = prior_logdensity_box(moved, prior.muC1, prior.muC2, prior.muZ, prior);
  CHECK(std::abs(got - mode + 0.5 * (testing::naive_sqnorm(d1) + testing::naive_sqnorm(d2))) <= 1e-10);
}

TEST_CASE("sample_linear_attacker near-zero scale returns the prior mode") {
  Rng rng(36);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 4));
  const LinearAttacker a = sample_linear_attacker(prior, SampleConfig{1e-300, 5});
  CHECK(a.M == prior.muM);
  CHECK((a.C.product() - Matrix::Identity(4, 4) * (1.0 + kPdRidge)).norm() <= 1e-15);
  CHECK((a.W.product() - Matrix::Identity(3, 3) * (1.0 + kPdRidge)).norm() <= 1e-15);
  CHECK(a.c == 1.0);
}

TEST_CASE("sample_linear_attacker is deterministic and PD") {
  Rng rng(37);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 3));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const LinearAttacker a = sample_linear_attacker(prior, SampleConfig{1.0, seed});
    const LinearAttacker b = sample_linear_attacker(prior, SampleConfig{1.0, seed});
    CHECK(a.M == b.M);
    CHECK(a.C.product() == b.C.product());
    CHECK(a.W.product() == b.W.product());
    CHECK(a.c == b.c);
    CHECK(a.c >= 0.1);
    for (const Matrix* m : {&a.C.product(), &a.W.product()}) {
      const auto ev = testing::jacobi_eigenvalues(*m);
      CHECK(*std::min_element(ev.begin(), ev.end()) >= kPdRidge * (1.0 - 1e-6));
    }
  }
  CHECK_THROWS_AS(sample_linear_attacker(prior, SampleConfig{0.0, 0}), Error);
}

TEST_CASE("sample_linear_attacker Monte-Carlo mean of M") {
  Rng rng(38);
  const LinearPrior prior = make_linear_prior(rng.matrix(3, 4));
  Matrix sum = Matrix::Zero(3, 4);
  const int n = 1000;
  for (int s = 0; s < n; ++s) sum += sample_linear_attacker(prior, SampleConfig{1.0, static_cast<std::uint64_t>(s) * 7919u + 1u}).M;
  CHECK((sum / n - prior.muM).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("sample_box_attacker near-zero scale keeps the base box") {
  Rng rng(39);
  const BoxPrior prior = logistic_prior(rng, 3, 4);
  const Box base{Vector::Constant(3, -0.3), Vector::Constant(3, 0.3)};
  const BoxAttacker a = sample_box_attacker(prior, base, SampleConfig{1e-300, 3});
  CHECK(a.c1 == base.lower);
  CHECK(a.c2 == base.upper);
  CHECK(std::get<LogisticModel>(a.model).M == std::get<LogisticModel>(prior.muModel).M);
}

TEST_CASE("sample_box_attacker repairs the box order and is deterministic") {
  Rng rng(40);
  const BoxPrior prior = logistic_prior(rng, 3, 4);
  // With a zero-width base box about half the raw draws come out inverted.
  const Box base{Vector::Zero(3), Vector::Zero(3)};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BoxAttacker a = sample_box_attacker(prior, base, SampleConfig{1.0, seed});
    CHECK((a.c2 - a.c1).minCoeff() >= 0.0);
    CHECK_NOTHROW(a.validate());
    const BoxAttacker b = sample_box_attacker(prior, base, SampleConfig{1.0, seed});
    CHECK(a.c1 == b.c1);
    CHECK(a.c2 == b.c2);
    CHECK(a.target == b.target);
  }
  CHECK_THROWS_AS(sample_box_attacker(prior, Box{Vector::Constant(3, 1.0), Vector::Zero(3)}, SampleConfig{0.1, 0}),
                  Error);
}

TEST_CASE("sample_box_attacker target is uniform over the classes") {
  Rng rng(41);
  BoxPrior prior;
  prior.muModel = LogisticModel{rng.matrix(10, 2)};
  prior.muC1 = Vector::Zero(2);
  prior.muC2 = Vector::Zero(2);
  prior.muZ = Vector::Unit(10, 0);
  const Box base{Vector::Constant(2, -0.1), Vector::Constant(2, 0.1)};
  std::vector<int> counts(10, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    ++counts[static_cast<std::size_t>(sample_box_attacker(prior, base, SampleConfig{0.25, seed * 104729u}).target)];
  }
  for (int c : counts) {
    CHECK(c >= 70);
    CHECK(c <= 130);
  }
}

TEST_CASE("prior modes") {
  Rng rng(42);
  const LinearPrior lp = make_linear_prior(rng.matrix(2, 3));
  const LinearAttacker a = linear_prior_mode(lp);
  CHECK(a.M == lp.muM);
  CHECK(a.c == 1.0);
  const BoxPrior bp = logistic_prior(rng, 3, 4);
  const BoxAttacker b = box_prior_mode(bp);
  CHECK(b.target == 1);
  CHECK(b.c1 == bp.muC1);
}
