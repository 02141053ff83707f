// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "advinfer/error.hpp"
#include "advinfer/identifiability.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advinfer;
using advinfer::testing::Rng;

namespace {

Matrix diag(double a, double b) { return Vector{{a, b}}.asDiagonal(); }

/// α = c·R⁻¹u for a random unit u, which saturates ‖α‖_C = c.
Vector saturating_attack(Rng& rng, const PDMatrix& C, double c) {
  return c * C.root().triangularView<Eigen::Upper>().solve(rng.unit(C.dim()));
}

}  // namespace

TEST_CASE("construct_objective contract examples") {
  const PDMatrix I2 = PDMatrix::identity(2);
  const Vector e1{{1.0, 0.0}}, e2{{0.0, 1.0}};
  const PDMatrix W1 = construct_objective(e1, Matrix::Identity(2, 2), I2, 1.0);
  CHECK(testing::same_up_to_sign(optimal_attack_linear({Matrix::Identity(2, 2), I2, 1.0, W1}), e1, 1e-6));

  const PDMatrix W2 = construct_objective(e2, diag(2, 1), I2, 1.0);
  const LinearAttacker a{diag(2, 1), I2, 1.0, W2};
  CHECK(testing::same_up_to_sign(optimal_attack_linear(a), e2, 1e-6));
  Rng rng(71);
  CHECK(testing::boundary_sample_max(rng, a.M, a.C.product(), 1.0, a.W.product(), 100000) <=
        testing::naive_linear_objective(a.M, a.W.product(), e2) + 1e-6);
  CHECK(verify_membership(a, e2, 10000, 1e-6).is_member);
}

TEST_CASE("construct_objective round trip on 100 random instances") {
  Rng rng(72);
  for (int t = 0; t < 100; ++t) {
    const Index d = rng.integer(2, 4);
    const Matrix M = rng.matrix(d, d) + 0.5 * Matrix::Identity(d, d);
    const PDMatrix C = rng.pd(d);
    const double c = rng.uniform(0.5, 2.0);
    const Vector alpha = saturating_attack(rng, C, c);
    const PDMatrix W = construct_objective(alpha, M, C, c);
    CHECK(W.min_eigenvalue() >= kPdRidge * (1.0 - 1e-6));
    CHECK(testing::same_up_to_sign(optimal_attack_linear({M, C, c, W}), alpha, 1e-6));
  }
}

TEST_CASE("construct_objective preconditions") {
  const PDMatrix I2 = PDMatrix::identity(2);
  CHECK_THROWS_AS(construct_objective(Vector{{0.5, 0.0}}, Matrix::Identity(2, 2), I2, 1.0), Error);
  Matrix singular = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(construct_objective(Vector{{1.0, 0.0}}, singular, I2, 1.0), Error);
  CHECK_THROWS_AS(construct_objective(Vector{{1.0, 0.0}}, Matrix::Ones(3, 2), I2, 1.0), Error);
}

TEST_CASE("construct_capability closed forms") {
  const PDMatrix I2 = PDMatrix::identity(2);
  auto [C, c] = construct_capability(Vector{{1.0, 0.0}}, Matrix::Identity(2, 2), I2);
  CHECK((C.product() - Matrix::Identity(2, 2)).norm() <= 1e-12);
  CHECK(c == doctest::Approx(1.0));
  auto [C2, c2] = construct_capability(Vector{{1.0, 0.0}}, diag(2, 1), I2);
  CHECK((C2.product() - diag(4, 1)).norm() <= 1e-12);
  CHECK(c2 == doctest::Approx(2.0));
  CHECK_THROWS_AS(construct_capability(Vector{{1.0, 0.0}}, Matrix::Ones(1, 2), PDMatrix::identity(1)), Error);
  CHECK_THROWS_AS(construct_capability(Vector{{1.0, 0.0}}, Matrix::Ones(2, 2), I2), Error);
}

TEST_CASE("construct_capability: membership and a flat boundary") {
  Rng rng(73);
  for (int t = 0; t < 100; ++t) {
    const Index d = rng.integer(2, 3), q = rng.integer(d, 4);
    const Matrix M = rng.matrix(q, d);
    const PDMatrix W = rng.pd(q);
    const Vector alpha = rng.vector(d);
    auto [C, c] = construct_capability(alpha, M, W);
    CHECK((C.product() - M.transpose() * W.product() * M).norm() <= 1e-10 * C.product().norm());
    const LinearAttacker a{M, C, c, W};
    // Ties: the analytic optimum may differ from α but must score the same.
    const double at_alpha = testing::naive_linear_objective(M, W.product(), alpha);
    CHECK(std::abs(linear_attack_objective(a, optimal_attack_linear(a)) - at_alpha) <= 1e-8 * at_alpha);
    for (int s = 0; s < 100; ++s) {
      Vector v = rng.vector(d);
      v *= c / std::sqrt(testing::naive_quad(v, C.product()));
      CHECK(std::abs(testing::naive_linear_objective(M, W.product(), v) - at_alpha) <= 1e-8 * at_alpha);
    }
    if (t < 5) {
      const MembershipReport r = verify_membership(a, alpha, 100000, 1e-6);
      CHECK(r.is_member);
      CHECK(r.gap <= 1e-6);
    }
  }
}

TEST_CASE("construct_knowledge examples and round trip") {
  const PDMatrix I2 = PDMatrix::identity(2);
  const Vector e1{{1.0, 0.0}}, e2{{0.0, 1.0}};
  const Matrix M1 = construct_knowledge(e1, I2, 1.0, I2);
  CHECK(testing::same_up_to_sign(top_right_singular(M1).s1, e1, 1e-9));
  CHECK(testing::same_up_to_sign(optimal_attack_linear({M1, I2, 1.0, I2}), e1, 1e-6));
  const PDMatrix W = PDMatrix::from_product(diag(9, 1));
  const Matrix M2 = construct_knowledge(e2, I2, 1.0, W);
  CHECK(testing::same_up_to_sign(optimal_attack_linear({M2, I2, 1.0, W}), e2, 1e-6));
  CHECK(verify_membership({M2, I2, 1.0, W}, e2, 10000, 1e-6).is_member);

  Rng rng(74);
  for (int t = 0; t < 100; ++t) {
    const Index d = rng.integer(2, 4), q = rng.integer(2, 4);
    const PDMatrix C = rng.pd(d), Wq = rng.pd(q);
    const double c = rng.uniform(0.5, 2.0);
    const Vector alpha = saturating_attack(rng, C, c);
    const Matrix M = construct_knowledge(alpha, C, c, Wq);
    CHECK(M.rows() == q);
    CHECK(M.cols() == d);
    CHECK(testing::same_up_to_sign(optimal_attack_linear({M, C, c, Wq}), alpha, 1e-6));
  }
  CHECK_THROWS_AS(construct_knowledge(Vector{{2.0, 0.0}}, I2, 1.0, I2), Error);
}

TEST_CASE("verify_membership closed forms") {
  const PDMatrix I2 = PDMatrix::identity(2);
  const LinearAttacker a{diag(2, 1), I2, 1.0, I2};
  const MembershipReport good = verify_membership(a, optimal_attack_linear(a), 1000, 1e-8);
  CHECK(good.is_member);
  CHECK(good.gap <= 1e-8);
  const MembershipReport bad = verify_membership(a, Vector{{0.0, 1.0}}, 1000, 1e-6);
  CHECK_FALSE(bad.is_member);
  CHECK(bad.objective_at_alpha == doctest::Approx(1.0));
  CHECK(bad.best_found_objective == doctest::Approx(4.0));
  CHECK(bad.gap == doctest::Approx(3.0));
  CHECK_THROWS_AS(verify_membership(a, Vector{{2.0, 0.0}}, 10, 1e-6), Error);
}
