// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "advinfer/core_math.hpp"
#include "advinfer/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advinfer;
using advinfer::testing::Rng;

namespace {
const double kLog2Pi = std::log(2.0 * M_PI);
}

TEST_CASE("mahalanobis_norm closed forms") {
  CHECK(mahalanobis_norm(Vector{{3.0, 4.0}}, PDMatrix::identity(2)) == doctest::Approx(5.0).epsilon(1e-15));
  const PDMatrix a = PDMatrix::from_product(Vector{{4.0, 1.0}}.asDiagonal().toDenseMatrix());
  CHECK(mahalanobis_norm(Vector{{1.0, 1.0}}, a) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("mahalanobis_norm matches a naive triple loop") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const PDMatrix a = rng.pd(5);
    const Vector v = rng.vector(5);
    const double naive = std::sqrt(testing::naive_quad(v, a.product()));
    CHECK(std::abs(mahalanobis_norm(v, a) - naive) <= 1e-12 * std::max(1.0, naive));
  }
}

TEST_CASE("pd_from_factor adds the ridge") {
  const PDMatrix a = pd_from_factor(Matrix::Identity(2, 2));
  CHECK((a.product() - (1.0 + kPdRidge) * Matrix::Identity(2, 2)).norm() == 0.0);
  const PDMatrix b = pd_from_factor(Vector{{2.0, 3.0}}.asDiagonal().toDenseMatrix());
  CHECK(b.product()(0, 0) == 4.0 + kPdRidge);
  CHECK(b.product()(1, 1) == 9.0 + kPdRidge);
  CHECK(b.product()(0, 1) == 0.0);
}

TEST_CASE("pd_from_factor eigenvalue floor checked by Jacobi rotations") {
  // The oracle itself first: diagonal input returns its diagonal.
  auto known = testing::jacobi_eigenvalues(Vector{{3.0, 1.0, 2.0}}.asDiagonal().toDenseMatrix());
  std::sort(known.begin(), known.end());
  CHECK(known[0] == doctest::Approx(1.0));
  CHECK(known[2] == doctest::Approx(3.0));

  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    Matrix g = rng.matrix(4, 4);
    if (t % 4 == 0) g.row(3) = g.row(2);  // singular factor, ridge must carry the floor
    const PDMatrix a = pd_from_factor(g);
    const auto ev = testing::jacobi_eigenvalues(a.product());
    CHECK(*std::min_element(ev.begin(), ev.end()) >= kPdRidge * (1.0 - 1e-6));
    CHECK((a.product() - (testing::Rng::naive_gram(g) + kPdRidge * Matrix::Identity(4, 4))).norm() <= 1e-12);
    CHECK((a.product() - a.product().transpose()).norm() == 0.0);
    CHECK((a.root().transpose() * a.root() - a.product()).norm() <= 1e-10 * a.product().norm());
  }
}

TEST_CASE("PDMatrix rejects non-PD and non-finite input") {
  CHECK_THROWS_AS(PDMatrix::from_product(Vector{{1.0, -1.0}}.asDiagonal().toDenseMatrix()), Error);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pd_from_factor(bad), Error);
  CHECK_THROWS_AS(mahalanobis_norm(Vector{{1.0}}, PDMatrix::identity(2)), Error);
}

TEST_CASE("top_right_singular closed forms") {
  const SpectralTop a = top_right_singular(Vector{{2.0, 1.0}}.asDiagonal().toDenseMatrix());
  CHECK(a.sigma1 == doctest::Approx(2.0));
  CHECK((a.s1 - Vector{{1.0, 0.0}}).norm() <= 1e-12);
  CHECK(a.gap == doctest::Approx(1.0));
  const SpectralTop b = top_right_singular(Vector{{1.0, 3.0}}.asDiagonal().toDenseMatrix());
  CHECK(b.sigma1 == doctest::Approx(3.0));
  CHECK((b.s1 - Vector{{0.0, 1.0}}).norm() <= 1e-12);
}

TEST_CASE("top_right_singular beats 1e6 random unit vectors") {
  Rng rng(13);
  const Matrix a = rng.matrix(3, 4);
  const SpectralTop top = top_right_singular(a);
  double best = 0.0;
  for (int s = 0; s < 1000000; ++s) {
    best = std::max(best, testing::naive_matvec(a, rng.unit(4)).norm());
  }
  CHECK(best <= top.sigma1 + 1e-12);
  CHECK(top.sigma1 - best <= 1e-3);
}

TEST_CASE("top_right_singular invariants on 100 random matrices") {
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    const Matrix a = rng.matrix(rng.integer(1, 5), rng.integer(1, 5));
    const SpectralTop top = top_right_singular(a);
    CHECK(std::abs(top.s1.norm() - 1.0) <= 1e-10);
    CHECK(std::abs(testing::naive_matvec(a, top.s1).norm() - top.sigma1) <= 1e-8);
    CHECK(canonical_sign(top.s1) == top.s1);
    for (int s = 0; s < 100; ++s) {
      CHECK(testing::naive_matvec(a, rng.unit(a.cols())).norm() <= top.sigma1 + 1e-8);
    }
  }
}

TEST_CASE("canonical sign rule") {
  CHECK(canonical_sign(Vector{{0.5, -2.0}}) == Vector{{-0.5, 2.0}});
  // Ties go to the lowest index.
  CHECK(canonical_sign(Vector{{-1.0, 1.0}}) == Vector{{1.0, -1.0}});
  Rng rng(15);
  for (int t = 0; t < 100; ++t) {
    const Vector v = rng.vector(rng.integer(1, 6));
    const Vector once = canonical_sign(v);
    CHECK(canonical_sign(once) == once);
    CHECK(canonical_sign(-v) == once);
    Index arg = 0;
    once.cwiseAbs().maxCoeff(&arg);
    CHECK(once(arg) >= 0.0);
  }
}

TEST_CASE("complete_orthonormal contract") {
  CHECK((complete_orthonormal(Vector{{1.0, 0.0}}).col(0) - Vector{{1.0, 0.0}}).norm() == 0.0);
  const Matrix q3 = complete_orthonormal(Vector{{0.0, 1.0, 0.0}});
  CHECK((q3.col(0) - Vector{{0.0, 1.0, 0.0}}).norm() <= 1e-15);
  CHECK((q3.transpose() * q3 - Matrix::Identity(3, 3)).norm() <= 1e-10);
  Rng rng(16);
  for (int t = 0; t < 50; ++t) {
    const Vector u = rng.unit(6);
    const Matrix q = complete_orthonormal(u);
    CHECK((q.transpose() * q - Matrix::Identity(6, 6)).norm() < 1e-10);
    CHECK((q.col(0) - u).norm() <= 1e-12);
  }
}

TEST_CASE("matrix_normal_logpdf reductions") {
  const PDMatrix i1 = PDMatrix::identity(1);
  CHECK(matrix_normal_logpdf(Matrix::Zero(1, 1), Matrix::Zero(1, 1), i1, i1) ==
        doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-14));

  Rng rng(17);
  const PDMatrix i2 = PDMatrix::identity(2), i3 = PDMatrix::identity(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = rng.matrix(2, 3), mean = rng.matrix(2, 3);
    const double expected = -3.0 * kLog2Pi - 0.5 * testing::naive_sqnorm(x - mean);
    CHECK(std::abs(matrix_normal_logpdf(x, mean, i2, i3) - expected) <= 1e-10);
  }
}

TEST_CASE("matrix_normal_logpdf with diagonal covariances against the naive formula") {
  Rng rng(18);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = rng.matrix(2, 3), mean = rng.matrix(2, 3);
    Vector u(2), v(3);
    for (Index i = 0; i < 2; ++i) u(i) = rng.uniform(0.3, 3.0);
    for (Index j = 0; j < 3; ++j) v(j) = rng.uniform(0.3, 3.0);
    // tr(V⁻¹(X−M)ᵀU⁻¹(X−M)) with diagonal U, V.
    double trace = 0.0;
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 3; ++j) trace += std::pow(x(i, j) - mean(i, j), 2) / (u(i) * v(j));
    double log_det_u = 0.0, log_det_v = 0.0;
    for (Index i = 0; i < 2; ++i) log_det_u += std::log(u(i));
    for (Index j = 0; j < 3; ++j) log_det_v += std::log(v(j));
    const double naive = -0.5 * trace - 3.0 * kLog2Pi - 1.5 * log_det_u - 1.0 * log_det_v;
    const double got = matrix_normal_logpdf(x, mean, PDMatrix::from_product(u.asDiagonal().toDenseMatrix()),
                                            PDMatrix::from_product(v.asDiagonal().toDenseMatrix()));
    CHECK(std::abs(got - naive) <= 1e-10);
  }
}

TEST_CASE("gaussian_logpdf reductions and naive oracle") {
  CHECK(gaussian_logpdf(Vector{{0.7}}, Vector{{0.7}}, PDMatrix::identity(1)) ==
        doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-14));
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    const Vector v = rng.vector(4), mean = rng.vector(4);
    CHECK(std::abs(gaussian_logpdf(v, mean, PDMatrix::identity(4)) -
                   (-2.0 * kLog2Pi - 0.5 * (v - mean).squaredNorm())) <= 1e-10);
    Vector s(4);
    for (Index i = 0; i < 4; ++i) s(i) = rng.uniform(0.3, 3.0);
    double naive = -2.0 * kLog2Pi;
    for (Index i = 0; i < 4; ++i) naive -= 0.5 * (std::log(s(i)) + std::pow(v(i) - mean(i), 2) / s(i));
    CHECK(std::abs(gaussian_logpdf(v, mean, PDMatrix::from_product(s.asDiagonal().toDenseMatrix())) - naive) <=
          1e-10);
  }
}

TEST_CASE("identity-covariance log densities differ from -1/2 squared norm by a constant") {
  Rng rng(20);
  const PDMatrix i3 = PDMatrix::identity(3), i4 = PDMatrix::identity(4);
  for (int t = 0; t < 50; ++t) {
    const Matrix mean = rng.matrix(3, 4);
    const Matrix x1 = rng.matrix(3, 4), x2 = 5.0 * rng.matrix(3, 4);
    const double k1 = matrix_normal_logpdf(x1, mean, i3, i4) + 0.5 * testing::naive_sqnorm(x1 - mean);
    const double k2 = matrix_normal_logpdf(x2, mean, i3, i4) + 0.5 * testing::naive_sqnorm(x2 - mean);
    CHECK(std::abs(k1 - k2) <= 1e-10 * std::max(1.0, std::abs(k1)));
  }
}
