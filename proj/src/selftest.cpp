// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "advinfer/error.hpp"
#include "advinfer/experiments.hpp"
#include "advinfer/identifiability.hpp"
#include "advinfer/inference.hpp"
#include "advinfer/priors.hpp"

namespace advinfer {

namespace {

using Rng = std::mt19937_64;

Matrix gaussian_matrix(Rng& rng, Index r, Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  }
  return m;
}

LinearAttacker random_linear(Rng& rng, Index d, Index q) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const Matrix I_d = Matrix::Identity(d, d);
  const Matrix I_q = Matrix::Identity(q, q);
  return LinearAttacker{gaussian_matrix(rng, q, d),
                        pd_from_factor(I_d + 0.5 * gaussian_matrix(rng, d, d)), u(rng),
                        pd_from_factor(I_q + 0.5 * gaussian_matrix(rng, q, q))};
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

SelftestCheck check_linear_oracle(Rng& rng) {
  double worst_gap = -1e300, worst_norm = 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Index d = 2 + t % 2, q = 2 + (t / 2) % 2;
    const LinearAttacker a = random_linear(rng, d, q);
    const Vector alpha = optimal_attack_linear(a);
    const double best = linear_attack_objective(a, alpha);
    worst_norm = std::max(worst_norm, std::abs(mahalanobis_norm(alpha, a.C) - a.c));
    for (int s = 0; s < 10000; ++s) {
      Vector v(d);
      for (Index i = 0; i < d; ++i) v(i) = n(rng);
      v *= a.c / std::sqrt(v.dot(a.C.product() * v));
      worst_gap = std::max(worst_gap, (v.transpose() * a.M.transpose() * a.W.product() * a.M * v)(0) - best);
    }
  }
  return {"linear attack vs boundary sampling", worst_gap <= 1e-6 && worst_norm <= 1e-8,
          fmt("max sampled excess %.3g, max |‖α‖_C - c| %.3g", worst_gap, worst_norm)};
}

double sign_free_distance(const Vector& a, const Vector& b) {
  return std::min((a - b).norm(), (a + b).norm());
}

SelftestCheck check_identifiability(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Index d = 3, q = 3;
    const LinearAttacker base = random_linear(rng, d, q);
    Vector alpha = gaussian_matrix(rng, d, 1).col(0);
    alpha *= base.c / mahalanobis_norm(alpha, base.C);

    LinearAttacker obj = base;
    obj.W = construct_objective(alpha, base.M, base.C, base.c);
    worst = std::max(worst, sign_free_distance(optimal_attack_linear(obj), alpha));

    LinearAttacker know = base;
    know.M = construct_knowledge(alpha, base.C, base.c, base.W);
    worst = std::max(worst, sign_free_distance(optimal_attack_linear(know), alpha));

    auto [C, c] = construct_capability(alpha, base.M, base.W);
    const LinearAttacker cap{base.M, C, c, base.W};
    const MembershipReport rep = verify_membership(cap, alpha, 1000, 1e-8, t);
    if (!rep.is_member) worst = std::max(worst, rep.gap);
  }
  return {"identifiability constructions", worst <= 1e-6, fmt("max deviation %.3g", worst)};
}

SelftestCheck check_density_reduction(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Index r = 3, c = 4;
    const Matrix mean = gaussian_matrix(rng, r, c);
    const PDMatrix Ir = PDMatrix::identity(r), Ic = PDMatrix::identity(c);
    auto gap = [&](const Matrix& x) {
      return matrix_normal_logpdf(x, mean, Ir, Ic) + 0.5 * (x - mean).squaredNorm();
    };
    worst = std::max(worst, std::abs(gap(gaussian_matrix(rng, r, c)) - gap(gaussian_matrix(rng, r, c))));
    const Vector mv = gaussian_matrix(rng, c, 1).col(0);
    auto vgap = [&](const Vector& v) {
      return gaussian_logpdf(v, mv, Ic) + 0.5 * (v - mv).squaredNorm();
    };
    worst = std::max(worst, std::abs(vgap(gaussian_matrix(rng, c, 1).col(0)) -
                                     vgap(gaussian_matrix(rng, c, 1).col(0))));
  }
  return {"density reductions", worst <= 1e-10, fmt("max constant drift %.3g", worst)};
}

SelftestCheck check_grid_oracle(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = -1e300;
  for (int t = 0; t < 3; ++t) {
    const Matrix M = 2.0 * gaussian_matrix(rng, 3, 2);
    const Vector x = gaussian_matrix(rng, 2, 1).col(0);
    const Vector c1 = -Vector::NullaryExpr(2, [&] { return u(rng); });
    const Vector c2 = Vector::NullaryExpr(2, [&] { return u(rng); });
    const int target = t % 3;
    const BoxAttacker a{LogisticModel{M}, c1, c2, target};
    const Vector alpha = optimal_attack_box(a, x, PGDConfig{});
    const double got = class_probabilities(a.model, x + alpha)(target);
    double best = 0.0;
    for (int i = 0; i <= 200; ++i) {
      for (int j = 0; j <= 200; ++j) {
        Vector g(2);
        g(0) = c1(0) + (c2(0) - c1(0)) * i / 200.0;
        g(1) = c1(1) + (c2(1) - c1(1)) * j / 200.0;
        best = std::max(best, class_probabilities(a.model, x + g)(target));
      }
    }
    worst = std::max(worst, best - got);
  }
  return {"box attack vs grid search", worst <= 1e-3, fmt("max grid excess %.3g", worst)};
}

SelftestCheck check_unrolled_gradient(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 3; ++t) {
    const Index d = 3, q = 3;
    const ModelBelief star = LogisticModel{gaussian_matrix(rng, q, d)};
    const Vector x = gaussian_matrix(rng, d, 1).col(0);
    const Vector alpha_obs = 0.3 * gaussian_matrix(rng, d, 1).col(0);
    const BoxPrior prior = build_box_prior(alpha_obs, star, x);
    BoxParams p{LogisticModel{std::get<LogisticModel>(star).M + 0.3 * gaussian_matrix(rng, q, d)},
                prior.muC1 - Vector::Constant(d, 0.2), prior.muC2 + Vector::Constant(d, 0.2),
                prior.muZ};
    PGDConfig inner;
    inner.steps = 20;
    inner.backtracking = false;
    const int target = t % 3;
    const auto g_ad = outer_objective_box_unrolled(p, alpha_obs, x, prior, 0.1, inner, target);
    const auto g_fd = outer_objective_box_finite_diff(p, alpha_obs, x, prior, 0.1, inner, 1e-4, target);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g_ad.gradient.size(); ++i) {
      num += std::pow(g_ad.gradient[i] - g_fd.gradient[i], 2);
      den += std::pow(g_fd.gradient[i], 2);
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  return {"unrolled gradient vs finite differences", worst <= 1e-3, fmt("max relative error %.3g", worst)};
}

SelftestCheck check_per_examples() {
  const bool ok = per(10, 1) == 90.0 && per(10, 10) == 0.0 && per(10, 0) == 100.0;
  bool threw = false;
  try {
    per(0, 1);
  } catch (const Error&) {
    threw = true;
  }
  return {"PER examples", ok && threw, ok && threw ? "ok" : "mismatch"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::function<SelftestCheck()>> checks = {
      [&] { return check_linear_oracle(rng); },  [&] { return check_identifiability(rng); },
      [&] { return check_density_reduction(rng); }, [&] { return check_grid_oracle(rng); },
      [&] { return check_unrolled_gradient(rng); }, [] { return check_per_examples(); },
  };
  std::vector<SelftestCheck> out;
  for (const auto& check : checks) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({"(check raised)", false, e.what()});
    }
  }
  return out;
}

}  // namespace advinfer
