// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/autodiff.hpp"

#include <array>
#include <cassert>

#include "advinfer/error.hpp"

namespace advinfer::ad {

namespace {

thread_local Tape* g_active = nullptr;

Tape& tape_or_fail() {
  if (g_active == nullptr) fail(ErrorCode::kInvalidArgument, "autodiff: no active tape");
  return *g_active;
}

}  // namespace

Tape* active_tape() { return g_active; }

ActiveTape::ActiveTape(Tape& tape) : previous_(g_active) { g_active = &tape; }
ActiveTape::~ActiveTape() { g_active = previous_; }

Var Tape::variable(double value) {
  offsets_.push_back(parents_.size());
  return Var(value, static_cast<std::int32_t>(size() - 1));
}

void Tape::clear() {
  offsets_.assign(1, 0);
  parents_.clear();
  partials_.clear();
}

Var Tape::unary(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  parents_.push_back(a.index);
  partials_.push_back(da);
  offsets_.push_back(parents_.size());
  return Var(value, static_cast<std::int32_t>(size() - 1));
}

Var Tape::binary(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  if (!a.is_constant()) {
    parents_.push_back(a.index);
    partials_.push_back(da);
  }
  if (!b.is_constant()) {
    parents_.push_back(b.index);
    partials_.push_back(db);
  }
  offsets_.push_back(parents_.size());
  return Var(value, static_cast<std::int32_t>(size() - 1));
}

Var Tape::nary(double value, std::span<const std::int32_t> parents,
               std::span<const double> partials) {
  assert(parents.size() == partials.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] < 0) continue;
    parents_.push_back(parents[i]);
    partials_.push_back(partials[i]);
    ++kept;
  }
  if (kept == 0) return Var(value);
  offsets_.push_back(parents_.size());
  return Var(value, static_cast<std::int32_t>(size() - 1));
}

std::vector<double> Tape::gradient(const Var& output) const {
  std::vector<double> adjoint(size(), 0.0);
  if (output.is_constant()) return adjoint;
  adjoint[static_cast<std::size_t>(output.index)] = 1.0;
  for (std::size_t node = static_cast<std::size_t>(output.index) + 1; node-- > 0;) {
    const double a = adjoint[node];
    if (a == 0.0) continue;
    for (std::size_t e = offsets_[node]; e < offsets_[node + 1]; ++e) {
      adjoint[static_cast<std::size_t>(parents_[e])] += a * partials_[e];
    }
  }
  return adjoint;
}

// ---------------------------------------------------------------------------

Var operator+(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value + b.value);
  return tape_or_fail().binary(a.value + b.value, a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value - b.value);
  return tape_or_fail().binary(a.value - b.value, a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value * b.value);
  // Multiplying by an exact constant zero cuts the dependency.
  if ((a.is_constant() && a.value == 0.0) || (b.is_constant() && b.value == 0.0)) return Var(0.0);
  return tape_or_fail().binary(a.value * b.value, a, b.value, b, a.value);
}

Var operator/(const Var& a, const Var& b) {
  const double q = a.value / b.value;
  if (a.is_constant() && b.is_constant()) return Var(q);
  return tape_or_fail().binary(q, a, 1.0 / b.value, b, -q / b.value);
}

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value);
  return tape_or_fail().unary(-a.value, a, -1.0);
}

Var exp(const Var& a) {
  const double e = std::exp(a.value);
  if (a.is_constant()) return Var(e);
  return tape_or_fail().unary(e, a, e);
}

Var log(const Var& a) {
  const double l = std::log(a.value);
  if (a.is_constant()) return Var(l);
  return tape_or_fail().unary(l, a, 1.0 / a.value);
}

Var tanh(const Var& a) {
  const double t = std::tanh(a.value);
  if (a.is_constant()) return Var(t);
  return tape_or_fail().unary(t, a, 1.0 - t * t);
}

Var square(const Var& a) {
  if (a.is_constant()) return Var(a.value * a.value);
  return tape_or_fail().unary(a.value * a.value, a, 2.0 * a.value);
}

Var dot(const Var* a, std::ptrdiff_t stride_a, const Var* b, std::ptrdiff_t stride_b,
        std::size_t n) {
  thread_local std::vector<std::int32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Var& x = a[static_cast<std::ptrdiff_t>(i) * stride_a];
    const Var& y = b[static_cast<std::ptrdiff_t>(i) * stride_b];
    value += x.value * y.value;
    if (!x.is_constant()) {
      parents.push_back(x.index);
      partials.push_back(y.value);
    }
    if (!y.is_constant()) {
      parents.push_back(y.index);
      partials.push_back(x.value);
    }
  }
  if (parents.empty()) return Var(value);
  return tape_or_fail().nary(value, parents, partials);
}

Var sum(std::span<const Var> v) {
  thread_local std::vector<std::int32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  double value = 0.0;
  for (const Var& x : v) {
    value += x.value;
    if (!x.is_constant()) {
      parents.push_back(x.index);
      partials.push_back(1.0);
    }
  }
  if (parents.empty()) return Var(value);
  return tape_or_fail().nary(value, parents, partials);
}

}  // namespace advinfer::ad
