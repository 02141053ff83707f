// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal reverse-mode tape over scalars.
//
// A Var is a value plus an index into the thread's active tape; index -1
// marks a constant that never gets a node. Every node stores its parents and
// the local partial derivative towards each of them, so the reverse sweep is
// a single pass over a flat edge list. Multi-input nodes (dot products) keep
// the tape small enough to unroll a few hundred inner PGD steps.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace advinfer::ad {

struct Var {
  double value = 0.0;
  std::int32_t index = -1;

  Var() = default;
  Var(double v) : value(v) {}  // NOLINT: constants convert implicitly
  Var(double v, std::int32_t i) : value(v), index(i) {}

  bool is_constant() const { return index < 0; }
};

class Tape {
 public:
  Tape() { offsets_.push_back(0); }

  Var variable(double value);
  void clear();
  std::size_t size() const { return offsets_.size() - 1; }

  /// Adjoint of every node with respect to `output`.
  std::vector<double> gradient(const Var& output) const;

  // Node construction; parents with index < 0 are dropped.
  Var unary(double value, const Var& a, double da);
  Var binary(double value, const Var& a, double da, const Var& b, double db);
  Var nary(double value, std::span<const std::int32_t> parents, std::span<const double> partials);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
};

/// The tape new nodes are recorded on (per thread).
Tape* active_tape();

/// Installs a tape as active for the current thread for the scope's lifetime.
class ActiveTape {
 public:
  explicit ActiveTape(Tape& tape);
  ~ActiveTape();
  ActiveTape(const ActiveTape&) = delete;
  ActiveTape& operator=(const ActiveTape&) = delete;

 private:
  Tape* previous_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);

/// Σ a[i·stride_a]·b[i·stride_b] as one node.
Var dot(const Var* a, std::ptrdiff_t stride_a, const Var* b, std::ptrdiff_t stride_b,
        std::size_t n);
/// Σ v[i] as one node.
Var sum(std::span<const Var> v);

}  // namespace advinfer::ad

namespace advinfer {

// Scalar-generic helpers so numeric kernels can be written once for double
// and ad::Var.
inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.value; }

inline double square(double x) { return x * x; }

inline double dot(const double* a, std::ptrdiff_t stride_a, const double* b,
                  std::ptrdiff_t stride_b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += a[static_cast<std::ptrdiff_t>(i) * stride_a] * b[static_cast<std::ptrdiff_t>(i) * stride_b];
  }
  return acc;
}

inline double sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

/// Returns whichever of value / lo / hi is selected; for Vars the selected
/// node is passed through, which routes the (sub)gradient correctly.
template <class T>
T clamp_select(const T& v, const T& lo, const T& hi) {
  if (value_of(v) < value_of(lo)) return lo;
  if (value_of(v) > value_of(hi)) return hi;
  return v;
}

template <class T>
T min_select(const T& a, const T& b) {
  return value_of(b) < value_of(a) ? b : a;
}

template <class T>
T max_select(const T& a, const T& b) {
  return value_of(b) > value_of(a) ? b : a;
}

}  // namespace advinfer
