// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace advinfer {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick oracle checks (a few seconds): analytic attack against boundary
/// sampling, identifiability round-trips, density reductions, PGD against a
/// grid search, unrolled gradients against finite differences, PER examples.
std::vector<SelftestCheck> run_selftest(std::uint64_t seed = 0);

}  // namespace advinfer
