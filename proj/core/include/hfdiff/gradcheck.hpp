// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-12);

/// Central finite differences of a scalar function with respect to one tensor argument.
Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& at, double h = 1e-5);

struct GradCheckResult {
    std::string name;
    double worst_relative_error = 0.0;
    double tolerance = 0.0;
    int instances = 0;
    bool passed() const { return worst_relative_error < tolerance; }
};

/// Finite-difference suites used by the gradcheck command and the acceptance tests.
/// Each runs `instances` random problems derived from `seed`.
GradCheckResult check_tape_primitives(std::uint64_t seed, int instances);
GradCheckResult check_tape_compositions(std::uint64_t seed, int instances);
GradCheckResult check_fidelity_grad(std::uint64_t seed, int instances);
GradCheckResult check_lora_grad(std::uint64_t seed, int instances);

std::vector<GradCheckResult> run_all_gradchecks(std::uint64_t seed, int instances);

}  // namespace hfdiff
