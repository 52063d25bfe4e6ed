// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Seeded generator: std::mt19937_64 (its output sequence is fixed by the C++ standard),
/// with our own uniform and Box-Muller transforms because the standard distributions
/// are implementation-defined.
///
/// Single owner. Code that fans out derives child generators with split_seed.
class Prng {
public:
    explicit Prng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    /// 53-bit uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller; draws come in pairs and the sine half is cached.
    double gaussian();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// splitmix64 finalizer, used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for stream `index` of `master`. Independent of how many streams exist.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

/// Tensor of i.i.d. N(0, 1) draws in row-major order.
Tensor gaussian(Prng& prng, const Shape& shape);

}  // namespace hfdiff
