// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Named tensors, written in key order.
using TensorMap = std::map<std::string, Tensor>;

inline constexpr std::uint32_t kWeightsVersion = 1;

struct WeightsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Layout (little-endian): "HFDW", u32 version, u32 count, then per tensor:
// u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)].
void save_tensors(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_tensors(const std::filesystem::path& path);

/// Fetches `name` and checks its shape. Throws WeightsError on absence or mismatch.
const Tensor& require_tensor(const TensorMap& tensors, const std::string& name, const Shape& expected);

/// FNV-1a over names, shapes and raw value bytes. Used to prove weights were not mutated.
std::uint64_t checksum(const TensorMap& tensors);

}  // namespace hfdiff
