// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfdiff/sampler.hpp"
#include "hfdiff/toy_denoiser.hpp"

namespace hfdiff::cli {

inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingInput = 3;
inline constexpr int kExitNumeric = 4;

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class MissingInputError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full default document. Its shape is the schema: a user file or override may only
/// name keys that exist here, with a value of the same JSON type.
nlohmann::json default_config();

/// Overlays `user` onto `base`. Throws ConfigError naming the dotted path of the first
/// unknown key or type mismatch. Integers are accepted where floats are expected.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& user, const std::string& where = "");

/// "a.b.c=value". The value is parsed as JSON when possible, else taken as a string.
nlohmann::json apply_override(const nlohmann::json& config, std::string_view assignment);

/// Defaults, then the file (if any), then the overrides in order.
nlohmann::json load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

/// Field access with a dotted path; throws ConfigError when absent.
const nlohmann::json& at_path(const nlohmann::json& config, std::string_view path);

SamplerConfig sampler_config(const nlohmann::json& config);
TrainConfig train_config(const nlohmann::json& config);

/// Run root: config "run_root" when non-empty, else $HFDIFF_RUN_ROOT, else "runs".
std::filesystem::path run_root(const nlohmann::json& config);

/// Creates {root}/{yyyymmdd-hhmmss}-{command}[-n] and writes config.json into it.
std::filesystem::path make_run_dir(const nlohmann::json& config, const std::string& command);

}  // namespace hfdiff::cli
