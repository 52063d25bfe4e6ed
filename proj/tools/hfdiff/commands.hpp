// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

namespace hfdiff::cli {

/// Each command creates its run directory, writes its outputs there and prints
/// "key=value" lines to `out`. Errors propagate as exceptions.
void cmd_synthesize(const nlohmann::json& config, std::ostream& out);
void cmd_train_toy(const nlohmann::json& config, std::ostream& out);
void cmd_sample(const nlohmann::json& config, std::ostream& out);
void cmd_eval(const nlohmann::json& config, std::ostream& out);
/// Returns false when any suite exceeds its tolerance.
bool cmd_gradcheck(const nlohmann::json& config, std::ostream& out);
void cmd_plot_decay(const nlohmann::json& config, std::ostream& out);

/// Parses argv, dispatches, and maps failures to exit codes with one
/// "error code=N kind=K message=\"...\"" line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hfdiff::cli
