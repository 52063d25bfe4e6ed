// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hfdiff/random.hpp"

namespace hfdiff {

/// Probability that a degradation instruction is replaced by an ambiguous prompt.
inline constexpr double kAmbiguousProbability = 0.1;

/// Paraphrases for one task tag. Removal and creation templates contain "{object}"
/// and are index-paired: removal[i] and creation[i] say opposite things.
const std::vector<std::string>& instruction_templates(std::string_view task);
/// Shared prompts that name no defect. These five are placeholders.
const std::vector<std::string>& ambiguous_prompts();
/// Object words used by the removal/creation pairs.
const std::vector<std::string>& object_names();

struct InstructionDraw {
    std::string text;
    bool ambiguous = false;
    std::size_t template_index = 0;  // meaningless when ambiguous
};

/// Degradation tags (also composites, joined with " and "): with probability 0.1 an
/// ambiguous prompt, else a uniform template per component. Removal/creation never
/// draw ambiguous prompts so that the pair stays invertible.
InstructionDraw draw_instruction(std::string_view task, Prng& prng, std::string_view object = "object");
std::string gen_instruction(std::string_view task, Prng& prng, std::string_view object = "object");

/// Fills "{object}" in template `index` of `task`.
std::string render_template(std::string_view task, std::size_t index, std::string_view object);

}  // namespace hfdiff
