// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfdiff/image.hpp"
#include "hfdiff/random.hpp"

namespace hfdiff {

// The apply_* functions reject physically meaningless parameters only (negative gain,
// airlight outside [0,1], ...). The documented ranges below are what draw_params
// samples from; neutral values such as gamma = 1 stay accepted so identities are testable.
// Every function clamps its result to [0, 1].

struct LowlightParams {
    double gamma = 3.0;        // drawn from [2, 5]
    double gain = 0.5;         // drawn from [0.3, 0.8]
    double noise_sigma = 0.02; // drawn from [0.01, 0.05]
};
/// clamp(gain * v^gamma + N(0, noise_sigma^2)), noise drawn per sample in planar order.
ImageBuffer apply_lowlight(const ImageBuffer& image, const LowlightParams& params, Prng& prng);

enum class DepthKind { ramp, radial };

struct HazeParams {
    double beta = 1.0;      // drawn from [0.5, 2.5]
    double airlight = 0.85; // drawn from [0.7, 1.0]
    DepthKind depth = DepthKind::ramp;
    double angle = 0.0;     // ramp direction in radians; radial ignores it
};
/// Depth normalised to [0, 1]. Ramp: projection on (cos a, sin a); radial: distance from centre.
Tensor depth_field(std::size_t height, std::size_t width, DepthKind kind, double angle);
/// I = J t + A (1 - t), t = exp(-beta * depth). depth is [H, W].
ImageBuffer apply_haze(const ImageBuffer& clean, double beta, double airlight, const Tensor& depth);
ImageBuffer apply_haze(const ImageBuffer& clean, const HazeParams& params);

struct SnowParams {
    double density = 0.01;   // flakes per pixel, drawn from [0.004, 0.02]
    double size_min = 0.6;   // flake semi-minor axis in pixels, range drawn inside [0.5, 2.0]
    double size_max = 1.4;
    double angle = 0.0;      // motion direction from vertical, drawn from [-0.6, 0.6]
    double streak = 1.5;     // semi-major / semi-minor ratio, drawn from [1, 3]
    double opacity = 0.85;   // drawn from [0.6, 1.0]
};
/// Alpha-composites white elliptical flakes elongated along the motion direction.
ImageBuffer apply_snow(const ImageBuffer& image, const SnowParams& params, Prng& prng);

struct WatermarkParams {
    std::string text = "SAMPLE"; // A-Z and space, drawn from a small word list
    double alpha = 0.5;          // drawn from [0.3, 0.7]
    std::size_t offset_x = 0;    // tile phase
    std::size_t offset_y = 0;
    std::size_t scale = 1;       // glyph pixel size, 1 or 2
};
/// Tiles the text (3x5 bitmap font) over the image and alpha-blends it in white.
ImageBuffer apply_watermark(const ImageBuffer& image, const WatermarkParams& params);
/// The 0/1 tiled coverage mask, [H, W].
Tensor watermark_mask(std::size_t height, std::size_t width, const WatermarkParams& params);

/// Rec.601 luma replicated to 3 channels.
ImageBuffer apply_grayscale(const ImageBuffer& image);

/// factor x factor box average, then nearest re-upsampling. factor in {2, 4}; H, W divisible.
ImageBuffer apply_downsample(const ImageBuffer& image, std::size_t factor);

// ---------------------------------------------------------------------------
// Task tags
// ---------------------------------------------------------------------------

/// Degradation tags, in canonical order.
const std::vector<std::string>& degradation_tasks();
bool is_degradation_task(std::string_view task);
/// "a+b+c" -> {"a", "b", "c"}; single tags give one element.
std::vector<std::string> split_task(std::string_view task);

/// Draws parameters for one degradation tag inside its documented ranges.
nlohmann::json draw_params(std::string_view task, Prng& prng);
/// Applies one degradation tag with explicit parameters.
ImageBuffer apply_task(std::string_view task, const ImageBuffer& image, const nlohmann::json& params, Prng& prng);

}  // namespace hfdiff
