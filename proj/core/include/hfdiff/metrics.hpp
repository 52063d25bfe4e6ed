// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "hfdiff/highfreq.hpp"
#include "hfdiff/image.hpp"

namespace hfdiff {

/// Returned by psnr when the images are identical.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double hf_residual = 0.0;
};

double mse(const ImageBuffer& x, const ImageBuffer& y);
/// 10 log10(max^2 / MSE); identical images give kPsnrInfinity.
double psnr(const ImageBuffer& x, const ImageBuffer& y, double max_val = 1.0);

struct SsimOptions {
    std::size_t window = 8;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean SSIM over every window position (stride 1, uniform weights), averaged over
/// channels. Images smaller than the window use a single window covering everything.
double ssim(const ImageBuffer& x, const ImageBuffer& y, const SsimOptions& options = {});

/// ||F(x) - F(y)||_2.
double hf_residual(const ImageBuffer& x, const ImageBuffer& y, const HighPassSpec& spec = {});

MetricReport evaluate_metrics(const ImageBuffer& output, const ImageBuffer& target, const HighPassSpec& spec = {});

/// Copy of the [y0, y0 + h) x [x0, x0 + w) region.
ImageBuffer crop(const ImageBuffer& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

}  // namespace hfdiff
