// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Planar image: channel-major [C, H, W] storage with C in {1, 3}.
///
/// Values are nominally in [0, 1]. They are clamped only at I/O boundaries,
/// so intermediate decoder outputs may leave the range.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    /// Takes a [C, H, W] tensor.
    explicit ImageBuffer(Tensor planes);

    std::size_t height() const { return empty() ? 0 : planes_.dim(1); }
    std::size_t width() const { return empty() ? 0 : planes_.dim(2); }
    std::size_t channels() const { return empty() ? 0 : planes_.dim(0); }
    std::size_t pixel_count() const { return height() * width(); }
    bool empty() const { return planes_.empty(); }

    double& at(std::size_t c, std::size_t y, std::size_t x) { return planes_.at(c, y, x); }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return planes_.at(c, y, x); }

    std::span<double> plane(std::size_t c);
    std::span<const double> plane(std::size_t c) const;

    const Tensor& planes() const { return planes_; }
    Tensor& planes() { return planes_; }

    bool same_geometry(const ImageBuffer& other) const {
        return height() == other.height() && width() == other.width() && channels() == other.channels();
    }

    ImageBuffer clamped() const;

    bool operator==(const ImageBuffer&) const = default;

private:
    Tensor planes_;
};

void require_same_geometry(const ImageBuffer& a, const ImageBuffer& b, const char* what);

enum class Padding { zero, replicate };

/// Small odd-sized 2-D stencil, row-major.
struct Kernel {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> taps;

    Kernel() = default;
    Kernel(std::size_t r, std::size_t c, std::vector<double> values);

    double at(std::size_t i, std::size_t j) const { return taps[i * cols + j]; }
};

// All stencil operations in this library are correlations:
//   out(y, x) = sum_{i,j} k(i, j) * in(y + i - rr, x + j - rc)
// with rr = rows / 2, rc = cols / 2. Nothing flips the kernel.

/// Correlates every plane of a [C, H, W] tensor with the same kernel.
Tensor correlate_planes(const Tensor& planes, const Kernel& kernel, Padding padding);

/// Exact adjoint of correlate_planes for the same kernel and padding.
Tensor correlate_planes_adjoint(const Tensor& grad_out, const Kernel& kernel, Padding padding);

/// Same-size correlation of an image with one kernel per channel (or one shared kernel).
ImageBuffer conv2d(const ImageBuffer& input, const Kernel& kernel, Padding padding);
ImageBuffer conv2d(const ImageBuffer& input, std::span<const Kernel> per_channel, Padding padding);

/// Index of a possibly out-of-range coordinate under replicate padding.
inline std::size_t clamp_index(long i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= static_cast<long>(n)) return n - 1;
    return static_cast<std::size_t>(i);
}

}  // namespace hfdiff
