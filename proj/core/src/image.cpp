// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/image.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hfdiff {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : ImageBuffer(Tensor(Shape{channels, height, width}, fill)) {}

ImageBuffer::ImageBuffer(Tensor planes) : planes_(std::move(planes)) {
    if (planes_.rank() != 3) {
        throw std::invalid_argument("image: expected a [C,H,W] tensor, got " + shape_string(planes_.shape()));
    }
    if (planes_.dim(0) != 1 && planes_.dim(0) != 3) {
        throw std::invalid_argument("image: channels must be 1 or 3, got " + std::to_string(planes_.dim(0)));
    }
    if (planes_.dim(1) == 0 || planes_.dim(2) == 0) {
        throw std::invalid_argument("image: empty spatial extent");
    }
}

std::span<double> ImageBuffer::plane(std::size_t c) {
    return planes_.data().subspan(c * pixel_count(), pixel_count());
}

std::span<const double> ImageBuffer::plane(std::size_t c) const {
    return planes_.data().subspan(c * pixel_count(), pixel_count());
}

ImageBuffer ImageBuffer::clamped() const {
    ImageBuffer out = *this;
    for (double& v : out.planes_.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

void require_same_geometry(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (!a.same_geometry(b)) {
        throw std::invalid_argument(std::string(what) + ": image shape mismatch " +
                                    shape_string(a.planes().shape()) + " vs " +
                                    shape_string(b.planes().shape()));
    }
}

Kernel::Kernel(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), taps(std::move(values)) {
    if (rows % 2 == 0 || cols % 2 == 0) {
        throw std::invalid_argument("kernel: side lengths must be odd, got " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    if (taps.size() != rows * cols) {
        throw std::invalid_argument("kernel: expected " + std::to_string(rows * cols) + " taps");
    }
}

namespace {

void check_kernel(const Kernel& k) {
    if (k.rows % 2 == 0 || k.cols % 2 == 0 || k.taps.size() != k.rows * k.cols) {
        throw std::invalid_argument("kernel: side lengths must be odd");
    }
}

// Copies one plane into a (H + 2rr) x (W + 2rc) buffer with the requested border.
void pad_plane(const double* src, std::size_t h, std::size_t w, std::size_t rr, std::size_t rc,
               Padding padding, std::vector<double>& dst) {
    const std::size_t pw = w + 2 * rc;
    const std::size_t ph = h + 2 * rr;
    dst.assign(ph * pw, 0.0);
    for (std::size_t py = 0; py < ph; ++py) {
        const long sy = static_cast<long>(py) - static_cast<long>(rr);
        if (padding == Padding::zero && (sy < 0 || sy >= static_cast<long>(h))) continue;
        const std::size_t y = clamp_index(sy, h);
        for (std::size_t px = 0; px < pw; ++px) {
            const long sx = static_cast<long>(px) - static_cast<long>(rc);
            if (padding == Padding::zero && (sx < 0 || sx >= static_cast<long>(w))) continue;
            dst[py * pw + px] = src[y * w + clamp_index(sx, w)];
        }
    }
}

}  // namespace

Tensor correlate_planes(const Tensor& planes, const Kernel& kernel, Padding padding) {
    check_kernel(kernel);
    if (planes.rank() != 3 || planes.empty()) {
        throw std::invalid_argument("correlate: expected a non-empty [C,H,W] tensor");
    }
    const std::size_t c_n = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
    const std::size_t rr = kernel.rows / 2, rc = kernel.cols / 2;
    const std::size_t pw = w + 2 * rc;
    Tensor out(planes.shape());
    std::vector<double> padded;
    for (std::size_t c = 0; c < c_n; ++c) {
        pad_plane(planes.raw() + c * h * w, h, w, rr, rc, padding, padded);
        double* dst = out.raw() + c * h * w;
        for (std::size_t i = 0; i < kernel.rows; ++i) {
            for (std::size_t j = 0; j < kernel.cols; ++j) {
                const double k = kernel.at(i, j);
                if (k == 0.0) continue;
                for (std::size_t y = 0; y < h; ++y) {
                    const double* row = padded.data() + (y + i) * pw + j;
                    double* orow = dst + y * w;
                    for (std::size_t x = 0; x < w; ++x) orow[x] += k * row[x];
                }
            }
        }
    }
    return out;
}

Tensor correlate_planes_adjoint(const Tensor& grad_out, const Kernel& kernel, Padding padding) {
    check_kernel(kernel);
    if (grad_out.rank() != 3 || grad_out.empty()) {
        throw std::invalid_argument("correlate adjoint: expected a non-empty [C,H,W] tensor");
    }
    const std::size_t c_n = grad_out.dim(0), h = grad_out.dim(1), w = grad_out.dim(2);
    const long rr = static_cast<long>(kernel.rows / 2), rc = static_cast<long>(kernel.cols / 2);
    Tensor out(grad_out.shape());
    for (std::size_t c = 0; c < c_n; ++c) {
        const double* g = grad_out.raw() + c * h * w;
        double* dst = out.raw() + c * h * w;
        for (std::size_t i = 0; i < kernel.rows; ++i) {
            for (std::size_t j = 0; j < kernel.cols; ++j) {
                const double k = kernel.at(i, j);
                if (k == 0.0) continue;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + static_cast<long>(i) - rr;
                    if (padding == Padding::zero && (sy < 0 || sy >= static_cast<long>(h))) continue;
                    const std::size_t yy = clamp_index(sy, h);
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = static_cast<long>(x) + static_cast<long>(j) - rc;
                        if (padding == Padding::zero && (sx < 0 || sx >= static_cast<long>(w))) continue;
                        dst[yy * w + clamp_index(sx, w)] += k * g[y * w + x];
                    }
                }
            }
        }
    }
    return out;
}

ImageBuffer conv2d(const ImageBuffer& input, const Kernel& kernel, Padding padding) {
    if (input.empty()) throw std::invalid_argument("conv2d: empty input");
    return ImageBuffer(correlate_planes(input.planes(), kernel, padding));
}

ImageBuffer conv2d(const ImageBuffer& input, std::span<const Kernel> per_channel, Padding padding) {
    if (input.empty()) throw std::invalid_argument("conv2d: empty input");
    if (per_channel.size() == 1) return conv2d(input, per_channel[0], padding);
    if (per_channel.size() != input.channels()) {
        throw std::invalid_argument("conv2d: " + std::to_string(per_channel.size()) + " kernels for " +
                                    std::to_string(input.channels()) + " channels");
    }
    const std::size_t h = input.height(), w = input.width();
    Tensor out(input.planes().shape());
    for (std::size_t c = 0; c < input.channels(); ++c) {
        Tensor plane(Shape{1, h, w}, std::vector<double>(input.plane(c).begin(), input.plane(c).end()));
        const Tensor r = correlate_planes(plane, per_channel[c], padding);
        std::copy(r.data().begin(), r.data().end(), out.data().begin() + static_cast<long>(c * h * w));
    }
    return ImageBuffer(std::move(out));
}

}  // namespace hfdiff
