// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/highfreq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hfdiff/fourier.hpp"

namespace hfdiff {

void HighPassSpec::validate() const {
    if (!(cutoff_fraction > 0.0 && cutoff_fraction < 1.0)) {
        throw std::invalid_argument("high-pass: cutoff_fraction must lie in (0, 1), got " +
                                    std::to_string(cutoff_fraction));
    }
}

Tensor highpass_mask(std::size_t height, std::size_t width, const HighPassSpec& spec) {
    spec.validate();
    Tensor mask(Shape{height, width});
    for (std::size_t u = 0; u < height; ++u) {
        const double fu = static_cast<double>(std::min(u, height - u)) / static_cast<double>(height);
        for (std::size_t v = 0; v < width; ++v) {
            const double fv = static_cast<double>(std::min(v, width - v)) / static_cast<double>(width);
            // Normalised so the Nyquist frequency along one axis has radius 1.
            const double radius = std::sqrt(fu * fu + fv * fv) / 0.5;
            mask.at(u, v) = radius > spec.cutoff_fraction ? 1.0 : 0.0;
        }
    }
    mask.at(0, 0) = 0.0;
    return mask;
}

Tensor fourier_highpass(const Tensor& planes, const HighPassSpec& spec) {
    if (planes.rank() != 3) throw std::invalid_argument("fourier_highpass: expected [C,H,W]");
    const std::size_t c_n = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
    const Tensor mask = highpass_mask(h, w, spec);
    Tensor out(planes.shape());
    for (std::size_t c = 0; c < c_n; ++c) {
        Tensor plane(Shape{h, w}, std::vector<double>(planes.data().begin() + static_cast<long>(c * h * w),
                                                      planes.data().begin() + static_cast<long>((c + 1) * h * w)));
        Spectrum s = dft2(plane);
        for (std::size_t i = 0; i < s.bins.size(); ++i) s.bins[i] *= mask[i];
        const Tensor filtered = idft2(s);
        std::copy(filtered.data().begin(), filtered.data().end(), out.data().begin() + static_cast<long>(c * h * w));
    }
    return out;
}

ImageBuffer fourier_highpass(const ImageBuffer& image, const HighPassSpec& spec) {
    return ImageBuffer(fourier_highpass(image.planes(), spec));
}

Tensor fourier_highpass_adjoint(const Tensor& planes, const HighPassSpec& spec) {
    return fourier_highpass(planes, spec);
}

const Kernel& sobel_x_kernel() {
    static const Kernel k(3, 3, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
    return k;
}

const Kernel& sobel_y_kernel() {
    static const Kernel k(3, 3, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
    return k;
}

Tensor sobel(const Tensor& planes) {
    if (planes.rank() != 3) throw std::invalid_argument("sobel: expected [C,H,W]");
    const std::size_t c_n = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
    const Tensor gx = correlate_planes(planes, sobel_x_kernel(), Padding::replicate);
    const Tensor gy = correlate_planes(planes, sobel_y_kernel(), Padding::replicate);
    Tensor out(Shape{2 * c_n, h, w});
    const std::size_t n = h * w;
    for (std::size_t c = 0; c < c_n; ++c) {
        std::copy_n(gx.raw() + c * n, n, out.raw() + (2 * c) * n);
        std::copy_n(gy.raw() + c * n, n, out.raw() + (2 * c + 1) * n);
    }
    return out;
}

Tensor sobel(const ImageBuffer& image) { return sobel(image.planes()); }

Tensor sobel_adjoint(const Tensor& response) {
    if (response.rank() != 3 || response.dim(0) % 2 != 0) {
        throw std::invalid_argument("sobel_adjoint: expected [2C,H,W]");
    }
    const std::size_t c_n = response.dim(0) / 2, h = response.dim(1), w = response.dim(2);
    const std::size_t n = h * w;
    Tensor gx(Shape{c_n, h, w}), gy(Shape{c_n, h, w});
    for (std::size_t c = 0; c < c_n; ++c) {
        std::copy_n(response.raw() + (2 * c) * n, n, gx.raw() + c * n);
        std::copy_n(response.raw() + (2 * c + 1) * n, n, gy.raw() + c * n);
    }
    return correlate_planes_adjoint(gx, sobel_x_kernel(), Padding::replicate) +
           correlate_planes_adjoint(gy, sobel_y_kernel(), Padding::replicate);
}

double fidelity_loss(const ImageBuffer& reference, const ImageBuffer& candidate, const FidelityOptions& options) {
    require_same_geometry(reference, candidate, "fidelity_loss");
    const Tensor diff = candidate.planes() - reference.planes();
    double loss = 0.0;
    // Both operators are linear, so F(J) - F(I) == F(J - I).
    if (options.use_fourier) loss += fourier_highpass(diff, options.highpass).squared_norm();
    if (options.use_sobel) loss += sobel(diff).squared_norm();
    return loss;
}

Tensor fidelity_grad(const ImageBuffer& reference, const ImageBuffer& candidate, const FidelityOptions& options) {
    require_same_geometry(reference, candidate, "fidelity_grad");
    const Tensor diff = candidate.planes() - reference.planes();
    Tensor grad(diff.shape());
    if (options.use_fourier) {
        grad += fourier_highpass_adjoint(fourier_highpass(diff, options.highpass), options.highpass) * 2.0;
    }
    if (options.use_sobel) grad += sobel_adjoint(sobel(diff)) * 2.0;
    return grad;
}

}  // namespace hfdiff
