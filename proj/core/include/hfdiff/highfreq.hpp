// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hfdiff/image.hpp"
#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Ideal (hard) high-pass: a bin survives when its radius, measured as a fraction of
/// the Nyquist radius, is strictly above cutoff_fraction. The DC bin never survives.
struct HighPassSpec {
    double cutoff_fraction = 0.25;

    void validate() const;
};

/// 0/1 mask of shape [H, W] in DFT bin order. Symmetric under (u, v) -> (-u, -v),
/// so filtered real images stay real.
Tensor highpass_mask(std::size_t height, std::size_t width, const HighPassSpec& spec);

/// F(.) applied per plane of a [C, H, W] tensor.
Tensor fourier_highpass(const Tensor& planes, const HighPassSpec& spec);
ImageBuffer fourier_highpass(const ImageBuffer& image, const HighPassSpec& spec);

/// Adjoint of F. The mask is real and even, so F is self-adjoint and this equals F.
Tensor fourier_highpass_adjoint(const Tensor& planes, const HighPassSpec& spec);

const Kernel& sobel_x_kernel();
const Kernel& sobel_y_kernel();

/// S(.): replicate-padded correlation with G_x and G_y. Output is [2C, H, W] with
/// plane 2c holding the G_x response of channel c and plane 2c + 1 the G_y response.
Tensor sobel(const Tensor& planes);
Tensor sobel(const ImageBuffer& image);

/// Adjoint of S: maps a [2C, H, W] response back to [C, H, W].
Tensor sobel_adjoint(const Tensor& response);

struct FidelityOptions {
    HighPassSpec highpass;
    bool use_fourier = true;
    bool use_sobel = true;
};

/// L(I, J) = ||F(I) - F(J)||^2 + ||S(I) - S(J)||^2, summed over every pixel and channel.
double fidelity_loss(const ImageBuffer& reference, const ImageBuffer& candidate, const FidelityOptions& options = {});

/// dL/dJ = 2 F^T(F(J) - F(I)) + 2 S^T(S(J) - S(I)), shaped like the candidate's planes.
Tensor fidelity_grad(const ImageBuffer& reference, const ImageBuffer& candidate, const FidelityOptions& options = {});

}  // namespace hfdiff
