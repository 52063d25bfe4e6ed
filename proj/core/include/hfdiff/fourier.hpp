// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

using Complex = std::complex<double>;

/// Row-major H x W complex spectrum. Bin (u, v) is frequency u along rows, v along columns.
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Complex> bins;

    Complex& at(std::size_t u, std::size_t v) { return bins[u * width + v]; }
    const Complex& at(std::size_t u, std::size_t v) const { return bins[u * width + v]; }
};

// Normalization: forward is unnormalized, X(u,v) = sum x(y,x) e^{-2 pi i (uy/H + vx/W)};
// inverse carries the 1/(H*W) factor.

/// Forward 2-D DFT of a real [H, W] tensor.
Spectrum dft2(const Tensor& input);

/// Inverse 2-D DFT. The imaginary residue is dropped; callers that care can use idft2_complex.
Tensor idft2(const Spectrum& spectrum);
std::vector<Complex> idft2_complex(const Spectrum& spectrum);

/// In-place 1-D transform of arbitrary length (radix-2 for powers of two, direct otherwise).
void dft1(std::vector<Complex>& data, bool inverse);

}  // namespace hfdiff
