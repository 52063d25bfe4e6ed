// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hfdiff {

namespace {

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

// Twiddle table w[k] = exp(sign * 2 pi i k / n), k < n.
std::vector<Complex> twiddles(std::size_t n, bool inverse) {
    std::vector<Complex> w(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        w[k] = std::polar(1.0, angle);
    }
    return w;
}

void fft_radix2(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const std::vector<Complex> w = twiddles(n, inverse);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + len / 2] * w[k * stride];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

void dft_direct(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::vector<Complex> w = twiddles(n, inverse);
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a[j] * w[(k * j) % n];
        out[k] = acc;
    }
    a.swap(out);
}

void transform2(std::vector<Complex>& bins, std::size_t h, std::size_t w, bool inverse) {
    std::vector<Complex> line(w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) line[x] = bins[y * w + x];
        dft1(line, inverse);
        for (std::size_t x = 0; x < w; ++x) bins[y * w + x] = line[x];
    }
    line.resize(h);
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y = 0; y < h; ++y) line[y] = bins[y * w + x];
        dft1(line, inverse);
        for (std::size_t y = 0; y < h; ++y) bins[y * w + x] = line[y];
    }
}

}  // namespace

void dft1(std::vector<Complex>& data, bool inverse) {
    if (data.size() <= 1) return;
    if (is_power_of_two(data.size())) {
        fft_radix2(data, inverse);
    } else {
        dft_direct(data, inverse);
    }
}

Spectrum dft2(const Tensor& input) {
    if (input.rank() != 2) {
        throw std::invalid_argument("dft2: expected a 2-D tensor, got " + shape_string(input.shape()));
    }
    if (input.dim(0) == 0 || input.dim(1) == 0) throw std::invalid_argument("dft2: empty input");
    Spectrum s{input.dim(0), input.dim(1), std::vector<Complex>(input.size())};
    for (std::size_t i = 0; i < input.size(); ++i) s.bins[i] = input[i];
    transform2(s.bins, s.height, s.width, false);
    return s;
}

std::vector<Complex> idft2_complex(const Spectrum& spectrum) {
    if (spectrum.height == 0 || spectrum.width == 0 || spectrum.bins.size() != spectrum.height * spectrum.width) {
        throw std::invalid_argument("idft2: malformed spectrum");
    }
    std::vector<Complex> bins = spectrum.bins;
    transform2(bins, spectrum.height, spectrum.width, true);
    const double inv = 1.0 / static_cast<double>(bins.size());
    for (Complex& b : bins) b *= inv;
    return bins;
}

Tensor idft2(const Spectrum& spectrum) {
    const std::vector<Complex> bins = idft2_complex(spectrum);
    Tensor out(Shape{spectrum.height, spectrum.width});
    for (std::size_t i = 0; i < bins.size(); ++i) out[i] = bins[i].real();
    return out;
}

}  // namespace hfdiff
