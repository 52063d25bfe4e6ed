// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hfdiff {

double mse(const ImageBuffer& x, const ImageBuffer& y) {
    require_same_geometry(x, y, "mse");
    if (x.empty()) throw std::invalid_argument("mse: empty images");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.planes().size(); ++i) {
        const double d = x.planes()[i] - y.planes()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.planes().size());
}

double psnr(const ImageBuffer& x, const ImageBuffer& y, double max_val) {
    if (!(max_val > 0.0)) throw std::invalid_argument("psnr: max_val must be positive");
    const double e = mse(x, y);
    if (e == 0.0) return kPsnrInfinity;
    return 10.0 * std::log10(max_val * max_val / e);
}

namespace {

// Symmetric in (a, b) term by term so ssim(x, y) == ssim(y, x) bit for bit.
double window_ssim(std::span<const double> a, std::span<const double> b, std::size_t width, std::size_t y0,
                   std::size_t x0, std::size_t wh, std::size_t ww, const SsimOptions& o) {
    double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < wh; ++i) {
        for (std::size_t j = 0; j < ww; ++j) {
            const double va = a[(y0 + i) * width + x0 + j];
            const double vb = b[(y0 + i) * width + x0 + j];
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
    }
    const double n = static_cast<double>(wh * ww);
    const double ma = sa / n, mb = sb / n;
    const double va = saa / n - ma * ma;
    const double vb = sbb / n - mb * mb;
    const double cov = sab / n - ma * mb;
    const double num = (2.0 * ma * mb + o.c1) * (2.0 * cov + o.c2);
    const double den = (ma * ma + mb * mb + o.c1) * (va + vb + o.c2);
    return num / den;
}

}  // namespace

double ssim(const ImageBuffer& x, const ImageBuffer& y, const SsimOptions& o) {
    require_same_geometry(x, y, "ssim");
    if (x.empty()) throw std::invalid_argument("ssim: empty images");
    if (o.window == 0) throw std::invalid_argument("ssim: window must be positive");
    const std::size_t h = x.height(), w = x.width();
    const std::size_t wh = std::min(o.window, h), ww = std::min(o.window, w);
    double total = 0.0;
    for (std::size_t c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t y0 = 0; y0 + wh <= h; ++y0) {
            for (std::size_t x0 = 0; x0 + ww <= w; ++x0) {
                acc += window_ssim(x.plane(c), y.plane(c), w, y0, x0, wh, ww, o);
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(x.channels());
}

double hf_residual(const ImageBuffer& x, const ImageBuffer& y, const HighPassSpec& spec) {
    require_same_geometry(x, y, "hf_residual");
    Tensor diff = x.planes() - y.planes();
    return fourier_highpass(diff, spec).norm();
}

MetricReport evaluate_metrics(const ImageBuffer& output, const ImageBuffer& target, const HighPassSpec& spec) {
    return {psnr(output, target), ssim(output, target), hf_residual(output, target, spec)};
}

ImageBuffer crop(const ImageBuffer& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    if (y0 + h > image.height() || x0 + w > image.width() || h == 0 || w == 0) {
        throw std::invalid_argument("crop: region outside the image");
    }
    ImageBuffer out(h, w, image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
    return out;
}

}  // namespace hfdiff
