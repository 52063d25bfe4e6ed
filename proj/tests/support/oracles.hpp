// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations. Nothing here calls into the library's
// numerical kernels; they are written from the definitions.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "hfdiff/image.hpp"
#include "hfdiff/random.hpp"
#include "hfdiff/tensor.hpp"

namespace oracle {

using hfdiff::Kernel;
using hfdiff::Padding;
using hfdiff::Shape;
using hfdiff::Tensor;

inline Tensor uniform(hfdiff::Prng& prng, const Shape& shape, double lo = 0.0, double hi = 1.0) {
    Tensor t(shape);
    for (double& v : t.data()) v = prng.uniform(lo, hi);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double inner(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Correlation of every plane of [C,H,W] with an odd kernel.
inline Tensor correlate(const Tensor& x, const Kernel& k, Padding pad) {
    const long C = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)), W = static_cast<long>(x.dim(2));
    const long rr = static_cast<long>(k.rows) / 2, rc = static_cast<long>(k.cols) / 2;
    Tensor out(x.shape());
    for (long c = 0; c < C; ++c) {
        for (long y = 0; y < H; ++y) {
            for (long xx = 0; xx < W; ++xx) {
                double acc = 0.0;
                for (long i = -rr; i <= rr; ++i) {
                    for (long j = -rc; j <= rc; ++j) {
                        long sy = y + i, sx = xx + j;
                        if (pad == Padding::zero) {
                            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                        } else {
                            sy = std::clamp(sy, 0L, H - 1);
                            sx = std::clamp(sx, 0L, W - 1);
                        }
                        acc += k.taps[static_cast<std::size_t>((i + rr) * static_cast<long>(k.cols) + j + rc)] *
                               x[static_cast<std::size_t>((c * H + sy) * W + sx)];
                    }
                }
                out[static_cast<std::size_t>((c * H + y) * W + xx)] = acc;
            }
        }
    }
    return out;
}

// X[u,v] = sum_{y,x} x[y,x] exp(-2 pi i (u y / H + v x / W)).
inline std::vector<std::complex<double>> dft(const Tensor& x) {
    const std::size_t H = x.dim(0), W = x.dim(1);
    std::vector<std::complex<double>> out(H * W);
    for (std::size_t u = 0; u < H; ++u) {
        for (std::size_t v = 0; v < W; ++v) {
            std::complex<double> acc = 0.0;
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t xx = 0; xx < W; ++xx) {
                    const double ph = -2.0 * std::numbers::pi *
                                      (static_cast<double>(u * y) / static_cast<double>(H) +
                                       static_cast<double>(v * xx) / static_cast<double>(W));
                    acc += x.at(y, xx) * std::polar(1.0, ph);
                }
            }
            out[u * W + v] = acc;
        }
    }
    return out;
}

// A bin passes when its radius (Nyquist along one axis = 1) exceeds the cutoff; DC never passes.
inline bool passes(std::size_t u, std::size_t v, std::size_t H, std::size_t W, double cutoff) {
    if (u == 0 && v == 0) return false;
    const double fu = static_cast<double>(u <= H / 2 ? u : H - u) / static_cast<double>(H);
    const double fv = static_cast<double>(v <= W / 2 ? v : W - v) / static_cast<double>(W);
    return 2.0 * std::hypot(fu, fv) > cutoff;
}

// Ideal high-pass as an explicit spatial operator built from the inverse-DFT sum.
inline Tensor highpass(const Tensor& x, double cutoff) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        Tensor plane(Shape{H, W});
        for (std::size_t i = 0; i < H * W; ++i) plane[i] = x[c * H * W + i];
        const auto X = dft(plane);
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t xx = 0; xx < W; ++xx) {
                std::complex<double> acc = 0.0;
                for (std::size_t u = 0; u < H; ++u) {
                    for (std::size_t v = 0; v < W; ++v) {
                        if (!passes(u, v, H, W, cutoff)) continue;
                        const double ph = 2.0 * std::numbers::pi *
                                          (static_cast<double>(u * y) / static_cast<double>(H) +
                                           static_cast<double>(v * xx) / static_cast<double>(W));
                        acc += X[u * W + v] * std::polar(1.0, ph);
                    }
                }
                out[(c * H + y) * W + xx] = acc.real() / static_cast<double>(H * W);
            }
        }
    }
    return out;
}

// Stacked Sobel responses, replicate padding: plane 2c = G_x, plane 2c+1 = G_y.
inline Tensor sobel(const Tensor& x) {
    const long C = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)), W = static_cast<long>(x.dim(2));
    const double gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    Tensor out(Shape{x.dim(0) * 2, x.dim(1), x.dim(2)});
    const auto px = [&](long c, long y, long xx) {
        y = std::clamp(y, 0L, H - 1);
        xx = std::clamp(xx, 0L, W - 1);
        return x[static_cast<std::size_t>((c * H + y) * W + xx)];
    };
    for (long c = 0; c < C; ++c) {
        for (long y = 0; y < H; ++y) {
            for (long xx = 0; xx < W; ++xx) {
                double rx = 0.0, ry = 0.0;
                for (long i = 0; i < 3; ++i) {
                    for (long j = 0; j < 3; ++j) {
                        const double p = px(c, y + i - 1, xx + j - 1);
                        rx += gx[i][j] * p;
                        ry += gx[j][i] * p;
                    }
                }
                out[static_cast<std::size_t>(((2 * c) * H + y) * W + xx)] = rx;
                out[static_cast<std::size_t>(((2 * c + 1) * H + y) * W + xx)] = ry;
            }
        }
    }
    return out;
}

// Central differences of a scalar function of one tensor.
inline Tensor numeric_grad(const std::function<double(const Tensor&)>& f, Tensor at, double h = 1e-5) {
    Tensor g(at.shape());
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double keep = at[i];
        at[i] = keep + h;
        const double up = f(at);
        at[i] = keep - h;
        const double down = f(at);
        at[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_err(const Tensor& a, const Tensor& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Composite Simpson integral of f over [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace oracle
