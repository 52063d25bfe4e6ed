// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hfdiff/highfreq.hpp"
#include "support/oracles.hpp"

using namespace hfdiff;

namespace {

Tensor cosine(std::size_t h, std::size_t w, std::size_t u, std::size_t v) {
    Tensor t(Shape{1, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            t.at(0, y, x) = std::cos(2.0 * std::numbers::pi *
                                     (static_cast<double>(u * y) / static_cast<double>(h) +
                                      static_cast<double>(v * x) / static_cast<double>(w)));
        }
    }
    return t;
}

double squared_distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

TEST_CASE("fourier_highpass: constant image maps to zero") {
    const ImageBuffer img(8, 8, 3, 0.42);
    CHECK(fourier_highpass(img, {}).planes().max_abs() < 1e-12);
}

TEST_CASE("fourier_highpass: cosines above the cutoff pass, below are removed") {
    // 16x16, cutoff 0.25: radius of bin (u, 0) is 2u/16.
    const HighPassSpec spec{0.25};
    const Tensor high = cosine(16, 16, 5, 3);
    CHECK(oracle::max_abs_diff(fourier_highpass(high, spec), high) < 1e-9);
    const Tensor low = cosine(16, 16, 1, 0);
    CHECK(fourier_highpass(low, spec).max_abs() < 1e-9);
    const Tensor diag = cosine(16, 16, 1, 1);
    CHECK(fourier_highpass(diag, spec).max_abs() < 1e-9);
}

TEST_CASE("fourier_highpass: mask matches the independent pass rule") {
    for (std::size_t h : {1u, 5u, 8u, 13u}) {
        for (std::size_t w : {1u, 6u, 16u}) {
            for (double cut : {0.1, 0.25, 0.6}) {
                const Tensor m = highpass_mask(h, w, {cut});
                for (std::size_t u = 0; u < h; ++u) {
                    for (std::size_t v = 0; v < w; ++v) {
                        CHECK(m.at(u, v) == (oracle::passes(u, v, h, w, cut) ? 1.0 : 0.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("fourier_highpass: cutoff outside (0,1) is rejected") {
    const Tensor x(Shape{1, 4, 4});
    CHECK_THROWS_AS(fourier_highpass(x, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(fourier_highpass(x, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(fourier_highpass(x, {-0.3}), std::invalid_argument);
}

TEST_CASE("sobel: kernels are the printed stencils") {
    const std::vector<double> gx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    const std::vector<double> gy = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    CHECK(sobel_x_kernel().taps == gx);
    CHECK(sobel_y_kernel().taps == gy);
}

TEST_CASE("sobel: constants give zero, a horizontal ramp gives 8 inside") {
    CHECK(sobel(ImageBuffer(5, 6, 3, 0.5)).max_abs() == 0.0);
    CHECK(sobel(ImageBuffer(5, 6, 3, 0.7)).max_abs() < 1e-12);
    Tensor ramp(Shape{1, 6, 7});
    for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 7; ++x) ramp.at(0, y, x) = static_cast<double>(x);
    const Tensor r = sobel(ramp);
    for (std::size_t y = 0; y < 6; ++y) {
        for (std::size_t x = 1; x + 1 < 7; ++x) {
            CHECK(r.at(0, y, x) == 8.0);
            CHECK(r.at(1, y, x) == 0.0);
        }
    }
}

TEST_CASE("sobel and highpass: match brute-force oracles on random small images") {
    Prng prng(31);
    for (int i = 0; i < 40; ++i) {
        const std::size_t h = 1 + prng.below(16), w = 1 + prng.below(16);
        const Tensor x = oracle::uniform(prng, {1 + 2 * prng.below(2), h, w}, -1, 1);
        CHECK(oracle::max_abs_diff(sobel(x), oracle::sobel(x)) < 1e-12);
        const double cut = prng.uniform(0.05, 0.95);
        CHECK(oracle::max_abs_diff(fourier_highpass(x, {cut}), oracle::highpass(x, cut)) < 1e-9);
    }
}

TEST_CASE("F and S are linear and satisfy their adjoint identities") {
    Prng prng(32);
    for (int i = 0; i < 20; ++i) {
        const std::size_t h = 2 + prng.below(12), w = 2 + prng.below(12);
        const Tensor x = oracle::uniform(prng, {3, h, w}, -1, 1), y = oracle::uniform(prng, {3, h, w}, -1, 1);
        const HighPassSpec spec{prng.uniform(0.05, 0.95)};
        const double a = prng.uniform(-2, 2), b = prng.uniform(-2, 2);
        CHECK(oracle::max_abs_diff(fourier_highpass(axpby(a, x, b, y), spec),
                                   axpby(a, fourier_highpass(x, spec), b, fourier_highpass(y, spec))) < 1e-10);
        CHECK(oracle::max_abs_diff(sobel(axpby(a, x, b, y)), axpby(a, sobel(x), b, sobel(y))) < 1e-10);
        CHECK(std::abs(oracle::inner(fourier_highpass(x, spec), y) -
                       oracle::inner(x, fourier_highpass_adjoint(y, spec))) < 1e-9);
        const Tensor g = oracle::uniform(prng, {6, h, w}, -1, 1);
        CHECK(std::abs(oracle::inner(sobel(x), g) - oracle::inner(x, sobel_adjoint(g))) < 1e-9);
    }
}

TEST_CASE("fidelity_loss: identities and compositional oracle") {
    Prng prng(33);
    const ImageBuffer i(oracle::uniform(prng, {3, 8, 8})), j(oracle::uniform(prng, {3, 8, 8}));
    CHECK(fidelity_loss(i, i) == 0.0);
    CHECK(fidelity_loss(i, j) == doctest::Approx(fidelity_loss(j, i)).epsilon(1e-14));
    const double by_hand = squared_distance(oracle::highpass(i.planes(), 0.25), oracle::highpass(j.planes(), 0.25)) +
                           squared_distance(oracle::sobel(i.planes()), oracle::sobel(j.planes()));
    CHECK(std::abs(fidelity_loss(i, j) - by_hand) < 1e-9 * by_hand);
    FidelityOptions f_only;
    f_only.use_sobel = false;
    CHECK(std::abs(fidelity_loss(i, j, f_only) -
                   squared_distance(oracle::highpass(i.planes(), 0.25), oracle::highpass(j.planes(), 0.25))) < 1e-9);
    CHECK_THROWS_AS(fidelity_loss(i, ImageBuffer(8, 4, 3)), std::invalid_argument);
    CHECK_THROWS_AS(fidelity_grad(i, ImageBuffer(8, 4, 3)), std::invalid_argument);
}

TEST_CASE("fidelity_loss: adding one constant to both images leaves the interior terms unchanged") {
    Prng prng(34);
    const Tensor a = oracle::uniform(prng, {3, 10, 10}), b = oracle::uniform(prng, {3, 10, 10});
    Tensor a2 = a, b2 = b;
    for (std::size_t k = 0; k < a.size(); ++k) {
        a2[k] += 0.3;
        b2[k] += 0.3;
    }
    const auto interior = [](const Tensor& s) {
        Tensor out = s;
        for (std::size_t c = 0; c < s.dim(0); ++c)
            for (std::size_t y = 0; y < s.dim(1); ++y)
                for (std::size_t x = 0; x < s.dim(2); ++x)
                    if (y == 0 || x == 0 || y + 1 == s.dim(1) || x + 1 == s.dim(2)) out.at(c, y, x) = 0.0;
        return out;
    };
    const HighPassSpec spec{};
    CHECK(std::abs(squared_distance(fourier_highpass(a, spec), fourier_highpass(b, spec)) -
                   squared_distance(fourier_highpass(a2, spec), fourier_highpass(b2, spec))) < 1e-9);
    CHECK(std::abs(squared_distance(interior(sobel(a)), interior(sobel(b))) -
                   squared_distance(interior(sobel(a2)), interior(sobel(b2)))) < 1e-9);
}

TEST_CASE("fidelity_grad: zero at the reference, linear in the difference, matches finite differences") {
    Prng prng(35);
    const ImageBuffer ref(oracle::uniform(prng, {3, 6, 6}));
    CHECK(fidelity_grad(ref, ref).max_abs() == 0.0);

    const Tensor delta = oracle::uniform(prng, {3, 6, 6}, -0.1, 0.1);
    const Tensor g1 = fidelity_grad(ref, ImageBuffer(ref.planes() + delta));
    const Tensor g2 = fidelity_grad(ref, ImageBuffer(ref.planes() + delta * 2.0));
    CHECK(oracle::max_abs_diff(g2, g1 * 2.0) < 1e-10);

    for (int i = 0; i < 5; ++i) {
        const Tensor cand = oracle::uniform(prng, {3, 6, 6});
        const Tensor numeric = oracle::numeric_grad(
            [&](const Tensor& x) { return fidelity_loss(ref, ImageBuffer(x)); }, cand);
        CHECK(oracle::rel_err(fidelity_grad(ref, ImageBuffer(cand)), numeric) < 1e-5);
    }
}
