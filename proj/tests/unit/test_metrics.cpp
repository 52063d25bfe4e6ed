// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hfdiff/highfreq.hpp"
#include "hfdiff/metrics.hpp"
#include "hfdiff/weights_io.hpp"
#include "support/oracles.hpp"

using namespace hfdiff;

TEST_CASE("psnr: identical, half and full offsets") {
    Prng prng(70);
    const ImageBuffer x(oracle::uniform(prng, {3, 8, 8}, 0.0, 0.5));
    CHECK(psnr(x, x) == kPsnrInfinity);
    ImageBuffer y = x;
    for (double& v : y.planes().data()) v += 0.5;
    CHECK(psnr(x, y) == doctest::Approx(6.0206).epsilon(1e-5));
    CHECK(psnr(x, y) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
    const ImageBuffer zero(4, 4, 1, 0.0), one(4, 4, 1, 1.0);
    CHECK(psnr(zero, one) == 0.0);
    CHECK(psnr(zero, ImageBuffer(4, 4, 1, 2.0), 2.0) == 0.0);
    CHECK_THROWS_AS(psnr(zero, ImageBuffer(4, 5, 1)), std::invalid_argument);
}

TEST_CASE("psnr: strictly decreasing in MSE") {
    const ImageBuffer base(6, 6, 3, 0.2);
    double last = kPsnrInfinity;
    for (double d = 0.01; d < 0.8; d += 0.05) {
        const ImageBuffer other(6, 6, 3, 0.2 + d);
        const double p = psnr(base, other);
        CHECK(p < last);
        last = p;
    }
}

TEST_CASE("ssim: identity, symmetry, constant pair closed form, range") {
    Prng prng(71);
    const ImageBuffer x(oracle::uniform(prng, {3, 16, 16})), y(oracle::uniform(prng, {3, 16, 16}));
    CHECK(ssim(x, x) == 1.0);
    CHECK(ssim(x, y) == ssim(y, x));
    const double expected = (2 * 0.5 * 0.6 + 1e-4) / (0.25 + 0.36 + 1e-4);
    CHECK(std::abs(ssim(ImageBuffer(16, 16, 3, 0.5), ImageBuffer(16, 16, 3, 0.6)) - expected) < 1e-6);
    CHECK(expected == doctest::Approx(0.9836).epsilon(1e-4));
    // Smaller than the window: one window over everything.
    CHECK(std::abs(ssim(ImageBuffer(4, 4, 1, 0.5), ImageBuffer(4, 4, 1, 0.6)) - expected) < 1e-6);
    for (int i = 0; i < 50; ++i) {
        const ImageBuffer a(oracle::uniform(prng, {1, 10, 10})), b(oracle::uniform(prng, {1, 10, 10}));
        const double s = ssim(a, b);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
    ImageBuffer neg = x;
    for (double& v : neg.planes().data()) v = 1.0 - v;
    CHECK(ssim(x, neg) < 0.0);
    CHECK_THROWS_AS(ssim(x, ImageBuffer(16, 8, 3)), std::invalid_argument);
}

TEST_CASE("ssim: matches a direct window loop") {
    Prng prng(72);
    const ImageBuffer x(oracle::uniform(prng, {1, 11, 10})), y(oracle::uniform(prng, {1, 11, 10}));
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    int count = 0;
    for (std::size_t y0 = 0; y0 + 8 <= 11; ++y0) {
        for (std::size_t x0 = 0; x0 + 8 <= 10; ++x0) {
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = 0; j < 8; ++j) {
                    mx += x.at(0, y0 + i, x0 + j) / 64;
                    my += y.at(0, y0 + i, x0 + j) / 64;
                }
            double vx = 0, vy = 0, cxy = 0;
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = 0; j < 8; ++j) {
                    const double a = x.at(0, y0 + i, x0 + j) - mx, b = y.at(0, y0 + i, x0 + j) - my;
                    vx += a * a / 64;
                    vy += b * b / 64;
                    cxy += a * b / 64;
                }
            total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    CHECK(ssim(x, y) == doctest::Approx(total / count).epsilon(1e-12));
}

TEST_CASE("hf_residual: identity, constant offset, fidelity F-term") {
    Prng prng(73);
    const ImageBuffer x(oracle::uniform(prng, {3, 12, 12})), y(oracle::uniform(prng, {3, 12, 12}));
    CHECK(hf_residual(x, x) == 0.0);
    ImageBuffer shifted = x;
    for (double& v : shifted.planes().data()) v += 0.2;
    CHECK(hf_residual(x, shifted) < 1e-12);
    FidelityOptions f_only;
    f_only.use_sobel = false;
    CHECK(hf_residual(x, y) == doctest::Approx(std::sqrt(fidelity_loss(x, y, f_only))).epsilon(1e-12));
    const MetricReport r = evaluate_metrics(x, y);
    CHECK(r.psnr == psnr(x, y));
    CHECK(r.ssim == ssim(x, y));
    CHECK(r.hf_residual == hf_residual(x, y));
}

TEST_CASE("crop") {
    ImageBuffer img(4, 5, 1);
    img.at(0, 2, 3) = 0.7;
    const ImageBuffer c = crop(img, 1, 2, 2, 3);
    CHECK(c.height() == 2);
    CHECK(c.width() == 3);
    CHECK(c.at(0, 1, 1) == 0.7);
    CHECK_THROWS(crop(img, 3, 0, 2, 2));
}

TEST_CASE("weights: round trip is bit exact, errors are reported") {
    Prng prng(74);
    TensorMap m;
    m["a"] = oracle::uniform(prng, {2, 3}, -1e6, 1e6);
    m["b.c"] = Tensor(Shape{1}, -0.0);
    m["scalar"] = Tensor(Shape{4, 1, 2, 1}, 3.25);
    const auto path = std::filesystem::temp_directory_path() / "hfdiff_weights.hfdw";
    save_tensors(path, m);
    const TensorMap back = load_tensors(path);
    CHECK(back == m);
    CHECK(checksum(back) == checksum(m));
    CHECK(std::signbit(back.at("b.c")[0]));
    CHECK(require_tensor(back, "a", {2, 3}) == m["a"]);
    CHECK_THROWS_AS(require_tensor(back, "a", {3, 2}), WeightsError);
    CHECK_THROWS_AS(require_tensor(back, "missing", {1}), WeightsError);

    TensorMap changed = m;
    changed["a"][0] += 1.0;
    CHECK(checksum(changed) != checksum(m));

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "HFDW\x01";
    }
    CHECK_THROWS_AS(load_tensors(path), WeightsError);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPE0000";
    }
    CHECK_THROWS_AS(load_tensors(path), WeightsError);
}
