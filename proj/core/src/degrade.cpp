// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace hfdiff {

namespace {

void require_image(const ImageBuffer& image, const char* what) {
    if (image.empty()) throw std::invalid_argument(std::string(what) + ": empty image");
}

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

void clamp_in_place(ImageBuffer& image) {
    for (double& v : image.planes().data()) v = std::clamp(v, 0.0, 1.0);
}

// 3x5 glyphs, row-major, top row in the high bits.
std::uint16_t glyph_bits(char ch) {
    static constexpr std::array<std::uint16_t, 26> kLetters = {
        0b010'101'111'101'101, 0b110'101'110'101'110, 0b011'100'100'100'011, 0b110'101'101'101'110,
        0b111'100'110'100'111, 0b111'100'110'100'100, 0b011'100'101'101'011, 0b101'101'111'101'101,
        0b111'010'010'010'111, 0b001'001'001'101'010, 0b101'101'110'101'101, 0b100'100'100'100'111,
        0b101'111'111'101'101, 0b110'101'101'101'101, 0b010'101'101'101'010, 0b110'101'110'100'100,
        0b010'101'101'110'011, 0b110'101'110'101'101, 0b011'100'010'001'110, 0b111'010'010'010'010,
        0b101'101'101'101'111, 0b101'101'101'101'010, 0b101'101'111'111'101, 0b101'101'010'101'101,
        0b101'101'010'010'010, 0b111'001'010'100'111,
    };
    if (ch == ' ') return 0;
    if (ch >= 'A' && ch <= 'Z') return kLetters[static_cast<std::size_t>(ch - 'A')];
    throw std::invalid_argument("watermark: text may only contain A-Z and spaces");
}

double num(const nlohmann::json& params, const char* key) {
    if (!params.contains(key) || !params.at(key).is_number()) {
        throw std::invalid_argument(std::string("degradation params: missing numeric field '") + key + "'");
    }
    return params.at(key).get<double>();
}

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> keys) {
    if (!params.is_object()) throw std::invalid_argument("degradation params: expected an object");
    for (const auto& [k, _] : params.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
            throw std::invalid_argument("degradation params: unknown field '" + k + "'");
        }
    }
}

}  // namespace

ImageBuffer apply_lowlight(const ImageBuffer& image, const LowlightParams& p, Prng& prng) {
    require_image(image, "lowlight");
    require(p.gamma > 0.0 && std::isfinite(p.gamma), "lowlight: gamma must be positive");
    require(p.gain >= 0.0 && std::isfinite(p.gain), "lowlight: gain must be non-negative");
    require(p.noise_sigma >= 0.0 && std::isfinite(p.noise_sigma), "lowlight: noise sigma must be non-negative");
    ImageBuffer out = image;
    for (double& v : out.planes().data()) {
        v = p.gain * std::pow(std::clamp(v, 0.0, 1.0), p.gamma) + p.noise_sigma * prng.gaussian();
    }
    clamp_in_place(out);
    return out;
}

Tensor depth_field(std::size_t height, std::size_t width, DepthKind kind, double angle) {
    Tensor d(Shape{height, width});
    if (height == 0 || width == 0) return d;
    const double cy = 0.5 * static_cast<double>(height - 1);
    const double cx = 0.5 * static_cast<double>(width - 1);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            d.at(y, x) = kind == DepthKind::radial ? std::hypot(dx, dy) : dx * ca + dy * sa;
        }
    }
    const auto [lo, hi] = std::minmax_element(d.data().begin(), d.data().end());
    const double l = *lo;
    const double span = *hi - *lo;
    for (double& v : d.data()) v = span > 0.0 ? (v - l) / span : 0.0;
    return d;
}

ImageBuffer apply_haze(const ImageBuffer& clean, double beta, double airlight, const Tensor& depth) {
    require_image(clean, "haze");
    require(beta >= 0.0 && std::isfinite(beta), "haze: beta must be non-negative");
    require(airlight >= 0.0 && airlight <= 1.0, "haze: airlight must lie in [0, 1]");
    if (depth.shape() != Shape{clean.height(), clean.width()}) {
        throw std::invalid_argument("haze: depth map must be [H, W]");
    }
    ImageBuffer out = clean;
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                const double t = std::exp(-beta * depth.at(y, x));
                out.at(c, y, x) = clean.at(c, y, x) * t + airlight * (1.0 - t);
            }
        }
    }
    clamp_in_place(out);
    return out;
}

ImageBuffer apply_haze(const ImageBuffer& clean, const HazeParams& p) {
    require_image(clean, "haze");
    return apply_haze(clean, p.beta, p.airlight, depth_field(clean.height(), clean.width(), p.depth, p.angle));
}

ImageBuffer apply_snow(const ImageBuffer& image, const SnowParams& p, Prng& prng) {
    require_image(image, "snow");
    require(p.density >= 0.0 && p.density <= 1.0, "snow: density must lie in [0, 1]");
    require(p.size_min > 0.0 && p.size_min <= p.size_max, "snow: need 0 < size_min <= size_max");
    require(p.streak >= 1.0, "snow: streak ratio must be >= 1");
    require(p.opacity >= 0.0 && p.opacity <= 1.0, "snow: opacity must lie in [0, 1]");
    const double h = static_cast<double>(image.height());
    const double w = static_cast<double>(image.width());
    const auto flakes = static_cast<std::size_t>(std::floor(p.density * h * w + prng.uniform()));
    // Unit vectors along and across the motion direction (angle measured from vertical).
    const double ux = std::sin(p.angle), uy = std::cos(p.angle);
    const double vx = uy, vy = -ux;

    Tensor alpha(Shape{image.height(), image.width()});
    for (std::size_t f = 0; f < flakes; ++f) {
        const double cx = prng.uniform(0.0, w);
        const double cy = prng.uniform(0.0, h);
        const double rb = prng.uniform(p.size_min, p.size_max);
        const double ra = rb * p.streak;
        const long x0 = static_cast<long>(std::floor(cx - ra)), x1 = static_cast<long>(std::ceil(cx + ra));
        const long y0 = static_cast<long>(std::floor(cy - ra)), y1 = static_cast<long>(std::ceil(cy + ra));
        for (long y = std::max(0L, y0); y <= std::min(static_cast<long>(h) - 1, y1); ++y) {
            for (long x = std::max(0L, x0); x <= std::min(static_cast<long>(w) - 1, x1); ++x) {
                const double qx = static_cast<double>(x) + 0.5 - cx;
                const double qy = static_cast<double>(y) + 0.5 - cy;
                const double u = (qx * ux + qy * uy) / ra;
                const double v = (qx * vx + qy * vy) / rb;
                const double cover = std::max(0.0, 1.0 - (u * u + v * v));
                double& a = alpha.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                // Flakes stack like alpha layers.
                a = a + (1.0 - a) * p.opacity * cover;
            }
        }
    }
    ImageBuffer out = image;
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                const double a = alpha.at(y, x);
                out.at(c, y, x) = out.at(c, y, x) * (1.0 - a) + a;
            }
        }
    }
    clamp_in_place(out);
    return out;
}

Tensor watermark_mask(std::size_t height, std::size_t width, const WatermarkParams& p) {
    require(p.scale >= 1, "watermark: scale must be >= 1");
    std::vector<std::uint16_t> glyphs;
    for (char ch : p.text) glyphs.push_back(glyph_bits(ch));
    require(!glyphs.empty(), "watermark: empty text");
    const std::size_t s = p.scale;
    const std::size_t tile_w = (4 * glyphs.size() + 3) * s;
    const std::size_t tile_h = 9 * s;
    Tensor mask(Shape{height, width});
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t ty = (y + p.offset_y) % tile_h;
        const std::size_t row = ty / s;
        if (row >= 5) continue;
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t tx = (x + p.offset_x) % tile_w;
            const std::size_t cell = tx / (4 * s);
            const std::size_t col = (tx / s) % 4;
            if (cell >= glyphs.size() || col >= 3) continue;
            const unsigned bit = 14 - static_cast<unsigned>(row * 3 + col);
            mask.at(y, x) = (glyphs[cell] >> bit) & 1U ? 1.0 : 0.0;
        }
    }
    return mask;
}

ImageBuffer apply_watermark(const ImageBuffer& image, const WatermarkParams& p) {
    require_image(image, "watermark");
    require(p.alpha >= 0.0 && p.alpha <= 1.0, "watermark: alpha must lie in [0, 1]");
    const Tensor mask = watermark_mask(image.height(), image.width(), p);
    ImageBuffer out = image;
    if (p.alpha == 0.0) return out;
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                const double a = p.alpha * mask.at(y, x);
                out.at(c, y, x) = out.at(c, y, x) * (1.0 - a) + a;
            }
        }
    }
    clamp_in_place(out);
    return out;
}

ImageBuffer apply_grayscale(const ImageBuffer& image) {
    require_image(image, "grayscale");
    ImageBuffer out(image.height(), image.width(), 3);
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            double luma = image.at(0, y, x);
            if (image.channels() == 3) {
                luma = 0.299 * image.at(0, y, x) + 0.587 * image.at(1, y, x) + 0.114 * image.at(2, y, x);
            }
            for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = luma;
        }
    }
    clamp_in_place(out);
    return out;
}

ImageBuffer apply_downsample(const ImageBuffer& image, std::size_t factor) {
    require_image(image, "downsample");
    require(factor == 2 || factor == 4, "downsample: factor must be 2 or 4");
    require(image.height() % factor == 0 && image.width() % factor == 0,
            "downsample: image size must be divisible by the factor");
    ImageBuffer out = image;
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t by = 0; by < image.height(); by += factor) {
            for (std::size_t bx = 0; bx < image.width(); bx += factor) {
                double acc = 0.0;
                for (std::size_t i = 0; i < factor; ++i)
                    for (std::size_t j = 0; j < factor; ++j) acc += image.at(c, by + i, bx + j);
                // Exact for block-constant input: every term equals the first.
                bool constant = true;
                for (std::size_t i = 0; i < factor && constant; ++i)
                    for (std::size_t j = 0; j < factor; ++j)
                        if (image.at(c, by + i, bx + j) != image.at(c, by, bx)) constant = false;
                const double mean = constant ? image.at(c, by, bx) : acc * inv;
                for (std::size_t i = 0; i < factor; ++i)
                    for (std::size_t j = 0; j < factor; ++j) out.at(c, by + i, bx + j) = mean;
            }
        }
    }
    clamp_in_place(out);
    return out;
}

const std::vector<std::string>& degradation_tasks() {
    static const std::vector<std::string> kTasks = {"lowlight", "haze", "snow", "watermark", "colorization", "superres"};
    return kTasks;
}

bool is_degradation_task(std::string_view task) {
    const auto& t = degradation_tasks();
    return std::find(t.begin(), t.end(), task) != t.end();
}

std::vector<std::string> split_task(std::string_view task) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t plus = task.find('+', start);
        parts.emplace_back(task.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
        if (plus == std::string_view::npos) break;
        start = plus + 1;
    }
    for (const std::string& p : parts) {
        if (p.empty()) throw std::invalid_argument("task tag '" + std::string(task) + "' has an empty component");
    }
    return parts;
}

namespace {

const std::array<const char*, 6> kWatermarkWords = {"SAMPLE", "PROOF", "COPY", "DEMO", "STOCK", "DRAFT"};

}  // namespace

nlohmann::json draw_params(std::string_view task, Prng& prng) {
    using nlohmann::json;
    if (task == "lowlight") {
        return json{{"gamma", prng.uniform(2.0, 5.0)}, {"gain", prng.uniform(0.3, 0.8)},
                    {"noise_sigma", prng.uniform(0.01, 0.05)}};
    }
    if (task == "haze") {
        const bool radial = prng.bernoulli(0.5);
        return json{{"beta", prng.uniform(0.5, 2.5)},
                    {"airlight", prng.uniform(0.7, 1.0)},
                    {"depth", radial ? "radial" : "ramp"},
                    {"angle", prng.uniform(0.0, 2.0 * std::numbers::pi)}};
    }
    if (task == "snow") {
        const double a = prng.uniform(0.5, 2.0);
        const double b = prng.uniform(0.5, 2.0);
        return json{{"density", prng.uniform(0.004, 0.02)},
                    {"size_min", std::min(a, b)},
                    {"size_max", std::max(a, b)},
                    {"angle", prng.uniform(-0.6, 0.6)},
                    {"streak", prng.uniform(1.0, 3.0)},
                    {"opacity", prng.uniform(0.6, 1.0)}};
    }
    if (task == "watermark") {
        return json{{"text", kWatermarkWords[prng.below(kWatermarkWords.size())]},
                    {"alpha", prng.uniform(0.3, 0.7)},
                    {"offset_x", prng.below(64)},
                    {"offset_y", prng.below(64)},
                    {"scale", 1 + prng.below(2)}};
    }
    if (task == "colorization") return json::object();
    if (task == "superres") return json{{"factor", prng.bernoulli(0.5) ? 2 : 4}};
    throw std::invalid_argument("unknown degradation task '" + std::string(task) + "'");
}

ImageBuffer apply_task(std::string_view task, const ImageBuffer& image, const nlohmann::json& params, Prng& prng) {
    if (task == "lowlight") {
        reject_unknown(params, {"gamma", "gain", "noise_sigma"});
        return apply_lowlight(image, {num(params, "gamma"), num(params, "gain"), num(params, "noise_sigma")}, prng);
    }
    if (task == "haze") {
        reject_unknown(params, {"beta", "airlight", "depth", "angle"});
        HazeParams p{num(params, "beta"), num(params, "airlight"), DepthKind::ramp, num(params, "angle")};
        const std::string depth = params.value("depth", "ramp");
        if (depth == "radial") {
            p.depth = DepthKind::radial;
        } else if (depth != "ramp") {
            throw std::invalid_argument("haze: depth must be 'ramp' or 'radial'");
        }
        return apply_haze(image, p);
    }
    if (task == "snow") {
        reject_unknown(params, {"density", "size_min", "size_max", "angle", "streak", "opacity"});
        return apply_snow(image,
                          {num(params, "density"), num(params, "size_min"), num(params, "size_max"),
                           num(params, "angle"), num(params, "streak"), num(params, "opacity")},
                          prng);
    }
    if (task == "watermark") {
        reject_unknown(params, {"text", "alpha", "offset_x", "offset_y", "scale"});
        WatermarkParams p;
        p.text = params.at("text").get<std::string>();
        p.alpha = num(params, "alpha");
        p.offset_x = params.at("offset_x").get<std::size_t>();
        p.offset_y = params.at("offset_y").get<std::size_t>();
        p.scale = params.at("scale").get<std::size_t>();
        return apply_watermark(image, p);
    }
    if (task == "colorization") {
        reject_unknown(params, {});
        return apply_grayscale(image);
    }
    if (task == "superres") {
        reject_unknown(params, {"factor"});
        return apply_downsample(image, params.at("factor").get<std::size_t>());
    }
    throw std::invalid_argument("unknown degradation task '" + std::string(task) + "'");
}

}  // namespace hfdiff
