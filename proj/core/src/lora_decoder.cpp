// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/lora_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hfdiff/tape.hpp"

namespace hfdiff {

namespace {

constexpr std::size_t kColours = 3;
constexpr std::size_t kBands = 4;
constexpr std::size_t kTapChannels = kColours * kBands;
constexpr double kSquash = 0.9;

// Sign of Haar band k at offset (dy, dx) inside a 2x2 block. Bands: LL, LH, HL, HH.
double haar_sign(std::size_t band, std::size_t dy, std::size_t dx) {
    const double sx = dx == 0 ? 1.0 : -1.0;
    const double sy = dy == 0 ? 1.0 : -1.0;
    switch (band) {
        case 0: return 1.0;
        case 1: return sx;
        case 2: return sy;
        default: return sx * sy;
    }
}

Tensor haar_analysis_weight() {
    // 3x3 stencil so that on the stride-2 grid the taps cover offsets 0 and +1.
    Tensor w(Shape{kTapChannels, kColours, 3, 3});
    for (std::size_t c = 0; c < kColours; ++c) {
        for (std::size_t k = 0; k < kBands; ++k) {
            for (std::size_t dy = 0; dy < 2; ++dy) {
                for (std::size_t dx = 0; dx < 2; ++dx) {
                    w[(((kBands * c + k) * kColours + c) * 3 + 1 + dy) * 3 + 1 + dx] = 0.25 * haar_sign(k, dy, dx);
                }
            }
        }
    }
    return w;
}

Tensor ll_select_weight() {
    Tensor w(Shape{kColours, kTapChannels, 1, 1});
    for (std::size_t c = 0; c < kColours; ++c) w[c * kTapChannels + kBands * c] = 1.0;
    return w;
}

Tensor ll_embed_weight() {
    Tensor w(Shape{kTapChannels, kColours, 1, 1});
    for (std::size_t c = 0; c < kColours; ++c) w[(kBands * c) * kColours + c] = 1.0;
    return w;
}

// Detail bands -> the four pixels of each block, ordered for pixel_shuffle. LL is
// left out; it goes through the smoothed path.
Tensor detail_synthesis_weight() {
    Tensor w(Shape{kTapChannels, kTapChannels, 1, 1});
    for (std::size_t c = 0; c < kColours; ++c) {
        for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t out = kBands * c + 2 * dy + dx;
                for (std::size_t k = 1; k < kBands; ++k) w[out * kTapChannels + kBands * c + k] = haar_sign(k, dy, dx);
            }
        }
    }
    return w;
}

// Diagonal 1x1 map that keeps the detail bands and zeroes LL.
Tensor detail_mask_weight() {
    Tensor w(Shape{kTapChannels, kTapChannels, 1, 1});
    for (std::size_t ch = 0; ch < kTapChannels; ++ch) {
        if (ch % kBands != 0) w[ch * kTapChannels + ch] = 1.0;
    }
    return w;
}

Tensor detail_only(const Tensor& tap) {
    Tensor out = tap;
    const std::size_t plane = tap.dim(1) * tap.dim(2);
    for (std::size_t c = 0; c < kColours; ++c) std::fill_n(out.data().begin() + static_cast<long>(kBands * c * plane), plane, 0.0);
    return out;
}

Tensor binomial_weight() {
    const double b[3] = {0.25, 0.5, 0.25};
    Tensor w(Shape{kColours, kColours, 3, 3});
    for (std::size_t c = 0; c < kColours; ++c) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) w[((c * kColours + c) * 3 + i) * 3 + j] = b[i] * b[j];
        }
    }
    return w;
}

Tensor select_ll(const Tensor& tap, const Tensor& select) { return conv2d_forward(tap, select, 1, Padding::zero); }

double squash(double v) { return std::atanh(kSquash * (2.0 * std::clamp(v, 0.0, 1.0) - 1.0)); }
double unsquash(double z) { return 0.5 * (std::tanh(z) / kSquash + 1.0); }

void check_adapter(const LoraAdapter& ad, std::size_t rank) {
    if (ad.a.shape() != Shape{rank, kTapChannels, 1, 1} || ad.b.shape() != Shape{kTapChannels, rank, 1, 1}) {
        throw std::invalid_argument("lora: adapter shapes must be A [r,12,1,1] and B [12,r,1,1]");
    }
}

void check_theta(const LoraParams& theta) {
    if (theta.taps.size() != 2) throw std::invalid_argument("lora: expected one adapter per tap (2)");
    const std::size_t r = theta.rank();
    if (r == 0) throw std::invalid_argument("lora: rank must be positive");
    for (const LoraAdapter& ad : theta.taps) check_adapter(ad, r);
}

struct ThetaVars {
    std::vector<Var> a;
    std::vector<Var> b;
};

}  // namespace

std::size_t LoraParams::parameter_count() const {
    std::size_t n = 0;
    for (const LoraAdapter& t : taps) n += t.a.size() + t.b.size();
    return n;
}

void LoraParams::axpy(double s, const LoraParams& other) {
    if (other.taps.size() != taps.size()) throw std::invalid_argument("lora: adapter count mismatch");
    for (std::size_t k = 0; k < taps.size(); ++k) {
        require_same_shape(taps[k].a, other.taps[k].a, "lora axpy");
        require_same_shape(taps[k].b, other.taps[k].b, "lora axpy");
        for (std::size_t i = 0; i < taps[k].a.size(); ++i) taps[k].a[i] += s * other.taps[k].a[i];
        for (std::size_t i = 0; i < taps[k].b.size(); ++i) taps[k].b[i] += s * other.taps[k].b[i];
    }
}

double LoraParams::squared_norm() const {
    double s = 0.0;
    for (const LoraAdapter& t : taps) s += t.a.squared_norm() + t.b.squared_norm();
    return s;
}

double LoraParams::norm() const { return std::sqrt(squared_norm()); }

bool LoraParams::all_finite() const {
    return std::all_of(taps.begin(), taps.end(), [](const LoraAdapter& t) { return t.a.all_finite() && t.b.all_finite(); });
}

LoraParams LoraParams::zeros_like() const {
    LoraParams z;
    for (const LoraAdapter& t : taps) z.taps.push_back({Tensor(t.a.shape()), Tensor(t.b.shape())});
    return z;
}

Tensor LoraParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const LoraAdapter& t : taps) {
        flat.insert(flat.end(), t.a.data().begin(), t.a.data().end());
        flat.insert(flat.end(), t.b.data().begin(), t.b.data().end());
    }
    const std::size_t n = flat.size();
    return Tensor(Shape{n}, std::move(flat));
}

void LoraParams::unflatten(const Tensor& flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("lora: flat vector has wrong length");
    std::size_t pos = 0;
    for (LoraAdapter& t : taps) {
        for (double& v : t.a.data()) v = flat[pos++];
        for (double& v : t.b.data()) v = flat[pos++];
    }
}

TensorMap LoraParams::to_map() const {
    TensorMap m;
    for (std::size_t k = 0; k < taps.size(); ++k) {
        m["lora." + std::to_string(k) + ".a"] = taps[k].a;
        m["lora." + std::to_string(k) + ".b"] = taps[k].b;
    }
    return m;
}

LoraParams LoraParams::from_map(const TensorMap& map) {
    LoraParams p;
    for (std::size_t k = 0;; ++k) {
        const auto a = map.find("lora." + std::to_string(k) + ".a");
        const auto b = map.find("lora." + std::to_string(k) + ".b");
        if (a == map.end() || b == map.end()) break;
        p.taps.push_back({a->second, b->second});
    }
    if (p.taps.empty()) throw WeightsError("lora: no adapters in file");
    for (const LoraAdapter& t : p.taps) {
        if (t.a.rank() != 4 || t.b.rank() != 4) throw WeightsError("lora: adapters must be rank-4 tensors");
        check_adapter(t, p.rank());
    }
    return p;
}

bool LoraParams::operator==(const LoraParams& rhs) const {
    if (taps.size() != rhs.taps.size()) return false;
    for (std::size_t k = 0; k < taps.size(); ++k) {
        if (!(taps[k].a == rhs.taps[k].a) || !(taps[k].b == rhs.taps[k].b)) return false;
    }
    return true;
}

LoraParams init_lora(const LoraInit& init, Prng& prng) {
    if (init.rank == 0) throw std::invalid_argument("lora: rank must be positive");
    if (!(init.stddev >= 0.0)) throw std::invalid_argument("lora: stddev must be non-negative");
    LoraParams p;
    for (int k = 0; k < 2; ++k) {
        LoraAdapter ad{gaussian(prng, Shape{init.rank, kTapChannels, 1, 1}), Tensor(Shape{kTapChannels, init.rank, 1, 1})};
        ad.a *= init.stddev;
        if (init.both_random) {
            ad.b = gaussian(prng, ad.b.shape());
            ad.b *= init.stddev;
        }
        p.taps.push_back(std::move(ad));
    }
    return p;
}

ToyAutoencoder::ToyAutoencoder(bool linear) : linear_(linear) {
    weights_["haar"] = haar_analysis_weight();
    weights_["ll_select"] = ll_select_weight();
    weights_["ll_embed"] = ll_embed_weight();
    weights_["detail_synthesis"] = detail_synthesis_weight();
    weights_["smooth"] = binomial_weight();
    weights_["detail_mask"] = detail_mask_weight();
}

Encoded ToyAutoencoder::encode(const ImageBuffer& image) const {
    if (image.channels() != kColours) throw std::invalid_argument("autoencoder: expected a 3-channel image");
    if (image.height() % 4 != 0 || image.width() % 4 != 0 || image.empty()) {
        throw std::invalid_argument("autoencoder: height and width must be positive multiples of 4");
    }
    const Tensor& haar = weights_.at("haar");
    const Tensor& sel = weights_.at("ll_select");
    Encoded out;
    out.skips.tap1 = conv2d_forward(image.planes(), haar, 2, Padding::zero);
    out.skips.tap2 = conv2d_forward(select_ll(out.skips.tap1, sel), haar, 2, Padding::zero);
    const Tensor ll2 = select_ll(out.skips.tap2, sel);
    const std::size_t h = ll2.dim(1);
    const std::size_t w = ll2.dim(2);
    out.latent = Tensor(Shape{4, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double r = ll2.at(0, y, x);
            const double g = ll2.at(1, y, x);
            const double b = ll2.at(2, y, x);
            const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
            const double v[4] = {r, g, b, luma};
            for (std::size_t c = 0; c < 4; ++c) out.latent.at(c, y, x) = linear_ ? v[c] : squash(v[c]);
        }
    }
    return out;
}

namespace {

// The decoder graph. Only theta is a gradient leaf; latent and skips are constants.
Var build_decoder(Tape& tape, const TensorMap& weights, bool linear, const Tensor& latent, const SkipFeatures* skips,
                  const LoraParams* theta, ThetaVars* vars) {
    if (latent.rank() != 3 || latent.dim(0) != 4) throw std::invalid_argument("autoencoder: latent must be [4, h, w]");
    const std::size_t h = latent.dim(1);
    const std::size_t w = latent.dim(2);
    if (skips) {
        if (skips->tap2.shape() != Shape{kTapChannels, h, w} ||
            skips->tap1.shape() != Shape{kTapChannels, 2 * h, 2 * w}) {
            throw std::invalid_argument("autoencoder: skip features do not match the latent");
        }
    }
    if (theta) check_theta(*theta);

    Tensor coarse(Shape{kColours, h, w});
    for (std::size_t c = 0; c < kColours; ++c) {
        for (std::size_t i = 0; i < h * w; ++i) {
            const double z = latent[c * h * w + i];
            coarse[c * h * w + i] = linear ? z : unsquash(z);
        }
    }

    const Var embed = tape.constant(weights.at("ll_embed"));
    const Var sel = tape.constant(weights.at("ll_select"));
    const Var synth = tape.constant(weights.at("detail_synthesis"));
    const Var smooth = tape.constant(weights.at("smooth"));
    const Var mask = tape.constant(weights.at("detail_mask"));

    if (theta && vars) {
        for (const LoraAdapter& ad : theta->taps) {
            vars->a.push_back(tape.input(ad.a));
            vars->b.push_back(tape.input(ad.b));
        }
    }

    Var x = tape.constant(std::move(coarse));
    // Inner level first (tap2, adapter 1), then the outer level (tap1, adapter 0).
    for (int level = 1; level >= 0; --level) {
        Var m = tape.conv2d(x, embed);
        if (skips && theta) {
            const Tensor& tap = level == 1 ? skips->tap2 : skips->tap1;
            Var av, bv;
            if (vars) {
                av = vars->a[static_cast<std::size_t>(level)];
                bv = vars->b[static_cast<std::size_t>(level)];
            } else {
                av = tape.constant(theta->taps[static_cast<std::size_t>(level)].a);
                bv = tape.constant(theta->taps[static_cast<std::size_t>(level)].b);
            }
            // The adapter reads and writes detail bands only; the LL path stays the base decoder's.
            const Var low = tape.conv2d(tape.constant(detail_only(tap)), av);
            m = tape.add(m, tape.conv2d(tape.conv2d(low, bv), mask));
        }
        const Var ll = tape.conv2d(m, sel);
        const Var base = tape.conv2d(tape.upsample2x(ll), smooth, 1, Padding::replicate);
        const Var detail = tape.pixel_shuffle(tape.conv2d(m, synth));
        x = tape.add(base, detail);
    }
    return x;
}

}  // namespace

ImageBuffer ToyAutoencoder::base_decode(const Tensor& latent) const {
    Tape tape;
    const Var out = build_decoder(tape, weights_, linear_, latent, nullptr, nullptr, nullptr);
    return ImageBuffer(tape.value(out));
}

ImageBuffer ToyAutoencoder::decode(const Tensor& latent, const SkipFeatures& skips, const LoraParams& theta) const {
    Tape tape;
    const Var out = build_decoder(tape, weights_, linear_, latent, &skips, &theta, nullptr);
    return ImageBuffer(tape.value(out));
}

LoraGradient ToyAutoencoder::grad_theta(const ImageBuffer& reference, const Tensor& latent, const SkipFeatures& skips,
                                        const LoraParams& theta, const FidelityOptions& options) const {
    Tape tape;
    ThetaVars vars;
    const Var out = build_decoder(tape, weights_, linear_, latent, &skips, &theta, &vars);
    const ImageBuffer decoded(tape.value(out));
    require_same_geometry(reference, decoded, "grad_theta");
    LoraGradient result;
    result.loss = fidelity_loss(reference, decoded, options);
    tape.backward(out, fidelity_grad(reference, decoded, options));
    for (std::size_t k = 0; k < theta.taps.size(); ++k) {
        result.grad.taps.push_back({tape.grad(vars.a[k]), tape.grad(vars.b[k])});
    }
    return result;
}

ImageBuffer SkipFusedDecoder::decode(const Tensor& latent, const LoraParams& theta) const {
    return autoencoder_.decode(latent, skips_, theta);
}

LoraGradient SkipFusedDecoder::grad_theta(const ImageBuffer& reference, const Tensor& latent, const LoraParams& theta,
                                          const FidelityOptions& options) const {
    return autoencoder_.grad_theta(reference, latent, skips_, theta, options);
}

Tensor image_to_pixel_latent(const ImageBuffer& image) {
    Tensor z = image.planes();
    for (double& v : z.data()) v = 2.0 * v - 1.0;
    return z;
}

ImageBuffer pixel_latent_to_image(const Tensor& latent) {
    if (latent.rank() != 3) throw std::invalid_argument("pixel latent must be [C, H, W]");
    Tensor planes = latent;
    for (double& v : planes.data()) v = 0.5 * (v + 1.0);
    return ImageBuffer(std::move(planes));
}

ImageBuffer PixelRoundTripDecoder::decode(const Tensor& latent, const LoraParams& theta) const {
    const Encoded e = autoencoder_.encode(pixel_latent_to_image(latent));
    return autoencoder_.decode(e.latent, skips_, theta);
}

LoraGradient PixelRoundTripDecoder::grad_theta(const ImageBuffer& reference, const Tensor& latent,
                                               const LoraParams& theta, const FidelityOptions& options) const {
    const Encoded e = autoencoder_.encode(pixel_latent_to_image(latent));
    return autoencoder_.grad_theta(reference, e.latent, skips_, theta, options);
}

}  // namespace hfdiff
