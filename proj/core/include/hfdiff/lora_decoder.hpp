// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hfdiff/highfreq.hpp"
#include "hfdiff/image.hpp"
#include "hfdiff/random.hpp"
#include "hfdiff/tensor.hpp"
#include "hfdiff/weights_io.hpp"

namespace hfdiff {

/// Low-rank adapter on one skip tap: contribution B (A tap), both 1x1 convolutions.
struct LoraAdapter {
    Tensor a;  // [r, 12, 1, 1]
    Tensor b;  // [12, r, 1, 1]
};

/// theta: one adapter per encoder tap, index 0 = full-resolution-side tap (H/2),
/// index 1 = inner tap (H/4).
struct LoraParams {
    std::vector<LoraAdapter> taps;

    std::size_t rank() const { return taps.empty() ? 0 : taps.front().a.dim(0); }
    std::size_t parameter_count() const;

    /// this += s * other
    void axpy(double s, const LoraParams& other);
    double squared_norm() const;
    double norm() const;
    bool all_finite() const;
    LoraParams zeros_like() const;

    /// Flat view in tap order, A before B. Used by finite differences.
    Tensor flatten() const;
    void unflatten(const Tensor& flat);

    TensorMap to_map() const;
    static LoraParams from_map(const TensorMap& map);

    bool operator==(const LoraParams& rhs) const;
};

struct LoraInit {
    std::size_t rank = 4;
    double stddev = 0.02;
    /// Draw B as well as A. Default off: B = 0 so the adapter starts switched off.
    bool both_random = false;
};

LoraParams init_lora(const LoraInit& init, Prng& prng);

/// Encoder features reused by every decode. tap1 is [12, H/2, W/2], tap2 is [12, H/4, W/4].
/// Channel 4c + k of a tap holds Haar band k (LL, LH, HL, HH) of colour c.
struct SkipFeatures {
    Tensor tap1;
    Tensor tap2;
};

struct Encoded {
    Tensor latent;  // [4, H/4, W/4]
    SkipFeatures skips;
};

struct LoraGradient {
    double loss = 0.0;
    LoraParams grad;
};

/// Fixed two-level Haar autoencoder.
///
/// Encoder: two stride-2 Haar analysis stages. The latent keeps only the coarsest
/// LL band (plus luminance) squashed through atanh, so everything above the
/// H/4 band is lost. Decoder per level: 1x1 embed of the coarse band into a
/// 12-channel Haar map (details zero), optional adapter add from the detail bands of the matching tap (LL untouched),
/// then synthesis = binomial-smoothed 2x upsample of LL + pixel-shuffled detail bands.
class ToyAutoencoder {
public:
    /// linear = true bypasses the tanh/atanh pair (test harness mode).
    explicit ToyAutoencoder(bool linear = false);

    bool linear() const { return linear_; }

    /// Needs 3 channels and H, W divisible by 4.
    Encoded encode(const ImageBuffer& image) const;
    ImageBuffer base_decode(const Tensor& latent) const;
    ImageBuffer decode(const Tensor& latent, const SkipFeatures& skips, const LoraParams& theta) const;

    /// Reverse-mode gradient of fidelity_loss(reference, decode(latent, skips, theta)) in theta.
    LoraGradient grad_theta(const ImageBuffer& reference, const Tensor& latent, const SkipFeatures& skips,
                            const LoraParams& theta, const FidelityOptions& options = {}) const;

    const TensorMap& base_weights() const { return weights_; }
    std::uint64_t checksum() const { return hfdiff::checksum(weights_); }

private:
    bool linear_;
    TensorMap weights_;
};

/// Decoder seen by the sampler: latent + theta -> image, and the theta gradient of the
/// fidelity loss. Implementations bind whatever encoder features they need.
class FidelityDecoder {
public:
    virtual ~FidelityDecoder() = default;
    virtual ImageBuffer decode(const Tensor& latent, const LoraParams& theta) const = 0;
    virtual LoraGradient grad_theta(const ImageBuffer& reference, const Tensor& latent, const LoraParams& theta,
                                    const FidelityOptions& options) const = 0;
};

/// Latent-space decoder with skips taken from the conditioning image.
class SkipFusedDecoder final : public FidelityDecoder {
public:
    SkipFusedDecoder(const ToyAutoencoder& autoencoder, SkipFeatures skips)
        : autoencoder_(autoencoder), skips_(std::move(skips)) {}

    ImageBuffer decode(const Tensor& latent, const LoraParams& theta) const override;
    LoraGradient grad_theta(const ImageBuffer& reference, const Tensor& latent, const LoraParams& theta,
                            const FidelityOptions& options) const override;

private:
    const ToyAutoencoder& autoencoder_;
    SkipFeatures skips_;
};

/// For pixel-space denoisers: the latent is an image in [-1, 1]. It is mapped to
/// [0, 1], passed through the encoder, and decoded with skip fusion.
class PixelRoundTripDecoder final : public FidelityDecoder {
public:
    PixelRoundTripDecoder(const ToyAutoencoder& autoencoder, SkipFeatures skips)
        : autoencoder_(autoencoder), skips_(std::move(skips)) {}

    ImageBuffer decode(const Tensor& latent, const LoraParams& theta) const override;
    LoraGradient grad_theta(const ImageBuffer& reference, const Tensor& latent, const LoraParams& theta,
                            const FidelityOptions& options) const override;

private:
    const ToyAutoencoder& autoencoder_;
    SkipFeatures skips_;
};

/// [C, H, W] in [0, 1] -> [C, H, W] in [-1, 1], and back.
Tensor image_to_pixel_latent(const ImageBuffer& image);
ImageBuffer pixel_latent_to_image(const Tensor& latent);

}  // namespace hfdiff
