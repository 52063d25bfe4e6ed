// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hfdiff/conditioning.hpp"
#include "hfdiff/denoiser.hpp"
#include "hfdiff/forge.hpp"
#include "hfdiff/tape.hpp"
#include "hfdiff/weights_io.hpp"

namespace hfdiff {

struct ToyDenoiserConfig {
    std::size_t c1 = 16;  // channels at full resolution
    std::size_t c2 = 32;  // at 1/2
    std::size_t c3 = 32;  // at 1/4, also the attention token width
    std::size_t d_text = 32;
    std::size_t d_head = 32;
    std::size_t d_sigma = 32;
    std::size_t resolution = 32;
    double sigma_data = 0.5;
};

/// Pixel-space conditional denoiser with EDM preconditioning:
///   D(z; sigma) = c_skip z + c_out F(c_in z, log(sigma) / 4, cond).
/// F is a 3-level conv net (full, 1/2, 1/4 resolution) with skip adds; the degraded
/// image enters through its own conv summed with the latent's (channel concatenation),
/// sigma through a 2-layer MLP whose output biases every level, and the prompts
/// through dual cross-attention over the 1/4-resolution tokens.
///
/// Latents are images mapped to [-1, 1] (image_to_pixel_latent).
class ToyDenoiser final : public Denoiser {
public:
    ToyDenoiser() = default;
    /// Random init. The text table is frozen; everything else trains.
    static ToyDenoiser init(const ToyDenoiserConfig& config, std::uint64_t seed);
    /// Validates names and shapes.
    static ToyDenoiser from_tensors(TensorMap tensors);
    static ToyDenoiser load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const ToyDenoiserConfig& config() const { return config_; }
    const TensorMap& tensors() const { return tensors_; }
    TensorMap& tensors() { return tensors_; }
    /// Names that the optimiser updates (everything except the frozen text table and meta).
    std::vector<std::string> trainable_names() const;

    TextEncoder text_encoder() const;
    /// The two attention layers as plain parameters (gates read from the weights).
    DualAttentionParams attention_params() const;

    /// Bundle for a degraded image and prompt texts. Empty text gives the null embedding.
    ConditioningBundle condition(const ImageBuffer& degraded, std::string_view instruction,
                                 std::string_view auxiliary) const;

    /// Records D(z; sigma) on `tape`. When `params` is non-null it receives one Var per
    /// tensor name (inputs for trainable tensors, constants otherwise).
    Var forward(Tape& tape, const Tensor& z, double sigma, const ConditioningBundle& cond,
                std::map<std::string, Var>* params) const;

protected:
    DenoiserEval evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const override;

private:
    ToyDenoiserConfig config_;
    TensorMap tensors_;
};

struct TrainingExample {
    Tensor target;     // pixel latent of the clean image
    Tensor condition;  // pixel latent of the degraded image
    std::string instruction;
    std::string auxiliary;
};

/// Loads every record; throws on an empty manifest or a resolution mismatch.
std::vector<TrainingExample> load_training_examples(const Manifest& manifest, std::size_t resolution);

/// epsilon: ||eps - eps_hat||^2. edm: the same residual scaled by (sigma^2 + sd^2) / sd^2,
/// which gives every noise level unit weight on the network output.
enum class LossWeighting { epsilon, edm };

struct TrainConfig {
    ToyDenoiserConfig model;
    LossWeighting weighting = LossWeighting::edm;
    std::size_t iterations = 3000;
    std::size_t batch = 8;
    double learning_rate = 3e-3;
    double clip_norm = 1.0;
    double dropout = 0.075;
    double p_mean = -0.4;
    double p_std = 1.2;
    std::uint64_t seed = 0;
    /// Called after every iteration with (iteration starting at 1, batch loss).
    std::function<void(std::size_t, double)> progress;
    /// Replaces the dropout uniform stream (tests inject counters here).
    std::function<double()> dropout_uniform;
};

struct TrainResult {
    ToyDenoiser model;
    std::vector<double> loss_curve;  // mean per-element weighted loss of each batch
    std::size_t dropped_image = 0;
    std::size_t dropped_instruction = 0;
    std::size_t dropped_auxiliary = 0;
    std::size_t samples = 0;

    void write_loss_csv(const std::filesystem::path& path) const;
};

/// Adam on E||eps - eps_hat||^2 with log-normal sigma and per-branch conditioning dropout.
TrainResult train_toy(const std::vector<TrainingExample>& examples, const TrainConfig& config);
TrainResult train_toy(const Manifest& manifest, const TrainConfig& config);

}  // namespace hfdiff
