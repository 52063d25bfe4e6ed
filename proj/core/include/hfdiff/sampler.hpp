// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfdiff/conditioning.hpp"
#include "hfdiff/denoiser.hpp"
#include "hfdiff/highfreq.hpp"
#include "hfdiff/lora_decoder.hpp"
#include "hfdiff/schedule.hpp"

namespace hfdiff {

/// A state tensor went non-finite. `step` is the schedule index t being processed.
class NumericError : public std::runtime_error {
public:
    NumericError(std::size_t step, const std::string& what)
        : std::runtime_error("non-finite value at step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// z_hat + (sigma_prev - sigma_hat) (z_hat - z_denoised) / sigma_hat, evaluated as the
/// equivalent blend r z_hat + (1 - r) z_denoised with r = sigma_prev / sigma_hat so the
/// r = 0 and r = 1 cases are exact.
Tensor euler_step(const Tensor& z_hat, const Tensor& z_denoised, double sigma_hat, double sigma_prev);

/// eps_uncond + s_I (eps_img_only - eps_uncond) + s_T (eps_full - eps_img_only), computed in
/// the regrouped form (1 - s_I) u + (s_I - s_T) i + s_T f so the telescoping cases are exact.
Tensor cfg_combine(const Tensor& eps_full, const Tensor& eps_img_only, const Tensor& eps_uncond, double s_image,
                   double s_text);

/// One guided evaluation: full, image-only (instruction and auxiliary dropped) and
/// unconditional calls, skipping any whose weight in the regrouped sum is zero.
DenoiserEval guided_denoise(const Denoiser& denoiser, const Tensor& z, double sigma, const ConditioningBundle& cond,
                            double s_image, double s_text);

/// e^{-lambda t}.
double decay_weight(double lambda, std::size_t t);

struct StepRecord {
    std::size_t step = 0;
    double sigma = 0.0;
    double gamma = 0.0;
    double fidelity_loss = 0.0;      // L before this step's update; NaN when HGS is off
    double theta_update_norm = 0.0;  // ||eta e^{-lambda t} grad||
};

struct StepTrace {
    std::vector<StepRecord> steps;

    std::string csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Per-step callback: record, z_{t->0} estimate, theta after the update.
using StepObserver = std::function<void(const StepRecord&, const Tensor& z0_estimate, const LoraParams& theta)>;

struct SamplerConfig {
    Schedule schedule = build_edm_schedule(50);
    ChurnParams churn;
    double lambda = 0.001;
    double eta = 2e-3;
    double s_image = 1.0;
    double s_text = 1.0;
    std::uint64_t seed = 0;
    bool hgs_enabled = true;
    FidelityOptions fidelity;
    /// N in the churn cap; 0 means the schedule's step count.
    std::size_t nfe = 0;
    StepObserver observer;

    void validate() const;
};

struct PlainResult {
    Tensor latent;
    StepTrace trace;
};

struct HgsResult {
    ImageBuffer image;
    Tensor latent;
    LoraParams theta;
    StepTrace trace;
};

/// Churned Euler sampling without decoder involvement. Returns the final latent.
PlainResult plain_sample(const Denoiser& denoiser, const ConditioningBundle& cond, const SamplerConfig& config,
                         const Shape& latent_shape);

/// Sampling with per-step theta updates against the input image's high-frequency content,
/// then decode of the final latent through the updated decoder. theta_init is copied.
HgsResult hgs_sample(const Denoiser& denoiser, const FidelityDecoder& decoder, const LoraParams& theta_init,
                     const ImageBuffer& input_image, const ConditioningBundle& cond, const SamplerConfig& config,
                     const Shape& latent_shape);

}  // namespace hfdiff
