// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hfdiff {

DenoiserEval eval_from_denoised(const Tensor& z, double sigma, Tensor z_denoised) {
    require_same_shape(z, z_denoised, "denoiser output");
    Tensor eps(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) eps[i] = (z[i] - z_denoised[i]) / sigma;
    return {std::move(eps), std::move(z_denoised)};
}

DenoiserEval eval_from_eps(const Tensor& z, double sigma, Tensor eps_hat) {
    require_same_shape(z, eps_hat, "denoiser output");
    Tensor den(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) den[i] = z[i] - sigma * eps_hat[i];
    return {std::move(eps_hat), std::move(den)};
}

DenoiserEval Denoiser::denoise(const Tensor& z, double sigma, const ConditioningBundle& cond) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("denoise: sigma must be positive and finite");
    }
    return evaluate(z, sigma, cond);
}

DenoiserEval OracleDenoiser::evaluate(const Tensor& z, double sigma, const ConditioningBundle&) const {
    return eval_from_denoised(z, sigma, target_);
}

GaussianDenoiser::GaussianDenoiser(Tensor mean, Tensor variance) : mean_(std::move(mean)), variance_(std::move(variance)) {
    require_same_shape(mean_, variance_, "gaussian denoiser");
    for (double v : variance_.data()) {
        if (!(v > 0.0)) throw std::invalid_argument("gaussian denoiser: variances must be positive");
    }
}

DenoiserEval GaussianDenoiser::evaluate(const Tensor& z, double sigma, const ConditioningBundle&) const {
    require_same_shape(z, mean_, "gaussian denoiser");
    const double s2 = sigma * sigma;
    Tensor den(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        den[i] = (variance_[i] * z[i] + s2 * mean_[i]) / (variance_[i] + s2);
    }
    return eval_from_denoised(z, sigma, std::move(den));
}

MixtureDenoiser::MixtureDenoiser(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("mixture denoiser: no components");
    for (const Component& c : components_) {
        if (!c.mean.same_shape(components_.front().mean)) {
            throw std::invalid_argument("mixture denoiser: component shapes differ");
        }
        if (!(c.weight > 0.0) || c.variance < 0.0) {
            throw std::invalid_argument("mixture denoiser: need positive weights and non-negative variances");
        }
    }
}

std::vector<double> MixtureDenoiser::responsibilities(const Tensor& z, double sigma) const {
    const double d = static_cast<double>(z.size());
    std::vector<double> score(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const Component& c = components_[k];
        require_same_shape(z, c.mean, "mixture denoiser");
        // log w_k + log N(z; mu_k, (s_k^2 + sigma^2) I)
        const double v = c.variance + sigma * sigma;
        double sq = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) sq += (z[i] - c.mean[i]) * (z[i] - c.mean[i]);
        score[k] = std::log(c.weight) - 0.5 * sq / v - 0.5 * d * std::log(2.0 * std::numbers::pi * v);
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double total = 0.0;
    for (double& s : score) {
        s = std::exp(s - mx);
        total += s;
    }
    for (double& s : score) s /= total;
    return score;
}

DenoiserEval MixtureDenoiser::evaluate(const Tensor& z, double sigma, const ConditioningBundle&) const {
    const std::vector<double> r = responsibilities(z, sigma);
    const double s2 = sigma * sigma;
    Tensor den(z.shape());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const Component& c = components_[k];
        const double denom = c.variance + s2;
        for (std::size_t i = 0; i < z.size(); ++i) {
            den[i] += r[k] * (c.variance * z[i] + s2 * c.mean[i]) / denom;
        }
    }
    return eval_from_denoised(z, sigma, std::move(den));
}

}  // namespace hfdiff
