// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "hfdiff/conditioning.hpp"
#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// One network evaluation: predicted noise and the matching denoised estimate.
/// Invariant: z_denoised == z - sigma * eps_hat (alpha = 1).
struct DenoiserEval {
    Tensor eps_hat;
    Tensor z_denoised;
};

/// Builds a consistent DenoiserEval from a denoised estimate.
DenoiserEval eval_from_denoised(const Tensor& z, double sigma, Tensor z_denoised);
/// Builds a consistent DenoiserEval from a noise prediction.
DenoiserEval eval_from_eps(const Tensor& z, double sigma, Tensor eps_hat);

/// The network H. Implementations must be safe to call concurrently (read-only weights).
class Denoiser {
public:
    virtual ~Denoiser() = default;

    /// Throws std::invalid_argument when sigma <= 0.
    DenoiserEval denoise(const Tensor& z, double sigma, const ConditioningBundle& cond) const;

protected:
    virtual DenoiserEval evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const = 0;
};

/// Knows the clean sample and always returns it.
class OracleDenoiser final : public Denoiser {
public:
    explicit OracleDenoiser(Tensor target) : target_(std::move(target)) {}
    const Tensor& target() const { return target_; }

protected:
    DenoiserEval evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const override;

private:
    Tensor target_;
};

/// Exact posterior mean for a factorised Gaussian prior N(mean, diag(variance)).
class GaussianDenoiser final : public Denoiser {
public:
    GaussianDenoiser(Tensor mean, Tensor variance);

protected:
    DenoiserEval evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const override;

private:
    Tensor mean_;
    Tensor variance_;
};

/// Exact posterior mean for a mixture of isotropic Gaussians sum_k w_k N(mu_k, s_k^2 I).
/// s_k = 0 gives point masses.
class MixtureDenoiser final : public Denoiser {
public:
    struct Component {
        Tensor mean;
        double weight = 1.0;
        double variance = 0.0;
    };

    explicit MixtureDenoiser(std::vector<Component> components);

    /// Posterior component probabilities at noise level sigma (softmax of quadratic scores).
    std::vector<double> responsibilities(const Tensor& z, double sigma) const;

protected:
    DenoiserEval evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const override;

private:
    std::vector<Component> components_;
};

}  // namespace hfdiff
