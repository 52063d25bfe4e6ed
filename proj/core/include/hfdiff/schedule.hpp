// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "hfdiff/tensor.hpp"

namespace hfdiff {

/// Discrete noise levels for T steps.
///
/// sigmas() is stored in sampling order: sigmas()[0] is sigma_T (the largest level),
/// sigmas()[T] is sigma_0 == 0. Step t (counting down from T to 1) uses
/// sigma(t) = sigmas()[T - t].
class Schedule {
public:
    /// Validates: at least one step, strictly decreasing, last level exactly 0,
    /// alphas (one per level) strictly positive.
    Schedule(std::vector<double> sigmas, std::vector<double> alphas);
    /// Variance-exploding schedule (every alpha is 1).
    explicit Schedule(std::vector<double> sigmas);

    std::size_t steps() const { return sigmas_.size() - 1; }
    const std::vector<double>& sigmas() const { return sigmas_; }
    const std::vector<double>& alphas() const { return alphas_; }

    /// Noise level at step index t in [0, T].
    double sigma(std::size_t t) const;
    double alpha(std::size_t t) const;

private:
    std::vector<double> sigmas_;
    std::vector<double> alphas_;
};

/// rho-spaced interpolation between sigma_max and sigma_min (T levels) with 0 appended:
///   sigma_i = (sigma_max^(1/rho) + i/(T-1) * (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho.
Schedule build_edm_schedule(std::size_t steps, double sigma_min = 0.002, double sigma_max = 80.0, double rho = 7.0);

struct ChurnParams {
    double s_churn = 0.0;
    double s_noise = 1.0;
    double s_tmin = 0.0;
    double s_tmax = 1e30;

    void validate() const;
};

/// Temporary noise increase factor: min(S_churn / N, sqrt(2) - 1) when sigma_t lies in
/// [S_tmin, S_tmax], else 0.
double churn_gamma(double sigma_t, const ChurnParams& churn, std::size_t nfe);
double churn_gamma(std::size_t t, const Schedule& schedule, const ChurnParams& churn, std::size_t nfe);

/// alpha_t * z0 + sigma_t * eps.
Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& schedule);
Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, double alpha, double sigma);

/// (z_t - sigma * eps_hat) / alpha. sigma is whatever level the noise prediction was made at.
Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, double sigma, double alpha = 1.0);
Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, const Schedule& schedule);

}  // namespace hfdiff
