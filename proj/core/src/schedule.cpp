// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hfdiff {

Schedule::Schedule(std::vector<double> sigmas, std::vector<double> alphas)
    : sigmas_(std::move(sigmas)), alphas_(std::move(alphas)) {
    if (sigmas_.size() < 2) throw std::invalid_argument("schedule: need at least one step");
    if (alphas_.size() != sigmas_.size()) throw std::invalid_argument("schedule: one alpha per noise level");
    if (sigmas_.back() != 0.0) throw std::invalid_argument("schedule: final noise level must be exactly 0");
    for (std::size_t i = 0; i + 1 < sigmas_.size(); ++i) {
        if (!(sigmas_[i] > sigmas_[i + 1]) || !std::isfinite(sigmas_[i])) {
            throw std::invalid_argument("schedule: noise levels must be finite and strictly decreasing");
        }
    }
    for (double a : alphas_) {
        if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("schedule: alphas must be positive");
    }
}

Schedule::Schedule(std::vector<double> sigmas) : Schedule(sigmas, std::vector<double>(sigmas.size(), 1.0)) {}

double Schedule::sigma(std::size_t t) const {
    if (t > steps()) throw std::out_of_range("schedule: step " + std::to_string(t) + " beyond T");
    return sigmas_[steps() - t];
}

double Schedule::alpha(std::size_t t) const {
    if (t > steps()) throw std::out_of_range("schedule: step " + std::to_string(t) + " beyond T");
    return alphas_[steps() - t];
}

Schedule build_edm_schedule(std::size_t steps, double sigma_min, double sigma_max, double rho) {
    if (steps < 2) throw std::invalid_argument("edm schedule: need T >= 2");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max)) {
        throw std::invalid_argument("edm schedule: need 0 < sigma_min < sigma_max");
    }
    if (!(rho > 0.0)) throw std::invalid_argument("edm schedule: rho must be positive");
    const double hi = std::pow(sigma_max, 1.0 / rho);
    const double lo = std::pow(sigma_min, 1.0 / rho);
    std::vector<double> sigmas(steps + 1, 0.0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
        sigmas[i] = std::pow(hi + frac * (lo - hi), rho);
    }
    // Pin the endpoints so they match the arguments bit for bit.
    sigmas[0] = sigma_max;
    sigmas[steps - 1] = sigma_min;
    return Schedule(std::move(sigmas));
}

void ChurnParams::validate() const {
    if (!(s_churn >= 0.0)) throw std::invalid_argument("churn: S_churn must be >= 0");
    if (!(s_noise > 0.0)) throw std::invalid_argument("churn: S_noise must be > 0");
    if (!(s_tmin >= 0.0 && s_tmin <= s_tmax)) throw std::invalid_argument("churn: need 0 <= S_tmin <= S_tmax");
}

double churn_gamma(double sigma_t, const ChurnParams& churn, std::size_t nfe) {
    if (nfe == 0) throw std::invalid_argument("churn: N must be positive");
    if (sigma_t < churn.s_tmin || sigma_t > churn.s_tmax) return 0.0;
    return std::min(churn.s_churn / static_cast<double>(nfe), std::sqrt(2.0) - 1.0);
}

double churn_gamma(std::size_t t, const Schedule& schedule, const ChurnParams& churn, std::size_t nfe) {
    return churn_gamma(schedule.sigma(t), churn, nfe);
}

Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, double alpha, double sigma) {
    return axpby(alpha, z0, sigma, eps);
}

Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& schedule) {
    return forward_diffuse(z0, eps, schedule.alpha(t), schedule.sigma(t));
}

Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, double sigma, double alpha) {
    if (alpha == 0.0) throw std::invalid_argument("predict_z0: alpha must be non-zero");
    require_same_shape(z_t, eps_hat, "predict_z0");
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - sigma * eps_hat[i]) / alpha;
    return out;
}

Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, const Schedule& schedule) {
    return predict_z0(z_t, eps_hat, schedule.sigma(t), schedule.alpha(t));
}

}  // namespace hfdiff
