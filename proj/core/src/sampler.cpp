// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/sampler.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hfdiff/random.hpp"

namespace hfdiff {

Tensor euler_step(const Tensor& z_hat, const Tensor& z_denoised, double sigma_hat, double sigma_prev) {
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("euler_step: sigma_hat must be positive");
    if (sigma_prev < 0.0) throw std::invalid_argument("euler_step: sigma_prev must be non-negative");
    require_same_shape(z_hat, z_denoised, "euler_step");
    const double r = sigma_prev / sigma_hat;
    Tensor out(z_hat.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r * z_hat[i] + (1.0 - r) * z_denoised[i];
    return out;
}

Tensor cfg_combine(const Tensor& eps_full, const Tensor& eps_img_only, const Tensor& eps_uncond, double s_image,
                   double s_text) {
    require_same_shape(eps_full, eps_img_only, "cfg_combine");
    require_same_shape(eps_full, eps_uncond, "cfg_combine");
    const double cu = 1.0 - s_image;
    const double ci = s_image - s_text;
    const double cf = s_text;
    Tensor out(eps_full.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cu * eps_uncond[i] + ci * eps_img_only[i] + cf * eps_full[i];
    return out;
}

DenoiserEval guided_denoise(const Denoiser& denoiser, const Tensor& z, double sigma, const ConditioningBundle& cond,
                            double s_image, double s_text) {
    const double cu = 1.0 - s_image;
    const double ci = s_image - s_text;
    const double cf = s_text;
    Tensor eps(z.shape());
    auto accumulate = [&](double c, const ConditioningBundle& b) {
        if (c == 0.0) return;
        const DenoiserEval e = denoiser.denoise(z, sigma, b);
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] += c * e.eps_hat[i];
    };
    if (cu == 0.0 && ci == 0.0 && cf == 1.0) return denoiser.denoise(z, sigma, cond);
    accumulate(cu, cond.with_dropped({true, true, true}));
    accumulate(ci, cond.with_dropped({false, true, true}));
    accumulate(cf, cond);
    return eval_from_eps(z, sigma, std::move(eps));
}

double decay_weight(double lambda, std::size_t t) { return std::exp(-lambda * static_cast<double>(t)); }

std::string StepTrace::csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "step,sigma,gamma,fidelity_loss,theta_update_norm\n";
    for (const StepRecord& r : steps) {
        out << r.step << ',' << r.sigma << ',' << r.gamma << ',';
        if (std::isnan(r.fidelity_loss)) {
            out << "nan";
        } else {
            out << r.fidelity_loss;
        }
        out << ',' << r.theta_update_norm << '\n';
    }
    return out.str();
}

void StepTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("trace: cannot write " + path.string());
    out << csv();
}

void SamplerConfig::validate() const {
    churn.validate();
    if (!(lambda >= 0.0)) throw std::invalid_argument("sampler: lambda must be >= 0");
    if (!(eta >= 0.0)) throw std::invalid_argument("sampler: eta must be >= 0");
    if (!(s_image >= 0.0) || !(s_text >= 0.0)) throw std::invalid_argument("sampler: guidance scales must be >= 0");
}

namespace {

struct HgsState {
    const FidelityDecoder* decoder = nullptr;
    const ImageBuffer* reference = nullptr;
    LoraParams theta;
};

void require_finite(const Tensor& t, std::size_t step, const char* what) {
    if (!t.all_finite()) throw NumericError(step, what);
}

Tensor run_sampler(const Denoiser& denoiser, const ConditioningBundle& cond, const SamplerConfig& cfg,
                   const Shape& shape, HgsState* hgs, StepTrace& trace) {
    cfg.validate();
    const Schedule& sched = cfg.schedule;
    const std::size_t T = sched.steps();
    const std::size_t nfe = cfg.nfe == 0 ? T : cfg.nfe;
    Prng prng(cfg.seed);

    Tensor z = gaussian(prng, shape);
    z *= sched.sigma(T);
    require_finite(z, T, "initial latent");

    for (std::size_t t = T; t >= 1; --t) {
        const double sigma = sched.sigma(t);
        const double sigma_prev = sched.sigma(t - 1);
        Tensor eps = gaussian(prng, shape);
        eps *= cfg.churn.s_noise;
        const double gamma = churn_gamma(sigma, cfg.churn, nfe);
        const double sigma_hat = sigma + gamma * sigma;
        if (sigma_hat < sigma) throw std::logic_error("sampler: churned noise level below the schedule level");
        const double lift = std::sqrt(sigma_hat * sigma_hat - sigma * sigma);
        Tensor z_hat = z;
        for (std::size_t i = 0; i < z_hat.size(); ++i) z_hat[i] += lift * eps[i];
        require_finite(z_hat, t, "churned latent");

        const DenoiserEval ev = guided_denoise(denoiser, z_hat, sigma_hat, cond, cfg.s_image, cfg.s_text);
        require_finite(ev.eps_hat, t, "noise prediction");
        Tensor z_next = euler_step(z_hat, ev.z_denoised, sigma_hat, sigma_prev);
        require_finite(z_next, t, "latent after Euler step");

        StepRecord rec;
        rec.step = t;
        rec.sigma = sigma;
        rec.gamma = gamma;
        rec.fidelity_loss = std::numeric_limits<double>::quiet_NaN();
        Tensor z0 = predict_z0(z_hat, ev.eps_hat, sigma_hat);
        if (hgs) {
            LoraGradient g;
            try {
                g = hgs->decoder->grad_theta(*hgs->reference, z0, hgs->theta, cfg.fidelity);
            } catch (const std::domain_error& e) {
                throw NumericError(t, e.what());
            }
            if (!std::isfinite(g.loss) || !g.grad.all_finite()) throw NumericError(t, "fidelity gradient");
            const double w = cfg.eta * decay_weight(cfg.lambda, t);
            hgs->theta.axpy(-w, g.grad);
            if (!hgs->theta.all_finite()) throw NumericError(t, "decoder adapter parameters");
            rec.fidelity_loss = g.loss;
            rec.theta_update_norm = w * g.grad.norm();
        }
        trace.steps.push_back(rec);
        if (cfg.observer) cfg.observer(rec, z0, hgs ? hgs->theta : LoraParams{});
        z = std::move(z_next);
    }
    return z;
}

}  // namespace

PlainResult plain_sample(const Denoiser& denoiser, const ConditioningBundle& cond, const SamplerConfig& config,
                         const Shape& latent_shape) {
    PlainResult r;
    r.latent = run_sampler(denoiser, cond, config, latent_shape, nullptr, r.trace);
    return r;
}

HgsResult hgs_sample(const Denoiser& denoiser, const FidelityDecoder& decoder, const LoraParams& theta_init,
                     const ImageBuffer& input_image, const ConditioningBundle& cond, const SamplerConfig& config,
                     const Shape& latent_shape) {
    HgsResult r;
    HgsState state{&decoder, &input_image, theta_init};
    r.latent = run_sampler(denoiser, cond, config, latent_shape, config.hgs_enabled ? &state : nullptr, r.trace);
    r.theta = std::move(state.theta);
    try {
        r.image = decoder.decode(r.latent, r.theta);
    } catch (const std::domain_error& e) {
        throw NumericError(0, e.what());
    }
    if (!r.image.planes().all_finite()) throw NumericError(0, "decoded image");
    return r;
}

}  // namespace hfdiff
