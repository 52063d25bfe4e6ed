// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
// Criterion numbers on the command line restrict the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hfdiff/conditioning.hpp"
#include "hfdiff/forge.hpp"
#include "hfdiff/gradcheck.hpp"
#include "hfdiff/image_io.hpp"
#include "hfdiff/metrics.hpp"
#include "hfdiff/sampler.hpp"
#include "hfdiff/toy_denoiser.hpp"
#include "support/oracles.hpp"

#if HFDIFF_HAVE_CLI
#include "hfdiff/commands.hpp"
#endif

using namespace hfdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

using Check = std::function<void(Outcome&)>;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "hfdiff_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// 1. Sobel and Fourier high-pass against brute-force loops, adjoint identities.
void operator_fidelity(Outcome& o) {
    Prng prng(1001);
    double worst_sobel = 0.0, worst_fourier = 0.0, worst_adjoint = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t h = 1 + prng.below(16), w = 1 + prng.below(16);
        const std::size_t c = 1 + 2 * prng.below(2);
        const Tensor x = oracle::uniform(prng, {c, h, w}, -1, 1), y = oracle::uniform(prng, {c, h, w}, -1, 1);
        const HighPassSpec spec{prng.uniform(0.05, 0.95)};
        worst_sobel = std::max(worst_sobel, oracle::max_abs_diff(sobel(x), oracle::sobel(x)));
        worst_fourier =
            std::max(worst_fourier, oracle::max_abs_diff(fourier_highpass(x, spec), oracle::highpass(x, spec.cutoff_fraction)));
        const Tensor g = oracle::uniform(prng, {2 * c, h, w}, -1, 1);
        worst_adjoint = std::max({worst_adjoint,
                                  std::abs(oracle::inner(fourier_highpass(x, spec), y) -
                                           oracle::inner(x, fourier_highpass_adjoint(y, spec))),
                                  std::abs(oracle::inner(sobel(x), g) - oracle::inner(x, sobel_adjoint(g)))});
    }
    o.detail << "sobel " << worst_sobel << " fourier " << worst_fourier << " adjoint " << worst_adjoint << ' ';
    o.require(worst_sobel <= 1e-12, "sobel > 1e-12");
    o.require(worst_fourier <= 1e-9, "fourier > 1e-9");
    o.require(worst_adjoint <= 1e-9, "adjoint > 1e-9");
}

// 2. Finite-difference suites.
void gradient_correctness(Outcome& o) {
    for (const GradCheckResult& r : {check_fidelity_grad(2002, 20), check_lora_grad(2003, 20),
                                     check_tape_primitives(2004, 20), check_tape_compositions(2005, 20)}) {
        o.detail << r.name << ' ' << r.worst_relative_error << ' ';
        o.require(r.passed(), r.name);
        o.require(r.instances >= 20, r.name + " ran fewer than 20 instances");
    }
    o.require(check_fidelity_grad(2002, 1).tolerance <= 1e-4, "fidelity tolerance above 1e-4");
    o.require(check_lora_grad(2003, 1).tolerance <= 1e-4, "lora tolerance above 1e-4");
}

// 3. Gaussian moments and the two-point sign histogram.
void sampler_statistics(Outcome& o) {
    const std::size_t n = 10000;
    const double mu[2] = {0.5, -1.0}, var[2] = {0.25, 2.0};
    Tensor mean(Shape{n, 2}), variance(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            mean.at(i, k) = mu[k];
            variance.at(i, k) = var[k];
        }
    }
    SamplerConfig c;
    c.schedule = build_edm_schedule(200);
    c.seed = 3003;
    const Tensor z = plain_sample(GaussianDenoiser(mean, variance), {}, c, {n, 2}).latent;
    for (std::size_t k = 0; k < 2; ++k) {
        double s = 0.0, q = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += z.at(i, k);
        const double m = s / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) q += (z.at(i, k) - m) * (z.at(i, k) - m);
        const double v = q / static_cast<double>(n - 1);
        o.detail << "mean" << k << ' ' << m << " var" << k << ' ' << v << ' ';
        o.require(std::abs(m - mu[k]) <= 0.05, "mean off by more than 0.05");
        o.require(std::abs(v / var[k] - 1.0) <= 0.10, "variance off by more than 10%");
    }

    // Independent one-dimensional runs; the mixture posterior couples coordinates.
    const MixtureDenoiser mix({{Tensor(Shape{1}, -1.0), 1.0, 0.0}, {Tensor(Shape{1}, 1.0), 1.0, 0.0}});
    std::size_t positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        c.seed = 40000 + i;
        positive += plain_sample(mix, {}, c, {1}).latent[0] > 0.0 ? 1 : 0;
    }
    const double band = 3.0 * std::sqrt(static_cast<double>(n) * 0.25);
    o.detail << "positive " << positive << '/' << n << ' ';
    o.require(std::abs(static_cast<double>(positive) - 0.5 * n) <= band, "sign histogram outside 3 sigma");
}

// 4. lambda -> infinity, churn 0 and the Euler boundaries.
void algorithm_algebra(Outcome& o) {
    Prng prng(4004);
    const ToyAutoencoder ae;
    const ImageBuffer input(oracle::uniform(prng, {3, 16, 16}));
    const ImageBuffer target(oracle::uniform(prng, {3, 16, 16}));
    const OracleDenoiser d(ae.encode(target).latent);
    const SkipFusedDecoder dec(ae, ae.encode(input).skips);
    LoraInit init;
    init.both_random = true;
    const LoraParams theta = init_lora(init, prng);
    SamplerConfig c;
    c.schedule = build_edm_schedule(16, 0.002, 5.0);
    c.churn.s_churn = 8.0;
    c.seed = 4;
    c.lambda = 1e6;
    const HgsResult on = hgs_sample(d, dec, theta, input, {}, c, {4, 4, 4});
    c.hgs_enabled = false;
    const HgsResult off = hgs_sample(d, dec, theta, input, {}, c, {4, 4, 4});
    o.require(on.image == off.image && on.latent == off.latent, "lambda=1e6 differs from HGS off");
    o.require(on.theta == theta, "theta moved at lambda=1e6");

    const GaussianDenoiser g(Tensor(Shape{6}, 0.3), Tensor(Shape{6}, 0.7));
    SamplerConfig p;
    p.schedule = build_edm_schedule(20, 0.002, 5.0);
    p.seed = 44;
    const Tensor a = plain_sample(g, {}, p, {6}).latent;
    p.churn.s_noise = 2.5;
    o.require(plain_sample(g, {}, p, {6}).latent == a, "noise scale leaks in with churn 0");
    Prng zp(44);
    Tensor z = gaussian(zp, {6});
    z *= p.schedule.sigma(20);
    for (std::size_t t = 20; t >= 1; --t) {
        const double s = p.schedule.sigma(t);
        z = euler_step(z, g.denoise(z, s, {}).z_denoised, s, p.schedule.sigma(t - 1));
    }
    o.require(z == a, "churn 0 differs from deterministic Euler");

    for (int i = 0; i < 20; ++i) {
        const Tensor zh = oracle::uniform(prng, {7}, -3, 3), zd = oracle::uniform(prng, {7}, -3, 3);
        const double s = prng.uniform(0.01, 10.0);
        o.require(euler_step(zh, zd, s, s) == zh, "euler sigma_prev = sigma_hat");
        o.require(euler_step(zh, zd, s, 0.0) == zd, "euler sigma_prev = 0");
    }
}

// Ground truth with a checkerboard patch; the input keeps its high band but has a
// low-frequency gain and ramp defect.
struct HgsTestbed {
    ImageBuffer truth;
    ImageBuffer input;
};

HgsTestbed hgs_testbed() {
    HgsTestbed b{procedural_source(5, 32, 32), {}};
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 8; y < 24; ++y)
            for (std::size_t x = 8; x < 24; ++x) b.truth.at(c, y, x) = (x + y) % 2 ? 0.8 : 0.2;
    b.input = b.truth;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x)
                b.input.at(c, y, x) = std::clamp(0.9 * b.truth.at(c, y, x) + 0.05 * static_cast<double>(y) / 31.0, 0.0, 1.0);
    return b;
}

// 5. HGS efficacy on the checkerboard testbed.
void hgs_efficacy(Outcome& o) {
    const HgsTestbed bed = hgs_testbed();
    const ToyAutoencoder ae;
    const OracleDenoiser d(ae.encode(bed.truth).latent);
    const SkipFusedDecoder dec(ae, ae.encode(bed.input).skips);
    const ImageBuffer truth_patch = crop(bed.truth, 8, 8, 16, 16);
    int wins = 0;
    double gain = 0.0, worst_gain = 1e9;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SamplerConfig c;
        c.schedule = build_edm_schedule(24, 0.002, 5.0);
        c.seed = seed;
        Prng prng(seed);
        const LoraParams theta = init_lora({}, prng);
        const ImageBuffer on = hgs_sample(d, dec, theta, bed.input, {}, c, {4, 8, 8}).image.clamped();
        c.hgs_enabled = false;
        const ImageBuffer off = hgs_sample(d, dec, theta, bed.input, {}, c, {4, 8, 8}).image.clamped();
        const HighPassSpec& hp = c.fidelity.highpass;
        wins += hf_residual(on, bed.truth, hp) < hf_residual(off, bed.truth, hp) ? 1 : 0;
        const double g = psnr(crop(on, 8, 8, 16, 16), truth_patch) - psnr(crop(off, 8, 8, 16, 16), truth_patch);
        gain += g / 10.0;
        worst_gain = std::min(worst_gain, g);
    }
    o.detail << "hf wins " << wins << "/10 mean patch gain " << gain << " dB (worst " << worst_gain << ") ";
    o.require(wins >= 9, "hf_residual lower in fewer than 9 seeds");
    o.require(gain >= 1.0, "patch PSNR gain below 1 dB");
}

// 6. Zero-product identity and one small descent step.
void lora_identity_and_direction(Outcome& o) {
    Prng prng(6006);
    const ToyAutoencoder ae;
    int decreased = 0;
    for (int i = 0; i < 10; ++i) {
        const ImageBuffer image(oracle::uniform(prng, {3, 16, 16}));
        const ImageBuffer other(oracle::uniform(prng, {3, 16, 16}));
        const Encoded e = ae.encode(image);
        const Tensor latent = ae.encode(other).latent;
        const LoraParams theta = init_lora({}, prng);
        o.require(ae.decode(latent, e.skips, theta) == ae.base_decode(latent), "zero-product decode differs from base");
        const LoraGradient g = ae.grad_theta(image, latent, e.skips, theta);
        LoraParams next = theta;
        next.axpy(-1e-6, g.grad);
        const double after = fidelity_loss(image, ae.decode(latent, e.skips, next));
        decreased += after < g.loss ? 1 : 0;
    }
    o.detail << "decreased " << decreased << "/10 ";
    o.require(decreased == 10, "an update did not decrease L");
}

// 7. Zero gate, CFG telescoping, dropout frequency.
void conditioning_behaviour(Outcome& o) {
    Prng prng(7007);
    for (int i = 0; i < 20; ++i) {
        const DualAttentionParams p = DualAttentionParams::init(6, 5, 4, prng);
        const Tensor x = oracle::uniform(prng, {9, 6}, -1, 1);
        const PromptEmbedding instr{oracle::uniform(prng, {16, 5}, -1, 1), false};
        const PromptEmbedding aux{oracle::uniform(prng, {16, 5}, -1, 1), false};
        o.require(dual_cross_attention(x, instr, aux, p) == single_cross_attention(x, instr, p), "zero gate");
        const Tensor f = oracle::uniform(prng, {11}, -5, 5), im = oracle::uniform(prng, {11}, -5, 5),
                     u = oracle::uniform(prng, {11}, -5, 5);
        o.require(cfg_combine(f, im, u, 1.0, 1.0) == f, "cfg (1,1)");
        o.require(cfg_combine(f, im, u, 1.0, 0.0) == im, "cfg (1,0)");
        o.require(cfg_combine(f, im, u, 0.0, 0.0) == u, "cfg (0,0)");
    }
    const std::size_t n = 10000;
    const double p = 0.075, band = 2.5758 * std::sqrt(p * (1 - p) / static_cast<double>(n));
    const ConditioningDropout dropout{p};
    std::size_t hits[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const DropFlags f = dropout.draw(prng);
        hits[0] += f.image;
        hits[1] += f.instruction;
        hits[2] += f.auxiliary;
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const double freq = static_cast<double>(hits[k]) / static_cast<double>(n);
        o.detail << "drop" << k << ' ' << freq << ' ';
        o.require(std::abs(freq - p) <= band, "dropout frequency outside the 99% band");
    }
}

// 8. Train the toy denoiser on 2000 forged triplets and restore 200 held-out items.
void toy_end_to_end(Outcome& o) {
    const fs::path root = scratch("e2e");
    write_procedural_sources(root / "src", 1000, 8008);
    DatasetConfig dc;
    dc.output_root = root / "data";
    dc.tasks = {"lowlight", "colorization"};
    dc.master_seed = 8008;
    const Manifest manifest = build_dataset(root / "src", dc).manifest;
    const std::vector<TrainingExample> all = load_training_examples(manifest, 32);
    o.require(all.size() == 2000, "expected 2000 triplets");
    const std::size_t held = 200;
    const std::vector<TrainingExample> train(all.begin(), all.end() - static_cast<long>(held));

    TrainConfig tc;
    tc.seed = 8;
    const TrainResult trained = train_toy(train, tc);
    const ToyDenoiser& model = trained.model;

    SamplerConfig sc;
    sc.schedule = build_edm_schedule(24, 0.002, 5.0);
    double gain = 0.0, blind_gain = 0.0;
    for (std::size_t i = 0; i < held; ++i) {
        const std::size_t k = all.size() - held + i;
        const TrainingExample& ex = all[k];
        const ManifestRecord& rec = manifest.records[k];
        const ImageBuffer input = pixel_latent_to_image(ex.condition), target = pixel_latent_to_image(ex.target);
        const double base = psnr(input, target);
        sc.seed = i;
        const Tensor out = plain_sample(model, model.condition(input, ex.instruction, ex.auxiliary), sc, {3, 32, 32}).latent;
        gain += psnr(pixel_latent_to_image(out).clamped(), target) - base;

        const std::string aux =
            auxiliary_prompt(CannedAuxiliaryProvider(CannedResponseTable::builtin(), rec.task), input);
        const Tensor blind = plain_sample(model, model.condition(input, "", aux), sc, {3, 32, 32}).latent;
        blind_gain += psnr(pixel_latent_to_image(blind).clamped(), target) - base;
    }
    gain /= static_cast<double>(held);
    blind_gain /= static_cast<double>(held);
    o.detail << "final loss " << trained.loss_curve.back() << " gain " << gain << " dB blind " << blind_gain << " dB ";
    o.require(gain >= 3.0, "mean PSNR gain below 3 dB");
    o.require(blind_gain >= 1.5, "blind PSNR gain below 1.5 dB");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 9. Worker-count determinism and a three-defect set through eval.
void forge_determinism(Outcome& o) {
    const fs::path root = scratch("forge");
    write_procedural_sources(root / "src", 12, 9009);
    DatasetConfig dc;
    dc.tasks = {"lowlight", "haze", "snow", "colorization", "superres+haze+snow", "removal"};
    dc.master_seed = 9009;
    std::string first;
    for (std::size_t workers : {1, 3, 8}) {
        dc.workers = workers;
        dc.output_root = root / ("w" + std::to_string(workers));
        build_dataset(root / "src", dc);
        const std::string text = slurp(dc.output_root / "manifest.jsonl");
        if (first.empty()) first = text;
        o.require(!text.empty() && text == first, "manifest differs at " + std::to_string(workers) + " workers");
    }

    dc.tasks = {"superres+haze+snow"};
    dc.workers = 2;
    dc.output_root = root / "composite";
    const Manifest m = build_dataset(root / "src", dc).manifest;
    double min_gap = 1e9;
    for (const ManifestRecord& r : m.records) {
        min_gap = std::min(min_gap, -psnr(read_image(m.resolve(r.input_path)), read_image(m.resolve(r.target_path))));
    }
    o.detail << "composite items " << m.records.size() << " best input psnr " << -min_gap << ' ';
#if HFDIFF_HAVE_CLI
    const std::string manifest_arg = (dc.output_root / "manifest.jsonl").string();
    const std::string run_root = "run_root=" + (root / "runs").string();
    const char* argv[] = {"hfdiff", "eval", "--manifest", manifest_arg.c_str(), "--set", run_root.c_str()};
    std::ostringstream out, err;
    const int code = cli::run_cli(6, argv, out, err);
    o.require(code == 0, "eval exited with " + std::to_string(code) + ": " + err.str());
    o.require(out.str().find("items=12") != std::string::npos, "eval did not score every item");
#else
    for (const ManifestRecord& r : m.records) {
        (void)evaluate_metrics(read_image(m.resolve(r.input_path)), read_image(m.resolve(r.target_path)));
    }
#endif
}

// 10. Metric identities.
void metric_sanity(Outcome& o) {
    Prng prng(1010);
    for (int i = 0; i < 10; ++i) {
        const ImageBuffer x(oracle::uniform(prng, {3, 16, 16}));
        o.require(psnr(x, x) == kPsnrInfinity, "psnr(x, x)");
        o.require(ssim(x, x) == 1.0, "ssim(x, x)");
        o.require(hf_residual(x, x) == 0.0, "hf_residual(x, x)");
    }
    const double half = psnr(ImageBuffer(8, 8, 3, 0.25), ImageBuffer(8, 8, 3, 0.75));
    o.require(std::abs(half - 6.0206) < 1e-4, "psnr half offset");
    const double s = ssim(ImageBuffer(16, 16, 3, 0.5), ImageBuffer(16, 16, 3, 0.6));
    const double closed = (2 * 0.5 * 0.6 + 1e-4) / (0.25 + 0.36 + 1e-4);
    o.detail << "ssim " << s << " closed form " << closed << ' ';
    o.require(std::abs(s - closed) <= 1e-6, "ssim constant pair");
    o.require(std::abs(s - 0.9836) <= 1e-4, "ssim constant pair vs 0.9836");
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        const char* name;
        Check run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria = {
        {"operator fidelity", operator_fidelity, 10},
        {"gradient correctness", gradient_correctness, 60},
        {"sampler statistics", sampler_statistics, 120},
        {"algorithm algebra", algorithm_algebra, 60},
        {"hgs efficacy", hgs_efficacy, 300},
        {"lora identity and update direction", lora_identity_and_direction, 60},
        {"conditioning behaviour", conditioning_behaviour, 60},
        {"toy end-to-end restoration", toy_end_to_end, 1800},
        {"forge determinism", forge_determinism, 120},
        {"metric sanity", metric_sanity, 10},
    };
    int failures = 0;
    std::vector<bool> selected(criteria.size(), argc == 1);
    for (int a = 1; a < argc; ++a) {
        const auto k = static_cast<std::size_t>(std::atoi(argv[a]));
        if (k >= 1 && k <= criteria.size()) selected[k - 1] = true;
    }
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected[i]) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(seconds <= criteria[i].budget_seconds, "over the time budget");
        failures += o.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s (%s%.1fs)\n", i + 1, criteria[i].name, o.pass ? "PASS" : "FAIL",
                    o.detail.str().c_str(), seconds);
        std::fflush(stdout);
    }
    return failures;
}
