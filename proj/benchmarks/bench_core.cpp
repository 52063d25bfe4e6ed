// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "hfdiff/forge.hpp"
#include "hfdiff/fourier.hpp"
#include "hfdiff/highfreq.hpp"
#include "hfdiff/sampler.hpp"
#include "hfdiff/tape.hpp"
#include "hfdiff/toy_denoiser.hpp"

using namespace hfdiff;

namespace {

void BM_Conv2d(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Prng prng(1);
    const Tensor x = gaussian(prng, {16, size, size});
    const Tensor w = gaussian(prng, {16, 16, 3, 3});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, w, 1, Padding::zero));
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32);

void BM_Dft2(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Prng prng(2);
    const Tensor x = gaussian(prng, {size, size});
    for (auto _ : state) benchmark::DoNotOptimize(dft2(x));
}
BENCHMARK(BM_Dft2)->Arg(16)->Arg(32)->Arg(48);

void BM_FidelityGrad(benchmark::State& state) {
    const ImageBuffer a = procedural_source(1), b = procedural_source(2);
    for (auto _ : state) benchmark::DoNotOptimize(fidelity_grad(a, b));
}
BENCHMARK(BM_FidelityGrad);

void BM_ToyDenoiserForward(benchmark::State& state) {
    const ToyDenoiser model = ToyDenoiser::init({}, 4);
    Prng prng(4);
    const ImageBuffer degraded = procedural_source(3);
    const ConditioningBundle cond = model.condition(degraded, "brighten the photo", "a dark picture");
    const Tensor z = gaussian(prng, {3, 32, 32});
    for (auto _ : state) benchmark::DoNotOptimize(model.denoise(z, 0.7, cond));
}
BENCHMARK(BM_ToyDenoiserForward);

// One HGS step: theta gradient through the skip-fused decoder.
void BM_HgsThetaGradient(benchmark::State& state) {
    const ToyAutoencoder ae;
    const ImageBuffer input = procedural_source(5), other = procedural_source(6);
    const SkipFusedDecoder dec(ae, ae.encode(input).skips);
    const Tensor latent = ae.encode(other).latent;
    Prng prng(5);
    const LoraParams theta = init_lora({}, prng);
    for (auto _ : state) benchmark::DoNotOptimize(dec.grad_theta(input, latent, theta, {}));
}
BENCHMARK(BM_HgsThetaGradient);

}  // namespace

BENCHMARK_MAIN();
