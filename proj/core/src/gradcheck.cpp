// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hfdiff/highfreq.hpp"
#include "hfdiff/image.hpp"
#include "hfdiff/lora_decoder.hpp"
#include "hfdiff/random.hpp"
#include "hfdiff/tape.hpp"

namespace hfdiff {

double relative_error(const Tensor& analytic, const Tensor& numeric, double floor) {
    require_same_shape(analytic, numeric, "relative_error");
    const double scale = std::max({analytic.norm(), numeric.norm(), floor});
    return (analytic - numeric).norm() / scale;
}

Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& at, double h) {
    Tensor grad(at.shape());
    Tensor probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks every input of `build` against central differences of <build(inputs), R>.
double check_graph(const Builder& build, const std::vector<Tensor>& inputs, Prng& prng) {
    Tensor probe_out;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& t : inputs) vars.push_back(tape.input(t));
        probe_out = tape.value(build(tape, vars));
    }
    const Tensor r = gaussian(prng, probe_out.shape());

    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.input(t));
    tape.backward(build(tape, vars), r);

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto f = [&](const Tensor& xk) {
            Tape t2;
            std::vector<Var> v2;
            for (std::size_t j = 0; j < inputs.size(); ++j) v2.push_back(t2.constant(j == k ? xk : inputs[j]));
            return dot(t2.value(build(t2, v2)), r);
        };
        worst = std::max(worst, relative_error(tape.grad(vars[k]), finite_difference(f, inputs[k])));
    }
    return worst;
}

Tensor away_from_zero(Tensor t) {
    for (double& v : t.data()) {
        if (std::abs(v) < 0.05) v = v < 0.0 ? -0.1 : 0.1;
    }
    return t;
}

}  // namespace

GradCheckResult check_tape_primitives(std::uint64_t seed, int instances) {
    GradCheckResult res{"tape primitives", 0.0, 1e-4, 0};
    for (int n = 0; n < instances; ++n) {
        Prng prng(split_seed(seed, static_cast<std::uint64_t>(n)));
        auto g = [&](Shape s) { return gaussian(prng, s); };
        auto run = [&](const Builder& b, std::vector<Tensor> in) {
            res.worst_relative_error = std::max(res.worst_relative_error, check_graph(b, in, prng));
            ++res.instances;
        };
        for (int ta = 0; ta < 2; ++ta) {
            for (int tb = 0; tb < 2; ++tb) {
                const Shape sa = ta ? Shape{4, 3} : Shape{3, 4};
                const Shape sb = tb ? Shape{5, 4} : Shape{4, 5};
                run([ta, tb](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1], ta, tb); }, {g(sa), g(sb)});
            }
        }
        for (std::size_t stride : {1u, 2u}) {
            for (Padding pad : {Padding::zero, Padding::replicate}) {
                run([stride, pad](Tape& t, const std::vector<Var>& v) { return t.conv2d(v[0], v[1], stride, pad); },
                    {g({2, 5, 6}), g({3, 2, 3, 3})});
            }
        }
        run([](Tape& t, const std::vector<Var>& v) { return t.conv2d(v[0], v[1], 1, Padding::replicate); },
            {g({2, 4, 5}), g({2, 2, 1, 3})});
        run([](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); }, {g({2, 3, 4}), g({2, 1, 4})});
        run([](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); }, {g({3, 4}), g({1, 1})});
        run([](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -1.7); }, {g({3, 4})});
        run([](Tape& t, const std::vector<Var>& v) { return t.softmax(v[0]); }, {g({3, 5})});
        for (Activation f : {Activation::identity, Activation::relu, Activation::silu, Activation::tanh}) {
            run([f](Tape& t, const std::vector<Var>& v) { return t.activate(v[0], f); }, {away_from_zero(g({2, 3, 3}))});
        }
        run([](Tape& t, const std::vector<Var>& v) { return t.reshape(v[0], Shape{6, 2}); }, {g({3, 4})});
        run([](Tape& t, const std::vector<Var>& v) { return t.upsample2x(v[0]); }, {g({2, 3, 2})});
        run([](Tape& t, const std::vector<Var>& v) { return t.pixel_shuffle(v[0]); }, {g({8, 2, 3})});
        run([](Tape& t, const std::vector<Var>& v) { return sum_squares(t, v[0]); }, {g({2, 3})});
    }
    return res;
}

GradCheckResult check_tape_compositions(std::uint64_t seed, int instances) {
    GradCheckResult res{"tape compositions", 0.0, 1e-4, 0};
    // Shape-preserving steps on a [2, 4, 4] value; the second input is a [2, 2, 3, 3] kernel.
    const std::vector<std::function<Var(Tape&, Var, Var)>> steps = {
        [](Tape& t, Var x, Var w) { return t.conv2d(x, w, 1, Padding::zero); },
        [](Tape& t, Var x, Var w) { return t.conv2d(x, w, 1, Padding::replicate); },
        [](Tape& t, Var x, Var) { return t.activate(x, Activation::tanh); },
        [](Tape& t, Var x, Var) { return t.activate(x, Activation::silu); },
        [](Tape& t, Var x, Var) { return t.scale(x, 0.6); },
        [](Tape& t, Var x, Var) { return t.softmax(x); },
        [](Tape& t, Var x, Var) { return t.add(x, t.reshape(t.softmax(t.reshape(x, Shape{32})), Shape{2, 4, 4})); },
        [](Tape& t, Var x, Var) {
            const Var m = t.reshape(x, Shape{8, 4});
            return t.reshape(t.scale(t.matmul(m, t.matmul(m, m, true, false)), 0.2), Shape{2, 4, 4});
        },
    };
    for (int n = 0; n < instances; ++n) {
        Prng prng(split_seed(seed, 1000 + static_cast<std::uint64_t>(n)));
        std::vector<std::size_t> pick;
        for (int k = 0; k < 3; ++k) pick.push_back(prng.below(steps.size()));
        const Builder b = [&](Tape& t, const std::vector<Var>& v) {
            Var x = v[0];
            for (std::size_t p : pick) x = steps[p](t, x, v[1]);
            return x;
        };
        Tensor x = gaussian(prng, Shape{2, 4, 4});
        x *= 0.5;
        Tensor w = gaussian(prng, Shape{2, 2, 3, 3});
        w *= 0.4;
        res.worst_relative_error = std::max(res.worst_relative_error, check_graph(b, {x, w}, prng));
        ++res.instances;
    }
    return res;
}

GradCheckResult check_fidelity_grad(std::uint64_t seed, int instances) {
    GradCheckResult res{"fidelity gradient", 0.0, 1e-5, 0};
    for (int n = 0; n < instances; ++n) {
        Prng prng(split_seed(seed, 2000 + static_cast<std::uint64_t>(n)));
        const std::size_t ch = n % 2 == 0 ? 1 : 3;
        const ImageBuffer ref(gaussian(prng, Shape{ch, 6, 6}));
        const ImageBuffer cand(gaussian(prng, Shape{ch, 6, 6}));
        FidelityOptions opt;
        opt.highpass.cutoff_fraction = prng.uniform(0.1, 0.6);
        const Tensor analytic = fidelity_grad(ref, cand, opt);
        const auto f = [&](const Tensor& j) { return fidelity_loss(ref, ImageBuffer(j), opt); };
        res.worst_relative_error = std::max(res.worst_relative_error, relative_error(analytic, finite_difference(f, cand.planes())));
        ++res.instances;
    }
    return res;
}

GradCheckResult check_lora_grad(std::uint64_t seed, int instances) {
    GradCheckResult res{"lora gradient", 0.0, 1e-4, 0};
    const ToyAutoencoder ae;
    for (int n = 0; n < instances; ++n) {
        Prng prng(split_seed(seed, 3000 + static_cast<std::uint64_t>(n)));
        Tensor img = gaussian(prng, Shape{3, 8, 8});
        for (double& v : img.data()) v = 0.5 + 0.2 * v;
        const Encoded enc = ae.encode(ImageBuffer(img));
        Tensor other = gaussian(prng, Shape{3, 8, 8});
        for (double& v : other.data()) v = 0.5 + 0.2 * v;
        const Encoded latent_src = ae.encode(ImageBuffer(other));
        const ImageBuffer ref(gaussian(prng, Shape{3, 8, 8}));
        LoraInit init;
        init.rank = 1;
        init.stddev = 0.3;
        init.both_random = true;
        LoraParams theta = init_lora(init, prng);
        const LoraGradient g = ae.grad_theta(ref, latent_src.latent, enc.skips, theta);
        const auto f = [&](const Tensor& flat) {
            LoraParams p = theta;
            p.unflatten(flat);
            return fidelity_loss(ref, ae.decode(latent_src.latent, enc.skips, p));
        };
        res.worst_relative_error =
            std::max(res.worst_relative_error, relative_error(g.grad.flatten(), finite_difference(f, theta.flatten())));
        ++res.instances;
    }
    return res;
}

std::vector<GradCheckResult> run_all_gradchecks(std::uint64_t seed, int instances) {
    return {check_tape_primitives(seed, std::max(1, instances / 4)), check_tape_compositions(seed, instances),
            check_fidelity_grad(seed, instances), check_lora_grad(seed, instances)};
}

}  // namespace hfdiff
