// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/toy_denoiser.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hfdiff/image_io.hpp"
#include "hfdiff/lora_decoder.hpp"
#include "hfdiff/random.hpp"
#include "hfdiff/schedule.hpp"

namespace hfdiff {

namespace {

constexpr const char* kMeta = "meta.config";
constexpr const char* kTable = "text.table";

struct ParamSpec {
    std::string name;
    Shape shape;
    double init_std;  // 0 -> zeros
};

std::vector<ParamSpec> param_specs(const ToyDenoiserConfig& c) {
    const auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
    const auto lin = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
    std::vector<ParamSpec> s = {
        {"sigma.w1", {1, c.d_sigma}, 1.0},
        {"sigma.b1", {1, c.d_sigma}, 0.0},
        {"sigma.w2", {c.d_sigma, c.d_sigma}, lin(c.d_sigma)},
        {"sigma.b2", {1, c.d_sigma}, 0.0},
        {"sigma.p1", {c.d_sigma, c.c1}, 0.0},
        {"sigma.p2", {c.d_sigma, c.c2}, 0.0},
        {"sigma.p3", {c.d_sigma, c.c3}, 0.0},
        {"in.z", {c.c1, 3, 3, 3}, he(27)},
        {"in.c", {c.c1, 3, 3, 3}, he(27)},
        {"in.b", {c.c1, 1, 1}, 0.0},
        {"enc1", {c.c1, c.c1, 3, 3}, he(9 * c.c1)},
        {"enc1.b", {c.c1, 1, 1}, 0.0},
        {"down1", {c.c2, c.c1, 3, 3}, he(9 * c.c1)},
        {"down1.b", {c.c2, 1, 1}, 0.0},
        {"enc2", {c.c2, c.c2, 3, 3}, he(9 * c.c2)},
        {"enc2.b", {c.c2, 1, 1}, 0.0},
        {"down2", {c.c3, c.c2, 3, 3}, he(9 * c.c2)},
        {"down2.b", {c.c3, 1, 1}, 0.0},
        {"mid", {c.c3, c.c3, 3, 3}, he(9 * c.c3)},
        {"mid.b", {c.c3, 1, 1}, 0.0},
        {"up2", {c.c2, c.c3, 3, 3}, he(9 * c.c3)},
        {"up2.b", {c.c2, 1, 1}, 0.0},
        {"dec2", {c.c2, c.c2, 3, 3}, he(9 * c.c2)},
        {"dec2.b", {c.c2, 1, 1}, 0.0},
        {"up1", {c.c1, c.c2, 3, 3}, he(9 * c.c2)},
        {"up1.b", {c.c1, 1, 1}, 0.0},
        {"dec1", {c.c1, c.c1, 3, 3}, he(9 * c.c1)},
        {"dec1.b", {c.c1, 1, 1}, 0.0},
        {"out", {3, c.c1, 3, 3}, 0.0},
        {"out.b", {3, 1, 1}, 0.0},
        {"text.null", {kMaxTokens, c.d_text}, 0.0},
    };
    for (const char* layer : {"instr", "aux"}) {
        const std::string p = std::string("attn.") + layer + ".";
        s.push_back({p + "wq", {c.c3, c.d_head}, lin(c.c3)});
        s.push_back({p + "wk", {c.d_text, c.d_head}, lin(c.d_text)});
        s.push_back({p + "wv", {c.d_text, c.d_head}, lin(c.d_text)});
        s.push_back({p + "wo", {c.d_head, c.c3}, lin(c.d_head)});
        s.push_back({p + "gate", {1, 1}, 0.0});
    }
    return s;
}

Tensor meta_tensor(const ToyDenoiserConfig& c) {
    return Tensor(Shape{8}, {static_cast<double>(c.c1), static_cast<double>(c.c2), static_cast<double>(c.c3),
                             static_cast<double>(c.d_text), static_cast<double>(c.d_head),
                             static_cast<double>(c.d_sigma), static_cast<double>(c.resolution), c.sigma_data});
}

ToyDenoiserConfig config_from_meta(const Tensor& m) {
    if (m.shape() != Shape{8}) throw WeightsError("toy denoiser: malformed meta.config");
    const auto dim = [&](std::size_t i) {
        if (!(m[i] >= 1.0) || m[i] != std::floor(m[i])) throw WeightsError("toy denoiser: malformed meta.config");
        return static_cast<std::size_t>(m[i]);
    };
    ToyDenoiserConfig c;
    c.c1 = dim(0);
    c.c2 = dim(1);
    c.c3 = dim(2);
    c.d_text = dim(3);
    c.d_head = dim(4);
    c.d_sigma = dim(5);
    c.resolution = dim(6);
    c.sigma_data = m[7];
    if (!(c.sigma_data > 0.0)) throw WeightsError("toy denoiser: sigma_data must be positive");
    return c;
}

struct Precond {
    double c_skip, c_out, c_in, c_noise;
};

Precond preconditioning(double sigma, double sd) {
    const double s2 = sigma * sigma, d2 = sd * sd;
    return {d2 / (s2 + d2), sigma * sd / std::sqrt(s2 + d2), 1.0 / std::sqrt(s2 + d2), std::log(sigma) / 4.0};
}

}  // namespace

ToyDenoiser ToyDenoiser::init(const ToyDenoiserConfig& config, std::uint64_t seed) {
    if (config.resolution % 4 != 0) throw std::invalid_argument("toy denoiser: resolution must be a multiple of 4");
    ToyDenoiser d;
    d.config_ = config;
    Prng prng(seed);
    d.tensors_[kMeta] = meta_tensor(config);
    d.tensors_[kTable] = gaussian(prng, Shape{kVocabBuckets, config.d_text});
    for (const ParamSpec& p : param_specs(config)) {
        Tensor t(p.shape);
        if (p.init_std > 0.0) {
            t = gaussian(prng, p.shape);
            t *= p.init_std;
        }
        d.tensors_[p.name] = std::move(t);
    }
    d.tensors_["attn.instr.gate"][0] = 1.0;  // auxiliary gate stays 0
    return d;
}

ToyDenoiser ToyDenoiser::from_tensors(TensorMap tensors) {
    const auto meta = tensors.find(kMeta);
    if (meta == tensors.end()) throw WeightsError("toy denoiser: missing meta.config");
    ToyDenoiser d;
    d.config_ = config_from_meta(meta->second);
    (void)require_tensor(tensors, kTable, Shape{kVocabBuckets, d.config_.d_text});
    std::size_t expected = 2;
    for (const ParamSpec& p : param_specs(d.config_)) {
        (void)require_tensor(tensors, p.name, p.shape);
        ++expected;
    }
    if (tensors.size() != expected) throw WeightsError("toy denoiser: unexpected extra tensors");
    for (const auto& [name, t] : tensors) {
        if (!t.all_finite()) throw WeightsError("toy denoiser: tensor '" + name + "' is not finite");
    }
    d.tensors_ = std::move(tensors);
    return d;
}

ToyDenoiser ToyDenoiser::load(const std::filesystem::path& path) { return from_tensors(load_tensors(path)); }

void ToyDenoiser::save(const std::filesystem::path& path) const { save_tensors(path, tensors_); }

std::vector<std::string> ToyDenoiser::trainable_names() const {
    std::vector<std::string> names;
    for (const ParamSpec& p : param_specs(config_)) names.push_back(p.name);
    return names;
}

TextEncoder ToyDenoiser::text_encoder() const { return TextEncoder(tensors_.at(kTable), tensors_.at("text.null")); }

DualAttentionParams ToyDenoiser::attention_params() const {
    const auto layer = [&](const std::string& p) {
        AttentionLayer l;
        l.wq = tensors_.at(p + "wq");
        l.wk = tensors_.at(p + "wk");
        l.wv = tensors_.at(p + "wv");
        l.wo = tensors_.at(p + "wo");
        l.gate = tensors_.at(p + "gate")[0];
        return l;
    };
    return {layer("attn.instr."), layer("attn.aux.")};
}

ConditioningBundle ToyDenoiser::condition(const ImageBuffer& degraded, std::string_view instruction,
                                          std::string_view auxiliary) const {
    const TextEncoder enc = text_encoder();
    ConditioningBundle b;
    b.instruction = enc.embed(instruction);
    b.auxiliary = enc.embed(auxiliary);
    b.image_latent = image_to_pixel_latent(degraded);
    b.dropped.instruction = b.instruction.is_null;
    b.dropped.auxiliary = b.auxiliary.is_null;
    return b;
}

Var ToyDenoiser::forward(Tape& tape, const Tensor& z, double sigma, const ConditioningBundle& cond,
                         std::map<std::string, Var>* params) const {
    const ToyDenoiserConfig& c = config_;
    const Shape img{3, c.resolution, c.resolution};
    if (z.shape() != img) throw std::invalid_argument("toy denoiser: latent must be " + shape_string(img));
    if (cond.image_latent.shape() != img) {
        throw std::invalid_argument("toy denoiser: image conditioning must be " + shape_string(img));
    }
    std::map<std::string, Var> local;
    std::map<std::string, Var>& vars = params ? *params : local;
    const bool trainable = params != nullptr;
    const auto P = [&](const std::string& name) {
        auto it = vars.find(name);
        if (it != vars.end()) return it->second;
        const Tensor& t = tensors_.at(name);
        const Var v = trainable ? tape.input(t) : tape.constant(t);
        vars.emplace(name, v);
        return v;
    };
    const auto silu = [&](Var v) { return tape.activate(v, Activation::silu); };
    const auto conv = [&](Var x, const std::string& w, std::size_t stride = 1) {
        return tape.add(tape.conv2d(x, P(w), stride), P(w + ".b"));
    };

    const Precond pc = preconditioning(sigma, c.sigma_data);

    // Noise-level embedding.
    const Var cn = tape.constant(Tensor(Shape{1, 1}, std::vector<double>{pc.c_noise}));
    const Var e1 = silu(tape.add(tape.matmul(cn, P("sigma.w1")), P("sigma.b1")));
    const Var emb = silu(tape.add(tape.matmul(e1, P("sigma.w2")), P("sigma.b2")));
    const auto level_bias = [&](const char* name, std::size_t ch) {
        return tape.reshape(tape.matmul(emb, P(name)), Shape{ch, 1, 1});
    };

    Tensor scaled = z;
    scaled *= pc.c_in;
    const Var x_in = tape.constant(std::move(scaled));
    const Var x_img = tape.constant(cond.image_latent);

    Var h = tape.add(tape.add(tape.conv2d(x_in, P("in.z")), tape.conv2d(x_img, P("in.c"))), P("in.b"));
    h = silu(tape.add(h, level_bias("sigma.p1", c.c1)));
    const Var s1 = silu(conv(h, "enc1"));
    h = silu(tape.add(conv(s1, "down1", 2), level_bias("sigma.p2", c.c2)));
    const Var s2 = silu(conv(h, "enc2"));
    h = silu(tape.add(conv(s2, "down2", 2), level_bias("sigma.p3", c.c3)));

    // Cross-attention over the 1/4-resolution tokens, kept channel-major: X is [c3, n].
    const std::size_t q = c.resolution / 4;
    const std::size_t n_tok = q * q;
    Var x = tape.reshape(h, Shape{c.c3, n_tok});
    const auto context = [&](const PromptEmbedding& e) {
        if (e.is_null) return P("text.null");
        if (e.tokens.shape() != Shape{kMaxTokens, c.d_text}) {
            throw std::invalid_argument("toy denoiser: prompt embedding must be [16, d_text]");
        }
        return tape.constant(e.tokens);
    };
    const auto attend = [&](Var xt, Var ctx, const std::string& p) {
        const Var qv = tape.matmul(xt, P(p + "wq"), true, false);       // [n, dh]
        const Var kv = tape.matmul(ctx, P(p + "wk"));                    // [16, dh]
        const Var vv = tape.matmul(ctx, P(p + "wv"));                    // [16, dh]
        const Var sc = tape.scale(tape.matmul(qv, kv, false, true), 1.0 / std::sqrt(static_cast<double>(c.d_head)));
        const Var av = tape.matmul(tape.softmax(sc), vv);                // [n, dh]
        const Var outT = tape.matmul(P(p + "wo"), av, true, true);       // [c3, n]
        const Var gated = tape.matmul(tape.reshape(outT, Shape{c.c3 * n_tok, 1}), P(p + "gate"));
        return tape.add(xt, tape.reshape(gated, Shape{c.c3, n_tok}));
    };
    x = attend(x, context(cond.instruction), "attn.instr.");
    x = attend(x, context(cond.auxiliary), "attn.aux.");
    h = tape.reshape(x, Shape{c.c3, q, q});

    h = silu(conv(h, "mid"));
    h = tape.add(silu(conv(tape.upsample2x(h), "up2")), s2);
    h = silu(conv(h, "dec2"));
    h = tape.add(silu(conv(tape.upsample2x(h), "up1")), s1);
    h = silu(conv(h, "dec1"));
    const Var f = conv(h, "out");

    Tensor skip = z;
    skip *= pc.c_skip;
    return tape.add(tape.constant(std::move(skip)), tape.scale(f, pc.c_out));
}

DenoiserEval ToyDenoiser::evaluate(const Tensor& z, double sigma, const ConditioningBundle& cond) const {
    Tape tape;
    const Var d = forward(tape, z, sigma, cond, nullptr);
    return eval_from_denoised(z, sigma, tape.value(d));
}

std::vector<TrainingExample> load_training_examples(const Manifest& manifest, std::size_t resolution) {
    if (manifest.records.empty()) throw std::invalid_argument("train: manifest is empty");
    std::vector<TrainingExample> out;
    out.reserve(manifest.records.size());
    for (const ManifestRecord& r : manifest.records) {
        const ImageBuffer input = read_image(manifest.resolve(r.input_path));
        const ImageBuffer target = read_image(manifest.resolve(r.target_path));
        for (const ImageBuffer* im : {&input, &target}) {
            if (im->height() != resolution || im->width() != resolution || im->channels() != 3) {
                throw std::invalid_argument("train: " + r.input_path + " is not " + std::to_string(resolution) + "x" +
                                            std::to_string(resolution) + " RGB");
            }
        }
        out.push_back({image_to_pixel_latent(target), image_to_pixel_latent(input), r.instruction, r.auxiliary});
    }
    return out;
}

void TrainResult::write_loss_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("train: cannot write " + path.string());
    out.precision(17);
    out << "iteration,loss\n";
    for (std::size_t i = 0; i < loss_curve.size(); ++i) out << i + 1 << ',' << loss_curve[i] << '\n';
}

TrainResult train_toy(const std::vector<TrainingExample>& examples, const TrainConfig& cfg) {
    if (examples.empty()) throw std::invalid_argument("train: no examples");
    if (cfg.batch == 0) throw std::invalid_argument("train: batch must be positive");
    if (!(cfg.dropout >= 0.0 && cfg.dropout <= 1.0)) throw std::invalid_argument("train: dropout must lie in [0, 1]");
    const std::size_t res = cfg.model.resolution;
    for (const TrainingExample& e : examples) {
        if (e.target.shape() != Shape{3, res, res} || e.condition.shape() != Shape{3, res, res}) {
            throw std::invalid_argument("train: example resolution does not match the model");
        }
    }

    Prng init_prng(split_seed(cfg.seed, 0));
    TrainResult result;
    result.model = ToyDenoiser::init(cfg.model, init_prng.next_u64());
    ToyDenoiser& model = result.model;
    const TextEncoder enc = model.text_encoder();

    std::vector<PromptEmbedding> instr, aux;
    for (const TrainingExample& e : examples) {
        instr.push_back(enc.embed(e.instruction));
        aux.push_back(enc.embed(e.auxiliary));
    }

    const std::vector<std::string> names = model.trainable_names();
    std::map<std::string, Tensor> m1, m2;
    for (const std::string& n : names) {
        m1[n] = Tensor(model.tensors().at(n).shape());
        m2[n] = Tensor(model.tensors().at(n).shape());
    }
    Prng prng(split_seed(cfg.seed, 1));
    Prng drop_prng(split_seed(cfg.seed, 2));
    const ConditioningDropout dropout{cfg.dropout};
    const std::function<double()> uniform =
        cfg.dropout_uniform ? cfg.dropout_uniform : std::function<double()>([&drop_prng] { return drop_prng.uniform(); });
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    const double numel = static_cast<double>(3 * res * res);

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        std::map<std::string, Tensor> grads;
        for (const std::string& n : names) grads[n] = Tensor(model.tensors().at(n).shape());
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const std::size_t idx = prng.below(examples.size());
            const TrainingExample& ex = examples[idx];
            const double sigma = std::exp(cfg.p_mean + cfg.p_std * prng.gaussian());
            const Tensor eps = gaussian(prng, ex.target.shape());
            const DropFlags flags = dropout.draw(uniform);
            result.dropped_image += flags.image;
            result.dropped_instruction += flags.instruction;
            result.dropped_auxiliary += flags.auxiliary;
            ++result.samples;

            ConditioningBundle cond{instr[idx], aux[idx], ex.condition, {}};
            cond.dropped = {false, instr[idx].is_null, aux[idx].is_null};
            cond = cond.with_dropped(flags);

            const Tensor z = forward_diffuse(ex.target, eps, 1.0, sigma);
            Tape tape;
            std::map<std::string, Var> vars;
            const Var d = model.forward(tape, z, sigma, cond, &vars);
            // eps - eps_hat = (D - z0) / sigma
            Tensor neg_target = ex.target;
            neg_target *= -1.0;
            double w = 1.0 / sigma;
            if (cfg.weighting == LossWeighting::edm) {
                const double sd = cfg.model.sigma_data;
                w *= std::sqrt(sigma * sigma + sd * sd) / sd;
            }
            const Var resid = tape.scale(tape.add(d, tape.constant(std::move(neg_target))), w);
            const Var loss = tape.scale(sum_squares(tape, resid), 1.0 / (numel * static_cast<double>(cfg.batch)));
            batch_loss += tape.value(loss)[0];
            tape.backward(loss);
            for (const std::string& n : names) {
                const auto v = vars.find(n);
                if (v != vars.end()) grads[n] += tape.grad(v->second);
            }
        }
        if (!std::isfinite(batch_loss)) throw std::runtime_error("train: loss became non-finite at iteration " + std::to_string(it));
        result.loss_curve.push_back(batch_loss);

        double gnorm2 = 0.0;
        for (const auto& [n, g] : grads) gnorm2 += g.squared_norm();
        const double gnorm = std::sqrt(gnorm2);
        const double clip = cfg.clip_norm > 0.0 && gnorm > cfg.clip_norm ? cfg.clip_norm / gnorm : 1.0;
        const double progress = static_cast<double>(it - 1) / static_cast<double>(std::max<std::size_t>(cfg.iterations, 1));
        const double lr = cfg.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(3.141592653589793 * progress)));
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(it));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(it));
        for (const std::string& n : names) {
            Tensor& w = model.tensors().at(n);
            Tensor& a = m1.at(n);
            Tensor& s = m2.at(n);
            const Tensor& g = grads.at(n);
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g[i] * clip;
                a[i] = kBeta1 * a[i] + (1.0 - kBeta1) * gi;
                s[i] = kBeta2 * s[i] + (1.0 - kBeta2) * gi * gi;
                w[i] -= lr * (a[i] / bc1) / (std::sqrt(s[i] / bc2) + kEps);
            }
        }
        if (cfg.progress) cfg.progress(it, batch_loss);
    }
    return result;
}

TrainResult train_toy(const Manifest& manifest, const TrainConfig& config) {
    return train_toy(load_training_examples(manifest, config.model.resolution), config);
}

}  // namespace hfdiff
