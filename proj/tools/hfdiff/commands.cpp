// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hfdiff/degrade.hpp"
#include "hfdiff/forge.hpp"
#include "hfdiff/gradcheck.hpp"
#include "hfdiff/image_io.hpp"
#include "hfdiff/metrics.hpp"
#include "hfdiff/run_config.hpp"
#include "hfdiff/weights_io.hpp"

namespace hfdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string str(const json& config, std::string_view path) { return at_path(config, path).get<std::string>(); }

fs::path required_file(const json& config, std::string_view path) {
    const std::string p = str(config, path);
    if (p.empty()) throw ConfigError("config: " + std::string(path) + " is required");
    if (!fs::exists(p)) throw MissingInputError(std::string(path) + ": no such file: " + p);
    return p;
}

ImageBuffer read_existing(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInputError("no such file: " + p.string());
    return read_image(p);
}

CannedResponseTable auxiliary_table(const json& config) {
    const std::string p = str(config, "forge.auxiliary_table");
    if (p.empty()) return CannedResponseTable::builtin();
    if (!fs::exists(p)) throw MissingInputError("forge.auxiliary_table: no such file: " + p);
    try {
        return CannedResponseTable::load(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void check_task(const std::string& task) {
    if (task == "removal" || task == "creation") return;
    for (const std::string& part : split_task(task)) {
        if (!is_degradation_task(part)) throw ConfigError("config: unknown task '" + task + "'");
    }
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

void cmd_synthesize(const json& config, std::ostream& out) {
    DatasetConfig dc;
    dc.tasks = at_path(config, "forge.tasks").get<std::vector<std::string>>();
    if (dc.tasks.empty()) throw ConfigError("config: forge.tasks is empty");
    for (const std::string& t : dc.tasks) check_task(t);
    dc.master_seed = at_path(config, "forge.master_seed").get<std::uint64_t>();
    dc.workers = at_path(config, "forge.workers").get<std::size_t>();
    if (dc.workers == 0) throw ConfigError("config: forge.workers must be positive");
    dc.auxiliary_table = auxiliary_table(config);
    fs::path source = str(config, "forge.source_dir");
    if (!source.empty() && !fs::is_directory(source)) {
        throw MissingInputError("forge.source_dir: no such directory: " + source.string());
    }

    const fs::path run = make_run_dir(config, "synthesize");
    out << "run_dir=" << run.string() << '\n';
    if (source.empty()) {
        source = run / "sources";
        const auto size = at_path(config, "forge.size").get<std::size_t>();
        write_procedural_sources(source, at_path(config, "forge.num_sources").get<std::size_t>(), dc.master_seed, size);
    }
    dc.output_root = run / "dataset";
    const DatasetResult result = build_dataset(source, dc);
    for (const std::string& w : result.warnings) out << "warning=" << json(w).dump() << '\n';
    out << "manifest=" << (dc.output_root / "manifest.jsonl").string() << '\n';
    out << "items=" << result.manifest.records.size() << '\n';
}

void cmd_train_toy(const json& config, std::ostream& out) {
    TrainConfig tc = train_config(config);
    const fs::path manifest_path = required_file(config, "train.manifest");
    const Manifest manifest = read_manifest(manifest_path);

    const fs::path run = make_run_dir(config, "train-toy");
    out << "run_dir=" << run.string() << '\n';
    tc.progress = [&out, total = tc.iterations](std::size_t it, double loss) {
        if (it % 500 == 0 || it == total) out << "iteration=" << it << " loss=" << fmt(loss) << std::endl;
    };
    const TrainResult result = train_toy(manifest, tc);
    result.model.save(run / "weights.hfdw");
    result.write_loss_csv(run / "loss.csv");
    out << "weights=" << (run / "weights.hfdw").string() << '\n';
    out << "loss_csv=" << (run / "loss.csv").string() << '\n';
}

void cmd_sample(const json& config, std::ostream& out) {
    const SamplerConfig sc = sampler_config(config);
    const ImageBuffer input = read_existing(required_file(config, "sample.input"));
    if (input.channels() != 3) throw ConfigError("sample.input must be an RGB image");
    const std::string denoiser_kind = str(config, "sampler.denoiser");
    const std::string codec = str(config, "sampler.codec");
    if (codec != "pixel" && codec != "autoencoder") throw ConfigError("config: sampler.codec must be 'pixel' or 'autoencoder'");

    std::string instruction = str(config, "sample.instruction");
    if (at_path(config, "sample.no_instruction").get<bool>()) instruction.clear();
    std::string auxiliary;
    if (const std::string task = str(config, "sample.task"); !task.empty()) {
        const CannedResponseTable table = auxiliary_table(config);
        if (!table.contains(task)) throw ConfigError("config: no canned auxiliary response for task '" + task + "'");
        auxiliary = auxiliary_prompt(CannedAuxiliaryProvider(table, task), input);
    }

    const ToyAutoencoder ae;
    const Encoded enc = ae.encode(input);
    std::unique_ptr<Denoiser> denoiser;
    ConditioningBundle cond;
    Shape latent_shape;
    if (denoiser_kind == "toy") {
        if (codec != "pixel") throw ConfigError("config: the toy denoiser works in pixel space (sampler.codec=pixel)");
        const fs::path weights = required_file(config, "model.weights");
        auto model = std::make_unique<ToyDenoiser>(ToyDenoiser::load(weights));
        const std::size_t res = model->config().resolution;
        if (input.height() != res || input.width() != res) {
            throw ConfigError("sample.input must be " + std::to_string(res) + "x" + std::to_string(res));
        }
        cond = model->condition(input, instruction, auxiliary);
        latent_shape = {3, res, res};
        denoiser = std::move(model);
    } else if (denoiser_kind == "oracle") {
        const ImageBuffer target = read_existing(required_file(config, "sample.target"));
        if (target.height() != input.height() || target.width() != input.width() || target.channels() != 3) {
            throw ConfigError("sample.target must match sample.input in size and be RGB");
        }
        Tensor z0 = codec == "pixel" ? image_to_pixel_latent(target) : ae.encode(target).latent;
        latent_shape = z0.shape();
        cond.image_latent = image_to_pixel_latent(input);
        denoiser = std::make_unique<OracleDenoiser>(std::move(z0));
    } else {
        throw ConfigError("config: sampler.denoiser must be 'toy' or 'oracle'");
    }

    std::unique_ptr<FidelityDecoder> decoder;
    if (codec == "pixel") {
        decoder = std::make_unique<PixelRoundTripDecoder>(ae, enc.skips);
    } else {
        decoder = std::make_unique<SkipFusedDecoder>(ae, enc.skips);
    }
    LoraInit li;
    li.rank = at_path(config, "sampler.lora_rank").get<std::size_t>();
    li.stddev = at_path(config, "sampler.lora_stddev").get<double>();
    if (li.rank == 0) throw ConfigError("config: sampler.lora_rank must be positive");
    Prng theta_prng(split_seed(sc.seed, 3));
    const LoraParams theta = init_lora(li, theta_prng);

    const fs::path run = make_run_dir(config, "sample");
    out << "run_dir=" << run.string() << '\n';
    const HgsResult r = hgs_sample(*denoiser, *decoder, theta, input, cond, sc, latent_shape);
    write_image(run / "output.png", r.image.clamped());
    r.trace.write_csv(run / "trace.csv");
    save_tensors(run / "theta.hfdw", r.theta.to_map());
    out << "output=" << (run / "output.png").string() << '\n';
    out << "trace=" << (run / "trace.csv").string() << '\n';
    if (const std::string t = str(config, "sample.target"); !t.empty()) {
        const MetricReport m = evaluate_metrics(r.image.clamped(), read_existing(t), sc.fidelity.highpass);
        out << "psnr=" << fmt(m.psnr) << " ssim=" << fmt(m.ssim) << " hf_residual=" << fmt(m.hf_residual) << '\n';
    }
}

void cmd_eval(const json& config, std::ostream& out) {
    const Manifest manifest = read_manifest(required_file(config, "eval.manifest"));
    const std::string outputs = str(config, "eval.outputs");
    if (!outputs.empty() && !fs::is_directory(outputs)) throw MissingInputError("eval.outputs: no such directory: " + outputs);
    HighPassSpec hp;
    hp.cutoff_fraction = at_path(config, "eval.cutoff").get<double>();
    try {
        hp.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: eval.cutoff: ") + e.what());
    }

    const fs::path run = make_run_dir(config, "eval");
    out << "run_dir=" << run.string() << '\n';
    std::ofstream csv(run / "metrics.csv");
    csv << "index,task,input_path,psnr,ssim,hf_residual\n";
    double sum_psnr = 0.0, sum_ssim = 0.0;
    std::size_t finite = 0;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const ManifestRecord& rec = manifest.records[i];
        const ImageBuffer target = read_existing(manifest.resolve(rec.target_path));
        // Without an outputs directory the degraded inputs are scored (baseline).
        const fs::path candidate = outputs.empty() ? manifest.resolve(rec.input_path) : fs::path(outputs) / rec.input_path;
        const ImageBuffer output = read_existing(candidate);
        const MetricReport m = evaluate_metrics(output, target, hp);
        csv << i << ',' << rec.task << ',' << rec.input_path << ',' << fmt(m.psnr) << ',' << fmt(m.ssim) << ','
            << fmt(m.hf_residual) << '\n';
        if (std::isfinite(m.psnr)) {
            sum_psnr += m.psnr;
            ++finite;
        }
        sum_ssim += m.ssim;
    }
    if (!csv) throw std::runtime_error("cannot write " + (run / "metrics.csv").string());
    out << "metrics=" << (run / "metrics.csv").string() << '\n';
    out << "items=" << manifest.records.size() << '\n';
    if (!manifest.records.empty()) {
        out << "mean_psnr=" << fmt(finite ? sum_psnr / static_cast<double>(finite) : kPsnrInfinity)
            << " mean_ssim=" << fmt(sum_ssim / static_cast<double>(manifest.records.size())) << '\n';
    }
}

bool cmd_gradcheck(const json& config, std::ostream& out) {
    const int instances = static_cast<int>(at_path(config, "gradcheck.instances").get<std::size_t>());
    if (instances <= 0) throw ConfigError("config: gradcheck.instances must be positive");
    const fs::path run = make_run_dir(config, "gradcheck");
    out << "run_dir=" << run.string() << '\n';
    const auto results = run_all_gradchecks(config.at("seed").get<std::uint64_t>(), instances);
    std::ofstream csv(run / "gradcheck.csv");
    csv << "suite,worst_relative_error,tolerance,instances,passed\n";
    bool all = true;
    for (const GradCheckResult& r : results) {
        csv << r.name << ',' << fmt(r.worst_relative_error) << ',' << fmt(r.tolerance) << ',' << r.instances << ','
            << (r.passed() ? 1 : 0) << '\n';
        out << "suite=" << r.name << " worst=" << fmt(r.worst_relative_error) << " tol=" << fmt(r.tolerance) << ' '
            << (r.passed() ? "PASS" : "FAIL") << '\n';
        all = all && r.passed();
    }
    out << "report=" << (run / "gradcheck.csv").string() << '\n';
    return all;
}

void cmd_plot_decay(const json& config, std::ostream& out) {
    const double lambda = at_path(config, "decay.lambda").get<double>();
    const auto steps = at_path(config, "decay.steps").get<std::size_t>();
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("config: decay.lambda must be finite and >= 0");
    const fs::path run = make_run_dir(config, "plot-decay");
    out << "run_dir=" << run.string() << '\n';
    std::ofstream csv(run / "decay.csv");
    csv << "t,weight\n";
    for (std::size_t t = 0; t <= steps; ++t) csv << t << ',' << fmt(decay_weight(lambda, t)) << '\n';
    if (!csv) throw std::runtime_error("cannot write " + (run / "decay.csv").string());
    out << "csv=" << (run / "decay.csv").string() << '\n';
}

namespace {

void error_line(std::ostream& err, int code, const char* kind, const std::string& message) {
    err << "error code=" << code << " kind=" << kind << " message=" << json(message).dump() << '\n';
}

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    json flags = json::object();
};

json::json_pointer pointer(std::string path) {
    for (char& c : path) {
        if (c == '.') c = '/';
    }
    return json::json_pointer("/" + path);
}

// Registers a typed option whose value lands at `path` in the flag overlay.
template <typename T>
void bind(CLI::App* app, Common& common, const std::string& name, const std::string& path, const std::string& help) {
    app->add_option_function<T>(
        name, [&common, ptr = pointer(path)](const T& v) { common.flags[ptr] = v; }, help);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"hfdiff: instruction-guided restoration toolkit"};
    app.require_subcommand(1);
    Common common;
    const auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", common.config_file, "JSON run config");
        sub->add_option("--set", common.sets, "override a config field: section.key=value");
        return sub;
    };

    CLI::App* synth = add("synthesize", "forge a triplet dataset");
    bind<std::string>(synth, common, "--source-dir", "forge.source_dir", "directory of clean images");
    bind<std::size_t>(synth, common, "--workers", "forge.workers", "worker threads");
    bind<std::uint64_t>(synth, common, "--master-seed", "forge.master_seed", "dataset seed");

    CLI::App* train = add("train-toy", "train the toy denoiser on a manifest");
    bind<std::string>(train, common, "--manifest", "train.manifest", "manifest.jsonl");
    bind<std::size_t>(train, common, "--iterations", "train.iterations", "optimizer steps");

    CLI::App* sample = add("sample", "restore one image");
    bind<std::string>(sample, common, "--input", "sample.input", "degraded image");
    bind<std::string>(sample, common, "--target", "sample.target", "clean image (oracle denoiser, metrics)");
    bind<std::string>(sample, common, "--instruction", "sample.instruction", "instruction text");
    bind<std::string>(sample, common, "--task", "sample.task", "task tag for the canned auxiliary provider");
    bind<std::string>(sample, common, "--weights", "model.weights", "toy denoiser weights");
    bind<std::string>(sample, common, "--denoiser", "sampler.denoiser", "toy or oracle");
    bind<std::string>(sample, common, "--codec", "sampler.codec", "pixel or autoencoder");
    sample->add_flag_callback("--no-instruction", [&] { common.flags["sample"]["no_instruction"] = true; },
                              "null the instruction branch (blind restoration)");
    sample->add_flag_function(
        "--hgs,!--no-hgs", [&](std::int64_t n) { common.flags["sampler"]["hgs"] = n > 0; },
        "toggle high-frequency guidance");

    CLI::App* eval = add("eval", "score outputs against manifest targets");
    bind<std::string>(eval, common, "--manifest", "eval.manifest", "manifest.jsonl");
    bind<std::string>(eval, common, "--outputs", "eval.outputs", "directory mirroring the manifest input paths");

    CLI::App* grad = add("gradcheck", "finite-difference gradient suites");
    bind<std::size_t>(grad, common, "--instances", "gradcheck.instances", "instances per suite");

    CLI::App* decay = add("plot-decay", "export the guidance decay curve");
    bind<double>(decay, common, "--lambda", "decay.lambda", "decay rate");
    bind<std::size_t>(decay, common, "--steps", "decay.steps", "last step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        error_line(err, kExitConfig, "config", e.what());
        return kExitConfig;
    }

    try {
        json config = load_config(common.config_file, common.sets);
        config = merge_config(config, common.flags);
        if (synth->parsed()) cmd_synthesize(config, out);
        if (train->parsed()) cmd_train_toy(config, out);
        if (sample->parsed()) cmd_sample(config, out);
        if (eval->parsed()) cmd_eval(config, out);
        if (decay->parsed()) cmd_plot_decay(config, out);
        if (grad->parsed() && !cmd_gradcheck(config, out)) {
            error_line(err, kExitOther, "gradcheck", "a finite-difference suite exceeded its tolerance");
            return kExitOther;
        }
        return 0;
    } catch (const ConfigError& e) {
        error_line(err, kExitConfig, "config", e.what());
        return kExitConfig;
    } catch (const MissingInputError& e) {
        error_line(err, kExitMissingInput, "missing_input", e.what());
        return kExitMissingInput;
    } catch (const NumericError& e) {
        error_line(err, kExitNumeric, "numeric", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        error_line(err, kExitOther, "error", e.what());
        return kExitOther;
    }
}

}  // namespace hfdiff::cli
