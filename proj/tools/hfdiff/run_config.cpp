// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/run_config.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

namespace hfdiff::cli {

using nlohmann::json;

json default_config() {
    return json{
        {"run_root", ""},
        {"seed", 0u},
        {"schedule", {{"steps", 24u}, {"sigma_min", 0.002}, {"sigma_max", 5.0}, {"rho", 7.0}}},
        {"churn", {{"s_churn", 0.0}, {"s_noise", 1.0}, {"s_tmin", 0.0}, {"s_tmax", 1e30}}},
        {"sampler",
         {{"hgs", true},
          {"lambda", 0.001},
          {"eta", 2e-3},
          {"s_image", 1.0},
          {"s_text", 1.0},
          {"cutoff", 0.25},
          {"use_fourier", true},
          {"use_sobel", true},
          {"lora_rank", 4u},
          {"lora_stddev", 0.02},
          {"denoiser", "toy"},
          {"codec", "pixel"}}},
        {"sample",
         {{"input", ""}, {"target", ""}, {"instruction", ""}, {"no_instruction", false}, {"task", ""}}},
        {"forge",
         {{"source_dir", ""},
          {"num_sources", 1000u},
          {"size", 32u},
          {"tasks", json::array({"lowlight", "colorization"})},
          {"master_seed", 0u},
          {"workers", 1u},
          {"auxiliary_table", ""}}},
        {"model", {{"weights", ""}, {"resolution", 32u}}},
        {"train",
         {{"manifest", ""},
          {"iterations", 3000u},
          {"batch", 8u},
          {"learning_rate", 3e-3},
          {"clip_norm", 1.0},
          {"dropout", 0.075},
          {"p_mean", -0.4},
          {"p_std", 1.2},
          {"weighting", "edm"}}},
        {"eval", {{"manifest", ""}, {"outputs", ""}, {"cutoff", 0.25}}},
        {"gradcheck", {{"instances", 20u}}},
        {"decay", {{"lambda", 0.001}, {"steps", 50u}}},
    };
}

namespace {

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

bool compatible(const json& base, const json& value) {
    if (base.is_number_float()) return value.is_number();
    if (base.is_number_unsigned()) return value.is_number_unsigned();
    if (base.is_number_integer()) return value.is_number_integer();
    return base.type() == value.type();
}

const char* type_label(const json& v) {
    if (v.is_number_unsigned()) return "non-negative integer";
    if (v.is_number_integer()) return "integer";
    return v.type_name();
}

}  // namespace

json merge_config(const json& base, const json& user, const std::string& where) {
    if (!user.is_object()) throw ConfigError("config: " + (where.empty() ? std::string("document") : where) + " must be an object");
    json out = base;
    for (const auto& [key, value] : user.items()) {
        const std::string path = join(where, key);
        if (!base.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
        const json& b = base.at(key);
        if (b.is_object()) {
            out[key] = merge_config(b, value, path);
            continue;
        }
        if (!compatible(b, value)) {
            throw ConfigError("config: '" + path + "' expects " + type_label(b) + ", got " + type_label(value));
        }
        if (b.is_array()) {
            for (const json& item : value) {
                if (!item.is_string()) throw ConfigError("config: '" + path + "' expects an array of strings");
            }
        }
        out[key] = b.is_number_float() ? json(value.get<double>()) : value;
    }
    return out;
}

json apply_override(const json& config, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("config: override '" + std::string(assignment) + "' is not key=value");
    }
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    try {
        if (at_path(config, path).is_string()) value = text;
    } catch (const ConfigError&) {
        // unknown key; merge_config reports it
    }

    // Build the nested object {"a": {"b": value}} and merge it strictly.
    json patch = value;
    std::size_t end = path.size();
    while (true) {
        const std::size_t dot = path.rfind('.', end - 1);
        const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
        const std::string key = path.substr(start, end - start);
        if (key.empty()) throw ConfigError("config: malformed override key '" + path + "'");
        patch = json{{key, std::move(patch)}};
        if (dot == std::string::npos) break;
        end = dot;
    }
    return merge_config(config, patch);
}

json load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    json config = default_config();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw MissingInputError("config file not found: " + file.string());
        json user;
        try {
            in >> user;
        } catch (const json::exception& e) {
            throw ConfigError("config: cannot parse " + file.string() + ": " + e.what());
        }
        config = merge_config(config, user);
    }
    for (const std::string& o : overrides) config = apply_override(config, o);
    return config;
}

const json& at_path(const json& config, std::string_view path) {
    const json* node = &config;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key(path.substr(start, dot == std::string_view::npos ? path.npos : dot - start));
        if (!node->is_object() || !node->contains(key)) throw ConfigError("config: missing '" + std::string(path) + "'");
        node = &node->at(key);
        if (dot == std::string_view::npos) return *node;
        start = dot + 1;
    }
}

SamplerConfig sampler_config(const json& config) {
    const json& s = config.at("schedule");
    const json& c = config.at("churn");
    const json& p = config.at("sampler");
    SamplerConfig out;
    try {
        out.schedule = build_edm_schedule(s.at("steps").get<std::size_t>(), s.at("sigma_min").get<double>(),
                                          s.at("sigma_max").get<double>(), s.at("rho").get<double>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: schedule: ") + e.what());
    }
    out.churn = {c.at("s_churn").get<double>(), c.at("s_noise").get<double>(), c.at("s_tmin").get<double>(),
                 c.at("s_tmax").get<double>()};
    out.lambda = p.at("lambda").get<double>();
    out.eta = p.at("eta").get<double>();
    out.s_image = p.at("s_image").get<double>();
    out.s_text = p.at("s_text").get<double>();
    out.hgs_enabled = p.at("hgs").get<bool>();
    out.fidelity.highpass.cutoff_fraction = p.at("cutoff").get<double>();
    out.fidelity.use_fourier = p.at("use_fourier").get<bool>();
    out.fidelity.use_sobel = p.at("use_sobel").get<bool>();
    out.seed = config.at("seed").get<std::uint64_t>();
    try {
        out.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: sampler: ") + e.what());
    }
    return out;
}

TrainConfig train_config(const json& config) {
    const json& t = config.at("train");
    TrainConfig out;
    out.model.resolution = config.at("model").at("resolution").get<std::size_t>();
    out.iterations = t.at("iterations").get<std::size_t>();
    out.batch = t.at("batch").get<std::size_t>();
    out.learning_rate = t.at("learning_rate").get<double>();
    out.clip_norm = t.at("clip_norm").get<double>();
    out.dropout = t.at("dropout").get<double>();
    out.p_mean = t.at("p_mean").get<double>();
    out.p_std = t.at("p_std").get<double>();
    const std::string w = t.at("weighting").get<std::string>();
    if (w == "edm") {
        out.weighting = LossWeighting::edm;
    } else if (w == "epsilon") {
        out.weighting = LossWeighting::epsilon;
    } else {
        throw ConfigError("config: train.weighting must be 'edm' or 'epsilon'");
    }
    out.seed = config.at("seed").get<std::uint64_t>();
    if (out.batch == 0) throw ConfigError("config: train.batch must be positive");
    if (!(out.dropout >= 0.0 && out.dropout <= 1.0)) throw ConfigError("config: train.dropout must lie in [0, 1]");
    if (out.model.resolution == 0 || out.model.resolution % 4 != 0) {
        throw ConfigError("config: model.resolution must be a positive multiple of 4");
    }
    return out;
}

std::filesystem::path run_root(const json& config) {
    const std::string from_config = config.at("run_root").get<std::string>();
    if (!from_config.empty()) return from_config;
    if (const char* env = std::getenv("HFDIFF_RUN_ROOT"); env && *env) return env;
    return "runs";
}

std::filesystem::path make_run_dir(const json& config, const std::string& command) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const std::filesystem::path root = run_root(config);
    std::filesystem::create_directories(root);
    std::filesystem::path dir = root / (std::string(stamp) + "-" + command);
    for (int n = 1; !std::filesystem::create_directory(dir); ++n) {
        dir = root / (std::string(stamp) + "-" + command + "-" + std::to_string(n));
    }
    std::ofstream out(dir / "config.json");
    out << config.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.json").string());
    return dir;
}

}  // namespace hfdiff::cli
