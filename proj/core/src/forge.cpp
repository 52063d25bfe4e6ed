// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/forge.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hfdiff/degrade.hpp"
#include "hfdiff/image_io.hpp"
#include "hfdiff/instructions.hpp"
#include "hfdiff/random.hpp"

namespace hfdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFields[] = {"auxiliary", "input_path", "instruction", "params", "seed", "target_path", "task"};

enum SeedStream : std::uint64_t { kParamsStream = 0, kApplyStream = 1, kTextStream = 2, kObjectStream = 3 };

std::string padded(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", k);
    return buf;
}

ImageBuffer as_rgb(const ImageBuffer& image) {
    if (image.channels() == 3) return image;
    ImageBuffer out(image.height(), image.width(), 3);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < image.height(); ++y)
            for (std::size_t x = 0; x < image.width(); ++x) out.at(c, y, x) = image.at(0, y, x);
    }
    return out;
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

double smoothstep(double edge, double x) {
    // 1 inside (x < -edge), 0 outside (x > edge), smooth in between.
    const double t = std::clamp(0.5 - x / (2.0 * edge), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Colour on a fixed hue ramp whose Rec.601 luminance is exactly t, so a grey
// pixel determines its colour and colorization stays well posed.
std::array<double, 3> palette_colour(double t) {
    static const std::array<std::array<double, 3>, 2> basis = [] {
        const std::array<double, 3> w{0.299, 0.587, 0.114};
        std::array<double, 3> e1{w[1], -w[0], 0.0};
        std::array<double, 3> e2{w[1] * e1[2] - w[2] * e1[1], w[2] * e1[0] - w[0] * e1[2], w[0] * e1[1] - w[1] * e1[0]};
        for (auto* e : {&e1, &e2}) {
            const double n = std::hypot((*e)[0], (*e)[1], (*e)[2]);
            for (double& v : *e) v /= n;
        }
        return std::array<std::array<double, 3>, 2>{e1, e2};
    }();
    const double amp = 0.8 * std::min(t, 1.0 - t);
    const double c = std::cos(2.0 * std::numbers::pi * t), s = std::sin(2.0 * std::numbers::pi * t);
    std::array<double, 3> out{};
    for (std::size_t k = 0; k < 3; ++k) out[k] = t + amp * (c * basis[0][k] + s * basis[1][k]);
    return out;
}

std::array<double, 3> random_colour(Prng& prng) { return palette_colour(prng.uniform()); }

// Signed distance (negative inside) of pixel (x, y) to a shape centred at (cx, cy).
double shape_distance(const std::string& object, double x, double y, double cx, double cy, double r) {
    const double dx = x - cx, dy = y - cy;
    if (object == "ball") return std::hypot(dx, dy) - r;
    if (object == "box") return std::max(std::abs(dx), std::abs(dy)) - r;
    if (object == "kite") return (std::abs(dx) + std::abs(dy)) / std::numbers::sqrt2 - r * 0.8;
    if (object == "ring") return std::abs(std::hypot(dx, dy) - 0.7 * r) - 0.3 * r;
    if (object == "block") return std::max(std::abs(dx) - 1.3 * r, std::abs(dy) - 0.6 * r);
    if (object == "star") {
        const double a = std::atan2(dy, dx);
        const double radius = r * (0.65 + 0.35 * std::cos(5.0 * a));
        return std::hypot(dx, dy) - radius;
    }
    throw std::invalid_argument("unknown object '" + object + "'");
}

}  // namespace

json to_json(const ManifestRecord& r) {
    return json{{"input_path", r.input_path}, {"target_path", r.target_path}, {"instruction", r.instruction},
                {"auxiliary", r.auxiliary},   {"task", r.task},               {"seed", r.seed},
                {"params", r.params}};
}

ManifestRecord record_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("manifest: record must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(std::begin(kFields), std::end(kFields), [&](const char* f) { return k == f; })) {
            throw std::invalid_argument("manifest: unknown field '" + k + "'");
        }
    }
    for (const char* f : kFields) {
        if (!j.contains(f)) throw std::invalid_argument(std::string("manifest: missing field '") + f + "'");
    }
    ManifestRecord r;
    r.input_path = j.at("input_path").get<std::string>();
    r.target_path = j.at("target_path").get<std::string>();
    r.instruction = j.at("instruction").get<std::string>();
    r.auxiliary = j.at("auxiliary").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = j.at("params");
    return r;
}

std::string manifest_text(const std::vector<ManifestRecord>& records) {
    std::string out;
    for (const ManifestRecord& r : records) out += to_json(r).dump() + "\n";
    return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
    out << manifest_text(records);
    if (!out) throw std::runtime_error("manifest: write failed for " + path.string());
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
    Manifest m;
    m.root = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            m.records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

ManifestRecord swap_triplet(const ManifestRecord& record, const CannedResponseTable& table) {
    std::string flipped;
    if (record.task == "removal") {
        flipped = "creation";
    } else if (record.task == "creation") {
        flipped = "removal";
    } else {
        throw std::invalid_argument("swap_triplet: task must be removal or creation, got '" + record.task + "'");
    }
    if (!record.params.contains("template_index") || !record.params.contains("object")) {
        throw std::invalid_argument("swap_triplet: record lacks template_index/object params");
    }
    const auto index = record.params.at("template_index").get<std::size_t>();
    if (index >= instruction_templates(flipped).size()) {
        throw std::invalid_argument("swap_triplet: no inverse template for index " + std::to_string(index));
    }
    ManifestRecord out = record;
    std::swap(out.input_path, out.target_path);
    out.task = flipped;
    out.instruction = render_template(flipped, index, record.params.at("object").get<std::string>());
    out.auxiliary = build_auxiliary_prompt(table.lookup(flipped).semantic, table.lookup(flipped).defect);
    return out;
}

ImageBuffer composite_object(const ImageBuffer& background, const std::string& object, std::uint64_t seed) {
    Prng prng(seed);
    const double h = static_cast<double>(background.height());
    const double w = static_cast<double>(background.width());
    const double r = std::min(h, w) * prng.uniform(0.15, 0.25);
    const double cx = prng.uniform(0.3, 0.7) * w;
    const double cy = prng.uniform(0.3, 0.7) * h;
    const auto colour = random_colour(prng);
    ImageBuffer out = as_rgb(background);
    for (std::size_t y = 0; y < out.height(); ++y) {
        for (std::size_t x = 0; x < out.width(); ++x) {
            const double d = shape_distance(object, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, cx, cy, r);
            const double a = smoothstep(0.75, d);
            for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = out.at(c, y, x) * (1.0 - a) + colour[c] * a;
        }
    }
    return out;
}

ImageBuffer procedural_source(std::uint64_t seed, std::size_t height, std::size_t width) {
    Prng prng(seed);
    const double t0 = prng.uniform(), t1 = prng.uniform();
    const double angle = prng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double hh = static_cast<double>(height), ww = static_cast<double>(width);
    ImageBuffer img(height, width, 3);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double u = ((static_cast<double>(x) / ww - 0.5) * ca + (static_cast<double>(y) / hh - 0.5) * sa) + 0.5;
            const double t = std::clamp(u, 0.0, 1.0);
            const auto colour = palette_colour(t0 * (1.0 - t) + t1 * t);
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = colour[c];
        }
    }
    const std::size_t shapes = 1 + prng.below(3);
    const auto& objects = object_names();
    for (std::size_t s = 0; s < shapes; ++s) {
        const std::string& obj = objects[prng.below(objects.size())];
        img = composite_object(img, obj, prng.next_u64());
    }
    return img;
}

std::vector<fs::path> write_procedural_sources(const fs::path& dir, std::size_t count, std::uint64_t seed,
                                               std::size_t size) {
    fs::create_directories(dir);
    std::vector<fs::path> paths;
    for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "src_%05zu.png", i);
        const fs::path p = dir / name;
        write_image(p, procedural_source(split_seed(seed, i), size, size), ImageFormat::png);
        paths.push_back(p);
    }
    return paths;
}

ImageBuffer forge_input(const ImageBuffer& source, const std::string& task, std::uint64_t seed, const json& params) {
    const ImageBuffer clean = as_rgb(source);
    if (task == "removal") return composite_object(clean, params.at("object").get<std::string>(), split_seed(seed, kObjectStream));
    if (task == "creation") return clean;
    const std::vector<std::string> parts = split_task(task);
    Prng prng(split_seed(seed, kApplyStream));
    ImageBuffer img = clean;
    if (parts.size() == 1) return apply_task(parts[0], img, params, prng);
    for (const std::string& p : parts) {
        if (!params.contains(p)) throw std::invalid_argument("forge: composite params lack '" + p + "'");
        img = apply_task(p, img, params.at(p), prng);
    }
    return img;
}

namespace {

ManifestRecord forge_item(const ImageBuffer& source, const std::string& task, std::size_t k, const DatasetConfig& cfg) {
    const std::uint64_t seed = split_seed(cfg.master_seed, k);
    const ImageBuffer clean = as_rgb(source);
    ManifestRecord r;
    r.task = task;
    r.seed = seed;
    const std::string id = padded(k);
    r.input_path = task + "/input/" + id + ".png";
    r.target_path = task + "/target/" + id + ".png";

    Prng text_prng(split_seed(seed, kTextStream));
    ImageBuffer input, target;
    if (task == "removal" || task == "creation") {
        Prng param_prng(split_seed(seed, kParamsStream));
        const auto& objects = object_names();
        const std::string object = objects[param_prng.below(objects.size())];
        const InstructionDraw draw = draw_instruction("removal", text_prng, object);
        r.params = json{{"object", object}, {"template_index", draw.template_index}};
        const ImageBuffer with_object = composite_object(clean, object, split_seed(seed, kObjectStream));
        // Creation items are the back-translated removal items.
        r.instruction = draw.text;
        r.task = "removal";
        r.auxiliary = build_auxiliary_prompt(cfg.auxiliary_table.lookup("removal").semantic,
                                             cfg.auxiliary_table.lookup("removal").defect);
        input = with_object;
        target = clean;
        if (task == "creation") {
            // Paths keep the creation directory; roles swap through swap_triplet.
            ManifestRecord tmp = r;
            std::swap(tmp.input_path, tmp.target_path);
            r = swap_triplet(tmp, cfg.auxiliary_table);
            std::swap(input, target);
        }
    } else {
        const std::vector<std::string> parts = split_task(task);
        Prng param_prng(split_seed(seed, kParamsStream));
        if (parts.size() == 1) {
            r.params = draw_params(parts[0], param_prng);
        } else {
            r.params = json::object();
            for (const std::string& p : parts) {
                if (r.params.contains(p)) throw std::invalid_argument("forge: task '" + task + "' repeats '" + p + "'");
                r.params[p] = draw_params(p, param_prng);
            }
        }
        r.instruction = draw_instruction(task, text_prng).text;
        input = forge_input(clean, task, seed, r.params);
        target = clean;
        const CannedAuxiliaryProvider provider(cfg.auxiliary_table, task);
        r.auxiliary = auxiliary_prompt(provider, input);
    }
    const fs::path in_path = cfg.output_root / r.input_path;
    const fs::path tg_path = cfg.output_root / r.target_path;
    write_image(in_path, input, ImageFormat::png);
    write_image(tg_path, target, ImageFormat::png);
    return r;
}

}  // namespace

DatasetResult build_dataset(const fs::path& source_dir, const DatasetConfig& cfg) {
    if (!fs::is_directory(source_dir)) {
        throw std::runtime_error("forge: source directory " + source_dir.string() + " does not exist");
    }
    std::set<std::string> seen;
    for (const std::string& t : cfg.tasks) {
        if (!seen.insert(t).second) throw std::invalid_argument("forge: output path collision, task '" + t + "' listed twice");
        if (t == "removal" || t == "creation") continue;
        for (const std::string& p : split_task(t)) {
            if (!is_degradation_task(p)) throw std::invalid_argument("forge: unknown task '" + p + "'");
        }
    }
    std::vector<fs::path> sources;
    for (const auto& entry : fs::directory_iterator(source_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) sources.push_back(entry.path());
    }
    std::sort(sources.begin(), sources.end());

    DatasetResult result;
    result.manifest.root = cfg.output_root;
    if (sources.empty()) {
        result.warnings.push_back("no source images found in " + source_dir.string());
    }
    const std::size_t n_tasks = cfg.tasks.size();
    const std::size_t total = sources.size() * n_tasks;
    for (const std::string& t : cfg.tasks) {
        fs::create_directories(cfg.output_root / t / "input");
        fs::create_directories(cfg.output_root / t / "target");
    }
    std::vector<ManifestRecord> records(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= total) return;
            try {
                const ImageBuffer src = read_image(sources[k / n_tasks]);
                records[k] = forge_item(src, cfg.tasks[k % n_tasks], k, cfg);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, std::max<std::size_t>(total, 1)));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    result.manifest.records = std::move(records);
    write_manifest(cfg.output_root / "manifest.jsonl", result.manifest.records);
    return result;
}

}  // namespace hfdiff
