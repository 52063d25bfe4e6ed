// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hfdiff/degrade.hpp"
#include "hfdiff/forge.hpp"
#include "hfdiff/image_io.hpp"
#include "hfdiff/instructions.hpp"
#include "hfdiff/metrics.hpp"
#include "support/oracles.hpp"

using namespace hfdiff;
namespace fs = std::filesystem;

namespace {

ImageBuffer random_image(Prng& prng, std::size_t h = 16, std::size_t w = 16) {
    return ImageBuffer(oracle::uniform(prng, {3, h, w}));
}

double mean(const ImageBuffer& img) { return img.planes().sum() / static_cast<double>(img.planes().size()); }

bool in_unit_range(const ImageBuffer& img) {
    for (double v : img.planes().data())
        if (v < 0.0 || v > 1.0) return false;
    return true;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "hfdiff_forge" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("lowlight: neutral parameters, black image, darkening") {
    Prng prng(60);
    const ImageBuffer img = random_image(prng);
    CHECK(apply_lowlight(img, {1.0, 1.0, 0.0}, prng) == img);
    const ImageBuffer black = apply_lowlight(ImageBuffer(8, 8, 3), {3.0, 0.5, 0.03}, prng);
    CHECK(in_unit_range(black));
    CHECK(mean(black) < 0.03);
    CHECK(mean(apply_lowlight(img, {2.5, 0.6, 0.0}, prng)) < mean(img));
    CHECK_THROWS_AS(apply_lowlight(img, {2.0, -0.1, 0.0}, prng), std::invalid_argument);
}

TEST_CASE("haze: beta 0, zero depth and full scattering") {
    Prng prng(61);
    const ImageBuffer img = random_image(prng);
    CHECK(apply_haze(img, 0.0, 0.9, depth_field(16, 16, DepthKind::ramp, 0.3)) == img);
    const Tensor zero_depth(Shape{16, 16});
    CHECK(apply_haze(img, 2.0, 0.9, zero_depth) == img);
    const Tensor far(Shape{16, 16}, 1.0);
    const ImageBuffer fog = apply_haze(img, 1e3, 0.8, far);
    CHECK(oracle::max_abs_diff(fog.planes(), Tensor(fog.planes().shape(), 0.8)) < 1e-12);
    for (DepthKind k : {DepthKind::ramp, DepthKind::radial}) {
        const Tensor d = depth_field(9, 12, k, 0.7);
        double lo = 1.0, hi = 0.0;
        for (double v : d.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == doctest::Approx(0.0));
        CHECK(hi == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(apply_haze(img, 1.0, 1.5, far), std::invalid_argument);
}

TEST_CASE("grayscale, watermark, downsample examples") {
    ImageBuffer red(2, 2, 3);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x) red.at(0, y, x) = 1.0;
    const ImageBuffer g = apply_grayscale(red);
    for (std::size_t c = 0; c < 3; ++c) CHECK(g.at(c, 1, 1) == doctest::Approx(0.299).epsilon(1e-15));

    Prng prng(62);
    const ImageBuffer img = random_image(prng);
    WatermarkParams wm;
    wm.alpha = 0.0;
    CHECK(apply_watermark(img, wm) == img);
    wm.alpha = 0.5;
    const ImageBuffer marked = apply_watermark(img, wm);
    const Tensor mask = watermark_mask(16, 16, wm);
    CHECK(mask.sum() > 0.0);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            if (mask.at(y, x) == 0.0) CHECK(marked.at(0, y, x) == img.at(0, y, x));

    ImageBuffer blocks(8, 8, 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x)
                blocks.at(c, y, x) = static_cast<double>((y / 2) * 4 + x / 2 + c) / 20.0;
    CHECK(oracle::max_abs_diff(apply_downsample(blocks, 2).planes(), blocks.planes()) < 1e-15);
    CHECK_THROWS_AS(apply_downsample(blocks, 3), std::invalid_argument);
}

TEST_CASE("every degradation is deterministic, clamped, and respects drawn ranges") {
    for (const std::string& task : degradation_tasks()) {
        Prng a(63), b(63);
        const ImageBuffer img = random_image(a);
        (void)random_image(b);
        const nlohmann::json pa = draw_params(task, a), pb = draw_params(task, b);
        CHECK(pa == pb);
        const ImageBuffer oa = apply_task(task, img, pa, a), ob = apply_task(task, img, pb, b);
        CHECK(oa == ob);
        CHECK(in_unit_range(oa));
    }
    Prng prng(64);
    for (int i = 0; i < 200; ++i) {
        const nlohmann::json p = draw_params("lowlight", prng);
        CHECK(p["gamma"].get<double>() >= 2.0);
        CHECK(p["gamma"].get<double>() <= 5.0);
        CHECK(p["gain"].get<double>() >= 0.3);
        CHECK(p["gain"].get<double>() <= 0.8);
        const nlohmann::json h = draw_params("haze", prng);
        CHECK(h["beta"].get<double>() >= 0.5);
        CHECK(h["beta"].get<double>() <= 2.5);
        CHECK(h["airlight"].get<double>() >= 0.7);
    }
    CHECK_THROWS(draw_params("sepia", prng));
}

TEST_CASE("instructions: pools, the haze example, determinism, ambiguous frequency") {
    for (const std::string& task : degradation_tasks()) CHECK(instruction_templates(task).size() >= 20);
    CHECK(ambiguous_prompts().size() == 5);
    const auto& haze = instruction_templates("haze");
    CHECK(std::find(haze.begin(), haze.end(), "Improve the visibility of the image by reducing haze") != haze.end());

    Prng a(65), b(65);
    CHECK(gen_instruction("snow", a) == gen_instruction("snow", b));

    Prng prng(66);
    int ambiguous = 0;
    for (int i = 0; i < 10000; ++i) ambiguous += draw_instruction("lowlight", prng).ambiguous ? 1 : 0;
    const double f = ambiguous / 10000.0;
    MESSAGE("ambiguous frequency " << f);
    CHECK(f >= 0.08);
    CHECK(f <= 0.12);
    CHECK_THROWS(gen_instruction("sepia", prng));
}

TEST_CASE("swap_triplet: back-translation example, involution, tag flip") {
    ManifestRecord r;
    r.input_path = "removal/input/000001.png";
    r.target_path = "removal/target/000001.png";
    r.task = "removal";
    r.instruction = render_template("removal", 0, "dog");
    r.params = {{"template_index", 0}, {"object", "dog"}};
    r.auxiliary = build_auxiliary_prompt(CannedResponseTable::builtin().lookup("removal").semantic,
                                         CannedResponseTable::builtin().lookup("removal").defect);
    CHECK(r.instruction == "Remove the dog");
    const ManifestRecord s = swap_triplet(r);
    CHECK(s.task == "creation");
    CHECK(s.instruction == "Add a dog");
    CHECK(s.input_path == r.target_path);
    CHECK(s.target_path == r.input_path);
    CHECK(swap_triplet(s) == r);

    ManifestRecord bad = r;
    bad.params = nlohmann::json::object();
    CHECK_THROWS(swap_triplet(bad));
    bad = r;
    bad.task = "haze";
    CHECK_THROWS(swap_triplet(bad));
}

TEST_CASE("manifest: json round trip, strict fields") {
    ManifestRecord r{"a/in.png", "a/t.png", "fix", "aux", "haze", 42, {{"beta", 1.5}}};
    CHECK(record_from_json(to_json(r)) == r);
    nlohmann::json j = to_json(r);
    j["extra"] = 1;
    CHECK_THROWS(record_from_json(j));
    j = to_json(r);
    j.erase("seed");
    CHECK_THROWS(record_from_json(j));
}

TEST_CASE("build_dataset: worker-count determinism, targets untouched, reproducible inputs") {
    const fs::path src = fresh_dir("src");
    write_procedural_sources(src, 6, 5, 16);
    DatasetConfig cfg;
    cfg.tasks = {"lowlight", "haze", "snow", "watermark", "colorization", "superres", "superres+haze+snow", "removal"};
    cfg.master_seed = 77;
    cfg.output_root = fresh_dir("one");
    cfg.workers = 1;
    const DatasetResult one = build_dataset(src, cfg);
    cfg.output_root = fresh_dir("eight");
    cfg.workers = 8;
    const DatasetResult eight = build_dataset(src, cfg);
    REQUIRE(one.manifest.records.size() == 6 * cfg.tasks.size());
    CHECK(slurp(one.manifest.root / "manifest.jsonl") == slurp(eight.manifest.root / "manifest.jsonl"));

    const Manifest m = read_manifest(one.manifest.root / "manifest.jsonl");
    CHECK(m.records == one.manifest.records);
    std::vector<fs::path> sources;
    for (const auto& e : fs::directory_iterator(src)) sources.push_back(e.path());
    std::sort(sources.begin(), sources.end());
    for (std::size_t k = 0; k < m.records.size(); ++k) {
        const ManifestRecord& r = m.records[k];
        CHECK(fs::exists(m.resolve(r.input_path)));
        CHECK(fs::exists(m.resolve(r.target_path)));
        CHECK(slurp(m.resolve(r.input_path)) == slurp(eight.manifest.resolve(r.input_path)));
        if (r.task == "removal" || r.task == "creation") continue;
        const ImageBuffer source = read_image(sources[k / cfg.tasks.size()]);
        CHECK(read_image(m.resolve(r.target_path)) == source);
        const ImageBuffer again = forge_input(source, r.task, r.seed, r.params);
        Tensor q = again.planes();
        for (double& v : q.data()) v = quantize8(v) / 255.0;
        CHECK(oracle::max_abs_diff(q, read_image(m.resolve(r.input_path)).planes()) < 1e-12);
    }
}

TEST_CASE("build_dataset: a three-defect composite carries all three defects") {
    Prng prng(67);
    const ImageBuffer src = procedural_source(9, 32, 32);
    const nlohmann::json params = {{"superres", draw_params("superres", prng)},
                                   {"haze", draw_params("haze", prng)},
                                   {"snow", draw_params("snow", prng)}};
    const ImageBuffer composite = forge_input(src, "superres+haze+snow", 123, params);
    CHECK(in_unit_range(composite));
    CHECK(psnr(composite, src) < 30.0);
    CHECK(split_task("superres+haze+snow") == std::vector<std::string>{"superres", "haze", "snow"});
}

TEST_CASE("build_dataset: empty source directory gives an empty manifest and a warning") {
    DatasetConfig cfg;
    cfg.output_root = fresh_dir("empty_out");
    const DatasetResult r = build_dataset(fresh_dir("empty_src"), cfg);
    CHECK(r.manifest.records.empty());
    CHECK(r.warnings.size() == 1);
    CHECK(fs::exists(cfg.output_root / "manifest.jsonl"));
}

TEST_CASE("procedural sources: deterministic, in range, luma keyed colours") {
    const ImageBuffer a = procedural_source(3), b = procedural_source(3);
    CHECK(a == b);
    CHECK_FALSE(a == procedural_source(4));
    CHECK(in_unit_range(a));
}
