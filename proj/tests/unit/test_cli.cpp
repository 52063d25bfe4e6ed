// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfdiff/commands.hpp"
#include "hfdiff/forge.hpp"
#include "hfdiff/image_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& root() {
    static const fs::path r = [] {
        const fs::path p = fs::temp_directory_path() / "hfdiff_cli_unit";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return r;
}

struct Run {
    int code = 0;
    std::string out, err;

    // Value of the first "key=" line (up to the first space).
    std::string get(const std::string& key) const {
        std::istringstream lines(out);
        for (std::string line; std::getline(lines, line);) {
            if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1, line.find(' ') - key.size() - 1);
        }
        return "";
    }
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hfdiff");
    args.push_back("--set");
    args.push_back("run_root=" + (root() / "runs").string());
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = hfdiff::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Small forged dataset shared by the sample cases.
const hfdiff::Manifest& dataset() {
    static const hfdiff::Manifest m = [] {
        const Run r = cli({"synthesize", "--set", "forge.num_sources=3", "--master-seed", "4"});
        REQUIRE(r.code == 0);
        return hfdiff::read_manifest(r.get("manifest"));
    }();
    return m;
}

}  // namespace

TEST_CASE("cli: plot-decay writes the weight curve") {
    const Run r = cli({"plot-decay", "--lambda", "0.001", "--steps", "50"});
    REQUIRE(r.code == 0);
    std::ifstream csv(r.get("csv"));
    std::string header, first, line;
    std::getline(csv, header);
    std::getline(csv, first);
    CHECK(header == "t,weight");
    CHECK(first == "0,1");
    int rows = 1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 51);
    CHECK(fs::exists(fs::path(r.get("run_dir")) / "config.json"));
}

TEST_CASE("cli: exit codes") {
    Run r = cli({"plot-decay", "--set", "nope.x=1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("kind=config") != std::string::npos);
    CHECK(r.err.find("nope") != std::string::npos);

    CHECK(cli({"plot-decay", "--set", "decay.steps=\"many\""}).code == 2);
    CHECK(cli({"plot-decay", "--lambda", "-1"}).code == 2);
    CHECK(cli({"plot-decay", "--bogus"}).code == 2);
    CHECK(cli({}).code == 2);

    r = cli({"sample", "--input", (root() / "missing.png").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("kind=missing_input") != std::string::npos);
    CHECK(cli({"eval", "--manifest", (root() / "missing.jsonl").string()}).code == 3);
    CHECK(cli({"plot-decay", "--config", (root() / "missing.json").string()}).code == 3);

    {
        std::ofstream bad(root() / "bad.json");
        bad << "{\"schedule\": {\"steps\": 1}}";
    }
    CHECK(cli({"plot-decay", "--config", (root() / "bad.json").string()}).code == 0);
    const hfdiff::ManifestRecord& rec = dataset().records.front();
    r = cli({"sample", "--config", (root() / "bad.json").string(), "--denoiser", "oracle", "--input",
             dataset().resolve(rec.input_path).string(), "--target", dataset().resolve(rec.target_path).string()});
    CHECK(r.code == 2);
}

TEST_CASE("cli: gradcheck passes") {
    const Run r = cli({"gradcheck", "--instances", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(fs::exists(r.get("report")));
}

TEST_CASE("cli: synthesize then eval the baseline and a perfect output set") {
    const hfdiff::Manifest& m = dataset();
    REQUIRE(m.records.size() == 6);
    Run r = cli({"eval", "--manifest", (m.root / "manifest.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(r.get("items") == "6");
    const double baseline = std::stod(r.get("mean_psnr"));
    CHECK(baseline < 40.0);

    // Outputs equal to the targets, mirrored under the input paths.
    const fs::path outputs = root() / "perfect";
    for (const auto& rec : m.records) {
        fs::create_directories((outputs / rec.input_path).parent_path());
        fs::copy_file(m.resolve(rec.target_path), outputs / rec.input_path, fs::copy_options::overwrite_existing);
    }
    r = cli({"eval", "--manifest", (m.root / "manifest.jsonl").string(), "--outputs", outputs.string()});
    REQUIRE(r.code == 0);
    CHECK(r.get("mean_psnr") == "inf");
    CHECK(slurp(r.get("metrics")).find("index,task,input_path,psnr,ssim,hf_residual") == 0);
}

TEST_CASE("cli: oracle sample, echoed config reproduces the output") {
    const hfdiff::ManifestRecord& rec = dataset().records.front();
    const Run a = cli({"sample", "--denoiser", "oracle", "--input", dataset().resolve(rec.input_path).string(),
                       "--target", dataset().resolve(rec.target_path).string(), "--instruction", rec.instruction,
                       "--task", rec.task, "--set", "seed=9"});
    REQUIRE(a.code == 0);
    CHECK(a.get("psnr") != "");
    const fs::path config = fs::path(a.get("run_dir")) / "config.json";
    const Run b = cli({"sample", "--config", config.string()});
    REQUIRE(b.code == 0);
    CHECK(a.get("run_dir") != b.get("run_dir"));
    CHECK(slurp(a.get("output")) == slurp(b.get("output")));
    CHECK(slurp(a.get("trace")) == slurp(b.get("trace")));
    CHECK(slurp(a.get("trace")).rfind("step,sigma,gamma,fidelity_loss,theta_update_norm\n", 0) == 0);
}

TEST_CASE("cli: train-toy then blind and instructed toy samples") {
    const hfdiff::Manifest& m = dataset();
    const Run t = cli({"train-toy", "--manifest", (m.root / "manifest.jsonl").string(), "--iterations", "2", "--set",
                       "train.batch=2"});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(t.get("loss_csv")));
    const std::string input = m.resolve(m.records.front().input_path).string();
    const std::string weights = t.get("weights");

    const Run blind = cli({"sample", "--weights", weights, "--input", input, "--no-instruction", "--instruction",
                           "ignored", "--set", "schedule.steps=4"});
    REQUIRE(blind.code == 0);
    const hfdiff::ImageBuffer out = hfdiff::read_image(blind.get("output"));
    CHECK(out.width() == 32);
    CHECK(nlohmann::json::parse(slurp(fs::path(blind.get("run_dir")) / "config.json"))["sample"]["no_instruction"] ==
          true);

    const Run plain = cli({"sample", "--weights", weights, "--input", input, "--instruction", "brighten it",
                           "--no-hgs", "--set", "schedule.steps=4"});
    REQUIRE(plain.code == 0);
    // Without guidance the trace carries no loss.
    CHECK(slurp(plain.get("trace")).find("nan") != std::string::npos);

    // The toy denoiser only runs in pixel space.
    CHECK(cli({"sample", "--weights", weights, "--input", input, "--codec", "autoencoder"}).code == 2);
}
