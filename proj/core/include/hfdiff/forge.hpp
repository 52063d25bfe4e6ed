// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfdiff/conditioning.hpp"
#include "hfdiff/image.hpp"

namespace hfdiff {

/// One triplet. Paths are relative to the manifest's directory.
struct ManifestRecord {
    std::string input_path;
    std::string target_path;
    std::string instruction;
    std::string auxiliary;
    std::string task;
    std::uint64_t seed = 0;
    nlohmann::json params = nlohmann::json::object();

    bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
    std::filesystem::path root;  // directory the relative paths resolve against
    std::vector<ManifestRecord> records;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

nlohmann::json to_json(const ManifestRecord& record);
/// Rejects missing and unknown fields.
ManifestRecord record_from_json(const nlohmann::json& j);

/// One compact JSON object per line, keys sorted.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::string manifest_text(const std::vector<ManifestRecord>& records);
Manifest read_manifest(const std::filesystem::path& path);

/// Back-translation: removal <-> creation, input and target exchanged, instruction
/// re-rendered from the paired template with the same object. Needs params
/// "template_index" and "object". The auxiliary text is looked up for the new task.
ManifestRecord swap_triplet(const ManifestRecord& record,
                            const CannedResponseTable& table = CannedResponseTable::builtin());

struct DatasetConfig {
    std::filesystem::path output_root;
    /// Task tags; composites are written "a+b+c" and applied left to right.
    std::vector<std::string> tasks = {"lowlight", "haze", "snow", "watermark", "colorization", "superres"};
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
    CannedResponseTable auxiliary_table = CannedResponseTable::builtin();
};

struct DatasetResult {
    Manifest manifest;
    std::vector<std::string> warnings;
};

/// Items are (source i, task j) with index k = i * tasks + j, seed split_seed(master, k),
/// files {root}/{task}/{input|target}/{k:06}.png and the manifest at {root}/manifest.jsonl.
/// Sources are the .png/.ppm/.pgm files of source_dir in name order.
DatasetResult build_dataset(const std::filesystem::path& source_dir, const DatasetConfig& config);

/// Synthesises the degraded input of one item from its clean source, seed and params.
/// Reproduces what build_dataset wrote (before 8-bit quantisation).
ImageBuffer forge_input(const ImageBuffer& source, const std::string& task, std::uint64_t seed,
                        const nlohmann::json& params);

/// Smooth gradient background with a few soft shapes, deterministic in seed. Every
/// colour lies on one luminance-keyed hue ramp.
ImageBuffer procedural_source(std::uint64_t seed, std::size_t height = 32, std::size_t width = 32);
/// Writes count sources as {dir}/src_{i:05}.png with seeds split from `seed`.
std::vector<std::filesystem::path> write_procedural_sources(const std::filesystem::path& dir, std::size_t count,
                                                            std::uint64_t seed, std::size_t size = 32);

/// Composites a named object shape onto an image (used for the removal/creation pairs).
ImageBuffer composite_object(const ImageBuffer& background, const std::string& object, std::uint64_t seed);

}  // namespace hfdiff
