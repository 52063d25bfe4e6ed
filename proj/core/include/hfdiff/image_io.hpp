// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "hfdiff/image.hpp"

namespace hfdiff {

enum class ImageFormat { ppm, pgm, png };

enum class ImageIoErrc {
    unsupported_format = 1,
    io_failure = 2,
    malformed_header = 3,
};

const char* to_string(ImageIoErrc code);

class ImageIoError : public std::runtime_error {
public:
    ImageIoError(ImageIoErrc code, const std::string& message);
    ImageIoErrc code() const noexcept { return code_; }

private:
    ImageIoErrc code_;
};

/// 8-bit quantization used by every writer: round(clamp(v, 0, 1) * 255).
unsigned char quantize8(double v);

/// Picks the format from the extension (.ppm, .pgm, .png); throws unsupported_format otherwise.
ImageFormat format_from_path(const std::filesystem::path& path);

/// Reads binary P5/P6 (maxval 255) or 8-bit PNG. Never returns a partially filled image.
ImageBuffer read_image(const std::filesystem::path& path);

/// PPM requires 3 channels, PGM requires 1. PNG accepts either.
void write_image(const std::filesystem::path& path, const ImageBuffer& image, ImageFormat format);
void write_image(const std::filesystem::path& path, const ImageBuffer& image);

}  // namespace hfdiff
