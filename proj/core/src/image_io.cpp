// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace hfdiff {

const char* to_string(ImageIoErrc code) {
    switch (code) {
        case ImageIoErrc::unsupported_format: return "unsupported_format";
        case ImageIoErrc::io_failure: return "io_failure";
        case ImageIoErrc::malformed_header: return "malformed_header";
    }
    return "unknown";
}

ImageIoError::ImageIoError(ImageIoErrc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

unsigned char quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

ImageFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".ppm") return ImageFormat::ppm;
    if (ext == ".pgm") return ImageFormat::pgm;
    if (ext == ".png") return ImageFormat::png;
    throw ImageIoError(ImageIoErrc::unsupported_format, "unrecognised extension '" + ext + "'");
}

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError(ImageIoErrc::io_failure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PnmHeaderParser {
public:
    PnmHeaderParser(const std::vector<unsigned char>& bytes, const std::string& name)
        : bytes_(bytes), name_(name) {}

    std::size_t next_number() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected a number");
        std::size_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1u << 24)) fail("dimension out of range");
            ++pos_;
        }
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing raster separator");
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw ImageIoError(ImageIoErrc::malformed_header, name_ + ": " + why);
    }

    std::size_t pos_ = 2;

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    std::string name_;
};

ImageBuffer read_pnm(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = slurp(path);
    PnmHeaderParser parser(bytes, path.string());
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        parser.fail("expected P5 or P6 magic");
    }
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    const std::size_t width = parser.next_number();
    const std::size_t height = parser.next_number();
    const std::size_t maxval = parser.next_number();
    if (width == 0 || height == 0) parser.fail("zero dimension");
    if (maxval != 255) parser.fail("only maxval 255 is supported");
    const std::size_t offset = parser.raster_offset();
    const std::size_t needed = width * height * channels;
    if (bytes.size() < offset + needed) parser.fail("truncated raster");

    ImageBuffer img(height, width, channels);
    const unsigned char* px = bytes.data() + offset;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                img.at(c, y, x) = px[(y * width + x) * channels + c] / 255.0;
    return img;
}

std::vector<unsigned char> interleave(const ImageBuffer& image) {
    const std::size_t c_n = image.channels(), h = image.height(), w = image.width();
    std::vector<unsigned char> out(h * w * c_n);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < c_n; ++c) out[(y * w + x) * c_n + c] = quantize8(image.at(c, y, x));
    return out;
}

void write_pnm(const std::filesystem::path& path, const ImageBuffer& image, bool color) {
    const std::size_t want = color ? 3 : 1;
    if (image.channels() != want) {
        throw ImageIoError(ImageIoErrc::unsupported_format,
                           std::string(color ? "PPM" : "PGM") + " needs " + std::to_string(want) + " channel(s)");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(ImageIoErrc::io_failure, "cannot open " + path.string() + " for writing");
    out << (color ? "P6" : "P5") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
    const std::vector<unsigned char> raster = interleave(image);
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out) throw ImageIoError(ImageIoErrc::io_failure, "short write to " + path.string());
}

ImageBuffer read_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ImageIoError(ImageIoErrc::io_failure, "cannot open " + path.string());
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw ImageIoError(ImageIoErrc::malformed_header, path.string() + ": " + png.message);
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t channels = color ? 3 : 1;
    std::vector<unsigned char> raster(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw ImageIoError(ImageIoErrc::malformed_header, path.string() + ": " + msg);
    }
    ImageBuffer img(png.height, png.width, channels);
    for (std::size_t y = 0; y < png.height; ++y)
        for (std::size_t x = 0; x < png.width; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                img.at(c, y, x) = raster[(y * png.width + x) * channels + c] / 255.0;
    return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::vector<unsigned char> raster = interleave(image);
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, raster.data(), 0, nullptr)) {
        throw ImageIoError(ImageIoErrc::io_failure, path.string() + ": " + png.message);
    }
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
    switch (format_from_path(path)) {
        case ImageFormat::ppm:
        case ImageFormat::pgm: return read_pnm(path);
        case ImageFormat::png: return read_png(path);
    }
    throw ImageIoError(ImageIoErrc::unsupported_format, path.string());
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image, ImageFormat format) {
    if (image.empty()) throw ImageIoError(ImageIoErrc::io_failure, "refusing to write an empty image");
    switch (format) {
        case ImageFormat::ppm: return write_pnm(path, image, true);
        case ImageFormat::pgm: return write_pnm(path, image, false);
        case ImageFormat::png: return write_png(path, image);
    }
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
    write_image(path, image, format_from_path(path));
}

}  // namespace hfdiff
