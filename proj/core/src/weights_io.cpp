// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace hfdiff {

static_assert(std::endian::native == std::endian::little, "weights container assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'F', 'D', 'W'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw WeightsError("weights: truncated file");
    return v;
}

void fnv(std::uint64_t& h, const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WeightsError("weights: cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kWeightsVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw WeightsError("weights: write failed for " + path.string());
}

TensorMap load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsError("weights: cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw WeightsError("weights: bad magic");
    const auto version = get<std::uint32_t>(in);
    if (version != kWeightsVersion) throw WeightsError("weights: unsupported version " + std::to_string(version));
    const auto count = get<std::uint32_t>(in);
    TensorMap out;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = get<std::uint32_t>(in);
        if (len > 4096) throw WeightsError("weights: implausible name length");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw WeightsError("weights: truncated file");
        const auto rank = get<std::uint32_t>(in);
        if (rank > 8) throw WeightsError("weights: implausible rank");
        Shape shape(rank);
        std::uint64_t n = 1;
        for (auto& d : shape) {
            d = get<std::uint64_t>(in);
            n *= d;
        }
        if (n > (std::uint64_t{1} << 32)) throw WeightsError("weights: implausible tensor size");
        Tensor t(shape);
        if (!in.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw WeightsError("weights: truncated file");
        }
        if (!out.emplace(std::move(name), std::move(t)).second) throw WeightsError("weights: duplicate tensor name");
    }
    return out;
}

const Tensor& require_tensor(const TensorMap& tensors, const std::string& name, const Shape& expected) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw WeightsError("weights: missing tensor '" + name + "'");
    if (it->second.shape() != expected) {
        throw WeightsError("weights: tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                           ", expected " + shape_string(expected));
    }
    return it->second;
}

std::uint64_t checksum(const TensorMap& tensors) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : tensors) {
        fnv(h, name.data(), name.size());
        for (std::size_t d : t.shape()) fnv(h, &d, sizeof d);
        fnv(h, t.raw(), t.size() * sizeof(double));
    }
    return h;
}

}  // namespace hfdiff
