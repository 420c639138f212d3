#pragma once

// Model container.
//
// Binary layout, all integers and reals little-endian:
//   magic   "EVRDFNN\0"                 8 bytes
//   version u32
//   desc    u32 length + JSON spec descriptor (UTF-8)
//   seed    u64
//   count   u32
//   per tensor, in declaration order:
//     u32 name length, name bytes, u32 rank, rank x u64 dims, u64 n, n x f64

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "evrdf/nn/core.hpp"
#include "evrdf/nn/model.hpp"

namespace evrdf::nn {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::array<char, 8> kMagic{'E', 'V', 'R', 'D', 'F', 'N', 'N', '\0'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    std::array<unsigned char, sizeof(T)> b{};
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), sizeof(T))) throw DataError("model file truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
    return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::uint32_t limit = 1u << 24) {
    const auto n = get_le<std::uint32_t>(is);
    if (n > limit) throw DataError("model file: implausible string length");
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), n)) throw DataError("model file truncated");
    return s;
}

}  // namespace detail

inline void write_model(std::ostream& os, const ModelParams& p) {
    os.write(kMagic.data(), kMagic.size());
    detail::put_le<std::uint32_t>(os, kFormatVersion);
    detail::put_string(os, to_json(p.spec).dump());
    detail::put_le<std::uint64_t>(os, p.seed);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensors.size()));
    for (const auto& t : p.tensors) {
        detail::put_string(os, t.name);
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) detail::put_le<std::uint64_t>(os, d);
        detail::put_le<std::uint64_t>(os, t.size());
        const double* v = t.value.data();
        for (std::size_t i = 0; i < t.size(); ++i) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v[i]));
    }
    if (!os) throw DataError("failed writing model");
}

/// Reads a container and checks it against the shapes its spec implies.
inline ModelParams read_model(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("not a model file (bad magic)");
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kFormatVersion)
        throw DataError("unsupported model format version " + std::to_string(version));
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(detail::get_string(is));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model descriptor: ") + e.what());
    }
    const ModelSpec spec = spec_from_json(desc);
    const auto seed = detail::get_le<std::uint64_t>(is);
    ModelParams p = build(spec, seed);
    const auto count = detail::get_le<std::uint32_t>(is);
    if (count != p.tensors.size()) throw DataError("model file: tensor count does not match the spec");
    for (auto& t : p.tensors) {
        const auto name = detail::get_string(is);
        if (name != t.name) throw DataError("model file: expected tensor " + t.name + ", found " + name);
        const auto rank = detail::get_le<std::uint32_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::get_le<std::uint64_t>(is));
        if (shape != t.shape) throw DataError("model file: shape mismatch for " + t.name);
        const auto n = detail::get_le<std::uint64_t>(is);
        if (n != t.size()) throw DataError("model file: size mismatch for " + t.name);
        double* v = t.value.data();
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
        if (!t.value.allFinite()) throw DataError("model file: non-finite values in " + t.name);
    }
    return p;
}

inline void save_model(const std::string& path, const ModelParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    write_model(os, p);
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model file " + path);
    return read_model(is);
}

/// Human-readable companion to the binary container.
inline nlohmann::json model_sidecar(const ModelParams& p, const nlohmann::json& training = nlohmann::json::object()) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["spec"] = to_json(p.spec);
    j["seed"] = p.seed;
    j["parameter_count"] = p.parameter_count();
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : p.tensors) ts.push_back({{"name", t.name}, {"shape", t.shape}, {"regularized", t.is_weight}});
    j["tensors"] = ts;
    j["training"] = training;
    return j;
}

}  // namespace evrdf::nn
