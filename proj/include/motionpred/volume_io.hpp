#pragma once

// Raw volume format: a JSON sidecar header plus one raw payload file per
// component, sitting next to the header.
//
//   {"dims": [nx, ny, nz], "spacing": [sx, sy, sz], "dtype": "u16" | "f32" | "f64",
//    "byte_order": "little" | "big", "kind": "volume", "payloads": ["name.raw"]}
//
// Payloads are x-fastest. Scalar volumes have one payload, vector fields three
// (x, y, z), correspondence models one per marker.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionpred/error.hpp"
#include "motionpred/volume.hpp"

namespace motionpred {

enum class Dtype : std::uint8_t { u16, f32, f64 };

inline std::size_t dtype_size(Dtype t) {
    switch (t) {
        case Dtype::u16: return 2;
        case Dtype::f32: return 4;
        case Dtype::f64: return 8;
    }
    return 0;
}

inline std::string dtype_name(Dtype t) {
    switch (t) {
        case Dtype::u16: return "u16";
        case Dtype::f32: return "f32";
        case Dtype::f64: return "f64";
    }
    return "?";
}

struct GridHeader {
    Dims dims;
    Spacing spacing;
    Dtype dtype = Dtype::f32;
    bool little_endian = true;
    std::string kind = "volume";
    std::vector<std::string> payloads;  ///< relative to the header's directory
    nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

template <class T>
T byteswap_value(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
}

template <class T>
void encode(std::span<const double> values, bool little, std::vector<char>& out) {
    const bool swap = little != (std::endian::native == std::endian::little);
    out.resize(values.size() * sizeof(T));
    for (std::size_t n = 0; n < values.size(); ++n) {
        T v;
        if constexpr (std::is_same_v<T, std::uint16_t>) {
            double c = std::clamp(std::round(values[n]), 0.0, 65535.0);
            v = static_cast<std::uint16_t>(c);
        } else {
            v = static_cast<T>(values[n]);
        }
        if (swap) v = byteswap_value(v);
        std::memcpy(out.data() + n * sizeof(T), &v, sizeof(T));
    }
}

template <class T>
std::vector<double> decode(const std::vector<char>& bytes, std::size_t count, bool little) {
    const bool swap = little != (std::endian::native == std::endian::little);
    std::vector<double> out(count);
    for (std::size_t n = 0; n < count; ++n) {
        T v;
        std::memcpy(&v, bytes.data() + n * sizeof(T), sizeof(T));
        if (swap) v = byteswap_value(v);
        out[n] = static_cast<double>(v);
    }
    return out;
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GridHeader parse_header(const nlohmann::json& j, const std::string& where) {
    auto bad = [&](const std::string& why) { return VolumeFormatError(FormatFault::malformed_header, where + ": " + why); };
    GridHeader h;
    if (!j.is_object()) throw bad("header is not a JSON object");
    if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3) throw bad("'dims' must be [nx, ny, nz]");
    for (const auto& v : j["dims"])
        if (!v.is_number_integer() || v.get<long long>() < 1) throw bad("every dim must be an integer >= 1");
    h.dims = {j["dims"][0].get<int>(), j["dims"][1].get<int>(), j["dims"][2].get<int>()};
    if (j.contains("spacing")) {
        const auto& s = j["spacing"];
        if (!s.is_array() || s.size() != 3) throw bad("'spacing' must be [sx, sy, sz]");
        for (const auto& v : s)
            if (!v.is_number() || !(v.get<double>() > 0.0)) throw bad("spacing entries must be > 0");
        h.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    const std::string dt = j.value("dtype", std::string{});
    if (dt == "u16") h.dtype = Dtype::u16;
    else if (dt == "f32") h.dtype = Dtype::f32;
    else if (dt == "f64") h.dtype = Dtype::f64;
    else throw bad("unknown dtype '" + dt + "'");
    const std::string bo = j.value("byte_order", std::string{"little"});
    if (bo != "little" && bo != "big") throw bad("byte_order must be 'little' or 'big'");
    h.little_endian = bo == "little";
    h.kind = j.value("kind", std::string{"volume"});
    if (j.contains("payloads")) {
        if (!j["payloads"].is_array() || j["payloads"].empty()) throw bad("'payloads' must be a non-empty list");
        for (const auto& p : j["payloads"]) {
            if (!p.is_string()) throw bad("payload names must be strings");
            h.payloads.push_back(p.get<std::string>());
        }
    } else if (j.contains("payload") && j["payload"].is_string()) {
        h.payloads.push_back(j["payload"].get<std::string>());
    } else {
        throw bad("no 'payloads' entry");
    }
    if (j.contains("extra")) h.extra = j["extra"];
    return h;
}

}  // namespace detail

/// Writes header + one payload per component. Payload files are named
/// <stem>.raw (single component) or <stem>.<suffix>.raw.
inline void save_components(const std::filesystem::path& header_path, GridHeader header,
                            const std::vector<std::span<const double>>& components,
                            const std::vector<std::string>& suffixes = {}) {
    require(!components.empty(), "save_components: no components");
    for (const auto& c : components)
        require(c.size() == header.dims.size(), "save_components: component length does not match dims");
    const auto dir = header_path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    const std::string stem = header_path.stem().string();
    header.payloads.clear();
    std::vector<char> bytes;
    for (std::size_t c = 0; c < components.size(); ++c) {
        std::string name = stem;
        if (components.size() > 1) name += "." + (c < suffixes.size() ? suffixes[c] : std::to_string(c));
        name += ".raw";
        header.payloads.push_back(name);
        switch (header.dtype) {
            case Dtype::u16: detail::encode<std::uint16_t>(components[c], header.little_endian, bytes); break;
            case Dtype::f32: detail::encode<float>(components[c], header.little_endian, bytes); break;
            case Dtype::f64: detail::encode<double>(components[c], header.little_endian, bytes); break;
        }
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + (dir / name).string());
    }
    nlohmann::json j;
    j["dims"] = {header.dims.nx, header.dims.ny, header.dims.nz};
    j["spacing"] = {header.spacing.sx, header.spacing.sy, header.spacing.sz};
    j["dtype"] = dtype_name(header.dtype);
    j["byte_order"] = header.little_endian ? "little" : "big";
    j["kind"] = header.kind;
    j["payloads"] = header.payloads;
    if (!header.extra.empty()) j["extra"] = header.extra;
    std::ofstream out(header_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + header_path.string());
    out << j.dump(2) << '\n';
}

struct LoadedGrid {
    GridHeader header;
    std::vector<std::vector<double>> components;
};

inline LoadedGrid load_components(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open " + header_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw VolumeFormatError(FormatFault::malformed_header, header_path.string() + ": " + e.what());
    }
    LoadedGrid g{detail::parse_header(j, header_path.string()), {}};
    const std::size_t count = g.header.dims.size();
    const std::size_t need = count * dtype_size(g.header.dtype);
    for (const auto& name : g.header.payloads) {
        const auto p = header_path.parent_path() / name;
        auto bytes = detail::read_bytes(p);
        if (bytes.size() < need)
            throw VolumeFormatError(FormatFault::truncated_payload,
                                    p.string() + " holds " + std::to_string(bytes.size()) + " bytes, header " +
                                        g.header.dims.str() + " " + dtype_name(g.header.dtype) + " needs " +
                                        std::to_string(need));
        if (bytes.size() > need)
            throw VolumeFormatError(FormatFault::dimension_mismatch,
                                    p.string() + " holds " + std::to_string(bytes.size()) + " bytes, more than the " +
                                        std::to_string(need) + " declared by " + g.header.dims.str());
        switch (g.header.dtype) {
            case Dtype::u16: g.components.push_back(detail::decode<std::uint16_t>(bytes, count, g.header.little_endian)); break;
            case Dtype::f32: g.components.push_back(detail::decode<float>(bytes, count, g.header.little_endian)); break;
            case Dtype::f64: g.components.push_back(detail::decode<double>(bytes, count, g.header.little_endian)); break;
        }
    }
    return g;
}

inline void save_volume(const Volume3& vol, const std::filesystem::path& path, Dtype dtype = Dtype::f32) {
    GridHeader h;
    h.dims = vol.dims();
    h.spacing = vol.spacing();
    h.dtype = dtype;
    h.kind = "volume";
    save_components(path, h, {vol.data()});
}

inline Volume3 load_volume(const std::filesystem::path& path) {
    auto g = load_components(path);
    if (g.components.size() != 1)
        throw VolumeFormatError(FormatFault::dimension_mismatch,
                                path.string() + ": a volume has 1 payload, found " + std::to_string(g.components.size()));
    return Volume3(g.header.dims, std::move(g.components[0]), g.header.spacing);
}

inline void save_vector_field(const VectorField3& field, const std::filesystem::path& path,
                              Dtype dtype = Dtype::f32, Spacing spacing = {}) {
    require(dtype != Dtype::u16, "vector fields cannot be stored as u16");
    GridHeader h;
    h.dims = field.dims();
    h.spacing = spacing;
    h.dtype = dtype;
    h.kind = "vector_field";
    std::array<std::vector<double>, 3> comp;
    for (int a = 0; a < 3; ++a) {
        comp[a].resize(field.size());
        for (std::size_t n = 0; n < field.size(); ++n) comp[a][n] = field[n][a];
    }
    save_components(path, h, {comp[0], comp[1], comp[2]}, {"x", "y", "z"});
}

inline VectorField3 load_vector_field(const std::filesystem::path& path) {
    auto g = load_components(path);
    if (g.components.size() != 3)
        throw VolumeFormatError(FormatFault::dimension_mismatch,
                                path.string() + ": a vector field has 3 payloads, found " +
                                    std::to_string(g.components.size()));
    VectorField3 f(g.header.dims);
    for (std::size_t n = 0; n < f.size(); ++n) f[n] = {g.components[0][n], g.components[1][n], g.components[2][n]};
    return f;
}

}  // namespace motionpred
