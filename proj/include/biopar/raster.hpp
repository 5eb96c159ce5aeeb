#pragma once

// Plane files: consecutive little-endian int16 planes (row-major) plus a
// JSON sidecar "<path>.json" holding dimensions, per-plane scaling and
// metadata. physical = stored / scale_factor + offset; -32768 is missing.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopar/core.hpp"
#include "biopar/io.hpp"

namespace biopar::raster {

inline constexpr std::int16_t kFill = std::numeric_limits<std::int16_t>::min();

struct PlaneSpec {
    std::string name;
    double scale_factor = 1.0;
    double offset = 0.0;
};

struct Plane {
    PlaneSpec spec;
    std::vector<double> values;  ///< physical values, NaN = missing
};

struct PlaneSet {
    int width = 0;
    int height = 0;
    std::vector<Plane> planes;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    const Plane& plane(const std::string& name) const {
        for (const auto& p : planes)
            if (p.spec.name == name) return p;
        throw DataError("plane '" + name + "' not present");
    }
};

inline std::int16_t encode_value(double v, const PlaneSpec& spec, std::size_t pixel, int width) {
    if (std::isnan(v)) return kFill;
    const double s = std::round((v - spec.offset) * spec.scale_factor);
    if (!(s >= -32767.0 && s <= 32767.0))
        throw DataError("plane '" + spec.name + "': value " + io::format_double(v) + " at pixel (row " +
                        std::to_string(pixel / static_cast<std::size_t>(width)) + ", col " +
                        std::to_string(pixel % static_cast<std::size_t>(width)) + ") overflows int16 after scaling");
    return static_cast<std::int16_t>(s);
}

inline double decode_value(std::int16_t s, const PlaneSpec& spec) {
    if (s == kFill) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(s) / spec.scale_factor + spec.offset;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

inline void write_planes(const PlaneSet& set, const std::filesystem::path& path) {
    if (set.width <= 0 || set.height <= 0) throw DataError("write_planes: empty raster");
    nlohmann::json header{{"width", set.width}, {"height", set.height}, {"fill", kFill}, {"metadata", set.metadata}};
    header["planes"] = nlohmann::json::array();
    std::vector<std::int16_t> encoded;
    encoded.reserve(set.pixels() * set.planes.size());
    for (const auto& p : set.planes) {
        if (p.values.size() != set.pixels()) throw DataError("plane '" + p.spec.name + "' has the wrong pixel count");
        if (!(p.spec.scale_factor > 0.0)) throw DataError("plane '" + p.spec.name + "': scale_factor must be positive");
        header["planes"].push_back({{"name", p.spec.name}, {"scale_factor", p.spec.scale_factor}, {"offset", p.spec.offset}});
        for (std::size_t i = 0; i < p.values.size(); ++i) encoded.push_back(encode_value(p.values[i], p.spec, i, set.width));
    }
    auto out = io::open_out(path, true);
    for (std::int16_t v : encoded) {
        const auto u = static_cast<std::uint16_t>(v);
        const char b[2] = {static_cast<char>(u & 0xFF), static_cast<char>(u >> 8)};
        out.write(b, 2);
    }
    if (!out) throw DataError("failed writing " + path.string());
    auto side = io::open_out(sidecar_path(path));
    side << header.dump(2) << '\n';
}

inline PlaneSet read_planes(const std::filesystem::path& path) {
    std::ifstream side(sidecar_path(path));
    if (!side) throw DataError("missing sidecar " + sidecar_path(path).string());
    nlohmann::json header;
    PlaneSet set;
    try {
        header = nlohmann::json::parse(side);
        set.width = header.at("width").get<int>();
        set.height = header.at("height").get<int>();
        set.metadata = header.value("metadata", nlohmann::json::object());
        for (const auto& p : header.at("planes"))
            set.planes.push_back({{p.at("name").get<std::string>(), p.at("scale_factor").get<double>(), p.value("offset", 0.0)}, {}});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(sidecar_path(path).string() + ": " + e.what());
    }
    if (set.width <= 0 || set.height <= 0) throw DataError(path.string() + ": bad dimensions");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<char> raw(set.pixels() * 2);
    for (auto& p : set.planes) {
        io::read_exact(in, raw.data(), raw.size());
        p.values.resize(set.pixels());
        for (std::size_t i = 0; i < set.pixels(); ++i) {
            const auto u = static_cast<std::uint16_t>(static_cast<unsigned char>(raw[2 * i]) |
                                                      (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
            p.values[i] = decode_value(static_cast<std::int16_t>(u), p.spec);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after the last plane");
    return set;
}

// ---------------------------------------------------------------------------
// Input scenes.

enum class MaskFlag : std::uint8_t { valid = 0, cloud_snow = 1, missing = 2, out_of_range = 3 };

struct RasterScene {
    int width = 0;
    int height = 0;
    std::array<std::vector<double>, kBands> k0;
    std::array<std::vector<double>, kBands> err;
    std::vector<std::uint8_t> mask;
    nlohmann::json metadata = nlohmann::json::object();

    static RasterScene blank(int w, int h) {
        RasterScene s;
        s.width = w;
        s.height = h;
        const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
        for (auto& p : s.k0) p.assign(n, 0.0);
        for (auto& p : s.err) p.assign(n, 0.0);
        s.mask.assign(n, 0);
        return s;
    }

    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    void validate() const {
        if (width <= 0 || height <= 0) throw DataError("scene: empty raster");
        for (int b = 0; b < kBands; ++b)
            if (k0[static_cast<std::size_t>(b)].size() != pixels() || err[static_cast<std::size_t>(b)].size() != pixels())
                throw DataError("scene: plane dimensions differ");
        if (mask.size() != pixels()) throw DataError("scene: mask dimensions differ");
    }
};

inline constexpr double kReflectanceScale = 10000.0;

inline void write_scene(const RasterScene& scene, const std::filesystem::path& path) {
    scene.validate();
    PlaneSet set{scene.width, scene.height, {}, scene.metadata};
    for (int b = 0; b < kBands; ++b)
        set.planes.push_back({{"k0_" + std::string(kBandNames[static_cast<std::size_t>(b)]), kReflectanceScale, 0.0}, scene.k0[static_cast<std::size_t>(b)]});
    for (int b = 0; b < kBands; ++b)
        set.planes.push_back({{"err_" + std::string(kBandNames[static_cast<std::size_t>(b)]), kReflectanceScale, 0.0}, scene.err[static_cast<std::size_t>(b)]});
    set.planes.push_back({{"mask", 1.0, 0.0}, std::vector<double>(scene.mask.begin(), scene.mask.end())});
    write_planes(set, path);
}

inline RasterScene read_scene(const std::filesystem::path& path) {
    const PlaneSet set = read_planes(path);
    RasterScene s;
    s.width = set.width;
    s.height = set.height;
    s.metadata = set.metadata;
    for (int b = 0; b < kBands; ++b) {
        s.k0[static_cast<std::size_t>(b)] = set.plane("k0_" + std::string(kBandNames[static_cast<std::size_t>(b)])).values;
        s.err[static_cast<std::size_t>(b)] = set.plane("err_" + std::string(kBandNames[static_cast<std::size_t>(b)])).values;
    }
    const auto& m = set.plane("mask").values;
    s.mask.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (std::isnan(m[i])) {
            s.mask[i] = static_cast<std::uint8_t>(MaskFlag::missing);
        } else {
            if (m[i] < 0.0 || m[i] > 3.0) throw DataError(path.string() + ": mask value out of range at pixel " + std::to_string(i));
            s.mask[i] = static_cast<std::uint8_t>(m[i]);
        }
    }
    return s;
}

}  // namespace biopar::raster
