#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"

#include <json.hpp>

namespace sarloc {

static_assert(std::endian::native == std::endian::little,
              "codecs assume a little-endian host");

using ordered_json = nlohmann::ordered_json;

/// Amplitude tile cut from a product. Provenance lists the processing steps
/// that produced the parent product, e.g. "resize:1.5:bilinear".
struct Tile {
    Grid<float> pixels;
    std::string product_id;
    std::vector<std::string> provenance;

    int height() const { return pixels.height; }
    int width() const { return pixels.width; }
};

struct TamperMask {
    Grid<std::uint8_t> bits; // 0 pristine, 1 spliced

    int height() const { return bits.height; }
    int width() const { return bits.width; }
};

struct Fingerprint {
    Grid<float> values;
    std::string extractor_id;

    int height() const { return values.height; }
    int width() const { return values.width; }
};

struct NormalizedTile {
    Grid<float> pixels; // in [0,1]
    float scale_min = 0.f;
    float scale_max = 0.f;
};

inline void validate_tile(const Tile& t) {
    if (t.pixels.height < 1 || t.pixels.width < 1)
        throw SizingError("tile dimensions must be >= 1");
    if (t.product_id.empty())
        throw ValidationError("tile product_id must be non-empty");
    for (float v : t.pixels.data) {
        if (!std::isfinite(v) || v < 0.f)
            throw ValidationError("tile pixels must be finite and >= 0");
    }
}

inline void validate_mask(const TamperMask& m) {
    if (m.bits.height < 1 || m.bits.width < 1)
        throw SizingError("mask dimensions must be >= 1");
    for (std::uint8_t b : m.bits.data) {
        if (b != 0 && b != 1) throw ValidationError("mask elements must be 0 or 1");
    }
}

inline int tile_grid_count(int raster_h, int raster_w, int tile_side) {
    if (tile_side < 1) throw SizingError("tile_side must be >= 1");
    if (raster_h < tile_side || raster_w < tile_side)
        throw SizingError("raster smaller than tile_side");
    return (raster_h / tile_side) * (raster_w / tile_side);
}

/// Non-overlapping tiles in row-major order; residual borders are dropped.
inline std::vector<Tile> partition_product(const Grid<float>& raster,
                                           int tile_side,
                                           const std::string& product_id,
                                           const std::vector<std::string>& provenance = {}) {
    tile_grid_count(raster.height, raster.width, tile_side); // validates sizes
    if (product_id.empty()) throw ValidationError("product_id must be non-empty");
    const int rows = raster.height / tile_side;
    const int cols = raster.width / tile_side;
    std::vector<Tile> tiles;
    tiles.reserve(std::size_t(rows) * cols);
    for (int tr = 0; tr < rows; ++tr) {
        for (int tc = 0; tc < cols; ++tc) {
            Tile t;
            t.pixels = crop(raster, tr * tile_side, tc * tile_side, tile_side, tile_side);
            t.product_id = product_id;
            t.provenance = provenance;
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

inline NormalizedTile normalize(const Tile& t) {
    validate_tile(t);
    float lo = t.pixels.data[0], hi = t.pixels.data[0];
    for (float v : t.pixels.data) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    NormalizedTile out;
    out.pixels = Grid<float>(t.pixels.height, t.pixels.width);
    out.scale_min = lo;
    out.scale_max = hi;
    if (hi == lo) return out; // constant tile maps to all zeros
    const double span = double(hi) - double(lo);
    for (std::size_t i = 0; i < t.pixels.data.size(); ++i)
        out.pixels.data[i] = float((double(t.pixels.data[i]) - double(lo)) / span);
    return out;
}

inline Grid<float> denormalize(const NormalizedTile& n) {
    Grid<float> out(n.pixels.height, n.pixels.width);
    const double lo = n.scale_min;
    const double span = double(n.scale_max) - double(n.scale_min);
    for (std::size_t i = 0; i < n.pixels.data.size(); ++i)
        out.data[i] = float(lo + double(n.pixels.data[i]) * span);
    return out;
}

// ---------------------------------------------------------------------------
// f32 payload + JSON sidecar codec. The sidecar sits next to the payload with
// the extension swapped for .json.

inline std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
    std::filesystem::path p = payload;
    p.replace_extension(".json");
    return p;
}

namespace detail {

inline void write_f32_payload(const Grid<float>& g, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(g.data.data()),
            std::streamsize(g.data.size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + path.string());
}

inline Grid<float> read_f32_payload(const std::filesystem::path& path, int h, int w) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open for read: " + path.string());
    const std::streamoff bytes = f.tellg();
    const std::streamoff want = std::streamoff(h) * w * std::streamoff(sizeof(float));
    if (bytes != want)
        throw CorruptionError("payload size mismatch in " + path.string() + ": have " +
                              std::to_string(bytes) + " bytes, sidecar implies " +
                              std::to_string(want));
    f.seekg(0);
    Grid<float> g(h, w);
    f.read(reinterpret_cast<char*>(g.data.data()), want);
    if (!f) throw IoError("read failed: " + path.string());
    return g;
}

inline ordered_json read_sidecar(const std::filesystem::path& payload) {
    const auto sp = sidecar_path(payload);
    std::ifstream f(sp);
    if (!f) throw IoError("cannot open sidecar: " + sp.string());
    ordered_json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw FormatError("bad sidecar JSON in " + sp.string() + ": " + e.what());
    }
    for (const char* key : {"height", "width", "product_id", "provenance", "dtype"}) {
        if (!j.contains(key)) throw FormatError("sidecar missing field '" + std::string(key) + "'");
    }
    if (j["dtype"].get<std::string>() != "f32le")
        throw FormatError("unsupported dtype '" + j["dtype"].get<std::string>() + "'");
    if (!j["height"].is_number_integer() || !j["width"].is_number_integer() ||
        j["height"].get<int>() < 1 || j["width"].get<int>() < 1)
        throw FormatError("sidecar dimensions must be positive integers");
    return j;
}

inline void write_sidecar(const std::filesystem::path& payload, int h, int w,
                          const std::string& product_id,
                          const std::vector<std::string>& provenance) {
    ordered_json j;
    j["height"] = h;
    j["width"] = w;
    j["product_id"] = product_id;
    j["provenance"] = provenance;
    j["dtype"] = "f32le";
    const auto sp = sidecar_path(payload);
    std::ofstream f(sp);
    if (!f) throw IoError("cannot open sidecar for write: " + sp.string());
    f << j.dump(2) << "\n";
}

} // namespace detail

inline void save_tile(const Tile& t, const std::filesystem::path& path) {
    validate_tile(t);
    detail::write_f32_payload(t.pixels, path);
    detail::write_sidecar(path, t.pixels.height, t.pixels.width, t.product_id, t.provenance);
}

inline Tile load_tile(const std::filesystem::path& path) {
    const ordered_json j = detail::read_sidecar(path);
    Tile t;
    t.pixels = detail::read_f32_payload(path, j["height"].get<int>(), j["width"].get<int>());
    t.product_id = j["product_id"].get<std::string>();
    t.provenance = j["provenance"].get<std::vector<std::string>>();
    return t;
}

// Fingerprints reuse the tile container on disk; the extractor identity rides
// in the provenance list so the sidecar schema stays fixed.
inline constexpr const char* kExtractorTag = "extractor:";

inline void save_fingerprint(const Fingerprint& fp, const std::filesystem::path& path) {
    for (float v : fp.values.data)
        if (!std::isfinite(v)) throw ValidationError("fingerprint values must be finite");
    detail::write_f32_payload(fp.values, path);
    detail::write_sidecar(path, fp.values.height, fp.values.width, "fingerprint",
                          {kExtractorTag + fp.extractor_id});
}

inline Fingerprint load_fingerprint(const std::filesystem::path& path) {
    const ordered_json j = detail::read_sidecar(path);
    Fingerprint fp;
    fp.values = detail::read_f32_payload(path, j["height"].get<int>(), j["width"].get<int>());
    for (const auto& entry : j["provenance"]) {
        const std::string s = entry.get<std::string>();
        if (s.rfind(kExtractorTag, 0) == 0) fp.extractor_id = s.substr(std::strlen(kExtractorTag));
    }
    return fp;
}

// ---------------------------------------------------------------------------
// PGM P5 mask codec: 0 on disk means pristine, 255 means spliced.

inline void save_mask(const TamperMask& m, const std::filesystem::path& path) {
    validate_mask(m);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path.string());
    f << "P5\n" << m.bits.width << " " << m.bits.height << "\n255\n";
    std::vector<std::uint8_t> raw(m.bits.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = m.bits.data[i] ? 255 : 0;
    f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

namespace detail {

inline int read_pgm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines, per the netpbm grammar.
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError("bad PGM header in " + path);
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

} // namespace detail

inline TamperMask load_mask(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path.string());
    char magic[2] = {0, 0};
    f.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5')
        throw FormatError("not a P5 PGM: " + path.string());
    const int w = detail::read_pgm_token(f, path.string());
    const int h = detail::read_pgm_token(f, path.string());
    const int maxval = detail::read_pgm_token(f, path.string());
    if (maxval != 255) throw FormatError("PGM maxval must be 255 in " + path.string());
    if (h < 1 || w < 1) throw FormatError("PGM dimensions must be >= 1 in " + path.string());
    std::vector<std::uint8_t> raw(std::size_t(h) * w);
    f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (f.gcount() != std::streamsize(raw.size()))
        throw CorruptionError("PGM payload truncated in " + path.string());
    TamperMask m;
    m.bits = Grid<std::uint8_t>(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == 0) m.bits.data[i] = 0;
        else if (raw[i] == 255) m.bits.data[i] = 1;
        else throw FormatError("mask pixel value " + std::to_string(int(raw[i])) +
                               " not in {0,255} in " + path.string());
    }
    return m;
}

} // namespace sarloc
