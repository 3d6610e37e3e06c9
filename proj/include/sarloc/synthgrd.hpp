#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"
#include "sarloc/interp.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/rng.hpp"

namespace sarloc {

/// Per-product processing chain parameters. Two products with different
/// signatures leave different resampling/filtering traces in their tiles.
struct ProductSignature {
    double resample_factor = 1.0;
    Kernel resample_kernel = Kernel::bilinear;
    double lowpass_sigma = 0.0;     // 0 = skip
    double quantization_step = 0.0; // 0 = skip
    int looks = 1;
};

inline void validate_signature(const ProductSignature& s) {
    if (s.resample_factor < 0.5 || s.resample_factor > 3.0)
        throw ValidationError("resample_factor must lie in [0.5,3]");
    if (s.lowpass_sigma < 0.0) throw ValidationError("lowpass_sigma must be >= 0");
    if (s.quantization_step < 0.0) throw ValidationError("quantization_step must be >= 0");
    if (s.looks < 1 || s.looks > 16) throw ValidationError("looks must lie in [1,16]");
}

struct SceneConfig {
    int height = 0;
    int width = 0;
    std::array<double, 3> texture_mix = {0.6, 0.25, 0.15}; // smooth, blobs, lines
    std::uint64_t seed = 0;
};

inline void validate_scene(const SceneConfig& c) {
    if (c.height < 1 || c.width < 1) throw SizingError("scene must have positive area");
    double sum = 0.0;
    for (double w : c.texture_mix) {
        if (w < 0.0) throw ValidationError("texture weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("texture weights must sum to 1");
}

namespace detail {

// Value noise: a coarse uniform grid in [-1,1] sampled bilinearly. Summing a
// few octaves gives correlated structure at several scales, bounded by the
// amplitude sum.
inline void add_value_noise(Grid<float>& acc, int cell, double amplitude, Rng& rng) {
    const int ch = acc.height / cell + 3;
    const int cw = acc.width / cell + 3;
    Grid<float> coarse(ch, cw);
    for (float& v : coarse.data) v = float(rng.uniform(-1.0, 1.0));
    for (int r = 0; r < acc.height; ++r)
        for (int c = 0; c < acc.width; ++c)
            acc.at(r, c) += float(amplitude) * sample_bilinear(coarse, double(r) / cell, double(c) / cell);
}

inline void stamp_gaussian(Grid<float>& g, double cy, double cx, double sigma, double amp) {
    const int rad = int(std::ceil(3.0 * sigma));
    const int r0 = std::max(0, int(std::floor(cy)) - rad);
    const int r1 = std::min(g.height - 1, int(std::ceil(cy)) + rad);
    const int c0 = std::max(0, int(std::floor(cx)) - rad);
    const int c1 = std::min(g.width - 1, int(std::ceil(cx)) + rad);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            g.at(r, c) += float(amp * std::exp(-d2 * inv));
        }
}

inline void stamp_segment(Grid<float>& g, double y0, double x0, double y1, double x1,
                          double sigma, double amp) {
    const int rad = int(std::ceil(3.0 * sigma));
    const int r0 = std::max(0, int(std::floor(std::min(y0, y1))) - rad);
    const int r1 = std::min(g.height - 1, int(std::ceil(std::max(y0, y1))) + rad);
    const int c0 = std::max(0, int(std::floor(std::min(x0, x1))) - rad);
    const int c1 = std::min(g.width - 1, int(std::ceil(std::max(x0, x1))) + rad);
    const double dy = y1 - y0, dx = x1 - x0;
    const double len2 = dy * dy + dx * dx;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            double t = len2 > 0.0 ? ((r - y0) * dy + (c - x0) * dx) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double py = y0 + t * dy, px = x0 + t * dx;
            const double d2 = (r - py) * (r - py) + (c - px) * (c - px);
            g.at(r, c) += float(amp * std::exp(-d2 * inv));
        }
}

} // namespace detail

/// Deterministic nonnegative reflectivity with structure at several scales.
inline Grid<float> gen_reflectivity(const SceneConfig& cfg) {
    validate_scene(cfg);
    const auto [w_smooth, w_blobs, w_lines] = cfg.texture_mix;

    Rng rng(derive_seed(cfg.seed, 0x5ce11e));
    Grid<float> noise(cfg.height, cfg.width, 0.f);
    detail::add_value_noise(noise, 64, 0.5, rng);
    detail::add_value_noise(noise, 16, 0.3, rng);
    detail::add_value_noise(noise, 4, 0.2, rng);

    Grid<float> out(cfg.height, cfg.width, 0.f);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const float smooth = std::max(0.05f, 1.f + 0.6f * noise.data[i]);
        out.data[i] = float(w_smooth) * smooth + float(w_blobs + w_lines) * 0.3f;
    }

    if (w_blobs > 0.0) {
        Rng blob_rng(derive_seed(cfg.seed, 0xb10b));
        const int n = std::max(1, int(std::llround(double(cfg.height) * cfg.width / 4096.0)));
        Grid<float> layer(cfg.height, cfg.width, 0.f);
        for (int i = 0; i < n; ++i) {
            const double cy = blob_rng.uniform(0.0, cfg.height);
            const double cx = blob_rng.uniform(0.0, cfg.width);
            const double sigma = blob_rng.uniform(2.0, 8.0);
            const double amp = blob_rng.uniform(4.0, 12.0);
            detail::stamp_gaussian(layer, cy, cx, sigma, amp);
        }
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += float(w_blobs) * layer.data[i];
    }

    if (w_lines > 0.0) {
        Rng line_rng(derive_seed(cfg.seed, 0x11e5));
        const int n = std::max(1, int(std::llround(double(cfg.height) * cfg.width / 16384.0)));
        Grid<float> layer(cfg.height, cfg.width, 0.f);
        for (int i = 0; i < n; ++i) {
            const double y0 = line_rng.uniform(0.0, cfg.height);
            const double x0 = line_rng.uniform(0.0, cfg.width);
            const double ang = line_rng.uniform(0.0, 3.14159265358979323846);
            const double len = line_rng.uniform(0.3, 1.0) * std::min(cfg.height, cfg.width);
            const double sigma = line_rng.uniform(1.0, 3.0);
            const double amp = line_rng.uniform(2.0, 6.0);
            detail::stamp_segment(layer, y0, x0, y0 + len * std::sin(ang), x0 + len * std::cos(ang),
                                  sigma, amp);
        }
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += float(w_lines) * layer.data[i];
    }
    return out;
}

/// Multiplies intensity by an L-look gamma factor (mean 1, variance 1/L) and
/// returns the amplitude, i.e. the square root of the speckled intensity.
inline Grid<float> apply_speckle(const Grid<float>& reflectivity, int looks, std::uint64_t seed) {
    if (looks < 1) throw ValidationError("looks must be >= 1");
    Rng rng(seed);
    Grid<float> out(reflectivity.height, reflectivity.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double intensity = double(reflectivity.data[i]) * rng.multilook_factor(looks);
        out.data[i] = float(std::sqrt(intensity));
    }
    return out;
}

inline Grid<float> gaussian_blur(const Grid<float>& g, double sigma) {
    if (sigma <= 0.0) return g;
    const int rad = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> w(std::size_t(rad) + 1);
    double sum = 0.0;
    for (int i = 0; i <= rad; ++i) {
        w[i] = std::exp(-0.5 * double(i) * i / (sigma * sigma));
        sum += i == 0 ? w[i] : 2.0 * w[i];
    }
    for (double& v : w) v /= sum;

    Grid<float> tmp(g.height, g.width);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            double acc = w[0] * g.at(r, c);
            for (int i = 1; i <= rad; ++i)
                acc += w[i] * (detail::tap(g, r, c - i) + detail::tap(g, r, c + i));
            tmp.at(r, c) = float(acc);
        }
    Grid<float> out(g.height, g.width);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            double acc = w[0] * tmp.at(r, c);
            for (int i = 1; i <= rad; ++i)
                acc += w[i] * (detail::tap(tmp, r - i, c) + detail::tap(tmp, r + i, c));
            out.at(r, c) = float(acc);
        }
    return out;
}

struct ProductRaster {
    Grid<float> raster;
    std::vector<std::string> provenance;
};

namespace detail {

inline std::string trimmed_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

/// reflectivity -> speckle -> resample -> optional low-pass -> optional
/// quantization. Each performed step appends one provenance entry.
inline ProductRaster gen_product(const SceneConfig& cfg, const ProductSignature& sig,
                                 std::uint64_t seed) {
    validate_scene(cfg);
    validate_signature(sig);
    ProductRaster p;
    p.raster = gen_reflectivity(cfg);
    p.provenance.push_back("reflectivity:" + std::to_string(cfg.seed));

    p.raster = apply_speckle(p.raster, sig.looks, derive_seed(seed, 0x57ec));
    p.provenance.push_back("speckle:" + std::to_string(sig.looks));

    p.raster = resize(p.raster, sig.resample_factor, sig.resample_kernel);
    for (float& v : p.raster.data) v = std::max(v, 0.f); // bicubic may undershoot
    p.provenance.push_back("resample:" + detail::trimmed_real(sig.resample_factor) + ":" +
                           kernel_name(sig.resample_kernel));

    if (sig.lowpass_sigma > 0.0) {
        p.raster = gaussian_blur(p.raster, sig.lowpass_sigma);
        p.provenance.push_back("lowpass:" + detail::trimmed_real(sig.lowpass_sigma));
    }
    if (sig.quantization_step > 0.0) {
        const double q = sig.quantization_step;
        for (float& v : p.raster.data) v = float(std::round(double(v) / q) * q);
        p.provenance.push_back("quantize:" + detail::trimmed_real(q));
    }
    return p;
}

// ---------------------------------------------------------------------------
// products.json registry

struct ProductEntry {
    std::string id;
    ProductSignature signature;
    SceneConfig scene;
    std::uint64_t seed = 0;
    std::string path; // raster payload relative to the registry file
};

inline ordered_json signature_to_json(const ProductSignature& s) {
    ordered_json j;
    j["resample_factor"] = s.resample_factor;
    j["resample_kernel"] = kernel_name(s.resample_kernel);
    j["lowpass_sigma"] = s.lowpass_sigma;
    j["quantization_step"] = s.quantization_step;
    j["looks"] = s.looks;
    return j;
}

inline ProductSignature signature_from_json(const ordered_json& j) {
    ProductSignature s;
    s.resample_factor = j.at("resample_factor").get<double>();
    s.resample_kernel = kernel_from_name(j.at("resample_kernel").get<std::string>());
    s.lowpass_sigma = j.at("lowpass_sigma").get<double>();
    s.quantization_step = j.at("quantization_step").get<double>();
    s.looks = j.at("looks").get<int>();
    validate_signature(s);
    return s;
}

inline void save_registry(const std::vector<ProductEntry>& products,
                          const std::filesystem::path& path) {
    ordered_json j;
    j["products"] = ordered_json::array();
    for (const auto& p : products) {
        ordered_json e;
        e["id"] = p.id;
        e["signature"] = signature_to_json(p.signature);
        e["scene"] = {{"height", p.scene.height},
                      {"width", p.scene.width},
                      {"texture_mix", p.scene.texture_mix},
                      {"seed", p.scene.seed}};
        e["seed"] = p.seed;
        e["path"] = p.path;
        j["products"].push_back(std::move(e));
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot open registry for write: " + path.string());
    f << j.dump(2) << "\n";
}

inline std::vector<ProductEntry> load_registry(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open registry: " + path.string());
    ordered_json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw FormatError("bad registry JSON in " + path.string() + ": " + e.what());
    }
    std::vector<ProductEntry> out;
    for (const auto& e : j.at("products")) {
        ProductEntry p;
        p.id = e.at("id").get<std::string>();
        if (p.id.empty()) throw FormatError("registry product id must be non-empty");
        p.signature = signature_from_json(e.at("signature"));
        p.scene.height = e.at("scene").at("height").get<int>();
        p.scene.width = e.at("scene").at("width").get<int>();
        const auto mix = e.at("scene").at("texture_mix");
        for (int i = 0; i < 3; ++i) p.scene.texture_mix[i] = mix.at(i).get<double>();
        p.scene.seed = e.at("scene").at("seed").get<std::uint64_t>();
        p.seed = e.at("seed").get<std::uint64_t>();
        p.path = e.at("path").get<std::string>();
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace sarloc
