#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/interp.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/rng.hpp"

namespace sarloc {

enum class EditKind {
    none,
    rotate,
    resize,
    rotate_resize,
    gaussian_noise,
    laplacian_noise,
    average_blur,
    median_blur,
    speckle_noise,
};

inline const char* edit_kind_name(EditKind k) {
    switch (k) {
        case EditKind::none: return "none";
        case EditKind::rotate: return "rotate";
        case EditKind::resize: return "resize";
        case EditKind::rotate_resize: return "rotate_resize";
        case EditKind::gaussian_noise: return "gaussian_noise";
        case EditKind::laplacian_noise: return "laplacian_noise";
        case EditKind::average_blur: return "average_blur";
        case EditKind::median_blur: return "median_blur";
        case EditKind::speckle_noise: return "speckle_noise";
    }
    throw DispatchError("unknown edit kind");
}

inline EditKind edit_kind_from_name(const std::string& s) {
    static const std::map<std::string, EditKind> table = {
        {"none", EditKind::none},
        {"rotate", EditKind::rotate},
        {"resize", EditKind::resize},
        {"rotate_resize", EditKind::rotate_resize},
        {"gaussian_noise", EditKind::gaussian_noise},
        {"laplacian_noise", EditKind::laplacian_noise},
        {"average_blur", EditKind::average_blur},
        {"median_blur", EditKind::median_blur},
        {"speckle_noise", EditKind::speckle_noise},
    };
    auto it = table.find(s);
    if (it == table.end()) throw DispatchError("unknown edit kind '" + s + "'");
    return it->second;
}

struct EditDescriptor {
    EditKind kind = EditKind::none;
    std::map<std::string, double> params; // angle, factor, variance, kernel
    std::uint64_t seed = 0;

    double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end())
            throw ValidationError(std::string(edit_kind_name(kind)) + " edit missing param '" + name + "'");
        return it->second;
    }
    double param_or(const std::string& name, double fallback) const {
        auto it = params.find(name);
        return it == params.end() ? fallback : it->second;
    }
};

inline void validate_edit(const EditDescriptor& e) {
    auto angle_ok = [&] {
        const double a = e.param("angle");
        if (a < -45.0 || a > 45.0) throw ValidationError("rotation angle must lie in [-45,45]");
    };
    auto factor_ok = [&] {
        const double f = e.param("factor");
        if (!(f > 1.0) || f > 2.5) throw ValidationError("resize factor must lie in (1,2.5]");
    };
    auto variance_ok = [&] {
        const double v = e.param("variance");
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("noise variance must be >= 0");
    };
    switch (e.kind) {
        case EditKind::none:
            break;
        case EditKind::rotate:
            angle_ok();
            break;
        case EditKind::resize:
            factor_ok();
            break;
        case EditKind::rotate_resize:
            angle_ok();
            factor_ok();
            break;
        case EditKind::gaussian_noise:
        case EditKind::laplacian_noise:
        case EditKind::speckle_noise:
            variance_ok();
            break;
        case EditKind::average_blur: {
            const double k = e.param_or("kernel", 10.0);
            if (k != std::floor(k) || int(k) < 2 || int(k) % 2 != 0)
                throw ValidationError("average_blur kernel side must be an even integer >= 2");
            break;
        }
        case EditKind::median_blur: {
            const double k = e.param_or("kernel", 5.0);
            if (k != std::floor(k) || int(k) < 3 || int(k) % 2 != 1)
                throw ValidationError("median_blur kernel side must be an odd integer >= 3");
            break;
        }
    }
}

inline ordered_json edit_to_json(const EditDescriptor& e) {
    ordered_json j;
    j["kind"] = edit_kind_name(e.kind);
    j["params"] = ordered_json::object();
    for (const auto& [k, v] : e.params) j["params"][k] = v;
    j["seed"] = e.seed;
    return j;
}

inline EditDescriptor edit_from_json(const ordered_json& j) {
    EditDescriptor e;
    e.kind = edit_kind_from_name(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("params").items()) e.params[k] = v.get<double>();
    e.seed = j.at("seed").get<std::uint64_t>();
    validate_edit(e);
    return e;
}

namespace detail {

inline Grid<float> box_blur(const Grid<float>& g, int side) {
    // Even kernels anchor with a half-pixel bias toward the top-left.
    const int lo = side % 2 == 0 ? -side / 2 : -(side - 1) / 2;
    const int hi = side % 2 == 0 ? side / 2 - 1 : (side - 1) / 2;
    Grid<float> out(g.height, g.width);
    const double inv = 1.0 / (double(side) * side);
    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            double acc = 0.0;
            for (int dr = lo; dr <= hi; ++dr)
                for (int dc = lo; dc <= hi; ++dc) acc += tap(g, r + dr, c + dc);
            out.at(r, c) = float(acc * inv);
        }
    }
    return out;
}

inline Grid<float> median_blur(const Grid<float>& g, int side) {
    const int half = (side - 1) / 2;
    Grid<float> out(g.height, g.width);
    std::vector<float> window;
    window.reserve(std::size_t(side) * side);
    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            window.clear();
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) window.push_back(tap(g, r + dr, c + dc));
            // lower middle order statistic; exact median for odd counts
            const std::size_t mid = (window.size() - 1) / 2;
            std::nth_element(window.begin(), window.begin() + mid, window.end());
            out.at(r, c) = window[mid];
        }
    }
    return out;
}

inline float clip01(double v) { return float(std::clamp(v, 0.0, 1.0)); }

} // namespace detail

inline NormalizedTile apply_edit(const NormalizedTile& tile, const EditDescriptor& e) {
    validate_edit(e);
    NormalizedTile out;
    out.scale_min = tile.scale_min;
    out.scale_max = tile.scale_max;
    Rng rng(e.seed);
    switch (e.kind) {
        case EditKind::none:
            out.pixels = tile.pixels;
            break;
        case EditKind::rotate:
            out.pixels = rotate(tile.pixels, e.param("angle"));
            break;
        case EditKind::resize:
            out.pixels = resize(tile.pixels, e.param("factor"), Kernel::bilinear);
            break;
        case EditKind::rotate_resize:
            out.pixels = resize(rotate(tile.pixels, e.param("angle")), e.param("factor"),
                                Kernel::bilinear);
            break;
        case EditKind::gaussian_noise: {
            const double sd = std::sqrt(e.param("variance"));
            out.pixels = Grid<float>(tile.pixels.height, tile.pixels.width);
            for (std::size_t i = 0; i < tile.pixels.data.size(); ++i)
                out.pixels.data[i] = detail::clip01(tile.pixels.data[i] + rng.normal(0.0, sd));
            break;
        }
        case EditKind::laplacian_noise: {
            // variance = 2 b^2 for Laplace(0, b)
            const double b = std::sqrt(e.param("variance") / 2.0);
            out.pixels = Grid<float>(tile.pixels.height, tile.pixels.width);
            for (std::size_t i = 0; i < tile.pixels.data.size(); ++i)
                out.pixels.data[i] = detail::clip01(tile.pixels.data[i] + rng.laplace(b));
            break;
        }
        case EditKind::average_blur:
            out.pixels = detail::box_blur(tile.pixels, int(e.param_or("kernel", 10.0)));
            break;
        case EditKind::median_blur:
            out.pixels = detail::median_blur(tile.pixels, int(e.param_or("kernel", 5.0)));
            break;
        case EditKind::speckle_noise: {
            const double sd = std::sqrt(e.param("variance"));
            out.pixels = Grid<float>(tile.pixels.height, tile.pixels.width);
            for (std::size_t i = 0; i < tile.pixels.data.size(); ++i)
                out.pixels.data[i] =
                    detail::clip01(double(tile.pixels.data[i]) * (1.0 + rng.normal(0.0, sd)));
            break;
        }
        default:
            throw DispatchError("unknown edit kind");
    }
    return out;
}

} // namespace sarloc
