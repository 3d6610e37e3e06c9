#pragma once

#include <cmath>
#include <string>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"

namespace sarloc {

enum class Kernel { nearest, bilinear, bicubic };

inline const char* kernel_name(Kernel k) {
    switch (k) {
        case Kernel::nearest: return "nearest";
        case Kernel::bilinear: return "bilinear";
        case Kernel::bicubic: return "bicubic";
    }
    throw DispatchError("unknown kernel");
}

inline Kernel kernel_from_name(const std::string& s) {
    if (s == "nearest") return Kernel::nearest;
    if (s == "bilinear") return Kernel::bilinear;
    if (s == "bicubic") return Kernel::bicubic;
    throw DispatchError("unknown kernel '" + s + "'");
}

namespace detail {

inline float tap(const Grid<float>& g, int r, int c) {
    return g.at(reflect_index(r, g.height), reflect_index(c, g.width));
}

// Keys cubic convolution kernel, a = -0.5.
inline double cubic_weight(double t) {
    t = std::abs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

} // namespace detail

/// Samples grid at fractional (y, x); out-of-support taps reflect at borders.
inline float sample_nearest(const Grid<float>& g, double y, double x) {
    return detail::tap(g, int(std::lround(y)), int(std::lround(x)));
}

inline float sample_bilinear(const Grid<float>& g, double y, double x) {
    const int r0 = int(std::floor(y));
    const int c0 = int(std::floor(x));
    const double fy = y - r0;
    const double fx = x - c0;
    const double top = (1.0 - fx) * detail::tap(g, r0, c0) + fx * detail::tap(g, r0, c0 + 1);
    const double bot = (1.0 - fx) * detail::tap(g, r0 + 1, c0) + fx * detail::tap(g, r0 + 1, c0 + 1);
    return float((1.0 - fy) * top + fy * bot);
}

inline float sample_bicubic(const Grid<float>& g, double y, double x) {
    const int r0 = int(std::floor(y));
    const int c0 = int(std::floor(x));
    const double fy = y - r0;
    const double fx = x - c0;
    double wx[4], wy[4];
    for (int i = 0; i < 4; ++i) {
        wx[i] = detail::cubic_weight(fx - (i - 1));
        wy[i] = detail::cubic_weight(fy - (i - 1));
    }
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        double row = 0.0;
        for (int j = 0; j < 4; ++j) row += wx[j] * detail::tap(g, r0 + i - 1, c0 + j - 1);
        acc += wy[i] * row;
    }
    return float(acc);
}

inline float sample(const Grid<float>& g, double y, double x, Kernel k) {
    switch (k) {
        case Kernel::nearest: return sample_nearest(g, y, x);
        case Kernel::bilinear: return sample_bilinear(g, y, x);
        case Kernel::bicubic: return sample_bicubic(g, y, x);
    }
    throw DispatchError("unknown kernel");
}

/// Scales to round(f*H) x round(f*W) with center-aligned pixel mapping.
inline Grid<float> resize(const Grid<float>& g, double factor, Kernel k) {
    if (!(factor > 0.0)) throw ValidationError("resize factor must be positive");
    const int oh = int(std::lround(factor * g.height));
    const int ow = int(std::lround(factor * g.width));
    if (oh < 1 || ow < 1) throw SizingError("resize output collapses to zero area");
    const double sy = double(g.height) / oh;
    const double sx = double(g.width) / ow;
    Grid<float> out(oh, ow);
    for (int r = 0; r < oh; ++r) {
        const double y = (r + 0.5) * sy - 0.5;
        for (int c = 0; c < ow; ++c) out.at(r, c) = sample(g, y, (c + 0.5) * sx - 0.5, k);
    }
    return out;
}

/// Rotates about the grid center by angle_deg (counterclockwise), bilinear
/// sampling with reflected fill. Output has the input's dimensions.
inline Grid<float> rotate(const Grid<float>& g, double angle_deg) {
    const double th = angle_deg * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    const double cy = (g.height - 1) / 2.0;
    const double cx = (g.width - 1) / 2.0;
    Grid<float> out(g.height, g.width);
    for (int r = 0; r < g.height; ++r) {
        const double dy = r - cy;
        // inverse map: rotate output coords by -angle around the center
        double y = cy + st * (0 - cx) + ct * dy;
        double x = cx + ct * (0 - cx) - st * dy;
        for (int c = 0; c < g.width; ++c) {
            out.at(r, c) = sample_bilinear(g, y, x);
            y += st;
            x += ct;
        }
    }
    return out;
}

} // namespace sarloc
