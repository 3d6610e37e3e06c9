#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sarloc/errors.hpp"

namespace sarloc {

/// Row-major 2-D grid, the storage behind tiles, masks and fingerprints.
template <typename T>
struct Grid {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int h, int w, T fill = T{})
        : height(h), width(w) {
        if (h < 1 || w < 1) throw SizingError("grid dimensions must be >= 1");
        data.assign(std::size_t(h) * std::size_t(w), fill);
    }

    T& at(int r, int c) { return data[std::size_t(r) * width + c]; }
    const T& at(int r, int c) const { return data[std::size_t(r) * width + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Grid& o) const { return height == o.height && width == o.width; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }

    bool operator==(const Grid& o) const {
        return height == o.height && width == o.width && data == o.data;
    }
};

// Symmetric boundary reflection, edge pixel included: -1 -> 0, n -> n-1.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        i = i < 0 ? -i - 1 : 2 * n - 1 - i;
    }
    return i;
}

template <typename T>
Grid<T> crop(const Grid<T>& g, int r0, int c0, int h, int w) {
    if (h < 1 || w < 1 || r0 < 0 || c0 < 0 || r0 + h > g.height || c0 + w > g.width)
        throw SizingError("crop rectangle outside grid bounds");
    Grid<T> out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.at(r, c) = g.at(r0 + r, c0 + c);
    return out;
}

template <typename T>
void paste(Grid<T>& dst, const Grid<T>& src, int r0, int c0) {
    if (r0 < 0 || c0 < 0 || r0 + src.height > dst.height || c0 + src.width > dst.width)
        throw SizingError("paste rectangle outside grid bounds");
    for (int r = 0; r < src.height; ++r)
        for (int c = 0; c < src.width; ++c) dst.at(r0 + r, c0 + c) = src.at(r, c);
}

} // namespace sarloc
