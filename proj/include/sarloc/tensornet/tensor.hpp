#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sarloc/errors.hpp"

namespace sarloc {

/// 4-axis tensor (batch, channel, row, col), row-major innermost.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T{}) : n(n_), c(c_), h(h_), w(w_) {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw SizingError("tensor axes must all be >= 1");
        data.assign(std::size_t(n) * c * h * w, fill);
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int in, int ic, int ih, int iw) const {
        return ((std::size_t(in) * c + ic) * h + ih) * w + iw;
    }
    T& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
    const T& at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }

    T* plane(int in, int ic) { return data.data() + (std::size_t(in) * c + ic) * h * w; }
    const T* plane(int in, int ic) const {
        return data.data() + (std::size_t(in) * c + ic) * h * w;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void check_finite(const char* what) const {
        for (T v : data)
            if (!std::isfinite(double(v)))
                throw ValidationError(std::string(what) + ": non-finite tensor value");
    }
};

} // namespace sarloc
