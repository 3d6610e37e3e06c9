#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/tensornet/tensor.hpp"

namespace sarloc {

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad; // d loss / d input, same shape as the input tensor
};

/// Distance-based logistic loss over a batch of fingerprints. Each sample is
/// flattened; d_ij is the squared Euclidean distance. For anchor i,
/// p_ij = exp(-d_ij) / sum_{k != i} exp(-d_ik) and the anchor's loss is
/// -log(sum of p_ij over positive j). Anchors with no positive pair are
/// skipped; the result is the mean over counted anchors. The softmax is
/// stabilized by subtracting the per-anchor max of (-d).
template <typename T>
LossResult<T> dbl_loss(const Tensor<T>& f, const Grid<std::uint8_t>& labels) {
    const int B = f.n;
    if (B < 2) throw ValidationError("dbl_loss needs at least 2 fingerprints");
    if (labels.height != B || labels.width != B)
        throw ValidationError("label matrix must be batch x batch");
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) {
            if (labels.at(i, j) > 1) throw ValidationError("labels must be 0 or 1");
            if (labels.at(i, j) != labels.at(j, i))
                throw ValidationError("label matrix must be symmetric");
        }
    const std::size_t D = std::size_t(f.c) * f.h * f.w;

    std::vector<double> d(std::size_t(B) * B, 0.0);
    for (int i = 0; i < B; ++i) {
        const T* fi = f.data.data() + std::size_t(i) * D;
        for (int j = i + 1; j < B; ++j) {
            const T* fj = f.data.data() + std::size_t(j) * D;
            double acc = 0.0;
            for (std::size_t k = 0; k < D; ++k) {
                const double diff = double(fi[k]) - double(fj[k]);
                acc += diff * diff;
            }
            d[std::size_t(i) * B + j] = acc;
            d[std::size_t(j) * B + i] = acc;
        }
    }

    // G_ij = d loss / d d_ij, counting anchor i's softmax only
    std::vector<double> G(std::size_t(B) * B, 0.0);
    double loss = 0.0;
    int counted = 0;
    std::vector<double> p(std::size_t(B), 0.0);
    for (int i = 0; i < B; ++i) {
        bool has_positive = false;
        for (int j = 0; j < B && !has_positive; ++j)
            if (j != i && labels.at(i, j) == 1) has_positive = true;
        if (!has_positive) continue;

        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < B; ++j)
            if (j != i) mx = std::max(mx, -d[std::size_t(i) * B + j]);
        double z = 0.0;
        for (int j = 0; j < B; ++j) {
            p[std::size_t(j)] = j == i ? 0.0 : std::exp(-d[std::size_t(i) * B + j] - mx);
            z += p[std::size_t(j)];
        }
        double pos = 0.0;
        for (int j = 0; j < B; ++j) {
            p[std::size_t(j)] /= z;
            if (j != i && labels.at(i, j) == 1) pos += p[std::size_t(j)];
        }
        pos = std::max(pos, 1e-300);
        loss += -std::log(pos);
        ++counted;
        for (int j = 0; j < B; ++j) {
            if (j == i) continue;
            const double q = labels.at(i, j) == 1 ? p[std::size_t(j)] / pos : 0.0;
            // d(-log pos)/d d_ij = q_ij - p_ij
            G[std::size_t(i) * B + j] = q - p[std::size_t(j)];
        }
    }
    if (counted == 0) throw DegenerateBatchError("no anchor has a positive pair");
    loss /= counted;
    for (double& g : G) g /= counted;

    LossResult<T> res;
    res.loss = loss;
    res.grad = Tensor<T>(f.n, f.c, f.h, f.w, T(0));
    std::vector<double> gbuf(D);
    for (int i = 0; i < B; ++i) {
        std::fill(gbuf.begin(), gbuf.end(), 0.0);
        const T* fi = f.data.data() + std::size_t(i) * D;
        for (int j = 0; j < B; ++j) {
            if (j == i) continue;
            const double s = G[std::size_t(i) * B + j] + G[std::size_t(j) * B + i];
            if (s == 0.0) continue;
            const T* fj = f.data.data() + std::size_t(j) * D;
            // d d_ij / d f_i = 2 (f_i - f_j)
            for (std::size_t k = 0; k < D; ++k)
                gbuf[k] += 2.0 * s * (double(fi[k]) - double(fj[k]));
        }
        T* out = res.grad.data.data() + std::size_t(i) * D;
        for (std::size_t k = 0; k < D; ++k) out[k] = T(gbuf[k]);
    }
    return res;
}

namespace detail {

constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;

template <typename T>
void check_seg_shapes(const Tensor<T>& pred, const std::vector<TamperMask>& truth) {
    if (pred.c != 1) throw StructuralError("segmentation loss expects single-channel predictions");
    if (int(truth.size()) != pred.n)
        throw StructuralError("truth batch size does not match predictions");
    for (const auto& m : truth)
        if (m.height() != pred.h || m.width() != pred.w)
            throw StructuralError("truth mask dims do not match predictions");
}

} // namespace detail

/// Dice loss, global over the batch with smoothing 1. Predictions clamp to
/// [1e-7, 1 - 1e-7]; clamped entries get zero gradient.
template <typename T>
LossResult<T> dice_loss(const Tensor<T>& pred, const std::vector<TamperMask>& truth) {
    detail::check_seg_shapes(pred, truth);
    const double lo = detail::kProbLo, hi = detail::kProbHi;

    double sum_p = 0.0, sum_t = 0.0, sum_pt = 0.0;
    for (int n = 0; n < pred.n; ++n) {
        const T* p = pred.plane(n, 0);
        const std::uint8_t* t = truth[std::size_t(n)].bits.data.data();
        for (std::size_t i = 0; i < std::size_t(pred.h) * pred.w; ++i) {
            const double pc = std::clamp(double(p[i]), lo, hi);
            sum_p += pc;
            sum_t += t[i] ? 1.0 : 0.0;
            sum_pt += t[i] ? pc : 0.0;
        }
    }
    const double denom = sum_p + sum_t + 1.0;

    LossResult<T> res;
    res.loss = 1.0 - (2.0 * sum_pt + 1.0) / denom;
    res.grad = Tensor<T>(pred.n, 1, pred.h, pred.w, T(0));
    for (int n = 0; n < pred.n; ++n) {
        const T* p = pred.plane(n, 0);
        const std::uint8_t* t = truth[std::size_t(n)].bits.data.data();
        T* g = res.grad.plane(n, 0);
        for (std::size_t i = 0; i < std::size_t(pred.h) * pred.w; ++i) {
            const double praw = double(p[i]);
            if (praw < lo || praw > hi) continue; // clamp region: zero gradient
            const double tv = t[i] ? 1.0 : 0.0;
            g[i] = T(-(2.0 * tv * denom - (2.0 * sum_pt + 1.0)) / (denom * denom));
        }
    }
    return res;
}

/// Focal loss, mean over pixels, constant alpha for both classes.
template <typename T>
LossResult<T> focal_loss(const Tensor<T>& pred, const std::vector<TamperMask>& truth,
                         double alpha = 0.25, double gamma = 2.0) {
    detail::check_seg_shapes(pred, truth);
    const double lo = detail::kProbLo, hi = detail::kProbHi;
    const std::size_t N = pred.size();

    LossResult<T> res;
    res.grad = Tensor<T>(pred.n, 1, pred.h, pred.w, T(0));
    double focal = 0.0;
    for (int n = 0; n < pred.n; ++n) {
        const T* p = pred.plane(n, 0);
        const std::uint8_t* t = truth[std::size_t(n)].bits.data.data();
        T* g = res.grad.plane(n, 0);
        for (std::size_t i = 0; i < std::size_t(pred.h) * pred.w; ++i) {
            const double praw = double(p[i]);
            const double pc = std::clamp(praw, lo, hi);
            const double q = t[i] ? pc : 1.0 - pc;
            focal += -alpha * std::pow(1.0 - q, gamma) * std::log(q);
            if (praw < lo || praw > hi) continue;
            const double dfdq = alpha * gamma * std::pow(1.0 - q, gamma - 1.0) * std::log(q) -
                                alpha * std::pow(1.0 - q, gamma) / q;
            g[i] = T(dfdq * (t[i] ? 1.0 : -1.0) / double(N));
        }
    }
    res.loss = focal / double(N);
    return res;
}

template <typename T>
struct DiceFocalResult {
    double loss = 0.0;
    double dice = 0.0;
    double focal = 0.0;
    Tensor<T> grad;
};

/// Combined segmentation objective: Dice plus Focal, gradients summed.
template <typename T>
DiceFocalResult<T> dice_focal_loss(const Tensor<T>& pred, const std::vector<TamperMask>& truth,
                                   double alpha = 0.25, double gamma = 2.0) {
    LossResult<T> d = dice_loss(pred, truth);
    LossResult<T> f = focal_loss(pred, truth, alpha, gamma);
    DiceFocalResult<T> res;
    res.dice = d.loss;
    res.focal = f.loss;
    res.loss = d.loss + f.loss;
    res.grad = std::move(d.grad);
    for (std::size_t i = 0; i < res.grad.data.size(); ++i) res.grad.data[i] += f.grad.data[i];
    return res;
}

} // namespace sarloc
