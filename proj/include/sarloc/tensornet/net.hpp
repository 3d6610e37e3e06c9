#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/rng.hpp"
#include "sarloc/tensornet/tensor.hpp"

namespace sarloc {

enum class LayerKind {
    conv2d,
    batch_norm,
    relu,
    max_pool2,
    upsample_nearest2,
    concat,
    sigmoid,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::relu: return "relu";
        case LayerKind::max_pool2: return "max_pool2";
        case LayerKind::upsample_nearest2: return "upsample_nearest2";
        case LayerKind::concat: return "concat";
        case LayerKind::sigmoid: return "sigmoid";
    }
    throw DispatchError("unknown layer kind");
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    for (LayerKind k : {LayerKind::conv2d, LayerKind::batch_norm, LayerKind::relu,
                        LayerKind::max_pool2, LayerKind::upsample_nearest2, LayerKind::concat,
                        LayerKind::sigmoid})
        if (s == layer_kind_name(k)) return k;
    throw DispatchError("unknown layer kind '" + s + "'");
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int out_ch = 0;          // conv2d
    int k = 3;               // conv2d kernel side, odd
    bool bias = true;        // conv2d
    double init_scale = 1.0; // conv2d weight init multiplier
    int skip = -1;           // concat: index of the earlier layer to append

    static LayerSpec conv(int out_ch, int k = 3, bool bias = true, double init_scale = 1.0) {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.out_ch = out_ch;
        s.k = k;
        s.bias = bias;
        s.init_scale = init_scale;
        return s;
    }
    static LayerSpec bn() { return {LayerKind::batch_norm}; }
    static LayerSpec act_relu() { return {LayerKind::relu}; }
    static LayerSpec pool() { return {LayerKind::max_pool2}; }
    static LayerSpec upsample() { return {LayerKind::upsample_nearest2}; }
    static LayerSpec cat(int skip) {
        LayerSpec s;
        s.kind = LayerKind::concat;
        s.skip = skip;
        return s;
    }
    static LayerSpec act_sigmoid() { return {LayerKind::sigmoid}; }
};

struct NetworkSpec {
    int in_channels = 1;
    std::vector<LayerSpec> layers;
};

namespace detail {

inline std::string layer_tag(const LayerSpec& s, int index) {
    return std::string(layer_kind_name(s.kind)) + " layer " + std::to_string(index);
}

} // namespace detail

/// Per-layer output channel counts; rejects incompatible specs.
inline std::vector<int> channel_trace(const NetworkSpec& spec) {
    if (spec.in_channels < 1) throw StructuralError("in_channels must be >= 1");
    std::vector<int> ch;
    int cur = spec.in_channels;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv2d:
                if (l.out_ch < 1) throw StructuralError(detail::layer_tag(l, int(i)) + ": out_ch must be >= 1");
                if (l.k < 1 || l.k % 2 == 0)
                    throw StructuralError(detail::layer_tag(l, int(i)) + ": kernel side must be odd");
                cur = l.out_ch;
                break;
            case LayerKind::concat:
                if (l.skip < 0 || l.skip >= int(i))
                    throw StructuralError(detail::layer_tag(l, int(i)) + ": skip must reference an earlier layer");
                cur += ch[std::size_t(l.skip)];
                break;
            default:
                break;
        }
        ch.push_back(cur);
    }
    return ch;
}

template <typename T>
struct ParamBlock {
    std::vector<T> w, b;              // conv2d
    std::vector<T> gamma, beta;       // batch_norm, trainable
    std::vector<T> run_mean, run_var; // batch_norm, running statistics
};

template <typename T>
class Network {
public:
    NetworkSpec spec;
    std::vector<int> channels; // per-layer output channels
    std::vector<ParamBlock<T>> params;

    static constexpr double kBnEps = 1e-5;
    static constexpr double kBnMomentum = 0.9; // running = m*running + (1-m)*batch

    static Network make(const NetworkSpec& s, std::uint64_t seed) {
        Network net;
        net.spec = s;
        net.channels = channel_trace(s);
        net.params.resize(s.layers.size());
        int in_ch = s.in_channels;
        for (std::size_t i = 0; i < s.layers.size(); ++i) {
            const LayerSpec& l = s.layers[i];
            ParamBlock<T>& p = net.params[i];
            if (l.kind == LayerKind::conv2d) {
                Rng rng(derive_seed(seed, i));
                const std::size_t fan_in = std::size_t(in_ch) * l.k * l.k;
                const double sd = l.init_scale * std::sqrt(2.0 / double(fan_in));
                p.w.resize(std::size_t(l.out_ch) * fan_in);
                for (T& v : p.w) v = T(rng.normal(0.0, sd));
                if (l.bias) p.b.assign(std::size_t(l.out_ch), T(0));
            } else if (l.kind == LayerKind::batch_norm) {
                p.gamma.assign(std::size_t(in_ch), T(1));
                p.beta.assign(std::size_t(in_ch), T(0));
                p.run_mean.assign(std::size_t(in_ch), T(0));
                p.run_var.assign(std::size_t(in_ch), T(1));
            }
            in_ch = net.channels[i];
        }
        return net;
    }

    struct Cache {
        Tensor<T> input;
        std::vector<Tensor<T>> outputs;
        std::vector<std::vector<int>> pool_argmax;
        std::vector<std::vector<double>> bn_mean, bn_var;
        bool train = false;
        bool valid = false;
    };

    struct Gradients {
        std::vector<ParamBlock<T>> params; // w, b, gamma, beta mirror shapes
        Tensor<T> input;
    };

    /// Train mode uses batch statistics (and updates running averages unless
    /// update_running is false); eval mode is a pure function of params.
    /// Pass a cache to enable backward.
    Tensor<T> forward(const Tensor<T>& x, bool train, Cache* cache = nullptr,
                      bool update_running = true) {
        if (x.c != spec.in_channels)
            throw StructuralError("network input has " + std::to_string(x.c) +
                                  " channels, spec expects " + std::to_string(spec.in_channels));
        const int L = int(spec.layers.size());
        if (cache) {
            cache->input = x;
            cache->outputs.assign(L, Tensor<T>());
            cache->pool_argmax.assign(L, {});
            cache->bn_mean.assign(L, {});
            cache->bn_var.assign(L, {});
            cache->train = train;
            cache->valid = true;
        }
        // last layer index that still needs each output alive
        std::vector<int> last_use(L);
        for (int i = 0; i < L; ++i) last_use[i] = i + 1;
        for (int i = 0; i < L; ++i)
            if (spec.layers[i].kind == LayerKind::concat)
                last_use[spec.layers[i].skip] = std::max(last_use[spec.layers[i].skip], i);

        std::vector<Tensor<T>> outs(L);
        const Tensor<T>* cur = &x;
        for (int i = 0; i < L; ++i) {
            outs[i] = run_layer(i, *cur, train, update_running, outs, cache);
            cur = &outs[i];
            if (!cache) {
                for (int j = 0; j < i; ++j)
                    if (last_use[j] <= i && !outs[j].data.empty() && j != i) outs[j] = Tensor<T>();
            }
        }
        Tensor<T> result = std::move(outs[L - 1]);
        if (cache) {
            cache->outputs = std::move(outs);
            cache->outputs[L - 1] = result;
        }
        return result;
    }

    Gradients backward(const Cache& cache, const Tensor<T>& upstream) const {
        if (!cache.valid || !cache.train)
            throw UsageError("backward requires a cache produced by a train-mode forward");
        const int L = int(spec.layers.size());
        if (!upstream.same_shape(cache.outputs[L - 1]))
            throw StructuralError("upstream gradient shape does not match network output");

        Gradients g;
        g.params.resize(L);
        for (int i = 0; i < L; ++i) {
            g.params[i].w.assign(params[i].w.size(), T(0));
            g.params[i].b.assign(params[i].b.size(), T(0));
            g.params[i].gamma.assign(params[i].gamma.size(), T(0));
            g.params[i].beta.assign(params[i].beta.size(), T(0));
        }

        std::vector<Tensor<T>> gout(L);
        gout[L - 1] = upstream;
        auto accumulate = [](Tensor<T>& dst, Tensor<T>&& src) {
            if (dst.data.empty()) {
                dst = std::move(src);
                return;
            }
            if (!dst.same_shape(src)) throw StructuralError("gradient accumulation shape clash");
            for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
        };

        for (int l = L - 1; l >= 0; --l) {
            if (gout[l].data.empty()) continue; // output never used downstream
            const Tensor<T>& in = l == 0 ? cache.input : cache.outputs[l - 1];
            Tensor<T> gskip;
            Tensor<T> gin = layer_backward(l, in, gout[l], cache, g.params[l], gskip);
            if (l == 0)
                accumulate(g.input, std::move(gin));
            else
                accumulate(gout[l - 1], std::move(gin));
            if (!gskip.data.empty()) accumulate(gout[spec.layers[l].skip], std::move(gskip));
            gout[l] = Tensor<T>(); // free
        }
        if (g.input.data.empty()) g.input = Tensor<T>(cache.input.n, cache.input.c, cache.input.h, cache.input.w, T(0));
        return g;
    }

    std::size_t param_count() const {
        std::size_t total = 0;
        for (const auto& p : params)
            total += p.w.size() + p.b.size() + p.gamma.size() + p.beta.size() +
                     p.run_mean.size() + p.run_var.size();
        return total;
    }

private:
    Tensor<T> run_layer(int i, const Tensor<T>& in, bool train, bool update_running,
                        const std::vector<Tensor<T>>& outs, Cache* cache) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv2d: return conv_forward(i, in);
            case LayerKind::batch_norm: return bn_forward(i, in, train, update_running, cache);
            case LayerKind::relu: {
                Tensor<T> out = in;
                for (T& v : out.data) v = v > T(0) ? v : T(0);
                return out;
            }
            case LayerKind::max_pool2: return pool_forward(i, in, cache);
            case LayerKind::upsample_nearest2: {
                Tensor<T> out(in.n, in.c, in.h * 2, in.w * 2);
                for (int n = 0; n < in.n; ++n)
                    for (int c = 0; c < in.c; ++c) {
                        const T* src = in.plane(n, c);
                        T* dst = out.plane(n, c);
                        for (int y = 0; y < in.h; ++y)
                            for (int x = 0; x < in.w; ++x) {
                                const T v = src[y * in.w + x];
                                T* d = dst + (2 * y) * out.w + 2 * x;
                                d[0] = v;
                                d[1] = v;
                                d[out.w] = v;
                                d[out.w + 1] = v;
                            }
                    }
                return out;
            }
            case LayerKind::concat: {
                const Tensor<T>& skip = outs[std::size_t(l.skip)];
                if (skip.n != in.n || skip.h != in.h || skip.w != in.w)
                    throw StructuralError(detail::layer_tag(l, i) +
                                          ": skip spatial dims do not match current activation");
                Tensor<T> out(in.n, in.c + skip.c, in.h, in.w);
                for (int n = 0; n < in.n; ++n) {
                    for (int c = 0; c < in.c; ++c)
                        std::copy_n(in.plane(n, c), std::size_t(in.h) * in.w, out.plane(n, c));
                    for (int c = 0; c < skip.c; ++c)
                        std::copy_n(skip.plane(n, c), std::size_t(in.h) * in.w,
                                    out.plane(n, in.c + c));
                }
                return out;
            }
            case LayerKind::sigmoid: {
                Tensor<T> out = in;
                for (T& v : out.data) {
                    const double x = double(v);
                    v = T(x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                   : std::exp(x) / (1.0 + std::exp(x)));
                }
                return out;
            }
        }
        throw DispatchError("unknown layer kind");
    }

    Tensor<T> conv_forward(int i, const Tensor<T>& in) const {
        const LayerSpec& l = spec.layers[i];
        const ParamBlock<T>& p = params[i];
        const int k = l.k, pad = k / 2, H = in.h, W = in.w, IC = in.c, OC = l.out_ch;
        if (std::size_t(IC) * k * k * OC != p.w.size())
            throw StructuralError(detail::layer_tag(l, i) + ": weight size does not match input channels");
        Tensor<T> out(in.n, OC, H, W);
        for (int n = 0; n < in.n; ++n) {
            for (int oc = 0; oc < OC; ++oc) {
                T* outp = out.plane(n, oc);
                if (l.bias) {
                    const T bv = p.b[std::size_t(oc)];
                    for (std::size_t idx = 0; idx < std::size_t(H) * W; ++idx) outp[idx] = bv;
                }
                for (int ic = 0; ic < IC; ++ic) {
                    const T* inp = in.plane(n, ic);
                    const T* wbase = p.w.data() + (std::size_t(oc) * IC + ic) * k * k;
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            const T wv = wbase[dy * k + dx];
                            const int y0 = std::max(0, pad - dy), y1 = std::min(H, H + pad - dy);
                            const int x0 = std::max(0, pad - dx), x1 = std::min(W, W + pad - dx);
                            for (int y = y0; y < y1; ++y) {
                                T* orow = outp + std::size_t(y) * W;
                                const T* irow = inp + std::size_t(y + dy - pad) * W + (dx - pad);
                                for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                            }
                        }
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> bn_forward(int i, const Tensor<T>& in, bool train, bool update_running,
                         Cache* cache) {
        ParamBlock<T>& p = params[i];
        if (p.gamma.size() != std::size_t(in.c))
            throw StructuralError(detail::layer_tag(spec.layers[i], i) +
                                  ": channel count does not match parameters");
        Tensor<T> out(in.n, in.c, in.h, in.w);
        const std::size_t plane_sz = std::size_t(in.h) * in.w;
        const double m = double(in.n) * double(plane_sz);
        for (int c = 0; c < in.c; ++c) {
            double mean, var;
            if (train) {
                double sum = 0.0, sq = 0.0;
                for (int n = 0; n < in.n; ++n) {
                    const T* src = in.plane(n, c);
                    for (std::size_t idx = 0; idx < plane_sz; ++idx) {
                        sum += double(src[idx]);
                        sq += double(src[idx]) * double(src[idx]);
                    }
                }
                mean = sum / m;
                var = std::max(0.0, sq / m - mean * mean);
                if (update_running) {
                    p.run_mean[std::size_t(c)] = T(kBnMomentum * double(p.run_mean[std::size_t(c)]) +
                                                   (1.0 - kBnMomentum) * mean);
                    p.run_var[std::size_t(c)] = T(kBnMomentum * double(p.run_var[std::size_t(c)]) +
                                                  (1.0 - kBnMomentum) * var);
                }
                if (cache) {
                    cache->bn_mean[std::size_t(i)].push_back(mean);
                    cache->bn_var[std::size_t(i)].push_back(var);
                }
            } else {
                mean = double(p.run_mean[std::size_t(c)]);
                var = double(p.run_var[std::size_t(c)]);
            }
            const double invstd = 1.0 / std::sqrt(var + kBnEps);
            const double gamma = double(p.gamma[std::size_t(c)]);
            const double beta = double(p.beta[std::size_t(c)]);
            const double a = gamma * invstd;
            const double b = beta - gamma * invstd * mean;
            for (int n = 0; n < in.n; ++n) {
                const T* src = in.plane(n, c);
                T* dst = out.plane(n, c);
                for (std::size_t idx = 0; idx < plane_sz; ++idx)
                    dst[idx] = T(a * double(src[idx]) + b);
            }
        }
        return out;
    }

    Tensor<T> pool_forward(int i, const Tensor<T>& in, Cache* cache) const {
        if (in.h % 2 != 0 || in.w % 2 != 0)
            throw StructuralError(detail::layer_tag(spec.layers[i], i) +
                                  ": spatial dims must be even, got " + std::to_string(in.h) + "x" +
                                  std::to_string(in.w));
        Tensor<T> out(in.n, in.c, in.h / 2, in.w / 2);
        std::vector<int>* argmax = nullptr;
        if (cache) {
            cache->pool_argmax[std::size_t(i)].assign(out.size(), 0);
            argmax = &cache->pool_argmax[std::size_t(i)];
        }
        std::size_t oidx = 0;
        for (int n = 0; n < in.n; ++n)
            for (int c = 0; c < in.c; ++c) {
                const T* src = in.plane(n, c);
                const std::size_t base = (std::size_t(n) * in.c + c) * in.h * in.w;
                for (int y = 0; y < out.h; ++y)
                    for (int x = 0; x < out.w; ++x, ++oidx) {
                        int best = (2 * y) * in.w + 2 * x;
                        T bv = src[best];
                        const int cands[3] = {(2 * y) * in.w + 2 * x + 1,
                                              (2 * y + 1) * in.w + 2 * x,
                                              (2 * y + 1) * in.w + 2 * x + 1};
                        for (int cand : cands)
                            if (src[cand] > bv) {
                                bv = src[cand];
                                best = cand;
                            }
                        out.data[oidx] = bv;
                        if (argmax) (*argmax)[oidx] = int(base) + best;
                    }
            }
        return out;
    }

    Tensor<T> layer_backward(int l, const Tensor<T>& in, const Tensor<T>& gy, const Cache& cache,
                             ParamBlock<T>& pg, Tensor<T>& gskip) const {
        const LayerSpec& ls = spec.layers[l];
        switch (ls.kind) {
            case LayerKind::conv2d: return conv_backward(l, in, gy, pg);
            case LayerKind::batch_norm: return bn_backward(l, in, gy, cache, pg);
            case LayerKind::relu: {
                Tensor<T> gx(in.n, in.c, in.h, in.w);
                for (std::size_t i = 0; i < in.data.size(); ++i)
                    gx.data[i] = in.data[i] > T(0) ? gy.data[i] : T(0);
                return gx;
            }
            case LayerKind::max_pool2: {
                const std::vector<int>& argmax = cache.pool_argmax[std::size_t(l)];
                if (argmax.size() != gy.size()) throw UsageError("max_pool2 cache missing");
                Tensor<T> gx(in.n, in.c, in.h, in.w, T(0));
                for (std::size_t i = 0; i < gy.data.size(); ++i)
                    gx.data[std::size_t(argmax[i])] += gy.data[i];
                return gx;
            }
            case LayerKind::upsample_nearest2: {
                Tensor<T> gx(in.n, in.c, in.h, in.w, T(0));
                for (int n = 0; n < in.n; ++n)
                    for (int c = 0; c < in.c; ++c) {
                        const T* g = gy.plane(n, c);
                        T* d = gx.plane(n, c);
                        for (int y = 0; y < in.h; ++y)
                            for (int x = 0; x < in.w; ++x) {
                                const T* gblock = g + (2 * y) * gy.w + 2 * x;
                                d[y * in.w + x] =
                                    gblock[0] + gblock[1] + gblock[gy.w] + gblock[gy.w + 1];
                            }
                    }
                return gx;
            }
            case LayerKind::concat: {
                const Tensor<T>& skip = cache.outputs[std::size_t(ls.skip)];
                Tensor<T> gx(in.n, in.c, in.h, in.w);
                gskip = Tensor<T>(skip.n, skip.c, skip.h, skip.w);
                const std::size_t plane_sz = std::size_t(in.h) * in.w;
                for (int n = 0; n < in.n; ++n) {
                    for (int c = 0; c < in.c; ++c)
                        std::copy_n(gy.plane(n, c), plane_sz, gx.plane(n, c));
                    for (int c = 0; c < skip.c; ++c)
                        std::copy_n(gy.plane(n, in.c + c), plane_sz, gskip.plane(n, c));
                }
                return gx;
            }
            case LayerKind::sigmoid: {
                const Tensor<T>& y = cache.outputs[std::size_t(l)];
                Tensor<T> gx(in.n, in.c, in.h, in.w);
                for (std::size_t i = 0; i < in.data.size(); ++i)
                    gx.data[i] = T(double(gy.data[i]) * double(y.data[i]) * (1.0 - double(y.data[i])));
                return gx;
            }
        }
        throw DispatchError("unknown layer kind");
    }

    Tensor<T> conv_backward(int l, const Tensor<T>& in, const Tensor<T>& gy,
                            ParamBlock<T>& pg) const {
        const LayerSpec& ls = spec.layers[l];
        const ParamBlock<T>& p = params[l];
        const int k = ls.k, pad = k / 2, H = in.h, W = in.w, IC = in.c, OC = ls.out_ch;
        Tensor<T> gx(in.n, IC, H, W, T(0));
        std::vector<double> gw(p.w.size(), 0.0);
        std::vector<double> gb(p.b.size(), 0.0);
        for (int n = 0; n < in.n; ++n) {
            for (int oc = 0; oc < OC; ++oc) {
                const T* gyp = gy.plane(n, oc);
                if (ls.bias) {
                    double acc = 0.0;
                    for (std::size_t idx = 0; idx < std::size_t(H) * W; ++idx)
                        acc += double(gyp[idx]);
                    gb[std::size_t(oc)] += acc;
                }
                for (int ic = 0; ic < IC; ++ic) {
                    const T* inp = in.plane(n, ic);
                    T* gxp = gx.plane(n, ic);
                    const T* wbase = p.w.data() + (std::size_t(oc) * IC + ic) * k * k;
                    double* gwbase = gw.data() + (std::size_t(oc) * IC + ic) * k * k;
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            const T wv = wbase[dy * k + dx];
                            const int y0 = std::max(0, pad - dy), y1 = std::min(H, H + pad - dy);
                            const int x0 = std::max(0, pad - dx), x1 = std::min(W, W + pad - dx);
                            double wacc = 0.0;
                            for (int y = y0; y < y1; ++y) {
                                const T* grow = gyp + std::size_t(y) * W;
                                const T* irow = inp + std::size_t(y + dy - pad) * W + (dx - pad);
                                T* gxrow = gxp + std::size_t(y + dy - pad) * W + (dx - pad);
                                T dot = T(0);
                                for (int x = x0; x < x1; ++x) {
                                    gxrow[x] += wv * grow[x];
                                    dot += grow[x] * irow[x];
                                }
                                wacc += double(dot);
                            }
                            gwbase[dy * k + dx] += wacc;
                        }
                    }
                }
            }
        }
        pg.w.assign(p.w.size(), T(0));
        for (std::size_t i = 0; i < gw.size(); ++i) pg.w[i] = T(gw[i]);
        if (ls.bias) {
            pg.b.assign(p.b.size(), T(0));
            for (std::size_t i = 0; i < gb.size(); ++i) pg.b[i] = T(gb[i]);
        }
        return gx;
    }

    Tensor<T> bn_backward(int l, const Tensor<T>& in, const Tensor<T>& gy, const Cache& cache,
                          ParamBlock<T>& pg) const {
        const ParamBlock<T>& p = params[l];
        const auto& means = cache.bn_mean[std::size_t(l)];
        const auto& vars = cache.bn_var[std::size_t(l)];
        if (means.size() != std::size_t(in.c)) throw UsageError("batch_norm cache missing");
        Tensor<T> gx(in.n, in.c, in.h, in.w);
        const std::size_t plane_sz = std::size_t(in.h) * in.w;
        const double m = double(in.n) * double(plane_sz);
        for (int c = 0; c < in.c; ++c) {
            const double mean = means[std::size_t(c)];
            const double invstd = 1.0 / std::sqrt(vars[std::size_t(c)] + kBnEps);
            const double gamma = double(p.gamma[std::size_t(c)]);
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int n = 0; n < in.n; ++n) {
                const T* src = in.plane(n, c);
                const T* g = gy.plane(n, c);
                for (std::size_t idx = 0; idx < plane_sz; ++idx) {
                    const double xhat = (double(src[idx]) - mean) * invstd;
                    sum_gy += double(g[idx]);
                    sum_gy_xhat += double(g[idx]) * xhat;
                }
            }
            pg.gamma[std::size_t(c)] = T(sum_gy_xhat);
            pg.beta[std::size_t(c)] = T(sum_gy);
            const double mean_gy = sum_gy / m;
            const double mean_gy_xhat = sum_gy_xhat / m;
            for (int n = 0; n < in.n; ++n) {
                const T* src = in.plane(n, c);
                const T* g = gy.plane(n, c);
                T* d = gx.plane(n, c);
                for (std::size_t idx = 0; idx < plane_sz; ++idx) {
                    const double xhat = (double(src[idx]) - mean) * invstd;
                    d[idx] = T(gamma * invstd * (double(g[idx]) - mean_gy - xhat * mean_gy_xhat));
                }
            }
        }
        return gx;
    }
};

/// Trainable parameter vectors in a fixed order (conv w/b, bn gamma/beta).
template <typename T>
std::vector<std::vector<T>*> trainable_params(Network<T>& net) {
    std::vector<std::vector<T>*> out;
    for (auto& p : net.params) {
        if (!p.w.empty()) out.push_back(&p.w);
        if (!p.b.empty()) out.push_back(&p.b);
        if (!p.gamma.empty()) out.push_back(&p.gamma);
        if (!p.beta.empty()) out.push_back(&p.beta);
    }
    return out;
}

template <typename T>
std::vector<const std::vector<T>*> trainable_grads(const typename Network<T>::Gradients& g) {
    std::vector<const std::vector<T>*> out;
    for (const auto& p : g.params) {
        if (!p.w.empty()) out.push_back(&p.w);
        if (!p.b.empty()) out.push_back(&p.b);
        if (!p.gamma.empty()) out.push_back(&p.gamma);
        if (!p.beta.empty()) out.push_back(&p.beta);
    }
    return out;
}

} // namespace sarloc
