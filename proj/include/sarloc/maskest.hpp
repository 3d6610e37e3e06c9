#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/rng.hpp"
#include "sarloc/tensornet/adam.hpp"
#include "sarloc/tensornet/losses.hpp"
#include "sarloc/tensornet/net.hpp"
#include "sarloc/tensornet/serialize.hpp"

namespace sarloc {

struct PatchObservation {
    std::vector<double> vector; // flattened side*side patch
    int patch_row = 0;
    int patch_col = 0;
};

struct PatchifyResult {
    std::vector<PatchObservation> obs;
    int rows = 0, cols = 0;   // patch grid dims
    int off_r = 0, off_c = 0; // center-crop offset into the fingerprint
    int side = 8;
    int fp_h = 0, fp_w = 0;
};

/// Center-crops the fingerprint to multiples of `side` and cuts it into
/// non-overlapping patches, row-major.
inline PatchifyResult patchify(const Fingerprint& fp, int side = 8) {
    if (side < 1) throw SizingError("patch side must be >= 1");
    if (fp.height() < side || fp.width() < side)
        throw SizingError("fingerprint smaller than patch side");
    PatchifyResult r;
    r.side = side;
    r.fp_h = fp.height();
    r.fp_w = fp.width();
    r.rows = fp.height() / side;
    r.cols = fp.width() / side;
    r.off_r = (fp.height() - r.rows * side) / 2;
    r.off_c = (fp.width() - r.cols * side) / 2;
    r.obs.reserve(std::size_t(r.rows) * r.cols);
    for (int pr = 0; pr < r.rows; ++pr)
        for (int pc = 0; pc < r.cols; ++pc) {
            PatchObservation o;
            o.patch_row = pr;
            o.patch_col = pc;
            o.vector.resize(std::size_t(side) * side);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    o.vector[std::size_t(y) * side + x] =
                        double(fp.values.at(r.off_r + pr * side + y, r.off_c + pc * side + x));
            r.obs.push_back(std::move(o));
        }
    return r;
}

struct Clustering {
    int C = 0;
    std::vector<int> assignments;                // per observation, 0-based
    std::vector<std::vector<double>> centroids;  // kmeans centroids / gmm means
    std::vector<std::vector<double>> variances;  // gmm diagonal covariances
    std::vector<double> weights;                 // gmm mixing weights
    std::vector<double> objective_trace;         // kmeans: WCSS; gmm: log-likelihood
};

namespace detail {

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline Clustering kmeans_single(const std::vector<PatchObservation>& obs, int C, Rng& rng,
                                int max_iters) {
    const std::size_t N = obs.size();
    const std::size_t D = obs[0].vector.size();
    Clustering cl;
    cl.C = C;
    cl.centroids.assign(std::size_t(C), std::vector<double>(D, 0.0));

    // k-means++ seeding
    std::vector<double> mind(N, std::numeric_limits<double>::infinity());
    cl.centroids[0] = obs[rng.uniform_int(0, std::int64_t(N) - 1)].vector;
    for (int c = 1; c < C; ++c) {
        double total = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            mind[n] = std::min(mind[n], sqdist(obs[n].vector, cl.centroids[std::size_t(c) - 1]));
            total += mind[n];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = std::size_t(rng.uniform_int(0, std::int64_t(N) - 1));
        } else {
            const double target = rng.unit() * total;
            double run = 0.0;
            pick = N - 1;
            for (std::size_t n = 0; n < N; ++n) {
                run += mind[n];
                if (run >= target) {
                    pick = n;
                    break;
                }
            }
        }
        cl.centroids[std::size_t(c)] = obs[pick].vector;
    }

    cl.assignments.assign(N, -1);
    std::vector<double> d_own(N, 0.0);
    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment (ties to the lowest cluster id)
        bool changed = false;
        for (std::size_t n = 0; n < N; ++n) {
            int best = 0;
            double bd = sqdist(obs[n].vector, cl.centroids[0]);
            for (int c = 1; c < C; ++c) {
                const double d = sqdist(obs[n].vector, cl.centroids[std::size_t(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (cl.assignments[n] != best) changed = true;
            cl.assignments[n] = best;
            d_own[n] = bd;
        }
        // repopulate empty clusters with the farthest observations
        std::vector<int> counts(std::size_t(C), 0);
        for (int a : cl.assignments) ++counts[std::size_t(a)];
        for (int c = 0; c < C; ++c) {
            if (counts[std::size_t(c)] > 0) continue;
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t n = 0; n < N; ++n) {
                if (counts[std::size_t(cl.assignments[n])] <= 1) continue; // keep clusters alive
                if (d_own[n] > fd) {
                    fd = d_own[n];
                    far = n;
                }
            }
            --counts[std::size_t(cl.assignments[far])];
            cl.assignments[far] = c;
            counts[std::size_t(c)] = 1;
            cl.centroids[std::size_t(c)] = obs[far].vector;
            d_own[far] = 0.0;
            changed = true;
        }
        // mean update
        for (auto& cen : cl.centroids) std::fill(cen.begin(), cen.end(), 0.0);
        for (std::size_t n = 0; n < N; ++n) {
            auto& cen = cl.centroids[std::size_t(cl.assignments[n])];
            for (std::size_t k = 0; k < D; ++k) cen[k] += obs[n].vector[k];
        }
        for (int c = 0; c < C; ++c)
            for (std::size_t k = 0; k < D; ++k)
                cl.centroids[std::size_t(c)][k] /= double(counts[std::size_t(c)]);

        double wcss = 0.0;
        for (std::size_t n = 0; n < N; ++n)
            wcss += sqdist(obs[n].vector, cl.centroids[std::size_t(cl.assignments[n])]);
        cl.objective_trace.push_back(wcss);
        if (!changed) break;
    }
    return cl;
}

} // namespace detail

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint (<= 300),
/// best of 5 restarts by within-cluster sum of squares.
inline Clustering kmeans(const std::vector<PatchObservation>& obs, int C, std::uint64_t seed,
                         int restarts = 5, int max_iters = 300) {
    if (C < 1) throw ValidationError("cluster count must be >= 1");
    if (obs.size() < std::size_t(C))
        throw CapacityError("kmeans needs >= " + std::to_string(C) + " observations, got " +
                            std::to_string(obs.size()));
    Clustering best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(seed, std::uint64_t(r)));
        Clustering cl = detail::kmeans_single(obs, C, rng, max_iters);
        const double obj = cl.objective_trace.back();
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(cl);
        }
    }
    return best;
}

/// Diagonal-covariance Gaussian mixture fit by EM, initialized from kmeans.
/// Stops when the log-likelihood gain drops below 1e-6 per observation or
/// after 200 iterations. Hard assignments take the maximum responsibility.
inline Clustering gmm_em(const std::vector<PatchObservation>& obs, int C, std::uint64_t seed,
                         int max_iters = 200, double var_floor = 1e-6) {
    if (obs.size() < std::size_t(C))
        throw CapacityError("gmm needs >= " + std::to_string(C) + " observations, got " +
                            std::to_string(obs.size()));
    const std::size_t N = obs.size();
    const std::size_t D = obs[0].vector.size();

    Clustering cl = kmeans(obs, C, derive_seed(seed, 0x313));
    cl.objective_trace.clear();
    cl.variances.assign(std::size_t(C), std::vector<double>(D, var_floor));
    cl.weights.assign(std::size_t(C), 0.0);
    {
        std::vector<int> counts(std::size_t(C), 0);
        for (int a : cl.assignments) ++counts[std::size_t(a)];
        for (int c = 0; c < C; ++c) cl.weights[std::size_t(c)] = double(counts[std::size_t(c)]) / double(N);
        std::vector<std::vector<double>> sq(std::size_t(C), std::vector<double>(D, 0.0));
        for (std::size_t n = 0; n < N; ++n) {
            const int a = cl.assignments[n];
            for (std::size_t k = 0; k < D; ++k) {
                const double d = obs[n].vector[k] - cl.centroids[std::size_t(a)][k];
                sq[std::size_t(a)][k] += d * d;
            }
        }
        for (int c = 0; c < C; ++c)
            for (std::size_t k = 0; k < D; ++k)
                cl.variances[std::size_t(c)][k] =
                    std::max(var_floor, sq[std::size_t(c)][k] / double(std::max(1, counts[std::size_t(c)])));
    }

    std::vector<double> logresp(N * std::size_t(C));
    double prev_ll = -std::numeric_limits<double>::infinity();
    constexpr double kLog2Pi = 1.8378770664093453;
    for (int iter = 0; iter < max_iters; ++iter) {
        // E-step
        double ll = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) {
                double lp = cl.weights[std::size_t(c)] > 0.0
                                ? std::log(cl.weights[std::size_t(c)])
                                : -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < D; ++k) {
                    const double v = cl.variances[std::size_t(c)][k];
                    const double d = obs[n].vector[k] - cl.centroids[std::size_t(c)][k];
                    lp += -0.5 * (kLog2Pi + std::log(v) + d * d / v);
                }
                logresp[n * std::size_t(C) + std::size_t(c)] = lp;
                mx = std::max(mx, lp);
            }
            double z = 0.0;
            for (int c = 0; c < C; ++c)
                z += std::exp(logresp[n * std::size_t(C) + std::size_t(c)] - mx);
            const double logz = mx + std::log(z);
            ll += logz;
            for (int c = 0; c < C; ++c)
                logresp[n * std::size_t(C) + std::size_t(c)] =
                    std::exp(logresp[n * std::size_t(C) + std::size_t(c)] - logz);
        }
        cl.objective_trace.push_back(ll);
        if (ll - prev_ll < 1e-6 * double(N) && iter > 0) break;
        prev_ll = ll;

        // M-step (responsibilities now stored in logresp)
        for (int c = 0; c < C; ++c) {
            double rsum = 0.0;
            for (std::size_t n = 0; n < N; ++n) rsum += logresp[n * std::size_t(C) + std::size_t(c)];
            if (rsum < 1e-12) continue; // starved component keeps its parameters
            std::vector<double> mu(D, 0.0);
            for (std::size_t n = 0; n < N; ++n) {
                const double r = logresp[n * std::size_t(C) + std::size_t(c)];
                for (std::size_t k = 0; k < D; ++k) mu[k] += r * obs[n].vector[k];
            }
            for (std::size_t k = 0; k < D; ++k) mu[k] /= rsum;
            std::vector<double> var(D, 0.0);
            for (std::size_t n = 0; n < N; ++n) {
                const double r = logresp[n * std::size_t(C) + std::size_t(c)];
                for (std::size_t k = 0; k < D; ++k) {
                    const double d = obs[n].vector[k] - mu[k];
                    var[k] += r * d * d;
                }
            }
            for (std::size_t k = 0; k < D; ++k)
                cl.variances[std::size_t(c)][k] = std::max(var_floor, var[k] / rsum);
            cl.centroids[std::size_t(c)] = std::move(mu);
            cl.weights[std::size_t(c)] = rsum / double(N);
        }
        double wsum = 0.0;
        for (double w : cl.weights) wsum += w;
        for (double& w : cl.weights) w /= wsum;
    }

    for (std::size_t n = 0; n < N; ++n) {
        int best = 0;
        double br = logresp[n * std::size_t(C)];
        for (int c = 1; c < C; ++c)
            if (logresp[n * std::size_t(C) + std::size_t(c)] > br) {
                br = logresp[n * std::size_t(C) + std::size_t(c)];
                best = c;
            }
        cl.assignments[n] = best;
    }
    return cl;
}

/// Picks the cluster whose member pixels have the smallest mean of row- and
/// column-coordinate population variances. Ties go to the lowest id.
inline int select_compact_cluster(const PatchifyResult& pf, const Clustering& cl) {
    const int C = cl.C;
    std::vector<double> cnt(std::size_t(C), 0.0), sr(std::size_t(C), 0.0), sr2(std::size_t(C), 0.0),
        sc(std::size_t(C), 0.0), sc2(std::size_t(C), 0.0);
    const int s = pf.side;
    // per-patch coordinate sums in closed form
    const double per_lin = double(s) * (s - 1) / 2.0;            // sum of 0..s-1
    const double per_sq = double(s - 1) * s * (2.0 * s - 1) / 6.0; // sum of squares
    for (std::size_t n = 0; n < pf.obs.size(); ++n) {
        const int c = cl.assignments[n];
        const double a = pf.off_r + double(pf.obs[n].patch_row) * s; // first pixel row
        const double b = pf.off_c + double(pf.obs[n].patch_col) * s;
        const double px = double(s) * s; // pixels per patch, s per coordinate line
        cnt[std::size_t(c)] += px;
        // row coordinate appears s times (once per column)
        sr[std::size_t(c)] += s * (s * a + per_lin);
        sr2[std::size_t(c)] += s * (s * a * a + 2.0 * a * per_lin + per_sq);
        sc[std::size_t(c)] += s * (s * b + per_lin);
        sc2[std::size_t(c)] += s * (s * b * b + 2.0 * b * per_lin + per_sq);
    }
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
        if (cnt[std::size_t(c)] == 0.0) continue;
        const double n = cnt[std::size_t(c)];
        const double var_r = sr2[std::size_t(c)] / n - (sr[std::size_t(c)] / n) * (sr[std::size_t(c)] / n);
        const double var_c = sc2[std::size_t(c)] / n - (sc[std::size_t(c)] / n) * (sc[std::size_t(c)] / n);
        const double score = 0.5 * (var_r + var_c);
        if (score < best_score) {
            best_score = score;
            best = c;
        }
    }
    if (best < 0) throw InternalError("all clusters are empty");
    return best;
}

/// Marks the selected cluster's patch pixels 1; everything else, including
/// the crop margins, stays 0.
inline TamperMask cluster_to_mask(const PatchifyResult& pf, const Clustering& cl, int chosen) {
    if (chosen < 0 || chosen >= cl.C) throw UsageError("cluster id out of range");
    TamperMask m;
    m.bits = Grid<std::uint8_t>(pf.fp_h, pf.fp_w, 0);
    for (std::size_t n = 0; n < pf.obs.size(); ++n) {
        if (cl.assignments[n] != chosen) continue;
        const int r0 = pf.off_r + pf.obs[n].patch_row * pf.side;
        const int c0 = pf.off_c + pf.obs[n].patch_col * pf.side;
        for (int y = 0; y < pf.side; ++y)
            for (int x = 0; x < pf.side; ++x) m.bits.at(r0 + y, c0 + x) = 1;
    }
    return m;
}

/// Clustering route end to end: patchify, cluster, pick the compact cluster,
/// paint the mask.
inline TamperMask estimate_mask_clustering(const Fingerprint& fp, const std::string& method,
                                           int C, std::uint64_t seed) {
    const PatchifyResult pf = patchify(fp);
    Clustering cl;
    if (method == "kmeans")
        cl = kmeans(pf.obs, C, seed);
    else if (method == "gmm")
        cl = gmm_em(pf.obs, C, seed);
    else
        throw DispatchError("unknown clustering method '" + method + "'");
    return cluster_to_mask(pf, cl, select_compact_cluster(pf, cl));
}

// ---------------------------------------------------------------------------
// U-Net route

/// Encoder-decoder with 3 pooling levels, base width 16, skip concatenations
/// and a sigmoid head. Output shape equals input shape for dims divisible by 8.
inline NetworkSpec make_unet_spec(int in_channels = 1, int base = 16) {
    NetworkSpec s;
    s.in_channels = in_channels;
    auto block = [&s](int ch) {
        s.layers.push_back(LayerSpec::conv(ch, 3, false));
        s.layers.push_back(LayerSpec::bn());
        s.layers.push_back(LayerSpec::act_relu());
        s.layers.push_back(LayerSpec::conv(ch, 3, false));
        s.layers.push_back(LayerSpec::bn());
        s.layers.push_back(LayerSpec::act_relu());
        return int(s.layers.size()) - 1; // index of the block's last layer
    };
    const int skip0 = block(base);
    s.layers.push_back(LayerSpec::pool());
    const int skip1 = block(base * 2);
    s.layers.push_back(LayerSpec::pool());
    const int skip2 = block(base * 4);
    s.layers.push_back(LayerSpec::pool());
    block(base * 8);
    s.layers.push_back(LayerSpec::upsample());
    s.layers.push_back(LayerSpec::cat(skip2));
    block(base * 4);
    s.layers.push_back(LayerSpec::upsample());
    s.layers.push_back(LayerSpec::cat(skip1));
    block(base * 2);
    s.layers.push_back(LayerSpec::upsample());
    s.layers.push_back(LayerSpec::cat(skip0));
    block(base);
    s.layers.push_back(LayerSpec::conv(1, 1));
    s.layers.push_back(LayerSpec::act_sigmoid());
    return s;
}

struct MaskEstimate {
    TamperMask mask;
    Grid<float> probability;
};

/// Reflect-pads the fingerprint up to dims divisible by 8, runs the U-Net in
/// eval mode, crops back, and thresholds at tau (>= tau maps to 1).
inline MaskEstimate unet_estimate(Network<float>& model, const Fingerprint& fp, double tau = 0.5) {
    if (model.spec.layers.empty()) throw ModelError("segmentation model has no layers");
    if (tau < 0.0 || tau > 1.0) throw ValidationError("tau must lie in [0,1]");
    const int H = fp.height(), W = fp.width();
    const int ph = (8 - H % 8) % 8;
    const int pw = (8 - W % 8) % 8;
    const int top = ph / 2, left = pw / 2;
    Tensor<float> x(1, 1, H + ph, W + pw);
    for (int y = 0; y < H + ph; ++y)
        for (int xx = 0; xx < W + pw; ++xx)
            x.at(0, 0, y, xx) =
                fp.values.at(reflect_index(y - top, H), reflect_index(xx - left, W));
    Tensor<float> y = model.forward(x, false);
    if (y.c != 1 || y.h != H + ph || y.w != W + pw)
        throw ModelError("segmentation output shape does not match the input");
    MaskEstimate out;
    out.probability = Grid<float>(H, W);
    out.mask.bits = Grid<std::uint8_t>(H, W, 0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const float p = y.at(0, 0, r + top, c + left);
            out.probability.at(r, c) = p;
            out.mask.bits.at(r, c) = double(p) >= tau ? 1 : 0;
        }
    return out;
}

/// Reduces lr by `factor` whenever `patience` consecutive observations fail
/// to improve on the best seen value.
struct PlateauTracker {
    int patience = 10;
    double factor = 0.1;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    double observe(double val, double lr) {
        if (val < best) {
            best = val;
            since_best = 0;
            return lr;
        }
        if (++since_best >= patience) {
            since_best = 0;
            return lr * factor;
        }
        return lr;
    }
};

struct EarlyStopper {
    int patience = 30;
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;

    bool observe(double val, int epoch) {
        if (val < best) {
            best = val;
            best_epoch = epoch;
            since_best = 0;
            return false;
        }
        return ++since_best >= patience;
    }
};

struct UnetTrainConfig {
    int base = 16;
    double lr = 1e-4;
    int max_epochs = 200;
    int batch = 4;
    int plateau_patience = 10;
    double plateau_factor = 0.1;
    int early_stop_patience = 30;
    std::uint64_t seed = 0;
};

struct UnetLogRow {
    int epoch = 0;
    double train_mean = 0.0;
    double val = 0.0;
    double lr = 0.0;
};

struct TrainedUnet {
    Network<float> net;
    std::vector<UnetLogRow> log;
    int best_epoch = -1;
    double best_val = 0.0;
};

/// Supervised training on (fingerprint, truth mask) pairs with the Dice+Focal
/// objective; first half of the pairs train, second half validate.
inline TrainedUnet train_unet(const std::vector<Fingerprint>& fps,
                              const std::vector<TamperMask>& masks, const UnetTrainConfig& cfg) {
    if (fps.size() != masks.size())
        throw ConfigError("fingerprint and mask counts differ");
    if (fps.size() < 2) throw ConfigError("need >= 2 pairs for a train/val split");
    const int H = fps[0].height(), W = fps[0].width();
    if (H % 8 != 0 || W % 8 != 0)
        throw SizingError("training fingerprints must have dims divisible by 8");
    for (std::size_t i = 0; i < fps.size(); ++i) {
        if (fps[i].height() != H || fps[i].width() != W)
            throw SizingError("training fingerprints must share dimensions");
        if (masks[i].height() != H || masks[i].width() != W)
            throw SizingError("mask dims must match fingerprint dims");
    }
    const std::size_t n_train = fps.size() / 2;
    if (n_train == 0 || n_train == fps.size()) throw ConfigError("a split is empty");

    TrainedUnet out;
    out.net = Network<float>::make(make_unet_spec(1, cfg.base), derive_seed(cfg.seed, 0x03e7));
    AdamState adam;
    adam.lr = cfg.lr;
    PlateauTracker plateau{cfg.plateau_patience, cfg.plateau_factor};
    EarlyStopper stopper{cfg.early_stop_patience};
    Network<float> best = out.net;

    std::vector<std::size_t> train_idx(n_train);
    for (std::size_t i = 0; i < n_train; ++i) train_idx[i] = i;

    auto to_batch = [&](const std::vector<std::size_t>& ids, std::size_t from, std::size_t count) {
        Tensor<float> x(int(count), 1, H, W);
        std::vector<TamperMask> t;
        for (std::size_t k = 0; k < count; ++k) {
            const auto& g = fps[ids[from + k]].values;
            std::copy(g.data.begin(), g.data.end(), x.plane(int(k), 0));
            t.push_back(masks[ids[from + k]]);
        }
        return std::make_pair(std::move(x), std::move(t));
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0x5e9 + std::uint64_t(epoch)));
        rng.shuffle(train_idx.begin(), train_idx.end());
        double train_sum = 0.0;
        int train_batches = 0;
        for (std::size_t from = 0; from < n_train; from += std::size_t(cfg.batch)) {
            const std::size_t count = std::min(std::size_t(cfg.batch), n_train - from);
            auto [x, t] = to_batch(train_idx, from, count);
            typename Network<float>::Cache cache;
            Tensor<float> pred = out.net.forward(x, true, &cache);
            DiceFocalResult<float> loss = dice_focal_loss(pred, t);
            train_sum += loss.loss;
            ++train_batches;
            auto grads = out.net.backward(cache, loss.grad);
            auto params = trainable_params(out.net);
            auto gptrs = trainable_grads<float>(grads);
            adam_step(adam, params, gptrs);
        }

        double val_sum = 0.0;
        int val_batches = 0;
        std::vector<std::size_t> val_idx;
        for (std::size_t i = n_train; i < fps.size(); ++i) val_idx.push_back(i);
        for (std::size_t from = 0; from < val_idx.size(); from += std::size_t(cfg.batch)) {
            const std::size_t count = std::min(std::size_t(cfg.batch), val_idx.size() - from);
            auto [x, t] = to_batch(val_idx, from, count);
            Tensor<float> pred = out.net.forward(x, false);
            val_sum += dice_focal_loss(pred, t).loss;
            ++val_batches;
        }
        const double val = val_sum / double(val_batches);

        UnetLogRow row;
        row.epoch = epoch;
        row.train_mean = train_sum / double(train_batches);
        row.val = val;
        row.lr = adam.lr;
        out.log.push_back(row);

        if (val < stopper.best) best = out.net;
        adam.lr = plateau.observe(val, adam.lr);
        if (stopper.observe(val, epoch)) break;
    }
    out.net = std::move(best);
    out.best_epoch = stopper.best_epoch;
    out.best_val = stopper.best;
    return out;
}

} // namespace sarloc
