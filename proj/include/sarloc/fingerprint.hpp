#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/grid.hpp"
#include "sarloc/interp.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/rng.hpp"
#include "sarloc/splicer.hpp"
#include "sarloc/tensornet/adam.hpp"
#include "sarloc/tensornet/losses.hpp"
#include "sarloc/tensornet/net.hpp"
#include "sarloc/tensornet/serialize.hpp"

namespace sarloc {

enum class LabelMode { be, sae, asae };

inline const char* label_mode_name(LabelMode m) {
    switch (m) {
        case LabelMode::be: return "be";
        case LabelMode::sae: return "sae";
        case LabelMode::asae: return "asae";
    }
    throw DispatchError("unknown label mode");
}

inline LabelMode label_mode_from_name(const std::string& s) {
    if (s == "be") return LabelMode::be;
    if (s == "sae") return LabelMode::sae;
    if (s == "asae") return LabelMode::asae;
    throw DispatchError("unknown label mode '" + s + "'");
}

struct ExtractorConfig {
    int depth = 17; // conv layer count
    int width = 64;
    int patch = 48;
    int batch_products = 4;
    int tiles_per_product = 10;
    int patches_per_tile = 6;
    LabelMode mode = LabelMode::sae;
    double lr = 1e-4;
    int max_epochs = 500;
    int iters_per_epoch = 128;
    int early_stop_patience = 30;
    int position_grid = 4; // BE position buckets: grid x grid cells per tile
    std::uint64_t seed = 0;

    int batch_size() const { return batch_products * tiles_per_product * patches_per_tile; }

    // small model that trains in minutes on one CPU core
    static ExtractorConfig desk() {
        ExtractorConfig c;
        c.depth = 5;
        c.width = 16;
        c.batch_products = 2;
        c.tiles_per_product = 4;
        c.patches_per_tile = 6;
        c.max_epochs = 120;
        c.iters_per_epoch = 16;
        c.early_stop_patience = 10;
        return c;
    }
};

inline void validate_extractor_config(const ExtractorConfig& c) {
    if (c.depth < 2) throw ConfigError("extractor depth must be >= 2");
    if (c.width < 1) throw ConfigError("extractor width must be >= 1");
    if (c.patch < 8) throw ConfigError("patch side must be >= 8");
    if (c.batch_products < 2) throw ConfigError("need >= 2 products per batch for negatives");
    if (c.tiles_per_product < 1 || c.patches_per_tile < 1)
        throw ConfigError("tiles_per_product and patches_per_tile must be >= 1");
    if (c.position_grid < 1) throw ConfigError("position_grid must be >= 1");
}

/// Fully convolutional extractor: conv-relu, (depth-2) conv-bn-relu blocks,
/// and a final conv whose small init keeps initial pairwise distances in the
/// softmax's responsive range.
inline NetworkSpec make_extractor_spec(int depth, int width) {
    if (depth < 2) throw ConfigError("extractor depth must be >= 2");
    NetworkSpec s;
    s.in_channels = 1;
    s.layers.push_back(LayerSpec::conv(width, 3));
    s.layers.push_back(LayerSpec::act_relu());
    for (int i = 0; i < depth - 2; ++i) {
        s.layers.push_back(LayerSpec::conv(width, 3, false));
        s.layers.push_back(LayerSpec::bn());
        s.layers.push_back(LayerSpec::act_relu());
    }
    s.layers.push_back(LayerSpec::conv(1, 3, true, 0.1));
    return s;
}

struct PatchSample {
    Grid<float> pixels;
    std::string product_id;
    int grid_cell = 0;
};

/// Per-product pools of normalized tiles the trainer samples patches from.
struct PatchPool {
    std::vector<std::string> product_ids;
    std::vector<std::vector<Grid<float>>> tiles; // pixels in [0,1]
};

inline PatchPool load_fed_pool(const DatasetManifest& fed,
                               const std::filesystem::path& manifest_dir) {
    PatchPool pool;
    for (const auto& rel : fed.pristine_tiles) {
        const Tile t = load_tile(manifest_dir / rel);
        auto it = std::find(pool.product_ids.begin(), pool.product_ids.end(), t.product_id);
        std::size_t idx;
        if (it == pool.product_ids.end()) {
            pool.product_ids.push_back(t.product_id);
            pool.tiles.emplace_back();
            idx = pool.product_ids.size() - 1;
        } else {
            idx = std::size_t(it - pool.product_ids.begin());
        }
        pool.tiles[idx].push_back(normalize(t).pixels);
    }
    return pool;
}

/// Resizes every tile by `factor` (bilinear), random-crops back to the source
/// dims, and files the result under a fresh product id. Doubles the pool.
inline PatchPool augment_pool(const PatchPool& pool, double factor, Rng& rng) {
    if (!(factor > 1.0)) throw ValidationError("augmentation factor must be > 1");
    PatchPool out = pool;
    for (std::size_t p = 0; p < pool.product_ids.size(); ++p) {
        std::vector<Grid<float>> resized_tiles;
        for (const auto& tile : pool.tiles[p]) {
            Grid<float> big = resize(tile, factor, Kernel::bilinear);
            const int r0 = int(rng.uniform_int(0, big.height - tile.height));
            const int c0 = int(rng.uniform_int(0, big.width - tile.width));
            resized_tiles.push_back(crop(big, r0, c0, tile.height, tile.width));
        }
        out.product_ids.push_back(pool.product_ids[p] + "+rs");
        out.tiles.push_back(std::move(resized_tiles));
    }
    return out;
}

struct Minibatch {
    Tensor<float> x; // [B, 1, patch, patch]
    Grid<std::uint8_t> labels;
    std::vector<PatchSample> samples;
};

inline int position_cell(int r0, int c0, int patch, int tile_h, int tile_w, int grid) {
    const double cy = r0 + (patch - 1) / 2.0;
    const double cx = c0 + (patch - 1) / 2.0;
    int row = std::min(grid - 1, int(cy * grid / tile_h));
    int col = std::min(grid - 1, int(cx * grid / tile_w));
    return row * grid + col;
}

/// Assembles one labeled minibatch. product_pick selects which pool products
/// participate; empty means a random distinct draw.
inline Minibatch build_minibatch(const PatchPool& pool, const ExtractorConfig& cfg, Rng& rng,
                                 std::vector<std::size_t> product_pick = {}) {
    validate_extractor_config(cfg);
    if (pool.product_ids.size() < std::size_t(cfg.batch_products))
        throw CapacityError("pool has " + std::to_string(pool.product_ids.size()) +
                            " products, batch needs " + std::to_string(cfg.batch_products));
    if (product_pick.empty()) {
        std::vector<std::size_t> order(pool.product_ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        product_pick.assign(order.begin(), order.begin() + cfg.batch_products);
    }
    if (int(product_pick.size()) != cfg.batch_products)
        throw UsageError("product_pick size must equal batch_products");

    Minibatch mb;
    const int B = cfg.batch_size();
    mb.x = Tensor<float>(B, 1, cfg.patch, cfg.patch);
    mb.samples.reserve(std::size_t(B));
    int bi = 0;
    for (std::size_t pi : product_pick) {
        const auto& tiles = pool.tiles.at(pi);
        if (tiles.empty()) throw CapacityError("product '" + pool.product_ids[pi] + "' has no tiles");
        // tiles without replacement while they last
        std::vector<std::size_t> tile_order(tiles.size());
        for (std::size_t i = 0; i < tile_order.size(); ++i) tile_order[i] = i;
        rng.shuffle(tile_order.begin(), tile_order.end());
        for (int ti = 0; ti < cfg.tiles_per_product; ++ti) {
            const Grid<float>& tile = tiles[tile_order[std::size_t(ti) % tile_order.size()]];
            if (tile.height < cfg.patch || tile.width < cfg.patch)
                throw SizingError("tile smaller than patch side");
            // distinct top-left corners within the tile
            std::vector<std::pair<int, int>> used;
            for (int k = 0; k < cfg.patches_per_tile; ++k) {
                int r0 = 0, c0 = 0;
                for (int attempt = 0; attempt < 64; ++attempt) {
                    r0 = int(rng.uniform_int(0, tile.height - cfg.patch));
                    c0 = int(rng.uniform_int(0, tile.width - cfg.patch));
                    if (std::find(used.begin(), used.end(), std::make_pair(r0, c0)) == used.end())
                        break;
                }
                used.emplace_back(r0, c0);
                PatchSample s;
                s.pixels = crop(tile, r0, c0, cfg.patch, cfg.patch);
                s.product_id = pool.product_ids[pi];
                s.grid_cell =
                    position_cell(r0, c0, cfg.patch, tile.height, tile.width, cfg.position_grid);
                float* dst = mb.x.plane(bi, 0);
                std::copy(s.pixels.data.begin(), s.pixels.data.end(), dst);
                mb.samples.push_back(std::move(s));
                ++bi;
            }
        }
    }

    mb.labels = Grid<std::uint8_t>(B, B, 0);
    for (int i = 0; i < B; ++i) {
        for (int j = i + 1; j < B; ++j) {
            const PatchSample& a = mb.samples[std::size_t(i)];
            const PatchSample& b = mb.samples[std::size_t(j)];
            bool positive = a.product_id == b.product_id;
            if (cfg.mode == LabelMode::be) positive = positive && a.grid_cell == b.grid_cell;
            mb.labels.at(i, j) = positive ? 1 : 0;
            mb.labels.at(j, i) = mb.labels.at(i, j);
        }
    }
    return mb;
}

struct TrainLogRow {
    int epoch = 0;
    double train_batch_mean = 0.0; // mean loss of the epoch's optimized batches
    double train_probe = 0.0;      // loss on frozen train batches, fixed stats
    double val = 0.0;              // loss on frozen validation batches
    double lr = 0.0;
};

struct TrainedExtractor {
    Network<float> net;
    std::vector<TrainLogRow> log;
    int best_epoch = 0;
    double best_val = 0.0;
};

namespace detail {

inline double frozen_batch_loss(Network<float>& net, const std::vector<Minibatch>& batches) {
    double total = 0.0;
    for (const auto& mb : batches) {
        // batch statistics, no running-average side effects
        Tensor<float> f = net.forward(mb.x, true, nullptr, false);
        total += dbl_loss(f, mb.labels).loss;
    }
    return total / double(batches.size());
}

} // namespace detail

/// Splits the pool by product (first half train, second half val; ASAE
/// augments each split separately so resized copies never cross splits),
/// then runs Adam on the DBL loss with early stopping on the frozen
/// validation loss. Returns the best-validation checkpoint.
inline TrainedExtractor train_extractor(const PatchPool& fed_pool, const ExtractorConfig& cfg) {
    validate_extractor_config(cfg);
    if (fed_pool.product_ids.size() < 2)
        throw ConfigError("need >= 2 products to form a by-product train/val split");
    const std::size_t half = fed_pool.product_ids.size() / 2;
    if (half == 0 || half == fed_pool.product_ids.size())
        throw ConfigError("validation split is empty");
    PatchPool train_pool, val_pool;
    for (std::size_t i = 0; i < fed_pool.product_ids.size(); ++i) {
        PatchPool& dst = i < half ? train_pool : val_pool;
        dst.product_ids.push_back(fed_pool.product_ids[i]);
        dst.tiles.push_back(fed_pool.tiles[i]);
    }
    if (cfg.mode == LabelMode::asae) {
        Rng aug_rng(derive_seed(cfg.seed, 0xa06));
        train_pool = augment_pool(train_pool, 1.5, aug_rng);
        val_pool = augment_pool(val_pool, 1.5, aug_rng);
    }
    if (train_pool.product_ids.size() < std::size_t(cfg.batch_products) ||
        val_pool.product_ids.size() < std::size_t(cfg.batch_products))
        throw ConfigError("split pools are smaller than batch_products");

    TrainedExtractor out;
    out.net = Network<float>::make(make_extractor_spec(cfg.depth, cfg.width),
                                   derive_seed(cfg.seed, 0x1417));

    // frozen probe/validation batches; early stopping compares like with like
    constexpr int kProbeBatches = 4;
    std::vector<Minibatch> probe, val;
    for (int i = 0; i < kProbeBatches; ++i) {
        Rng r1(derive_seed(cfg.seed, 0x9e0b0 + std::uint64_t(i)));
        probe.push_back(build_minibatch(train_pool, cfg, r1));
        Rng r2(derive_seed(cfg.seed, 0x7a10 + std::uint64_t(i)));
        val.push_back(build_minibatch(val_pool, cfg, r2));
    }

    AdamState adam;
    adam.lr = cfg.lr;
    Network<float> best = out.net;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    std::vector<std::size_t> rr_order(train_pool.product_ids.size());
    for (std::size_t i = 0; i < rr_order.size(); ++i) rr_order[i] = i;
    std::size_t rr_pos = 0;

    std::uint64_t global_iter = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, 0xe90c + std::uint64_t(epoch)));
        epoch_rng.shuffle(rr_order.begin(), rr_order.end());
        rr_pos = 0;
        double batch_mean = 0.0;
        for (int it = 0; it < cfg.iters_per_epoch; ++it, ++global_iter) {
            // round-robin product coverage across the epoch
            std::vector<std::size_t> pick;
            for (int k = 0; k < cfg.batch_products; ++k) {
                pick.push_back(rr_order[rr_pos]);
                rr_pos = (rr_pos + 1) % rr_order.size();
            }
            std::sort(pick.begin(), pick.end());
            pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
            while (int(pick.size()) < cfg.batch_products) {
                const std::size_t extra = rr_order[rr_pos];
                rr_pos = (rr_pos + 1) % rr_order.size();
                if (std::find(pick.begin(), pick.end(), extra) == pick.end()) pick.push_back(extra);
            }
            Rng rng(derive_seed(cfg.seed, 0xba7c4 + global_iter));
            Minibatch mb = build_minibatch(train_pool, cfg, rng, pick);
            typename Network<float>::Cache cache;
            Tensor<float> f = out.net.forward(mb.x, true, &cache);
            LossResult<float> loss = dbl_loss(f, mb.labels);
            batch_mean += loss.loss;
            auto grads = out.net.backward(cache, loss.grad);
            auto params = trainable_params(out.net);
            auto gptrs = trainable_grads<float>(grads);
            adam_step(adam, params, gptrs);
        }
        batch_mean /= double(cfg.iters_per_epoch);

        TrainLogRow row;
        row.epoch = epoch;
        row.train_batch_mean = batch_mean;
        row.train_probe = detail::frozen_batch_loss(out.net, probe);
        row.val = detail::frozen_batch_loss(out.net, val);
        row.lr = adam.lr;
        out.log.push_back(row);

        if (row.val < best_val) {
            best_val = row.val;
            best_epoch = epoch;
            best = out.net;
        } else if (epoch - best_epoch >= cfg.early_stop_patience) {
            break;
        }
    }
    out.net = std::move(best);
    out.best_epoch = best_epoch;
    out.best_val = best_val;
    return out;
}

/// Fully convolutional application; the fingerprint inherits the tile's
/// resolution.
inline Fingerprint extract(Network<float>& model, const NormalizedTile& tile) {
    if (model.spec.layers.empty()) throw ModelError("extractor has no layers");
    Tensor<float> x(1, 1, tile.pixels.height, tile.pixels.width);
    std::copy(tile.pixels.data.begin(), tile.pixels.data.end(), x.data.begin());
    Tensor<float> y = model.forward(x, false);
    if (y.c != 1 || y.h != tile.pixels.height || y.w != tile.pixels.width)
        throw ModelError("extractor output shape does not match the input tile");
    Fingerprint fp;
    fp.values = Grid<float>(y.h, y.w);
    std::copy(y.data.begin(), y.data.end(), fp.values.data.begin());
    fp.extractor_id = model_id(model);
    for (float v : fp.values.data)
        if (!std::isfinite(v)) throw ModelError("extractor produced non-finite values");
    return fp;
}

} // namespace sarloc
