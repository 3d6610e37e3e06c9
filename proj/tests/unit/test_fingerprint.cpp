#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "sarloc/fingerprint.hpp"
#include "sarloc/synthgrd.hpp"

using namespace sarloc;
namespace fs = std::filesystem;

namespace {

Grid<float> noise_tile(int side, std::uint64_t seed) {
    Rng rng(seed);
    Grid<float> g(side, side);
    for (auto& v : g.data) v = float(rng.unit());
    return g;
}

Grid<float> smooth_tile(int side, std::uint64_t seed) {
    Grid<float> g = gaussian_blur(noise_tile(side, seed), 1.5);
    float lo = g.data[0], hi = g.data[0];
    for (float v : g.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (auto& v : g.data) v = (v - lo) / std::max(1e-6f, hi - lo);
    return g;
}

PatchPool two_texture_pool() {
    // products alternate texture so the split keeps one of each kind
    PatchPool pool;
    pool.product_ids = {"noise_a", "smooth_a", "noise_b", "smooth_b"};
    pool.tiles.resize(4);
    for (int t = 0; t < 2; ++t) {
        pool.tiles[0].push_back(noise_tile(32, std::uint64_t(10 + t)));
        pool.tiles[1].push_back(smooth_tile(32, std::uint64_t(20 + t)));
        pool.tiles[2].push_back(noise_tile(32, std::uint64_t(30 + t)));
        pool.tiles[3].push_back(smooth_tile(32, std::uint64_t(40 + t)));
    }
    return pool;
}

ExtractorConfig tiny_config() {
    ExtractorConfig cfg;
    cfg.depth = 2;
    cfg.width = 4;
    cfg.patch = 8;
    cfg.batch_products = 2;
    cfg.tiles_per_product = 2;
    cfg.patches_per_tile = 4;
    cfg.max_epochs = 4;
    cfg.iters_per_epoch = 4;
    cfg.early_stop_patience = 10;
    cfg.seed = 1;
    return cfg;
}

} // namespace

TEST_CASE("label mode names round trip") {
    for (LabelMode m : {LabelMode::be, LabelMode::sae, LabelMode::asae})
        CHECK(label_mode_from_name(label_mode_name(m)) == m);
    CHECK_THROWS_AS(label_mode_from_name("contrastive"), DispatchError);
}

TEST_CASE("extractor configs are validated") {
    CHECK_NOTHROW(validate_extractor_config(ExtractorConfig::desk()));
    ExtractorConfig c = ExtractorConfig::desk();
    c.depth = 1;
    CHECK_THROWS_AS(validate_extractor_config(c), ConfigError);
    c = ExtractorConfig::desk();
    c.width = 0;
    CHECK_THROWS_AS(validate_extractor_config(c), ConfigError);
    c = ExtractorConfig::desk();
    c.patch = 7;
    CHECK_THROWS_AS(validate_extractor_config(c), ConfigError);
    c = ExtractorConfig::desk();
    c.batch_products = 1;
    CHECK_THROWS_AS(validate_extractor_config(c), ConfigError);
    c = ExtractorConfig::desk();
    c.position_grid = 0;
    CHECK_THROWS_AS(validate_extractor_config(c), ConfigError);
    CHECK(ExtractorConfig::desk().batch_size() == 48);
}

TEST_CASE("the extractor spec stacks conv blocks with a soft final layer") {
    const NetworkSpec s = make_extractor_spec(5, 16);
    REQUIRE(s.layers.size() == 2 + 3 * 3 + 1);
    CHECK(s.layers[0].kind == LayerKind::conv2d);
    CHECK(s.layers[0].out_ch == 16);
    CHECK(s.layers[0].bias);
    CHECK(s.layers[1].kind == LayerKind::relu);
    for (int b = 0; b < 3; ++b) {
        CHECK(s.layers[std::size_t(2 + 3 * b)].kind == LayerKind::conv2d);
        CHECK_FALSE(s.layers[std::size_t(2 + 3 * b)].bias);
        CHECK(s.layers[std::size_t(3 + 3 * b)].kind == LayerKind::batch_norm);
        CHECK(s.layers[std::size_t(4 + 3 * b)].kind == LayerKind::relu);
    }
    const LayerSpec& last = s.layers.back();
    CHECK(last.kind == LayerKind::conv2d);
    CHECK(last.out_ch == 1);
    CHECK(last.init_scale == 0.1);
    CHECK(channel_trace(s).back() == 1);
    CHECK_THROWS_AS(make_extractor_spec(1, 16), ConfigError);
}

TEST_CASE("position cells tile the image into a grid") {
    CHECK(position_cell(0, 0, 48, 1024, 1024, 4) == 0);
    CHECK(position_cell(976, 976, 48, 1024, 1024, 4) == 15);
    CHECK(position_cell(0, 976, 48, 1024, 1024, 4) == 3);
    CHECK(position_cell(500, 500, 48, 1024, 1024, 4) == 2 * 4 + 2);
    CHECK(position_cell(0, 0, 48, 48, 48, 4) == 1 * 4 + 1); // patch center sits mid-tile
}

TEST_CASE("minibatches carry consistent samples and tensors") {
    const PatchPool pool = two_texture_pool();
    ExtractorConfig cfg = tiny_config();
    Rng rng(7);
    const Minibatch mb = build_minibatch(pool, cfg, rng, {0, 1});
    const int b = cfg.batch_size();
    REQUIRE(b == 16);
    REQUIRE(mb.x.n == b);
    CHECK(mb.x.c == 1);
    CHECK(mb.x.h == 8);
    REQUIRE(int(mb.samples.size()) == b);

    for (int i = 0; i < b; ++i) {
        const PatchSample& s = mb.samples[std::size_t(i)];
        CHECK(s.pixels.height == 8);
        CHECK(s.product_id == (i < 8 ? "noise_a" : "smooth_a"));
        const float* plane = mb.x.plane(i, 0);
        for (std::size_t k = 0; k < s.pixels.data.size(); ++k)
            REQUIRE(plane[k] == s.pixels.data[k]);
    }
}

TEST_CASE("product-level labels mark same-product pairs positive") {
    const PatchPool pool = two_texture_pool();
    ExtractorConfig cfg = tiny_config();
    cfg.mode = LabelMode::sae;
    Rng rng(8);
    const Minibatch mb = build_minibatch(pool, cfg, rng, {0, 1});
    const int b = cfg.batch_size();
    for (int i = 0; i < b; ++i) {
        CHECK(mb.labels.at(i, i) == 0);
        for (int j = 0; j < b; ++j) {
            const bool same =
                mb.samples[std::size_t(i)].product_id == mb.samples[std::size_t(j)].product_id;
            if (i != j) CHECK(mb.labels.at(i, j) == (same ? 1 : 0));
            CHECK(mb.labels.at(i, j) == mb.labels.at(j, i));
        }
    }
}

TEST_CASE("position-restricted labels are a subset of product labels") {
    const PatchPool pool = two_texture_pool();
    ExtractorConfig be_cfg = tiny_config();
    be_cfg.mode = LabelMode::be;
    ExtractorConfig sae_cfg = tiny_config();
    sae_cfg.mode = LabelMode::sae;

    Rng r1(9), r2(9); // identical sampling, different labeling
    const Minibatch be = build_minibatch(pool, be_cfg, r1, {0, 1});
    const Minibatch sae = build_minibatch(pool, sae_cfg, r2, {0, 1});
    const int b = be_cfg.batch_size();
    int be_pos = 0, sae_pos = 0;
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
            REQUIRE(be.samples[std::size_t(i)].product_id ==
                    sae.samples[std::size_t(i)].product_id);
            if (be.labels.at(i, j) == 1) {
                CHECK(sae.labels.at(i, j) == 1);
                CHECK(be.samples[std::size_t(i)].grid_cell ==
                      be.samples[std::size_t(j)].grid_cell);
            }
            be_pos += be.labels.at(i, j);
            sae_pos += sae.labels.at(i, j);
        }
    CHECK(be_pos > 0);
    CHECK(be_pos < sae_pos);
}

TEST_CASE("minibatch capacity and usage guards") {
    PatchPool one;
    one.product_ids = {"solo"};
    one.tiles = {{noise_tile(32, 1)}};
    ExtractorConfig cfg = tiny_config();
    Rng rng(10);
    CHECK_THROWS_AS(build_minibatch(one, cfg, rng), CapacityError);

    const PatchPool pool = two_texture_pool();
    CHECK_THROWS_AS(build_minibatch(pool, cfg, rng, {0}), UsageError);

    PatchPool tiny;
    tiny.product_ids = {"a", "b"};
    tiny.tiles = {{noise_tile(4, 2)}, {noise_tile(4, 3)}};
    CHECK_THROWS_AS(build_minibatch(tiny, cfg, rng), SizingError);
}

TEST_CASE("augmentation doubles the pool under fresh ids") {
    const PatchPool pool = two_texture_pool();
    Rng rng(11);
    const PatchPool aug = augment_pool(pool, 1.5, rng);
    REQUIRE(aug.product_ids.size() == 8);
    std::set<std::string> ids(aug.product_ids.begin(), aug.product_ids.end());
    CHECK(ids.size() == 8);
    for (std::size_t p = 0; p < 4; ++p) {
        CHECK(aug.product_ids[p] == pool.product_ids[p]);
        CHECK(aug.product_ids[p + 4] == pool.product_ids[p] + "+rs");
        REQUIRE(aug.tiles[p + 4].size() == pool.tiles[p].size());
        for (std::size_t t = 0; t < pool.tiles[p].size(); ++t) {
            CHECK(aug.tiles[p + 4][t].same_shape(pool.tiles[p][t]));
            CHECK_FALSE(aug.tiles[p + 4][t] == pool.tiles[p][t]);
        }
    }
    CHECK_THROWS_AS(augment_pool(pool, 1.0, rng), ValidationError);
}

TEST_CASE("pristine manifests group tiles by product in first appearance order") {
    const fs::path dir = fs::temp_directory_path() / "sarloc_fp_tests" / "fed_pool";
    fs::remove_all(dir);
    fs::create_directories(dir / "tiles");

    DatasetManifest fed;
    fed.name = "FED";
    Tile t;
    t.pixels = noise_tile(16, 12);
    t.product_id = "p2";
    save_tile(t, dir / "tiles/x0.f32");
    fed.pristine_tiles.push_back("tiles/x0.f32");
    t.pixels = noise_tile(16, 13);
    t.product_id = "p1";
    save_tile(t, dir / "tiles/x1.f32");
    fed.pristine_tiles.push_back("tiles/x1.f32");
    t.pixels = noise_tile(16, 14);
    t.product_id = "p2";
    save_tile(t, dir / "tiles/x2.f32");
    fed.pristine_tiles.push_back("tiles/x2.f32");

    const PatchPool pool = load_fed_pool(fed, dir);
    REQUIRE(pool.product_ids == std::vector<std::string>{"p2", "p1"});
    REQUIRE(pool.tiles[0].size() == 2);
    REQUIRE(pool.tiles[1].size() == 1);
    for (const auto& tiles : pool.tiles)
        for (const auto& g : tiles)
            for (float v : g.data) {
                REQUIRE(v >= 0.f);
                REQUIRE(v <= 1.f);
            }
}

TEST_CASE("a frozen learning rate freezes the probe and validation losses") {
    ExtractorConfig cfg = tiny_config();
    cfg.lr = 0.0;
    cfg.max_epochs = 50;
    cfg.early_stop_patience = 3;
    const TrainedExtractor out = train_extractor(two_texture_pool(), cfg);

    // constant validation loss: epoch 0 stays best, patience then trips
    REQUIRE(out.log.size() == 4);
    CHECK(out.best_epoch == 0);
    for (const auto& row : out.log) {
        CHECK(row.train_probe == out.log[0].train_probe);
        CHECK(row.val == out.log[0].val);
        CHECK(row.lr == 0.0);
    }
    CHECK(out.best_val == out.log[0].val);
}

TEST_CASE("training on separable textures reduces the frozen train loss") {
    ExtractorConfig cfg = tiny_config();
    cfg.lr = 1e-3;
    cfg.max_epochs = 8;
    cfg.iters_per_epoch = 8;
    const TrainedExtractor out = train_extractor(two_texture_pool(), cfg);
    REQUIRE_FALSE(out.log.empty());
    CAPTURE(out.log.front().train_probe, out.log.back().train_probe);
    CHECK(out.log.back().train_probe < out.log.front().train_probe);
    CHECK(out.best_epoch >= 0);
    CHECK(std::isfinite(out.best_val));

    // the checkpoint honors the best validation epoch
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (const auto& row : out.log)
        if (row.val < best) {
            best = row.val;
            arg = row.epoch;
        }
    CHECK(out.best_epoch == arg);
    CHECK(out.best_val == best);
}

TEST_CASE("training rejects pools it cannot split") {
    ExtractorConfig cfg = tiny_config();
    PatchPool one;
    one.product_ids = {"solo"};
    one.tiles = {{noise_tile(32, 1)}};
    CHECK_THROWS_AS(train_extractor(one, cfg), ConfigError);

    PatchPool three;
    three.product_ids = {"a", "b", "c"};
    three.tiles = {{noise_tile(32, 1)}, {noise_tile(32, 2)}, {noise_tile(32, 3)}};
    // half = 1: the train split holds one product, fewer than batch_products
    CHECK_THROWS_AS(train_extractor(three, cfg), ConfigError);
}

TEST_CASE("extraction is shape-preserving and deterministic") {
    Network<float> net = Network<float>::make(make_extractor_spec(3, 4), 21);
    NormalizedTile tile;
    tile.pixels = Grid<float>(24, 40);
    Rng rng(5);
    for (auto& v : tile.pixels.data) v = float(rng.unit());
    tile.scale_min = 0.f;
    tile.scale_max = 1.f;
    const Fingerprint a = extract(net, tile);
    const Fingerprint b = extract(net, tile);
    CHECK(a.values.height == 24);
    CHECK(a.values.width == 40);
    CHECK(a.values == b.values);
    CHECK(a.extractor_id == model_id(net));

    Network<float> empty;
    CHECK_THROWS_AS(extract(empty, tile), ModelError);
}
