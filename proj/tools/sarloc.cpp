// Command line front end: synthetic product generation, splice dataset
// construction, extractor and segmentation training, and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sarloc/fingerprint.hpp"
#include "sarloc/maskest.hpp"
#include "sarloc/metrics.hpp"
#include "sarloc/splicer.hpp"
#include "sarloc/synthgrd.hpp"

namespace fs = std::filesystem;
using namespace sarloc;

namespace {

int cmd_synth(const std::string& out_dir, int count, std::uint64_t seed, int height, int width) {
    fs::create_directories(fs::path(out_dir) / "raw");
    std::vector<ProductEntry> entries;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, std::uint64_t(i)));
        ProductEntry p;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "P%02d", i);
        p.id = idbuf;
        p.seed = derive_seed(seed, 0x9000 + std::uint64_t(i));
        p.signature.resample_factor = rng.uniform(0.8, 1.6);
        p.signature.resample_kernel =
            std::array<Kernel, 3>{Kernel::nearest, Kernel::bilinear,
                                  Kernel::bicubic}[rng.uniform_int(0, 2)];
        p.signature.lowpass_sigma = rng.unit() < 0.5 ? 0.0 : rng.uniform(0.4, 1.2);
        p.signature.quantization_step = rng.unit() < 0.5 ? 0.0 : rng.uniform(0.002, 0.02);
        p.signature.looks = int(rng.uniform_int(1, 6));
        p.scene.height = std::max(1, int(std::lround(height / p.signature.resample_factor)));
        p.scene.width = std::max(1, int(std::lround(width / p.signature.resample_factor)));
        p.scene.seed = derive_seed(seed, 0xa000 + std::uint64_t(i));

        const ProductRaster raster = gen_product(p.scene, p.signature, p.seed);
        Tile t;
        t.pixels = raster.raster;
        t.product_id = p.id;
        t.provenance = raster.provenance;
        p.path = "raw/" + p.id + ".f32";
        save_tile(t, fs::path(out_dir) / p.path);
        entries.push_back(std::move(p));
        std::printf("product %s: %dx%d\n", idbuf, t.pixels.height, t.pixels.width);
    }
    save_registry(entries, fs::path(out_dir) / "products.json");
    std::printf("registry: %s (%d products)\n",
                (fs::path(out_dir) / "products.json").string().c_str(), count);
    return 0;
}

std::vector<ProductTiles> load_pool(const std::string& registry_path, int tile_side) {
    const fs::path reg(registry_path);
    const fs::path dir = reg.parent_path();
    std::vector<ProductTiles> pool;
    for (const ProductEntry& p : load_registry(reg)) {
        const Tile raster = load_tile(dir / p.path);
        ProductTiles pt;
        pt.product_id = p.id;
        pt.tiles = partition_product(raster.pixels, tile_side, p.id, raster.provenance);
        pool.push_back(std::move(pt));
    }
    return pool;
}

int cmd_splice(const std::string& set, int per_op, std::uint64_t seed, const std::string& pool_path,
               const std::string& out_dir, int tile_side, const std::vector<int>& max_sides,
               const std::string& split, int workers) {
    DatasetBlueprint bp;
    bp.set = set;
    bp.split = split;
    bp.per_op = per_op;
    bp.seed = seed;
    bp.tile_side = tile_side;
    bp.max_sides = max_sides;

    const PoolSplit products = split_pool(load_pool(pool_path, tile_side));
    std::vector<ProductTiles> pool;
    if (set == "sd2") {
        pool = products.sd2;
    } else {
        const FedSd1Tiles ft = split_fed_sd1(products.fed_sd1);
        pool = set == "fed" ? ft.fed : ft.sd1;
    }
    const DatasetManifest m = build_dataset(bp, pool, out_dir, workers);
    std::printf("%s: %zu records, %zu pristine tiles -> %s\n", m.name.c_str(), m.records.size(),
                m.pristine_tiles.size(), out_dir.c_str());
    return 0;
}

int cmd_train_fp(const std::string& fed_manifest, const std::string& mode, int depth, int width,
                 int max_epochs, int iters, std::uint64_t seed, const std::string& out_dir,
                 bool desk) {
    ExtractorConfig cfg = desk ? ExtractorConfig::desk() : ExtractorConfig();
    cfg.mode = label_mode_from_name(mode);
    if (depth > 0) cfg.depth = depth;
    if (width > 0) cfg.width = width;
    if (max_epochs > 0) cfg.max_epochs = max_epochs;
    if (iters > 0) cfg.iters_per_epoch = iters;
    cfg.seed = seed;

    const fs::path man_path(fed_manifest);
    const DatasetManifest man = load_manifest(man_path);
    const PatchPool pool = load_fed_pool(man, man_path.parent_path());
    const TrainedExtractor trained = train_extractor(pool, cfg);

    fs::create_directories(out_dir);
    save_model(trained.net, out_dir);
    std::ofstream log(fs::path(out_dir) / "log.csv");
    log << "epoch,train_batch_mean,train_probe,val,lr\n";
    for (const TrainLogRow& r : trained.log) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%g\n", r.epoch, r.train_batch_mean,
                      r.train_probe, r.val, r.lr);
        log << buf;
    }
    std::printf("extractor %s: best epoch %d, val %.6f -> %s\n", model_id(trained.net).c_str(),
                trained.best_epoch, trained.best_val, out_dir.c_str());
    return 0;
}

int cmd_extract(const std::string& model_dir, const std::string& in_path,
                const std::string& out_path) {
    Network<float> net = load_model(model_dir);
    const Tile tile = load_tile(in_path);
    const Fingerprint fp = extract(net, normalize(tile));
    save_fingerprint(fp, out_path);
    std::printf("fingerprint %dx%d -> %s\n", fp.height(), fp.width(), out_path.c_str());
    return 0;
}

int cmd_mask(const std::string& method, const std::string& fp_path, const std::string& model_dir,
             double tau, int clusters, std::uint64_t seed, const std::string& out_path) {
    const Fingerprint fp = load_fingerprint(fp_path);
    TamperMask mask;
    if (method == "unet") {
        if (model_dir.empty()) throw ConfigError("--model is required for the unet method");
        Network<float> net = load_model(model_dir);
        mask = unet_estimate(net, fp, tau).mask;
    } else {
        mask = estimate_mask_clustering(fp, method, clusters, seed);
    }
    save_mask(mask, out_path);
    std::size_t ones = 0;
    for (auto b : mask.bits.data) ones += b;
    std::printf("mask %dx%d, %zu spliced pixels -> %s\n", mask.height(), mask.width(), ones,
                out_path.c_str());
    return 0;
}

int cmd_train_unet(const std::string& sd1_manifest, const std::string& fp_model,
                   const std::string& out_dir, int max_epochs, int base, std::uint64_t seed,
                   int limit) {
    const fs::path man_path(sd1_manifest);
    const DatasetManifest man = load_manifest(man_path);
    Network<float> extractor = load_model(fp_model);

    std::vector<Fingerprint> fps;
    std::vector<TamperMask> masks;
    const std::size_t n =
        limit > 0 ? std::min(std::size_t(limit), man.records.size()) : man.records.size();
    for (std::size_t i = 0; i < n; ++i) {
        const SpliceRecord& rec = man.records[i];
        const Tile tile = load_tile(man_path.parent_path() / rec.spliced_path);
        fps.push_back(extract(extractor, normalize(tile)));
        masks.push_back(load_mask(man_path.parent_path() / rec.mask_path));
    }

    UnetTrainConfig cfg;
    cfg.base = base;
    cfg.max_epochs = max_epochs;
    cfg.seed = seed;
    const TrainedUnet trained = train_unet(fps, masks, cfg);

    fs::create_directories(out_dir);
    save_model(trained.net, out_dir);
    std::ofstream log(fs::path(out_dir) / "log.csv");
    log << "epoch,train_mean,val,lr\n";
    for (const UnetLogRow& r : trained.log) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%g\n", r.epoch, r.train_mean, r.val, r.lr);
        log << buf;
    }
    std::printf("unet %s: best epoch %d, val %.6f -> %s\n", model_id(trained.net).c_str(),
                trained.best_epoch, trained.best_val, out_dir.c_str());
    return 0;
}

int cmd_evaluate(const std::string& sd2_manifest, const std::string& fp_model,
                 const std::string& methods_csv, const std::string& out_dir,
                 const std::string& unet_model, double tau, int clusters, std::uint64_t seed,
                 int workers) {
    const fs::path man_path(sd2_manifest);
    const DatasetManifest man = load_manifest(man_path);
    Network<float> extractor = load_model(fp_model);

    ExperimentConfig cfg;
    cfg.methods.clear();
    std::string token;
    for (char c : methods_csv + ",") {
        if (c == ',') {
            if (!token.empty()) cfg.methods.push_back(token);
            token.clear();
        } else {
            token += c;
        }
    }
    cfg.tau = tau;
    cfg.clusters = clusters;
    cfg.seed = seed;
    cfg.workers = workers;

    Network<float> unet;
    Network<float>* unet_ptr = nullptr;
    for (const auto& m : cfg.methods)
        if (m == "unet") {
            if (unet_model.empty()) throw ConfigError("--unet-model is required for unet");
            unet = load_model(unet_model);
            unet_ptr = &unet;
        }

    const EvalReport rep = run_experiment(man, man_path.parent_path(), extractor, unet_ptr, cfg);
    save_report(rep, out_dir);
    for (const EvalRow& r : rep.rows)
        std::printf("%-20s %-6s %-7s iou %.4f  ba %.4f  n %d\n", r.operation.c_str(),
                    r.scenario.c_str(), r.method.c_str(), r.mean_iou, r.mean_ba, r.n);
    std::printf("evaluated %d, failed %d -> %s\n", rep.evaluated, rep.failed, out_dir.c_str());
    if (rep.evaluated == 0) return 2;
    if (rep.failed > 0) return 3;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAR amplitude splicing localization toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic products");
    std::string sy_out = "products";
    int sy_count = 4, sy_h = 1024, sy_w = 1024;
    std::uint64_t sy_seed = 1;
    synth->add_option("--out", sy_out, "output directory");
    synth->add_option("--products", sy_count, "number of products");
    synth->add_option("--seed", sy_seed, "rng seed");
    synth->add_option("--height", sy_h, "approximate raster height");
    synth->add_option("--width", sy_w, "approximate raster width");

    // splice
    auto* splice = app.add_subcommand("splice", "build a splicing dataset");
    std::string sp_set, sp_pool, sp_out = "dataset", sp_split = "train";
    int sp_per_op = 200, sp_tile = 1024, sp_workers = 1;
    std::uint64_t sp_seed = 1;
    std::vector<int> sp_sides;
    splice->add_option("--set", sp_set, "fed, sd1 or sd2")->required();
    splice->add_option("--per-op", sp_per_op, "records per operation");
    splice->add_option("--seed", sp_seed, "rng seed");
    splice->add_option("--pool", sp_pool, "products.json registry")->required();
    splice->add_option("--out", sp_out, "output directory");
    splice->add_option("--tile-side", sp_tile, "tile side in pixels");
    splice->add_option("--max-sides", sp_sides, "allowed crop side caps");
    splice->add_option("--split", sp_split, "split label");
    splice->add_option("--workers", sp_workers, "worker threads");

    // train-fp
    auto* trainfp = app.add_subcommand("train-fp", "train the fingerprint extractor");
    std::string tf_fed, tf_mode = "sae", tf_out = "fp-model";
    int tf_depth = 0, tf_width = 0, tf_epochs = 0, tf_iters = 0;
    std::uint64_t tf_seed = 1;
    bool tf_desk = false;
    trainfp->add_option("--fed", tf_fed, "FED manifest.jsonl")->required();
    trainfp->add_option("--mode", tf_mode, "be, sae or asae");
    trainfp->add_option("--depth", tf_depth, "conv layer count");
    trainfp->add_option("--width", tf_width, "channels per layer");
    trainfp->add_option("--epochs", tf_epochs, "max epochs override");
    trainfp->add_option("--iters", tf_iters, "optimizer steps per epoch override");
    trainfp->add_option("--seed", tf_seed, "rng seed");
    trainfp->add_option("--out", tf_out, "model output directory");
    trainfp->add_flag("--desk", tf_desk, "small single-core defaults");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "extract a fingerprint");
    std::string ex_model, ex_in, ex_out = "fp.f32";
    extract_cmd->add_option("--model", ex_model, "extractor model directory")->required();
    extract_cmd->add_option("--in", ex_in, "input tile .f32")->required();
    extract_cmd->add_option("--out", ex_out, "output fingerprint .f32");

    // mask
    auto* mask_cmd = app.add_subcommand("mask", "estimate a tamper mask");
    std::string mk_method = "gmm", mk_fp, mk_model, mk_out = "mask.pgm";
    double mk_tau = 0.5;
    int mk_clusters = 7;
    std::uint64_t mk_seed = 1;
    mask_cmd->add_option("--method", mk_method, "kmeans, gmm or unet");
    mask_cmd->add_option("--fp", mk_fp, "fingerprint .f32")->required();
    mask_cmd->add_option("--model", mk_model, "unet model directory");
    mask_cmd->add_option("--tau", mk_tau, "probability threshold");
    mask_cmd->add_option("--clusters", mk_clusters, "cluster count");
    mask_cmd->add_option("--seed", mk_seed, "clustering seed");
    mask_cmd->add_option("--out", mk_out, "output mask .pgm");

    // train-unet
    auto* trainun = app.add_subcommand("train-unet", "train the segmentation net");
    std::string tu_sd1, tu_fp_model, tu_out = "unet-model";
    int tu_epochs = 200, tu_base = 16, tu_limit = 0;
    std::uint64_t tu_seed = 1;
    trainun->add_option("--sd1", tu_sd1, "SD1 manifest.jsonl")->required();
    trainun->add_option("--fp-model", tu_fp_model, "extractor model directory")->required();
    trainun->add_option("--out", tu_out, "model output directory");
    trainun->add_option("--epochs", tu_epochs, "max epochs");
    trainun->add_option("--base", tu_base, "base channel width");
    trainun->add_option("--seed", tu_seed, "rng seed");
    trainun->add_option("--limit", tu_limit, "use only the first N records");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score mask methods on a dataset");
    std::string ev_sd2, ev_fp_model, ev_methods = "kmeans,gmm", ev_out = "reports",
                ev_unet_model;
    double ev_tau = 0.5;
    int ev_clusters = 7, ev_workers = 1;
    std::uint64_t ev_seed = 1;
    eval_cmd->add_option("--sd2", ev_sd2, "manifest.jsonl to score")->required();
    eval_cmd->add_option("--fp-model", ev_fp_model, "extractor model directory")->required();
    eval_cmd->add_option("--methods", ev_methods, "comma separated method list");
    eval_cmd->add_option("--out", ev_out, "report output directory");
    eval_cmd->add_option("--unet-model", ev_unet_model, "unet model directory");
    eval_cmd->add_option("--tau", ev_tau, "unet threshold");
    eval_cmd->add_option("--clusters", ev_clusters, "cluster count");
    eval_cmd->add_option("--seed", ev_seed, "clustering seed");
    eval_cmd->add_option("--workers", ev_workers, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(sy_out, sy_count, sy_seed, sy_h, sy_w);
        if (splice->parsed())
            return cmd_splice(sp_set, sp_per_op, sp_seed, sp_pool, sp_out, sp_tile, sp_sides,
                              sp_split, sp_workers);
        if (trainfp->parsed())
            return cmd_train_fp(tf_fed, tf_mode, tf_depth, tf_width, tf_epochs, tf_iters, tf_seed,
                                tf_out, tf_desk);
        if (extract_cmd->parsed()) return cmd_extract(ex_model, ex_in, ex_out);
        if (mask_cmd->parsed())
            return cmd_mask(mk_method, mk_fp, mk_model, mk_tau, mk_clusters, mk_seed, mk_out);
        if (trainun->parsed())
            return cmd_train_unet(tu_sd1, tu_fp_model, tu_out, tu_epochs, tu_base, tu_seed,
                                  tu_limit);
        if (eval_cmd->parsed())
            return cmd_evaluate(ev_sd2, ev_fp_model, ev_methods, ev_out, ev_unet_model, ev_tau,
                                ev_clusters, ev_seed, ev_workers);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
