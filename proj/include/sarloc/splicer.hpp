#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "sarloc/editops.hpp"
#include "sarloc/errors.hpp"
#include "sarloc/parallel.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/rng.hpp"

namespace sarloc {

enum class SpliceMode { inter, intra };

inline const char* mode_name(SpliceMode m) {
    return m == SpliceMode::inter ? "inter" : "intra";
}

inline SpliceMode mode_from_name(const std::string& s) {
    if (s == "inter") return SpliceMode::inter;
    if (s == "intra") return SpliceMode::intra;
    throw DispatchError("unknown splice mode '" + s + "'");
}

struct Region {
    int row = 0, col = 0, height = 0, width = 0;
};

struct SpliceRecord {
    std::string spliced_path;
    std::string mask_path;
    std::string donor_product;
    std::string target_product;
    EditDescriptor edit;
    Region region;
    SpliceMode mode = SpliceMode::inter;
};

inline void validate_record(const SpliceRecord& r, int tile_h = 0, int tile_w = 0) {
    if (r.donor_product.empty() || r.target_product.empty())
        throw ValidationError("record product ids must be non-empty");
    const bool same = r.donor_product == r.target_product;
    if (same != (r.mode == SpliceMode::intra))
        throw ValidationError("intra mode requires donor_product == target_product and vice versa");
    if (r.region.row < 0 || r.region.col < 0)
        throw ValidationError("region origin must be non-negative");
    for (int side : {r.region.height, r.region.width})
        if (side < 128 || side > 256)
            throw ValidationError("region side " + std::to_string(side) + " outside [128,256]");
    if (tile_h > 0 && tile_w > 0 &&
        (r.region.row + r.region.height > tile_h || r.region.col + r.region.width > tile_w))
        throw ValidationError("region extends outside tile bounds");
    validate_edit(r.edit);
}

inline ordered_json record_to_json(const SpliceRecord& r) {
    ordered_json j;
    j["spliced_path"] = r.spliced_path;
    j["mask_path"] = r.mask_path;
    j["donor_product"] = r.donor_product;
    j["target_product"] = r.target_product;
    j["edit"] = edit_to_json(r.edit);
    j["region"] = {{"row", r.region.row},
                   {"col", r.region.col},
                   {"height", r.region.height},
                   {"width", r.region.width}};
    j["mode"] = mode_name(r.mode);
    return j;
}

inline SpliceRecord record_from_json(const ordered_json& j) {
    SpliceRecord r;
    r.spliced_path = j.at("spliced_path").get<std::string>();
    r.mask_path = j.at("mask_path").get<std::string>();
    r.donor_product = j.at("donor_product").get<std::string>();
    r.target_product = j.at("target_product").get<std::string>();
    r.edit = edit_from_json(j.at("edit"));
    const auto& reg = j.at("region");
    r.region = {reg.at("row").get<int>(), reg.at("col").get<int>(), reg.at("height").get<int>(),
                reg.at("width").get<int>()};
    r.mode = mode_from_name(j.at("mode").get<std::string>());
    validate_record(r);
    return r;
}

struct DatasetManifest {
    std::string name; // FED | SD1 | SD2 | custom
    std::string split = "train";
    std::uint64_t seed = 0;
    std::vector<std::string> pristine_tiles;
    std::vector<SpliceRecord> records;
};

/// JSONL layout: a header object on the first line, one record per line after.
inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open manifest for write: " + path.string());
    ordered_json head;
    head["name"] = m.name;
    head["split"] = m.split;
    head["seed"] = m.seed;
    head["pristine_tiles"] = m.pristine_tiles;
    f << head.dump() << "\n";
    for (const auto& r : m.records) f << record_to_json(r).dump() << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw FormatError("empty manifest: " + path.string());
    DatasetManifest m;
    try {
        const ordered_json head = ordered_json::parse(line);
        m.name = head.at("name").get<std::string>();
        m.split = head.at("split").get<std::string>();
        m.seed = head.at("seed").get<std::uint64_t>();
        m.pristine_tiles = head.at("pristine_tiles").get<std::vector<std::string>>();
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            m.records.push_back(record_from_json(ordered_json::parse(line)));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError("bad manifest line in " + path.string() + ": " + e.what());
    }
    return m;
}

struct SpliceResult {
    Tile spliced;
    TamperMask mask;
    SpliceRecord record;
};

inline void check_max_side(int max_side) {
    for (int s : {128, 160, 192, 224, 256})
        if (max_side == s) return;
    throw ValidationError("max_side must be one of {128,160,192,224,256}");
}

/// Edits the donor, crops a random rectangle from the edited result, pastes
/// it at a random position in the target. Draw order from the seed is fixed:
/// side_h, side_w, crop_row, crop_col, paste_row, paste_col.
inline SpliceResult make_splice(const Tile& donor, const Tile& target, const EditDescriptor& edit,
                                int max_side, std::uint64_t seed) {
    check_max_side(max_side);
    validate_edit(edit);
    validate_tile(donor);
    validate_tile(target);
    if (target.height() < max_side || target.width() < max_side)
        throw SizingError("max_side exceeds target tile dimensions");
    if (donor.height() < max_side || donor.width() < max_side)
        throw SizingError("max_side exceeds donor tile dimensions");
    constexpr int kMinSide = 128;

    // kind == none skips the normalize/denormalize round trip so the pasted
    // pixels stay bit-identical to the donor's.
    Grid<float> edited;
    if (edit.kind == EditKind::none) {
        edited = donor.pixels;
    } else {
        edited = denormalize(apply_edit(normalize(donor), edit));
    }

    Rng rng(seed);
    int side_h = 0, side_w = 0, crop_r = 0, crop_c = 0, paste_r = 0, paste_c = 0;
    bool placed = false;
    for (int attempt = 0; attempt < 8 && !placed; ++attempt) {
        side_h = int(rng.uniform_int(kMinSide, max_side));
        side_w = int(rng.uniform_int(kMinSide, max_side));
        if (side_h > edited.height || side_w > edited.width) continue;
        crop_r = int(rng.uniform_int(0, std::uint64_t(edited.height - side_h)));
        crop_c = int(rng.uniform_int(0, std::uint64_t(edited.width - side_w)));
        paste_r = int(rng.uniform_int(0, std::uint64_t(target.height() - side_h)));
        paste_c = int(rng.uniform_int(0, std::uint64_t(target.width() - side_w)));
        placed = true;
    }
    if (!placed) throw SizingError("could not fit a crop inside the edited donor");

    SpliceResult res;
    res.spliced.pixels = target.pixels;
    res.spliced.product_id = target.product_id;
    res.spliced.provenance = target.provenance;
    paste(res.spliced.pixels, crop(edited, crop_r, crop_c, side_h, side_w), paste_r, paste_c);

    res.mask.bits = Grid<std::uint8_t>(target.height(), target.width(), 0);
    for (int r = 0; r < side_h; ++r)
        for (int c = 0; c < side_w; ++c) res.mask.bits.at(paste_r + r, paste_c + c) = 1;

    res.record.donor_product = donor.product_id;
    res.record.target_product = target.product_id;
    res.record.edit = edit;
    res.record.region = {paste_r, paste_c, side_h, side_w};
    res.record.mode =
        donor.product_id == target.product_id ? SpliceMode::intra : SpliceMode::inter;
    return res;
}

// ---------------------------------------------------------------------------
// Dataset blueprints. Edit inventories follow the two spliced-set recipes:
// the first trains the segmentation head, the second is the held-out test mix.

struct DatasetBlueprint {
    std::string set;   // fed | sd1 | sd2
    std::string split = "train";
    int per_op = 200;
    std::uint64_t seed = 0;
    int tile_side = 1024;
    std::vector<int> max_sides; // empty = per-set default
};

inline std::vector<std::string> sd1_op_labels() {
    return {"none",          "rotate",          "resize_1.5",      "resize_2",
            "resize_2.5",    "rotate_resize_1.5", "rotate_resize_2", "rotate_resize_2.5"};
}

inline std::vector<std::string> sd2_op_labels() {
    return {"none",         "gaussian_noise", "laplacian_noise", "average_blur",
            "median_blur",  "rotate_resize",  "speckle_noise"};
}

inline std::vector<int> default_max_sides(const std::string& set) {
    if (set == "sd1") return {128, 256};
    if (set == "sd2") return {128, 160, 192, 224, 256};
    return {128};
}

/// Samples the concrete edit parameters for an operation label.
inline EditDescriptor sample_edit(const std::string& label, Rng& rng) {
    EditDescriptor e;
    e.seed = rng.bits();
    auto angle = [&] { e.params["angle"] = rng.uniform(-45.0, 45.0); };
    if (label == "none") {
        e.kind = EditKind::none;
    } else if (label == "rotate") {
        e.kind = EditKind::rotate;
        angle();
    } else if (label.rfind("resize_", 0) == 0) {
        e.kind = EditKind::resize;
        e.params["factor"] = std::stod(label.substr(7));
    } else if (label.rfind("rotate_resize_", 0) == 0) {
        e.kind = EditKind::rotate_resize;
        angle();
        e.params["factor"] = std::stod(label.substr(14));
    } else if (label == "rotate_resize") {
        e.kind = EditKind::rotate_resize;
        angle();
        double f = rng.uniform(1.0, 1.5);
        while (!(f > 1.0)) f = rng.uniform(1.0, 1.5);
        e.params["factor"] = f;
    } else if (label == "gaussian_noise") {
        e.kind = EditKind::gaussian_noise;
        e.params["variance"] = rng.uniform(0.0, 0.1);
    } else if (label == "laplacian_noise") {
        e.kind = EditKind::laplacian_noise;
        e.params["variance"] = rng.uniform(0.0, 0.1);
    } else if (label == "average_blur") {
        e.kind = EditKind::average_blur;
        e.params["kernel"] = 10.0;
    } else if (label == "median_blur") {
        e.kind = EditKind::median_blur;
        e.params["kernel"] = 5.0;
    } else if (label == "speckle_noise") {
        e.kind = EditKind::speckle_noise;
        e.params["variance"] = rng.uniform(0.0, 0.3);
    } else {
        throw DispatchError("unknown operation label '" + label + "'");
    }
    validate_edit(e);
    return e;
}

struct RecordPlan {
    std::string op_label;
    SpliceMode mode = SpliceMode::inter;
    int max_side = 128;
    int index = 0; // position in the manifest
};

/// Expands a blueprint into per-record plans without touching any tiles.
inline std::vector<RecordPlan> plan_dataset(const DatasetBlueprint& bp) {
    if (bp.set == "fed") return {};
    if (bp.set != "sd1" && bp.set != "sd2")
        throw DispatchError("unknown dataset set '" + bp.set + "'");
    if (bp.per_op < 1) throw ValidationError("per_op must be >= 1");
    const auto labels = bp.set == "sd1" ? sd1_op_labels() : sd2_op_labels();
    const auto sides = bp.max_sides.empty() ? default_max_sides(bp.set) : bp.max_sides;
    for (int s : sides) check_max_side(s);
    Rng rng(derive_seed(bp.seed, 0x91a7));
    std::vector<RecordPlan> plans;
    plans.reserve(labels.size() * bp.per_op);
    int index = 0;
    for (const auto& label : labels) {
        for (int i = 0; i < bp.per_op; ++i) {
            RecordPlan p;
            p.op_label = label;
            // the test mix splits each operation evenly across inter and intra
            p.mode = bp.set == "sd2" && i >= (bp.per_op + 1) / 2 ? SpliceMode::intra
                                                                 : SpliceMode::inter;
            p.max_side = sides[rng.uniform_int(0, sides.size() - 1)];
            p.index = index++;
            plans.push_back(std::move(p));
        }
    }
    return plans;
}

struct ProductTiles {
    std::string product_id;
    std::vector<Tile> tiles;
};

struct PoolSplit {
    std::vector<ProductTiles> fed_sd1; // first half of the products
    std::vector<ProductTiles> sd2;     // second half, never used in training
};

inline PoolSplit split_pool(std::vector<ProductTiles> all) {
    if (all.size() < 2) throw CapacityError("pool split needs at least 2 products");
    PoolSplit s;
    const std::size_t half = all.size() / 2;
    s.fed_sd1.assign(all.begin(), all.begin() + half);
    s.sd2.assign(all.begin() + half, all.end());
    return s;
}

struct FedSd1Tiles {
    std::vector<ProductTiles> fed; // first half of each product's tiles
    std::vector<ProductTiles> sd1; // remaining tiles
};

inline FedSd1Tiles split_fed_sd1(const std::vector<ProductTiles>& products) {
    FedSd1Tiles out;
    for (const auto& p : products) {
        const std::size_t half = p.tiles.size() / 2;
        ProductTiles fed{p.product_id, {p.tiles.begin(), p.tiles.begin() + half}};
        ProductTiles sd1{p.product_id, {p.tiles.begin() + half, p.tiles.end()}};
        out.fed.push_back(std::move(fed));
        out.sd1.push_back(std::move(sd1));
    }
    return out;
}

namespace detail {

inline std::string record_stem(const std::string& set, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%05d", set.c_str(), index);
    return buf;
}

} // namespace detail

/// Materializes a blueprint: picks tiles, fabricates splices, writes payloads
/// under out_dir and returns the manifest (also saved as manifest.jsonl).
/// Per-record seeds derive from (blueprint seed, record index), so the result
/// is byte-stable no matter how many workers run.
inline DatasetManifest build_dataset(const DatasetBlueprint& bp,
                                     const std::vector<ProductTiles>& pool,
                                     const std::filesystem::path& out_dir, int workers = 1) {
    namespace fs = std::filesystem;
    DatasetManifest m;
    m.name = bp.set == "fed" ? "FED" : bp.set == "sd1" ? "SD1" : bp.set == "sd2" ? "SD2" : bp.set;
    m.split = bp.split;
    m.seed = bp.seed;
    fs::create_directories(out_dir);

    if (bp.set == "fed") {
        fs::create_directories(out_dir / "tiles");
        for (const auto& p : pool) {
            for (std::size_t i = 0; i < p.tiles.size(); ++i) {
                const std::string rel =
                    "tiles/" + p.product_id + "_" + std::to_string(i) + ".f32";
                save_tile(p.tiles[i], out_dir / rel);
                m.pristine_tiles.push_back(rel);
            }
        }
        if (m.pristine_tiles.empty()) throw CapacityError("pristine pool is empty");
        save_manifest(m, out_dir / "manifest.jsonl");
        return m;
    }

    const auto plans = plan_dataset(bp);
    if (pool.empty()) throw CapacityError("product pool is empty");
    for (const auto& p : pool)
        if (p.tiles.empty())
            throw CapacityError("product '" + p.product_id + "' contributes no tiles");
    const bool needs_inter =
        std::any_of(plans.begin(), plans.end(),
                    [](const RecordPlan& p) { return p.mode == SpliceMode::inter; });
    if (needs_inter && pool.size() < 2)
        throw CapacityError("inter-splicing needs >= 2 products, pool has " +
                            std::to_string(pool.size()));
    for (const auto& p : pool)
        for (const auto& t : p.tiles)
            if (t.height() < bp.tile_side || t.width() < bp.tile_side)
                throw SizingError("pool tile smaller than blueprint tile_side");

    fs::create_directories(out_dir / "spliced");
    fs::create_directories(out_dir / "masks");
    m.records.resize(plans.size());
    parallel_for(int(plans.size()), workers, [&](int i) {
        const RecordPlan& plan = plans[std::size_t(i)];
        Rng rng(derive_seed(bp.seed, std::uint64_t(plan.index) + 1));
        std::size_t target_prod = rng.uniform_int(0, pool.size() - 1);
        std::size_t donor_prod = target_prod;
        if (plan.mode == SpliceMode::inter) {
            donor_prod = rng.uniform_int(0, pool.size() - 2);
            if (donor_prod >= target_prod) ++donor_prod;
        }
        const auto& donor_tiles = pool[donor_prod].tiles;
        const auto& target_tiles = pool[target_prod].tiles;
        const Tile& donor = donor_tiles[rng.uniform_int(0, donor_tiles.size() - 1)];
        const Tile& target = target_tiles[rng.uniform_int(0, target_tiles.size() - 1)];
        const EditDescriptor edit = sample_edit(plan.op_label, rng);
        SpliceResult res = make_splice(donor, target, edit, plan.max_side, rng.bits());
        const std::string stem = detail::record_stem(bp.set, plan.index);
        res.record.spliced_path = "spliced/" + stem + ".f32";
        res.record.mask_path = "masks/" + stem + ".pgm";
        save_tile(res.spliced, out_dir / res.record.spliced_path);
        save_mask(res.mask, out_dir / res.record.mask_path);
        m.records[std::size_t(i)] = std::move(res.record);
    });
    save_manifest(m, out_dir / "manifest.jsonl");
    return m;
}

} // namespace sarloc
