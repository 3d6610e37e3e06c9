#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/fingerprint.hpp"
#include "sarloc/maskest.hpp"
#include "sarloc/parallel.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/splicer.hpp"

namespace sarloc {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline ConfusionCounts confusion(const TamperMask& est, const TamperMask& truth) {
    if (!est.bits.same_shape(truth.bits))
        throw ValidationError("estimate and truth mask dims differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < est.bits.data.size(); ++i) {
        const bool e = est.bits.data[i] != 0;
        const bool t = truth.bits.data[i] != 0;
        if (e && t)
            ++c.tp;
        else if (e && !t)
            ++c.fp;
        else if (!e && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

/// Mean of sensitivity and specificity. Requires both classes present.
inline double balanced_accuracy(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0)
        throw UndefinedMetricError("balanced accuracy undefined: no positive pixels in truth");
    if (c.tn + c.fp == 0)
        throw UndefinedMetricError("balanced accuracy undefined: no negative pixels in truth");
    return 0.5 * (double(c.tp) / double(c.tp + c.fn) + double(c.tn) / double(c.tn + c.fp));
}

inline double iou(const ConfusionCounts& c) {
    if (c.tp + c.fp + c.fn == 0)
        throw UndefinedMetricError("IoU undefined: both masks are empty");
    return double(c.tp) / double(c.tp + c.fp + c.fn);
}

/// Label an edit for report rows. SD1 rows separate the fixed resize factors;
/// elsewhere the kind name is enough.
inline std::string operation_label(const EditDescriptor& e, const std::string& dataset) {
    std::string set = dataset;
    std::transform(set.begin(), set.end(), set.begin(),
                   [](unsigned char ch) { return char(std::tolower(ch)); });
    std::string label = edit_kind_name(e.kind);
    if (set == "sd1" &&
        (e.kind == EditKind::resize || e.kind == EditKind::rotate_resize)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", e.param("factor"));
        label += "_";
        label += buf;
    }
    return label;
}

struct RecordDetail {
    std::size_t record_index = 0;
    std::string operation;
    std::string scenario;
    std::string method;
    std::string extractor;
    double iou = 0.0;
    double ba = 0.0;
    bool ok = false;
    std::string error;
};

struct EvalRow {
    std::string operation;
    std::string scenario;
    std::string method;
    std::string extractor;
    double mean_iou = 0.0;
    double mean_ba = 0.0;
    int n = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;        // sorted by (operation, scenario, method, extractor)
    std::vector<RecordDetail> detail; // record-major, method order as configured
    int evaluated = 0;                // detail entries that scored
    int failed = 0;                   // detail entries that errored
};

struct ExperimentConfig {
    std::vector<std::string> methods{"gmm"};
    int clusters = 7;
    double tau = 0.5;
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Scores every manifest record with every configured method. Failures are
/// recorded per entry and excluded from the means; the run keeps going.
inline EvalReport run_experiment(const DatasetManifest& man,
                                 const std::filesystem::path& dataset_dir,
                                 Network<float>& extractor, Network<float>* unet,
                                 const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw ConfigError("no mask methods configured");
    for (const auto& m : cfg.methods) {
        if (m != "kmeans" && m != "gmm" && m != "unet")
            throw DispatchError("unknown mask method '" + m + "'");
        if (m == "unet" && unet == nullptr)
            throw ConfigError("unet method requested without a segmentation model");
    }
    const std::string extractor_id = model_id(extractor);

    EvalReport rep;
    const std::size_t n_rec = man.records.size();
    const std::size_t n_meth = cfg.methods.size();
    rep.detail.assign(n_rec * n_meth, RecordDetail{});

    parallel_for(int(n_rec), cfg.workers, [&](int ri_) {
        const std::size_t ri = std::size_t(ri_);
        const SpliceRecord& rec = man.records[ri];
        const std::string op = operation_label(rec.edit, man.name);
        const std::string scen = mode_name(rec.mode);
        for (std::size_t mi = 0; mi < n_meth; ++mi) {
            RecordDetail& d = rep.detail[ri * n_meth + mi];
            d.record_index = ri;
            d.operation = op;
            d.scenario = scen;
            d.method = cfg.methods[mi];
            d.extractor = extractor_id;
        }
        Fingerprint fp;
        TamperMask truth;
        try {
            const Tile tile = load_tile(dataset_dir / rec.spliced_path);
            truth = load_mask(dataset_dir / rec.mask_path);
            fp = extract(extractor, normalize(tile));
        } catch (const std::exception& e) {
            for (std::size_t mi = 0; mi < n_meth; ++mi)
                rep.detail[ri * n_meth + mi].error = e.what();
            return;
        }
        for (std::size_t mi = 0; mi < n_meth; ++mi) {
            RecordDetail& d = rep.detail[ri * n_meth + mi];
            try {
                TamperMask est;
                if (cfg.methods[mi] == "unet")
                    est = unet_estimate(*unet, fp, cfg.tau).mask;
                else
                    est = estimate_mask_clustering(fp, cfg.methods[mi], cfg.clusters,
                                                   derive_seed(cfg.seed, ri));
                const ConfusionCounts c = confusion(est, truth);
                d.iou = iou(c);
                d.ba = balanced_accuracy(c);
                d.ok = true;
            } catch (const std::exception& e) {
                d.error = e.what();
            }
        }
    });

    std::map<std::tuple<std::string, std::string, std::string, std::string>,
             std::tuple<double, double, int>>
        cells;
    for (const RecordDetail& d : rep.detail) {
        if (!d.ok) {
            ++rep.failed;
            continue;
        }
        ++rep.evaluated;
        auto& [si, sb, n] = cells[{d.operation, d.scenario, d.method, d.extractor}];
        si += d.iou;
        sb += d.ba;
        ++n;
    }
    for (const auto& [key, acc] : cells) {
        EvalRow row;
        std::tie(row.operation, row.scenario, row.method, row.extractor) = key;
        row.mean_iou = std::get<0>(acc) / std::get<2>(acc);
        row.mean_ba = std::get<1>(acc) / std::get<2>(acc);
        row.n = std::get<2>(acc);
        rep.rows.push_back(row);
    }
    return rep;
}

inline void save_report(const EvalReport& rep, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / "report.csv");
        if (!csv) throw IoError("cannot write " + (out_dir / "report.csv").string());
        csv << "operation,scenario,method,extractor,iou,ba,n\n";
        char buf[64];
        for (const EvalRow& r : rep.rows) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.mean_iou, r.mean_ba);
            csv << r.operation << ',' << r.scenario << ',' << r.method << ',' << r.extractor
                << ',' << buf << ',' << r.n << '\n';
        }
    }
    ordered_json j;
    j["evaluated"] = rep.evaluated;
    j["failed"] = rep.failed;
    j["records"] = ordered_json::array();
    for (const RecordDetail& d : rep.detail) {
        ordered_json r;
        r["record"] = d.record_index;
        r["operation"] = d.operation;
        r["scenario"] = d.scenario;
        r["method"] = d.method;
        r["extractor"] = d.extractor;
        r["ok"] = d.ok;
        if (d.ok) {
            r["iou"] = d.iou;
            r["ba"] = d.ba;
        } else {
            r["error"] = d.error;
        }
        j["records"].push_back(std::move(r));
    }
    std::ofstream js(out_dir / "detail.json");
    if (!js) throw IoError("cannot write " + (out_dir / "detail.json").string());
    js << j.dump(2) << '\n';
}

} // namespace sarloc
