#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/raster.hpp"
#include "sarloc/tensornet/net.hpp"

namespace sarloc {

inline std::uint64_t fnv1a(const void* bytes, std::size_t count) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < count; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline ordered_json layer_to_json(const LayerSpec& l) {
    ordered_json j;
    j["kind"] = layer_kind_name(l.kind);
    if (l.kind == LayerKind::conv2d) {
        j["out_ch"] = l.out_ch;
        j["k"] = l.k;
        j["bias"] = l.bias;
        j["init_scale"] = l.init_scale;
    } else if (l.kind == LayerKind::concat) {
        j["skip"] = l.skip;
    }
    return j;
}

inline LayerSpec layer_from_json(const ordered_json& j) {
    LayerSpec l;
    l.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    if (l.kind == LayerKind::conv2d) {
        l.out_ch = j.at("out_ch").get<int>();
        l.k = j.at("k").get<int>();
        l.bias = j.at("bias").get<bool>();
        l.init_scale = j.value("init_scale", 1.0);
    } else if (l.kind == LayerKind::concat) {
        l.skip = j.at("skip").get<int>();
    }
    return l;
}

namespace detail {

inline void append_block(std::vector<float>& flat, const std::vector<float>& v) {
    flat.insert(flat.end(), v.begin(), v.end());
}

inline void take_block(const std::vector<float>& flat, std::size_t& pos, std::vector<float>& v) {
    if (pos + v.size() > flat.size())
        throw CorruptionError("parameter blob shorter than the architecture requires");
    std::copy_n(flat.begin() + std::ptrdiff_t(pos), v.size(), v.begin());
    pos += v.size();
}

} // namespace detail

/// Model directory layout: arch.json (architecture + integrity hash) and
/// params.f32 (all parameters flattened in layer order).
inline void save_model(const Network<float>& net, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<float> flat;
    flat.reserve(net.param_count());
    for (const auto& p : net.params) {
        detail::append_block(flat, p.w);
        detail::append_block(flat, p.b);
        detail::append_block(flat, p.gamma);
        detail::append_block(flat, p.beta);
        detail::append_block(flat, p.run_mean);
        detail::append_block(flat, p.run_var);
    }
    {
        std::ofstream f(dir / "params.f32", std::ios::binary);
        if (!f) throw IoError("cannot write " + (dir / "params.f32").string());
        f.write(reinterpret_cast<const char*>(flat.data()),
                std::streamsize(flat.size() * sizeof(float)));
    }
    ordered_json j;
    j["format"] = "sarloc-model";
    j["in_channels"] = net.spec.in_channels;
    j["layers"] = ordered_json::array();
    for (const auto& l : net.spec.layers) j["layers"].push_back(layer_to_json(l));
    j["dtype"] = "f32le";
    j["param_count"] = flat.size();
    j["fnv1a"] = hex64(fnv1a(flat.data(), flat.size() * sizeof(float)));
    std::ofstream f(dir / "arch.json");
    if (!f) throw IoError("cannot write " + (dir / "arch.json").string());
    f << j.dump(2) << "\n";
}

inline Network<float> load_model(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path arch = dir / "arch.json";
    const fs::path blob = dir / "params.f32";
    if (!fs::exists(arch) || !fs::exists(blob))
        throw ModelError("model directory " + dir.string() + " is missing arch.json or params.f32");
    ordered_json j;
    {
        std::ifstream f(arch);
        try {
            f >> j;
        } catch (const std::exception& e) {
            throw FormatError("bad arch.json in " + dir.string() + ": " + e.what());
        }
    }
    if (j.value("format", "") != "sarloc-model")
        throw FormatError("not a model descriptor: " + arch.string());
    if (j.at("dtype").get<std::string>() != "f32le")
        throw FormatError("unsupported model dtype '" + j.at("dtype").get<std::string>() + "'");

    NetworkSpec spec;
    spec.in_channels = j.at("in_channels").get<int>();
    for (const auto& lj : j.at("layers")) spec.layers.push_back(layer_from_json(lj));
    Network<float> net = Network<float>::make(spec, 0);

    std::vector<float> flat;
    {
        std::ifstream f(blob, std::ios::binary | std::ios::ate);
        const std::streamoff bytes = f.tellg();
        const std::streamoff want =
            std::streamoff(j.at("param_count").get<std::size_t>()) * std::streamoff(sizeof(float));
        if (bytes != want)
            throw CorruptionError("params.f32 has " + std::to_string(bytes) +
                                  " bytes, descriptor implies " + std::to_string(want));
        flat.resize(std::size_t(want) / sizeof(float));
        f.seekg(0);
        f.read(reinterpret_cast<char*>(flat.data()), want);
        if (!f) throw IoError("read failed: " + blob.string());
    }
    const std::string h = hex64(fnv1a(flat.data(), flat.size() * sizeof(float)));
    if (h != j.at("fnv1a").get<std::string>())
        throw CorruptionError("parameter blob hash mismatch in " + dir.string());
    if (net.param_count() != flat.size())
        throw CorruptionError("architecture expects " + std::to_string(net.param_count()) +
                              " parameters, blob holds " + std::to_string(flat.size()));
    std::size_t pos = 0;
    for (auto& p : net.params) {
        detail::take_block(flat, pos, p.w);
        detail::take_block(flat, pos, p.b);
        detail::take_block(flat, pos, p.gamma);
        detail::take_block(flat, pos, p.beta);
        detail::take_block(flat, pos, p.run_mean);
        detail::take_block(flat, pos, p.run_var);
    }
    return net;
}

/// Content identity of a model, used to stamp fingerprints.
inline std::string model_id(const Network<float>& net) {
    std::vector<float> flat;
    flat.reserve(net.param_count());
    for (const auto& p : net.params) {
        detail::append_block(flat, p.w);
        detail::append_block(flat, p.b);
        detail::append_block(flat, p.gamma);
        detail::append_block(flat, p.beta);
        detail::append_block(flat, p.run_mean);
        detail::append_block(flat, p.run_var);
    }
    return "fnv1a-" + hex64(fnv1a(flat.data(), flat.size() * sizeof(float)));
}

} // namespace sarloc
