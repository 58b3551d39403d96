#pragma once

#include <json.hpp>

#include "conres/config.hpp"
#include "conres/volume_io.hpp"

namespace conres {

// Checkpoint container: 8-byte magic "CRESCKP1", u64 little-endian manifest
// length, JSON manifest (config, iteration, metric snapshot, ordered
// parameter names + shapes), then the f32 parameter payloads in manifest
// order, then the Adam moments (m then v per parameter) in the same order.
inline constexpr char kCheckpointMagic[8] = {'C', 'R', 'E', 'S', 'C', 'K', 'P', '1'};
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    TrainConfig config;
    std::int64_t iteration = 0;
    nlohmann::json metric;  // best-so-far snapshot; may be empty
    ParamDict<float> params;
    std::vector<Tensor<float>> adam_m;
    std::vector<Tensor<float>> adam_v;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    if (ck.adam_m.size() != ck.params.size() || ck.adam_v.size() != ck.params.size())
        throw UsageError("checkpoint moments must align with the parameter list");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);

    nlohmann::json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["config"] = train_config_to_kv(ck.config);
    manifest["iteration"] = ck.iteration;
    manifest["metric"] = ck.metric.is_null() ? nlohmann::json::object() : ck.metric;
    auto params = nlohmann::json::array();
    for (const auto& [name, tensor] : ck.params.items()) params.push_back({{"name", name}, {"shape", tensor.shape}});
    manifest["params"] = params;
    const std::string ms = manifest.dump();

    os.write(kCheckpointMagic, 8);
    io_detail::write_u64(os, ms.size());
    os.write(ms.data(), static_cast<std::streamsize>(ms.size()));
    for (const auto& [name, tensor] : ck.params.items())
        os.write(reinterpret_cast<const char*>(tensor.data.data()),
                 static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        os.write(reinterpret_cast<const char*>(ck.adam_m[i].data.data()),
                 static_cast<std::streamsize>(ck.adam_m[i].data.size() * sizeof(float)));
        os.write(reinterpret_cast<const char*>(ck.adam_v[i].data.data()),
                 static_cast<std::streamsize>(ck.adam_v[i].data.size() * sizeof(float)));
    }
    if (!os) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw IoError("bad magic in " + path);

    const std::uint64_t mlen = io_detail::read_u64(is, "manifest length");
    std::string ms(mlen, '\0');
    io_detail::read_exact(is, ms.data(), mlen, "manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(ms);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest JSON in " + path + ": " + e.what());
    }
    if (manifest.value("version", -1) != kCheckpointVersion)
        throw IoError("version mismatch in " + path + ": expected " + std::to_string(kCheckpointVersion) +
                      ", found " + manifest.value("version", nlohmann::json()).dump());

    Checkpoint ck;
    ck.config = train_config_from_kv(manifest.at("config").get<KvMap>());
    ck.iteration = manifest.at("iteration").get<std::int64_t>();
    ck.metric = manifest.value("metric", nlohmann::json::object());

    for (const auto& entry : manifest.at("params")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<Shape>();
        Tensor<float> t(shape);
        io_detail::read_exact(is, t.data.data(), t.data.size() * sizeof(float), ("param " + name).c_str());
        ck.params.add(name, std::move(t));
    }
    for (const auto& [name, tensor] : ck.params.items()) {
        Tensor<float> m(tensor.shape), v(tensor.shape);
        io_detail::read_exact(is, m.data.data(), m.data.size() * sizeof(float), ("moment m " + name).c_str());
        io_detail::read_exact(is, v.data.data(), v.data.size() * sizeof(float), ("moment v " + name).c_str());
        ck.adam_m.push_back(std::move(m));
        ck.adam_v.push_back(std::move(v));
    }
    char probe;
    is.read(&probe, 1);
    if (!is.eof()) throw IoError("payload size mismatch: trailing bytes in " + path);
    return ck;
}

// The loaded name set must exactly match the model the caller built.
inline void validate_checkpoint_params(const Checkpoint& ck, const ParamDict<float>& expected) {
    const auto a = ck.params.names();
    const auto b = expected.names();
    if (a != b) {
        std::string detail;
        for (const auto& n : b)
            if (!ck.params.contains(n)) {
                detail = " (missing '" + n + "')";
                break;
            }
        if (detail.empty())
            for (const auto& n : a)
                if (!expected.contains(n)) {
                    detail = " (unexpected '" + n + "')";
                    break;
                }
        throw IoError("name set mismatch between checkpoint and model" + detail);
    }
    for (const auto& [name, tensor] : expected.items())
        if (ck.params.at(name).shape != tensor.shape)
            throw IoError("name set mismatch: shape of '" + name + "' differs");
}

}  // namespace conres
