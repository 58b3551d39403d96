#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "conres/model.hpp"

namespace conres {

struct TrainConfig {
    ModelConfig model;
    std::int64_t iters = 500;
    std::int64_t batch_size = 2;
    double lr0 = 1e-4;
    double weight_decay = 5e-4;
    double lambda = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    std::array<std::int64_t, 3> patch{16, 32, 32};
    double fg_bias = 0.5;
    std::int64_t eval_interval = 0;  // 0: evaluate and checkpoint only at the end
    bool mean_reduction = false;     // BCE terms averaged per voxel instead of summed
    bool determinism = true;         // forces single-threaded GEMM
    std::int64_t threads = 1;

    void validate() const {
        model.validate();
        if (iters < 1) throw ConfigError("iters must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (lr0 <= 0) throw ConfigError("lr0 must be > 0");
        if (lambda < 0) throw ConfigError("lambda must be >= 0");
        if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
        if (fg_bias < 0 || fg_bias > 1) throw ConfigError("fg_bias must be in [0,1]");
        if (eval_interval < 0) throw ConfigError("eval_interval must be >= 0");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        for (const auto p : patch)
            if (p < 8 || p % 8 != 0) throw ConfigError("patch extents must be positive multiples of 8");
    }
};

using KvMap = std::map<std::string, std::string>;

namespace config_detail {

inline std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_i64(std::int64_t v) { return std::to_string(v); }

inline double parse_f64(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a number");
    }
}

inline std::int64_t parse_i64(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as an integer");
    }
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a bool");
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace config_detail

inline KvMap train_config_to_kv(const TrainConfig& c) {
    using namespace config_detail;
    KvMap kv;
    kv["in_channels"] = fmt_i64(c.model.in_channels);
    kv["base_channels"] = fmt_i64(c.model.base_channels);
    kv["variant"] = to_string(c.model.variant);
    kv["residual_axis"] = to_string(c.model.residual_axis);
    kv["mode"] = to_string(c.model.mode);
    kv["out_channels"] = fmt_i64(c.model.out_channels);
    kv["classes"] = fmt_i64(c.model.classes);
    kv["groups"] = fmt_i64(c.model.groups);
    kv["kernel_size"] = fmt_i64(c.model.kernel_size);
    kv["dilation_last_stage"] = fmt_i64(c.model.dilation_last_stage);
    kv["iters"] = fmt_i64(c.iters);
    kv["batch_size"] = fmt_i64(c.batch_size);
    kv["lr0"] = fmt_f64(c.lr0);
    kv["weight_decay"] = fmt_f64(c.weight_decay);
    kv["lambda"] = fmt_f64(c.lambda);
    kv["beta1"] = fmt_f64(c.beta1);
    kv["beta2"] = fmt_f64(c.beta2);
    kv["adam_eps"] = fmt_f64(c.adam_eps);
    kv["seed"] = std::to_string(c.seed);
    kv["patch_s"] = fmt_i64(c.patch[0]);
    kv["patch_h"] = fmt_i64(c.patch[1]);
    kv["patch_w"] = fmt_i64(c.patch[2]);
    kv["fg_bias"] = fmt_f64(c.fg_bias);
    kv["eval_interval"] = fmt_i64(c.eval_interval);
    kv["mean_reduction"] = c.mean_reduction ? "true" : "false";
    kv["determinism"] = c.determinism ? "true" : "false";
    kv["threads"] = fmt_i64(c.threads);
    return kv;
}

// Unknown keys are rejected so typos cannot silently fall back to defaults.
inline TrainConfig train_config_from_kv(const KvMap& kv, TrainConfig base = {}) {
    using namespace config_detail;
    for (const auto& [key, value] : kv) {
        if (key == "in_channels") base.model.in_channels = parse_i64(key, value);
        else if (key == "base_channels") base.model.base_channels = parse_i64(key, value);
        else if (key == "variant") base.model.variant = variant_from_string(value);
        else if (key == "residual_axis") base.model.residual_axis = residual_axis_from_string(value);
        else if (key == "mode") base.model.mode = seg_mode_from_string(value);
        else if (key == "out_channels") base.model.out_channels = parse_i64(key, value);
        else if (key == "classes") base.model.classes = parse_i64(key, value);
        else if (key == "groups") base.model.groups = parse_i64(key, value);
        else if (key == "kernel_size") base.model.kernel_size = parse_i64(key, value);
        else if (key == "dilation_last_stage") base.model.dilation_last_stage = parse_i64(key, value);
        else if (key == "iters") base.iters = parse_i64(key, value);
        else if (key == "batch_size") base.batch_size = parse_i64(key, value);
        else if (key == "lr0") base.lr0 = parse_f64(key, value);
        else if (key == "weight_decay") base.weight_decay = parse_f64(key, value);
        else if (key == "lambda") base.lambda = parse_f64(key, value);
        else if (key == "beta1") base.beta1 = parse_f64(key, value);
        else if (key == "beta2") base.beta2 = parse_f64(key, value);
        else if (key == "adam_eps") base.adam_eps = parse_f64(key, value);
        else if (key == "seed") base.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "patch_s") base.patch[0] = parse_i64(key, value);
        else if (key == "patch_h") base.patch[1] = parse_i64(key, value);
        else if (key == "patch_w") base.patch[2] = parse_i64(key, value);
        else if (key == "fg_bias") base.fg_bias = parse_f64(key, value);
        else if (key == "eval_interval") base.eval_interval = parse_i64(key, value);
        else if (key == "mean_reduction") base.mean_reduction = parse_bool(key, value);
        else if (key == "determinism") base.determinism = parse_bool(key, value);
        else if (key == "threads") base.threads = parse_i64(key, value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return base;
}

// Flat "key = value" text; '#' starts a comment.
inline KvMap parse_config_text(std::istream& is, const std::string& origin) {
    using namespace config_detail;
    KvMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

inline KvMap parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    return parse_config_text(is, path);
}

// Overrides of the form "key=value" (repeated --set flags).
inline void apply_overrides(KvMap& kv, const std::vector<std::string>& sets) {
    using namespace config_detail;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + s + "' must be key=value");
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
}

// Snapshot of the fully resolved configuration, written into every run's
// output directory; sorted keys keep the bytes reproducible.
inline void write_config_snapshot(const std::string& path, const KvMap& kv) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write config snapshot: " + path);
    for (const auto& [key, value] : kv) os << key << " = " << value << "\n";
}

}  // namespace conres
