#pragma once

#include "conres/conv.hpp"
#include "conres/norm.hpp"
#include "conres/ops.hpp"
#include "conres/params.hpp"
#include "conres/upsample.hpp"

namespace conres {

enum class Variant { baseline, res_only, full };
enum class SegMode { binary, multiclass };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::res_only: return "res_only";
        default: return "full";
    }
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "res_only") return Variant::res_only;
    if (s == "full") return Variant::full;
    throw ConfigError("unknown variant '" + s + "' (expected baseline|res_only|full)");
}

inline std::string to_string(SegMode m) { return m == SegMode::binary ? "binary" : "multiclass"; }

inline SegMode seg_mode_from_string(const std::string& s) {
    if (s == "binary") return SegMode::binary;
    if (s == "multiclass") return SegMode::multiclass;
    throw ConfigError("unknown mode '" + s + "' (expected binary|multiclass)");
}

// Dual-decoder segmentation network: a shared five-stage residual encoder
// that downsamples to 1/8 resolution, a segmentation decoder, and a second
// decoder that predicts inter-slice residual masks and feeds them back as an
// attention gate. `variant` drops the residual decoder entirely (baseline) or
// keeps it without the attention gate (res_only).
struct ModelConfig {
    std::int64_t in_channels = 1;
    std::int64_t base_channels = 8;
    Variant variant = Variant::full;
    ResidualAxis residual_axis = ResidualAxis::axial;
    SegMode mode = SegMode::binary;
    std::int64_t out_channels = 1;  // binary mode: independent sigmoid targets
    std::int64_t classes = 1;       // multiclass mode: foreground classes
    std::int64_t groups = 0;        // 0 -> min(8, base_channels)
    std::int64_t kernel_size = 3;   // 1 is allowed for axis-equivariance tests
    std::int64_t dilation_last_stage = 2;

    std::int64_t effective_groups() const {
        return groups > 0 ? groups : std::min<std::int64_t>(8, base_channels);
    }
    std::int64_t seg_out_channels() const { return mode == SegMode::binary ? out_channels : classes + 1; }
    std::int64_t res_channels() const { return mode == SegMode::binary ? out_channels : classes; }

    void validate() const {
        if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
        if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
        if (out_channels < 1) throw ConfigError("out_channels must be >= 1");
        if (classes < 1) throw ConfigError("classes must be >= 1");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            throw ConfigError("kernel_size must be odd and >= 1, got " + std::to_string(kernel_size));
        if (dilation_last_stage < 1) throw ConfigError("dilation_last_stage must be >= 1");
        if (base_channels % effective_groups() != 0)
            throw ConfigError("groups=" + std::to_string(effective_groups()) +
                              " must divide base_channels=" + std::to_string(base_channels));
    }
};

template <typename T>
struct ForwardOutput {
    std::int64_t seg_logits = -1;
    std::int64_t p_seg = -1;
    // residual predictions at full resolution: [final, 1/2-scale head, 1/4-scale head]
    std::vector<std::int64_t> res_logits;
    std::vector<std::int64_t> p_res;
    std::int64_t bottleneck = -1;           // encoder output tap
    std::vector<std::array<std::int64_t, 2>> module_taps;  // (F, O_seg) per decoder module
};

namespace model_detail {

inline constexpr double kNormEps = 1e-5;
inline constexpr double kWsEps = 1e-5;

// One code path describes the architecture. In init mode it creates
// parameters (g == nullptr); in forward mode it consumes them and emits graph
// nodes. Keeping a single walk guarantees the parameter name set is a pure
// function of the config.
template <typename T>
struct Wiring {
    const ModelConfig& cfg;
    ParamDict<T>* init = nullptr;
    Rng* rng = nullptr;
    Graph<T>* g = nullptr;
    const std::map<std::string, std::int64_t>* pid = nullptr;

    bool forward_mode() const { return g != nullptr; }

    std::int64_t lookup(const std::string& name) const {
        auto it = pid->find(name);
        if (it == pid->end()) throw UsageError("missing parameter node: " + name);
        return it->second;
    }

    // weighted layer: (standardized) conv, then optional group norm and ReLU
    std::int64_t conv(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t k,
                      std::int64_t stride, std::int64_t dilation, bool gn, bool act, std::int64_t x) {
        const std::int64_t per_channel = cin * k * k * k;
        const bool ws = gn && per_channel >= 2;
        if (!forward_mode()) {
            const double std_dev = std::sqrt(2.0 / static_cast<double>(per_channel));
            init->add(name + ".w", random_normal<T>({cout, cin, k, k, k}, *rng, 0.0, std_dev));
            init->add(name + ".b", Tensor<T>({cout}));
            if (gn) {
                init->add(name + ".gn.g", Tensor<T>::full({cout}, T(1)));
                init->add(name + ".gn.b", Tensor<T>({cout}));
            }
            return -1;
        }
        ConvSpec sp;
        sp.in_channels = cin;
        sp.out_channels = cout;
        sp.kernel = {k, k, k};
        sp.stride = {stride, stride, stride};
        sp.dilation = {dilation, dilation, dilation};
        const std::int64_t pad = dilation * (k - 1) / 2;
        sp.pad = {pad, pad, pad};
        std::int64_t w = lookup(name + ".w");
        if (ws) w = ops::weight_standardize(*g, w, static_cast<T>(kWsEps));
        std::int64_t y = ops::conv3d(*g, x, w, lookup(name + ".b"), sp);
        if (gn)
            y = ops::group_norm(*g, y, cfg.effective_groups(), lookup(name + ".gn.g"), lookup(name + ".gn.b"),
                                static_cast<T>(kNormEps));
        if (act) y = ops::relu(*g, y);
        return y;
    }

    // two conv+GN layers and a skip, ReLU after the join; 1x1x1 projection
    // when the channel counts differ
    std::int64_t resblock(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t dilation,
                          std::int64_t x) {
        std::int64_t y = conv(name + ".conv1", cin, cout, cfg.kernel_size, 1, dilation, true, true, x);
        y = conv(name + ".conv2", cout, cout, cfg.kernel_size, 1, dilation, true, false, y);
        std::int64_t skip = x;
        if (cin != cout) skip = conv(name + ".skip", cin, cout, 1, 1, 1, false, false, x);
        if (!forward_mode()) return -1;
        return ops::relu(*g, ops::add(*g, y, skip));
    }

    // x2 trilinear upsampling followed by a 1x1x1 channel-halving projection
    std::int64_t up_proj(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t x) {
        const std::int64_t up = forward_mode() ? ops::upsample_trilinear(*g, x, {2, 2, 2}) : -1;
        return conv(name, cin, cout, 1, 1, 1, true, true, up);
    }
};

template <typename T>
ForwardOutput<T> walk(Wiring<T>& w, std::int64_t x) {
    const ModelConfig& cfg = w.cfg;
    const std::int64_t b = cfg.base_channels;
    const std::int64_t k = cfg.kernel_size;
    const bool fwd = w.forward_mode();
    const bool with_res = cfg.variant != Variant::baseline;

    // encoder: stem + block, then three stride-2 stages, then a dilated
    // stage that holds 1/8 resolution
    std::int64_t t = w.conv("enc.stem", cfg.in_channels, b, k, 1, 1, true, true, x);
    const std::int64_t skip1 = w.resblock("enc.b0", b, b, 1, t);
    t = w.conv("enc.down1", b, 2 * b, k, 2, 1, true, true, skip1);
    t = w.resblock("enc.b1a", 2 * b, 2 * b, 1, t);
    const std::int64_t skip2 = w.resblock("enc.b1b", 2 * b, 2 * b, 1, t);
    t = w.conv("enc.down2", 2 * b, 4 * b, k, 2, 1, true, true, skip2);
    t = w.resblock("enc.b2a", 4 * b, 4 * b, 1, t);
    const std::int64_t skip3 = w.resblock("enc.b2b", 4 * b, 4 * b, 1, t);
    t = w.conv("enc.down3", 4 * b, 8 * b, k, 2, 1, true, true, skip3);
    t = w.resblock("enc.b3a", 8 * b, 8 * b, 1, t);
    t = w.resblock("enc.b3b", 8 * b, 8 * b, 1, t);
    t = w.resblock("enc.b4a", 8 * b, 8 * b, cfg.dilation_last_stage, t);
    const std::int64_t bottleneck = w.resblock("enc.b4b", 8 * b, 8 * b, cfg.dilation_last_stage, t);

    const std::int64_t dim = residual_axis_dim(cfg.residual_axis, 5);
    const std::int64_t r_ch = cfg.res_channels();
    const std::array<std::int64_t, 3> skips{skip3, skip2, skip1};

    std::int64_t seg_prev = bottleneck;
    std::int64_t res_prev = -1;
    std::int64_t ds_quarter = -1, ds_half = -1;
    std::vector<std::array<std::int64_t, 2>> taps;

    for (int s = 1; s <= 3; ++s) {
        const std::int64_t c_prev = (8 * b) >> (s - 1);
        const std::int64_t c_s = c_prev / 2;
        const std::string m = "mod" + std::to_string(s);

        const std::int64_t i_seg = w.up_proj("dec.seg.proj" + std::to_string(s), c_prev, c_s, seg_prev);
        const std::int64_t fused = fwd ? ops::add(*w.g, i_seg, skips[static_cast<std::size_t>(s - 1)]) : -1;
        const std::int64_t f = w.conv(m + ".f", c_s, c_s, k, 1, 1, true, true, fused);

        std::int64_t o_seg = f;
        if (with_res) {
            const std::int64_t gfeat = fwd ? ops::slicewise_abs_diff(*w.g, ops::sigmoid(*w.g, f), dim) : -1;
            const std::int64_t g1 = w.conv(m + ".g1", c_s, c_s, k, 1, 1, true, true, gfeat);
            std::int64_t res_in = g1;
            if (s > 1) {
                const std::int64_t i_res = w.up_proj("dec.res.proj" + std::to_string(s), c_prev, c_s, res_prev);
                if (fwd) res_in = ops::add(*w.g, g1, i_res);
            }
            // no ReLU on the output layer: the attention gate needs the
            // residual features signed
            const std::int64_t o_res = w.conv(m + ".g2", c_s, c_s, k, 1, 1, true, false, res_in);
            if (s < 3) {
                const std::int64_t ds = w.conv(m + ".ds", c_s, r_ch, 1, 1, 1, false, false, o_res);
                (s == 1 ? ds_quarter : ds_half) = ds;
            }
            if (cfg.variant == Variant::full && fwd)
                o_seg = ops::mul(*w.g, f, ops::scalar_add(*w.g, ops::sigmoid(*w.g, o_res), T(1)));
            res_prev = o_res;
        }
        if (fwd) taps.push_back({f, o_seg});
        seg_prev = o_seg;
    }

    const std::int64_t seg_logits = w.conv("head.seg", b, cfg.seg_out_channels(), 1, 1, 1, false, false, seg_prev);
    std::int64_t res_final = -1;
    if (with_res) res_final = w.conv("head.res", b, r_ch, 1, 1, 1, false, false, res_prev);

    ForwardOutput<T> out;
    if (!fwd) return out;
    out.bottleneck = bottleneck;
    out.module_taps = std::move(taps);
    out.seg_logits = seg_logits;
    out.p_seg =
        cfg.mode == SegMode::binary ? ops::sigmoid(*w.g, seg_logits) : ops::softmax(*w.g, seg_logits, 1);
    if (with_res) {
        out.res_logits = {res_final, ops::upsample_trilinear(*w.g, ds_half, {2, 2, 2}),
                          ops::upsample_trilinear(*w.g, ds_quarter, {4, 4, 4})};
        for (const auto id : out.res_logits) out.p_res.push_back(ops::sigmoid(*w.g, id));
    }
    return out;
}

}  // namespace model_detail

// Deterministic He-style initialization; the same (config, seed) always
// yields byte-identical parameters.
template <typename T>
ParamDict<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamDict<T> params;
    Rng rng(mix_seed(seed, 0x6d6f64656cull));
    model_detail::Wiring<T> w{cfg, &params, &rng, nullptr, nullptr};
    model_detail::walk<T>(w, -1);
    return params;
}

template <typename T>
std::map<std::string, std::int64_t> register_params(Graph<T>& g, const ParamDict<T>& params) {
    std::map<std::string, std::int64_t> ids;
    for (const auto& [name, tensor] : params.items()) ids[name] = g.parameter(name, tensor);
    return ids;
}

template <typename T>
ForwardOutput<T> forward(Graph<T>& g, const ModelConfig& cfg, const std::map<std::string, std::int64_t>& pids,
                         std::int64_t x) {
    cfg.validate();
    const Shape shape = g.value(x).shape;
    if (shape.size() != 5)
        throw ValidationError("forward: input must be [N,C,S,H,W], got " + shape_str(shape));
    if (shape[1] != cfg.in_channels)
        throw ValidationError("forward: input has " + std::to_string(shape[1]) + " channels, config wants " +
                              std::to_string(cfg.in_channels));
    for (int a = 2; a < 5; ++a)
        if (shape[static_cast<std::size_t>(a)] % 8 != 0)
            throw ValidationError("forward: spatial extents must be divisible by 8, got " + shape_str(shape));
    model_detail::Wiring<T> w{cfg, nullptr, nullptr, &g, &pids};
    return model_detail::walk<T>(w, x);
}

struct ParamStats {
    std::int64_t count = 0;
    std::int64_t serialized_bytes = 0;
};

template <typename T>
ParamStats count_params(const ParamDict<T>& params) {
    ParamStats st;
    st.count = params.total_elements();
    st.serialized_bytes = st.count * static_cast<std::int64_t>(sizeof(float));
    return st;
}

}  // namespace conres
