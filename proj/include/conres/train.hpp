#pragma once

#include <filesystem>
#include <optional>

#include "conres/checkpoint.hpp"
#include "conres/losses.hpp"
#include "conres/metrics.hpp"
#include "conres/model.hpp"

extern "C" void openblas_set_num_threads(int);

namespace conres {

inline void set_compute_threads(std::int64_t n) { openblas_set_num_threads(static_cast<int>(std::max<std::int64_t>(1, n))); }

// lr0 * (1 - t/T)^0.9
inline double poly_lr(double lr0, std::int64_t t, std::int64_t total) {
    if (total < 1) throw UsageError("poly_lr: total iterations must be >= 1");
    if (t < 0 || t > total) throw UsageError("poly_lr: iteration " + std::to_string(t) + " outside [0, T]");
    return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), 0.9);
}

struct AdamState {
    std::vector<Tensor<float>> m;
    std::vector<Tensor<float>> v;
    std::int64_t steps = 0;

    static AdamState zeros_like(const ParamDict<float>& params) {
        AdamState st;
        for (const auto& [name, tensor] : params.items()) {
            st.m.emplace_back(tensor.shape);
            st.v.emplace_back(tensor.shape);
        }
        return st;
    }
};

// Bias-corrected Adam with decoupled weight decay applied before the moment
// update. Aborts on non-finite gradients, naming the parameter.
inline void adam_step(ParamDict<float>& params, const std::map<std::string, Tensor<float>>& grads, AdamState& st,
                      double lr, double beta1, double beta2, double eps, double weight_decay) {
    if (st.m.size() != params.size()) throw UsageError("adam_step: state does not match parameter list");
    st.steps += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.steps));
    for (std::size_t i = 0; i < params.items().size(); ++i) {
        auto& [name, p] = params.items()[i];
        const auto it = grads.find(name);
        if (it == grads.end()) throw UsageError("adam_step: missing gradient for " + name);
        const Tensor<float>& g = it->second;
        if (!g.all_finite()) throw TrainAbort("non-finite gradient in parameter '" + name + "'");
        Tensor<float>& m = st.m[i];
        Tensor<float>& v = st.v[i];
        for (std::int64_t k = 0; k < p.numel(); ++k) {
            if (weight_decay != 0.0) p[k] -= static_cast<float>(lr * weight_decay) * p[k];
            const double gk = g[k];
            m[k] = static_cast<float>(beta1 * m[k] + (1.0 - beta1) * gk);
            v[k] = static_cast<float>(beta2 * v[k] + (1.0 - beta2) * gk * gk);
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

// --- loss assembly ---

namespace train_detail {

// Binary mode: one channel per target, channel k is the indicator of class
// k+1 (the union of all foreground when there is a single channel).
inline Tensor<float> seg_target_channels(const Mask& label, const ModelConfig& cfg) {
    const std::int64_t vox = label.numel();
    if (cfg.mode == SegMode::binary) {
        Tensor<float> out({cfg.out_channels, label.shape[0], label.shape[1], label.shape[2]});
        for (std::int64_t k = 0; k < cfg.out_channels; ++k)
            for (std::int64_t i = 0; i < vox; ++i) {
                const bool fg = cfg.out_channels == 1 ? label[i] != 0 : label[i] == k + 1;
                out[k * vox + i] = fg ? 1.0f : 0.0f;
            }
        return out;
    }
    Tensor<float> out({cfg.classes, label.shape[0], label.shape[1], label.shape[2]});
    for (std::int64_t c = 1; c <= cfg.classes; ++c)
        for (std::int64_t i = 0; i < vox; ++i)
            out[(c - 1) * vox + i] = label[i] == c ? 1.0f : 0.0f;
    return out;
}

inline Tensor<float> res_target_channels(const Mask& label, const ModelConfig& cfg) {
    const std::int64_t vox = label.numel();
    const std::int64_t r = cfg.res_channels();
    Tensor<float> out({r, label.shape[0], label.shape[1], label.shape[2]});
    Mask indicator(label.shape);
    for (std::int64_t k = 0; k < r; ++k) {
        for (std::int64_t i = 0; i < vox; ++i) {
            const bool fg = (cfg.mode == SegMode::binary && cfg.out_channels == 1) ? label[i] != 0
                                                                                   : label[i] == k + 1;
            indicator[i] = fg ? 1 : 0;
        }
        const Mask res = compute_residual_mask(indicator, cfg.residual_axis);
        for (std::int64_t i = 0; i < vox; ++i) out[k * vox + i] = static_cast<float>(res[i]);
    }
    return out;
}

struct BatchLoss {
    std::int64_t total = -1;
    double seg_value = 0;
    double res_value = 0;
};

// L = L_seg + L_res over a batched forward; multiclass excludes the
// background channel from both terms.
inline BatchLoss batch_loss(Graph<float>& g, const ForwardOutput<float>& out, const Tensor<float>& seg_target,
                            const Tensor<float>& res_target, const TrainConfig& cfg) {
    BatchLoss bl;
    std::int64_t seg_pred = out.p_seg;
    if (cfg.model.mode == SegMode::multiclass)
        seg_pred = ops::slice_channels(g, out.p_seg, 1, cfg.model.classes);
    const std::int64_t seg = ops::seg_loss_batched(g, seg_pred, g.constant(seg_target),
                                                   1e-5f, cfg.mean_reduction);
    bl.seg_value = g.value(seg)[0];
    if (cfg.model.variant == Variant::baseline) {
        bl.total = seg;
        return bl;
    }
    const std::int64_t rt = g.constant(res_target);
    std::vector<std::int64_t> levels;
    for (const auto id : out.p_res) levels.push_back(ops::res_loss_level_batched(g, id, rt, cfg.mean_reduction));
    const std::int64_t res = ops::res_loss_total(g, levels, static_cast<float>(cfg.lambda));
    bl.res_value = g.value(res)[0];
    bl.total = ops::add(g, seg, res);
    return bl;
}

inline std::vector<std::int64_t> window_starts(std::int64_t extent, std::int64_t patch) {
    if (extent <= patch) return {0};
    const std::int64_t step = std::max<std::int64_t>(1, patch / 2);  // 50% overlap
    std::vector<std::int64_t> starts;
    for (std::int64_t s = 0;; s += step) {
        if (s + patch >= extent) {
            if (starts.empty() || starts.back() != extent - patch) starts.push_back(extent - patch);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

}  // namespace train_detail

// --- inference over whole volumes ---

struct TiledLogits {
    Tensor<float> seg;                 // [seg_out, S, H, W]
    std::optional<Tensor<float>> res;  // [res_channels, S, H, W], final level
};

// Sliding-window inference with 50% overlap, averaging logits where windows
// overlap. A window equal to the volume reduces to one untiled forward.
inline TiledLogits tiled_logits(const ParamDict<float>& params, const ModelConfig& cfg, const Tensor<float>& image,
                                const std::array<std::int64_t, 3>& patch) {
    if (image.rank() != 4) throw UsageError("tiled_logits: image must be [C,S,H,W]");
    const std::int64_t C = image.shape[0], S = image.shape[1], H = image.shape[2], W = image.shape[3];
    for (int a = 0; a < 3; ++a)
        if (patch[static_cast<std::size_t>(a)] > image.shape[static_cast<std::size_t>(a) + 1])
            throw ConfigError("tiled_logits: patch exceeds volume extent");
    const bool with_res = cfg.variant != Variant::baseline;

    TiledLogits out;
    out.seg = Tensor<float>({cfg.seg_out_channels(), S, H, W});
    if (with_res) out.res = Tensor<float>({cfg.res_channels(), S, H, W});
    Tensor<float> count({S, H, W});

    const auto ss = train_detail::window_starts(S, patch[0]);
    const auto hs = train_detail::window_starts(H, patch[1]);
    const auto ws = train_detail::window_starts(W, patch[2]);
    for (const auto s0 : ss)
        for (const auto h0 : hs)
            for (const auto w0 : ws) {
                Tensor<float> window({1, C, patch[0], patch[1], patch[2]});
                for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t s = 0; s < patch[0]; ++s)
                        for (std::int64_t h = 0; h < patch[1]; ++h)
                            for (std::int64_t w = 0; w < patch[2]; ++w)
                                window[((c * patch[0] + s) * patch[1] + h) * patch[2] + w] =
                                    image[((c * S + s0 + s) * H + h0 + h) * W + w0 + w];
                Graph<float> g;
                g.recording = false;
                const auto pid = register_params(g, params);
                const auto fo = forward(g, cfg, pid, g.constant(std::move(window)));
                const auto& seg_logits = g.value(fo.seg_logits);
                const std::int64_t pvox = patch[0] * patch[1] * patch[2];
                for (std::int64_t c = 0; c < cfg.seg_out_channels(); ++c)
                    for (std::int64_t s = 0; s < patch[0]; ++s)
                        for (std::int64_t h = 0; h < patch[1]; ++h)
                            for (std::int64_t w = 0; w < patch[2]; ++w)
                                out.seg[((c * S + s0 + s) * H + h0 + h) * W + w0 + w] +=
                                    seg_logits[(c * patch[0] + s) * patch[1] * patch[2] + h * patch[2] + w];
                if (with_res) {
                    const auto& res_logits = g.value(fo.res_logits[0]);
                    for (std::int64_t c = 0; c < cfg.res_channels(); ++c)
                        for (std::int64_t s = 0; s < patch[0]; ++s)
                            for (std::int64_t h = 0; h < patch[1]; ++h)
                                for (std::int64_t w = 0; w < patch[2]; ++w)
                                    (*out.res)[((c * S + s0 + s) * H + h0 + h) * W + w0 + w] +=
                                        res_logits[(c * patch[0] + s) * patch[1] * patch[2] + h * patch[2] + w];
                }
                for (std::int64_t s = 0; s < patch[0]; ++s)
                    for (std::int64_t h = 0; h < patch[1]; ++h)
                        for (std::int64_t w = 0; w < patch[2]; ++w)
                            count[((s0 + s) * H + h0 + h) * W + w0 + w] += 1.0f;
                (void)pvox;
            }

    const std::int64_t vox = S * H * W;
    for (std::int64_t c = 0; c < cfg.seg_out_channels(); ++c)
        for (std::int64_t i = 0; i < vox; ++i) out.seg[c * vox + i] /= count[i];
    if (with_res)
        for (std::int64_t c = 0; c < cfg.res_channels(); ++c)
            for (std::int64_t i = 0; i < vox; ++i) (*out.res)[c * vox + i] /= count[i];
    return out;
}

struct Prediction {
    Tensor<float> p_seg;                 // probabilities, [seg_out, S, H, W]
    std::optional<Tensor<float>> p_res;  // probabilities, [res_channels, S, H, W]
    Mask seg_labels;                     // thresholded / argmax label volume [S,H,W]
    std::optional<Mask> res_union;       // any-channel thresholded residual mask
};

inline Prediction predict_volume(const ParamDict<float>& params, const ModelConfig& cfg,
                                 const Tensor<float>& normalized_image, const std::array<std::int64_t, 3>& patch) {
    const auto logits = tiled_logits(params, cfg, normalized_image, patch);
    const std::int64_t S = normalized_image.shape[1], H = normalized_image.shape[2], W = normalized_image.shape[3];
    const std::int64_t vox = S * H * W;

    Prediction pred;
    pred.p_seg = Tensor<float>(logits.seg.shape);
    if (cfg.mode == SegMode::binary) {
        for (std::int64_t i = 0; i < logits.seg.numel(); ++i)
            pred.p_seg[i] = static_cast<float>(ops::detail::stable_sigmoid(static_cast<double>(logits.seg[i])));
    } else {
        const std::int64_t ch = cfg.seg_out_channels();
        for (std::int64_t i = 0; i < vox; ++i) {
            double mx = logits.seg[i];
            for (std::int64_t c = 1; c < ch; ++c) mx = std::max(mx, static_cast<double>(logits.seg[c * vox + i]));
            double denom = 0;
            for (std::int64_t c = 0; c < ch; ++c) denom += std::exp(static_cast<double>(logits.seg[c * vox + i]) - mx);
            for (std::int64_t c = 0; c < ch; ++c)
                pred.p_seg[c * vox + i] =
                    static_cast<float>(std::exp(static_cast<double>(logits.seg[c * vox + i]) - mx) / denom);
        }
    }

    pred.seg_labels = Mask({S, H, W});
    if (cfg.mode == SegMode::binary) {
        // single target: the mask; several targets: label k+1 where channel k fires
        for (std::int64_t i = 0; i < vox; ++i) {
            std::uint8_t lab = 0;
            for (std::int64_t c = 0; c < cfg.out_channels; ++c)
                if (pred.p_seg[c * vox + i] > 0.5f) lab = static_cast<std::uint8_t>(cfg.out_channels == 1 ? 1 : c + 1);
            pred.seg_labels[i] = lab;
        }
    } else {
        for (std::int64_t i = 0; i < vox; ++i) {
            std::int64_t best = 0;
            float bv = pred.p_seg[i];
            for (std::int64_t c = 1; c <= cfg.classes; ++c)
                if (pred.p_seg[c * vox + i] > bv) {
                    bv = pred.p_seg[c * vox + i];
                    best = c;
                }
            pred.seg_labels[i] = static_cast<std::uint8_t>(best);
        }
    }

    if (logits.res) {
        pred.p_res = Tensor<float>(logits.res->shape);
        for (std::int64_t i = 0; i < logits.res->numel(); ++i)
            (*pred.p_res)[i] = static_cast<float>(ops::detail::stable_sigmoid(static_cast<double>((*logits.res)[i])));
        pred.res_union = Mask({S, H, W});
        for (std::int64_t c = 0; c < cfg.res_channels(); ++c)
            for (std::int64_t i = 0; i < vox; ++i)
                if ((*pred.p_res)[c * vox + i] > 0.5f) (*pred.res_union)[i] = 1;
    }
    return pred;
}

// --- evaluation ---

struct EvalSampleResult {
    std::string id;
    double dice = 0;
    std::optional<double> hd;
};

struct EvalResult {
    std::vector<EvalSampleResult> per_sample;
    double mean_dice = 0;
    double max_dice = 0;
    double min_dice = 0;
    std::optional<double> mean_hd;
    std::int64_t hd_undefined = 0;
};

// Mean Dice / Hausdorff over whole volumes via sliding-window inference.
// Binary mode thresholds at 0.5, multiclass takes the argmax; per-sample
// scores average over the foreground targets. Samples with an empty
// prediction or target surface record an undefined HD and are excluded from
// the HD mean (counted).
inline EvalResult evaluate(const ParamDict<float>& params, const ModelConfig& cfg,
                           const std::vector<VolumeSample>& samples, const std::array<std::int64_t, 3>& patch,
                           bool already_normalized = false) {
    EvalResult out;
    if (samples.empty()) return out;
    double hd_sum = 0;
    std::int64_t hd_count = 0;
    for (const auto& sample : samples) {
        const Tensor<float> image = already_normalized ? sample.image : zscore_normalize(sample.image);
        const auto pred = predict_volume(params, cfg, image, patch);
        const std::int64_t targets = cfg.mode == SegMode::binary ? cfg.out_channels : cfg.classes;
        double dice_sum = 0;
        double sample_hd_sum = 0;
        std::int64_t sample_hd_n = 0;
        for (std::int64_t k = 0; k < targets; ++k) {
            Mask want(sample.label.shape), got(sample.label.shape);
            for (std::int64_t i = 0; i < sample.label.numel(); ++i) {
                const bool fg = (cfg.mode == SegMode::binary && cfg.out_channels == 1) ? sample.label[i] != 0
                                                                                       : sample.label[i] == k + 1;
                want[i] = fg ? 1 : 0;
                const bool pfg = (cfg.mode == SegMode::binary && cfg.out_channels == 1)
                                     ? pred.seg_labels[i] != 0
                                     : pred.seg_labels[i] == k + 1;
                got[i] = pfg ? 1 : 0;
            }
            dice_sum += dice_score(got, want, 1e-5);
            try {
                sample_hd_sum += hausdorff_distance(got, want, sample.spacing);
                ++sample_hd_n;
            } catch (const UndefinedHausdorff&) {
                ++out.hd_undefined;
            }
        }
        EvalSampleResult r;
        r.id = sample.id;
        r.dice = dice_sum / static_cast<double>(targets);
        if (sample_hd_n > 0) {
            r.hd = sample_hd_sum / static_cast<double>(sample_hd_n);
            hd_sum += *r.hd;
            ++hd_count;
        }
        out.per_sample.push_back(std::move(r));
    }
    out.mean_dice = 0;
    out.max_dice = out.per_sample.front().dice;
    out.min_dice = out.per_sample.front().dice;
    for (const auto& r : out.per_sample) {
        out.mean_dice += r.dice;
        out.max_dice = std::max(out.max_dice, r.dice);
        out.min_dice = std::min(out.min_dice, r.dice);
    }
    out.mean_dice /= static_cast<double>(out.per_sample.size());
    if (hd_count > 0) out.mean_hd = hd_sum / static_cast<double>(hd_count);
    return out;
}

// --- the training loop ---

struct TrainLogRow {
    std::int64_t t = 0;
    double lr = 0;
    double loss_seg = 0;
    double loss_res = 0;
    double loss_total = 0;
    std::optional<double> mean_dice;
    std::optional<double> mean_hd;
};

struct TrainResult {
    ParamDict<float> params;
    AdamState state;
    std::vector<TrainLogRow> log;
    std::int64_t res_loss_evals = 0;
    std::optional<EvalResult> final_eval;
};

namespace train_detail {

inline std::string fmt_g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace train_detail

inline void write_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write log: " + path);
    os << "t,lr,loss_seg,loss_res,loss_total,mean_dice,mean_hd\n";
    for (const auto& r : rows) {
        os << r.t << ',' << train_detail::fmt_g9(r.lr) << ',' << train_detail::fmt_g9(r.loss_seg) << ','
           << train_detail::fmt_g9(r.loss_res) << ',' << train_detail::fmt_g9(r.loss_total) << ',';
        if (r.mean_dice) os << train_detail::fmt_g9(*r.mean_dice);
        os << ',';
        if (r.mean_hd) os << train_detail::fmt_g9(*r.mean_hd);
        os << '\n';
    }
}

// One end-to-end optimization run. Batches, augmentations and crops are a
// pure function of (seed, iteration), so a run resumed from a checkpoint is
// bitwise identical to one that never stopped.
inline TrainResult train(const TrainConfig& cfg, const std::vector<VolumeSample>& train_data,
                         const std::vector<VolumeSample>* eval_data = nullptr, const std::string& out_dir = "",
                         const Checkpoint* resume = nullptr) {
    cfg.validate();
    if (train_data.empty()) throw UsageError("train: dataset is empty");
    set_compute_threads(cfg.determinism ? 1 : cfg.threads);

    ParamDict<float> params = build_model<float>(cfg.model, cfg.seed);
    AdamState state = AdamState::zeros_like(params);
    std::int64_t t0 = 0;
    if (resume) {
        validate_checkpoint_params(*resume, params);
        params = resume->params;
        state.m = resume->adam_m;
        state.v = resume->adam_v;
        state.steps = resume->iteration;
        t0 = resume->iteration;
        if (t0 > cfg.iters) throw UsageError("train: checkpoint iteration exceeds configured total");
    }

    std::vector<VolumeSample> data = train_data;
    for (auto& s : data) s.image = zscore_normalize(s.image);
    std::vector<VolumeSample> eval_set = eval_data ? *eval_data : train_data;
    for (auto& s : eval_set) s.image = zscore_normalize(s.image);

    const std::int64_t counter_before = res_loss_eval_counter().load();
    TrainResult result;
    const std::int64_t n = static_cast<std::int64_t>(data.size());
    const auto& ps = cfg.patch;

    auto write_ckpt = [&](const std::string& name, std::int64_t iteration, const nlohmann::json& metric) {
        if (out_dir.empty()) return;
        Checkpoint ck;
        ck.config = cfg;
        ck.iteration = iteration;
        ck.metric = metric;
        ck.params = params;
        ck.adam_m = state.m;
        ck.adam_v = state.v;
        save_checkpoint((std::filesystem::path(out_dir) / name).string(), ck);
    };

    for (std::int64_t t = t0; t < cfg.iters; ++t) {
        Rng rng(mix_seed(cfg.seed, 0x697465726eull, static_cast<std::uint64_t>(t)));

        Tensor<float> x({cfg.batch_size, cfg.model.in_channels, ps[0], ps[1], ps[2]});
        const std::int64_t seg_ch = cfg.model.mode == SegMode::binary ? cfg.model.out_channels : cfg.model.classes;
        Tensor<float> seg_target({cfg.batch_size, seg_ch, ps[0], ps[1], ps[2]});
        Tensor<float> res_target({cfg.batch_size, cfg.model.res_channels(), ps[0], ps[1], ps[2]});
        const std::int64_t pvox = ps[0] * ps[1] * ps[2];
        for (std::int64_t b = 0; b < cfg.batch_size; ++b) {
            const auto idx = rng.uniform_int(0, n - 1);
            const VolumeSample augmented = augment(data[static_cast<std::size_t>(idx)], rng);
            const VolumeSample patch = crop_patch(augmented, ps, rng, cfg.fg_bias);
            std::copy(patch.image.data.begin(), patch.image.data.end(),
                      x.data.begin() + b * cfg.model.in_channels * pvox);
            const auto st = train_detail::seg_target_channels(patch.label, cfg.model);
            std::copy(st.data.begin(), st.data.end(), seg_target.data.begin() + b * seg_ch * pvox);
            const auto rt = train_detail::res_target_channels(patch.label, cfg.model);
            std::copy(rt.data.begin(), rt.data.end(),
                      res_target.data.begin() + b * cfg.model.res_channels() * pvox);
        }

        Graph<float> g;
        const auto pid = register_params(g, params);
        const auto fo = forward(g, cfg.model, pid, g.constant(std::move(x)));
        const auto loss = train_detail::batch_loss(g, fo, seg_target, res_target, cfg);
        const double total = g.value(loss.total)[0];
        if (!std::isfinite(total))
            throw TrainAbort("non-finite loss at iteration " + std::to_string(t) +
                             "; last checkpoint (if any) retained");
        g.backward(loss.total);
        const auto grads = g.parameter_gradients();

        const double lr = poly_lr(cfg.lr0, t, cfg.iters);
        adam_step(params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

        TrainLogRow row;
        row.t = t;
        row.lr = lr;
        row.loss_seg = loss.seg_value;
        row.loss_res = loss.res_value;
        row.loss_total = total;

        const bool at_interval = cfg.eval_interval > 0 && (t + 1) % cfg.eval_interval == 0 && t + 1 < cfg.iters;
        if (at_interval) {
            const auto ev = evaluate(params, cfg.model, eval_set, ps, true);
            row.mean_dice = ev.mean_dice;
            row.mean_hd = ev.mean_hd;
            char name[40];
            std::snprintf(name, sizeof(name), "ckpt_%06lld.crck", static_cast<long long>(t + 1));
            write_ckpt(name, t + 1, {{"mean_dice", ev.mean_dice}});
        }
        result.log.push_back(row);
    }

    const auto final_eval = evaluate(params, cfg.model, eval_set, ps, true);
    if (!result.log.empty()) {
        result.log.back().mean_dice = final_eval.mean_dice;
        result.log.back().mean_hd = final_eval.mean_hd;
    }
    result.final_eval = final_eval;
    result.params = params;
    result.state = state;
    result.res_loss_evals = res_loss_eval_counter().load() - counter_before;
    write_ckpt("ckpt_final.crck", cfg.iters, {{"mean_dice", final_eval.mean_dice}});
    if (!out_dir.empty()) write_log_csv((std::filesystem::path(out_dir) / "log.csv").string(), result.log);
    return result;
}

// --- ablation runner ---

struct AblationCell {
    Variant variant;
    std::uint64_t seed = 0;
    double mean_dice = 0;
    std::optional<double> mean_hd;
};

struct AblationReport {
    std::vector<AblationCell> cells;
    std::map<std::string, double> pooled_mean_dice;  // keyed by variant name
    int seeds_total = 0;
    int full_ge_baseline_seeds = 0;
    bool per_seed_trend = false;   // full >= baseline on >= 2/3 of the seeds
    bool pooled_ordering = false;  // full >= res_only - tol >= baseline - 2*tol (chained with tolerance)
    double tolerance = 0.01;
};

// Trains {baseline, res_only, full} across a shared seed set on a fixed
// split and checks the ordering of the pooled test Dice.
inline AblationReport run_ablation(const TrainConfig& base_cfg, const std::vector<VolumeSample>& train_set,
                                   const std::vector<VolumeSample>& test_set,
                                   const std::vector<std::uint64_t>& seeds, double tolerance = 0.01) {
    AblationReport report;
    report.tolerance = tolerance;
    report.seeds_total = static_cast<int>(seeds.size());
    const Variant variants[3] = {Variant::baseline, Variant::res_only, Variant::full};
    std::map<std::string, double> dice_sum;
    std::map<std::uint64_t, std::map<std::string, double>> by_seed;
    for (const auto seed : seeds) {
        for (const auto v : variants) {
            TrainConfig cfg = base_cfg;
            cfg.model.variant = v;
            cfg.seed = seed;
            const auto result = train(cfg, train_set, &test_set);
            AblationCell cell;
            cell.variant = v;
            cell.seed = seed;
            cell.mean_dice = result.final_eval->mean_dice;
            cell.mean_hd = result.final_eval->mean_hd;
            dice_sum[to_string(v)] += cell.mean_dice;
            by_seed[seed][to_string(v)] = cell.mean_dice;
            report.cells.push_back(cell);
        }
    }
    for (const auto& [name, total] : dice_sum)
        report.pooled_mean_dice[name] = total / static_cast<double>(seeds.size());
    for (const auto& [seed, scores] : by_seed)
        if (scores.at("full") >= scores.at("baseline")) ++report.full_ge_baseline_seeds;
    report.per_seed_trend = 3 * report.full_ge_baseline_seeds >= 2 * report.seeds_total;
    const double full = report.pooled_mean_dice["full"];
    const double res_only = report.pooled_mean_dice["res_only"];
    const double baseline = report.pooled_mean_dice["baseline"];
    report.pooled_ordering = full >= res_only - tolerance && res_only >= baseline - tolerance;
    return report;
}

}  // namespace conres
