#pragma once

#include <atomic>
#include <cmath>

#include "conres/graph.hpp"
#include "conres/ops.hpp"

namespace conres {

// Probabilities are clamped to this range inside BCE only, so saturated
// predictions keep the loss finite.
inline constexpr double kBceFloor = 1e-7;

// Counts weighted-residual-loss evaluations; lets tests assert that the
// baseline variant never touches the residual supervision path.
inline std::atomic<std::int64_t>& res_loss_eval_counter() {
    static std::atomic<std::int64_t> counter{0};
    return counter;
}

namespace ops {

// Summed binary cross entropy with optional per-voxel weights. `target` and
// `weights` are constant nodes; gradients flow to `pred` only. Inputs must
// already be probabilities; values outside [0,1] are a caller bug.
template <typename T>
std::int64_t bce_sum(Graph<T>& g, std::int64_t pred, std::int64_t target, std::int64_t weights = -1,
                     bool mean = false) {
    const Tensor<T>& p = g.value(pred);
    const Tensor<T>& y = g.value(target);
    detail::check_same_shape(p, y, "bce");
    if (weights >= 0) detail::check_same_shape(p, g.value(weights), "bce weights");
    const T lo = static_cast<T>(kBceFloor), hi = T(1) - static_cast<T>(kBceFloor);
    const T norm = mean ? static_cast<T>(p.numel()) : T(1);

    T acc = T(0);
    for (std::int64_t i = 0; i < p.numel(); ++i) {
        const T pv = p[i];
        if (pv < T(0) || pv > T(1))
            throw ValidationError("bce: prediction " + std::to_string(static_cast<double>(pv)) +
                                  " outside [0,1] at index " + std::to_string(i));
        g.note_kink(std::min(std::abs(static_cast<double>(pv - lo)), std::abs(static_cast<double>(hi - pv))));
        g.note_sign(pv > lo && pv < hi);
        const T pc = std::min(std::max(pv, lo), hi);
        const T w = weights >= 0 ? g.value(weights)[i] : T(1);
        acc += w * (-(y[i] * std::log(pc) + (T(1) - y[i]) * std::log(T(1) - pc)));
    }
    acc /= norm;

    return g.emit(Tensor<T>::scalar(acc), {pred}, [pred, target, weights, lo, hi, norm](Graph<T>& gr,
                                                                                        std::int64_t self) {
        const T go = gr.grad(self)[0] / norm;
        const Tensor<T>& p2 = gr.value(pred);
        const Tensor<T>& y2 = gr.value(target);
        Tensor<T>& gp = gr.grad(pred);
        for (std::int64_t i = 0; i < p2.numel(); ++i) {
            const T pv = p2[i];
            if (pv <= lo || pv >= hi) continue;  // clamp region is flat
            const T w = weights >= 0 ? gr.value(weights)[i] : T(1);
            gp[i] += go * w * (pv - y2[i]) / (pv * (T(1) - pv));
        }
    });
}

// 2*sum(P.*Y) / (sum(P)+sum(Y)+eps), pooled over the whole tensors.
template <typename T>
std::int64_t soft_dice(Graph<T>& g, std::int64_t pred, std::int64_t target, T eps) {
    const Tensor<T>& p = g.value(pred);
    const Tensor<T>& y = g.value(target);
    detail::check_same_shape(p, y, "soft_dice");
    T s1 = T(0), s2 = T(0);
    for (std::int64_t i = 0; i < p.numel(); ++i) {
        s1 += p[i] * y[i];
        s2 += p[i] + y[i];
    }
    const T denom = s2 + eps;
    return g.emit(Tensor<T>::scalar(T(2) * s1 / denom), {pred},
                  [pred, target, s1, denom](Graph<T>& gr, std::int64_t self) {
                      const T go = gr.grad(self)[0];
                      const Tensor<T>& y2 = gr.value(target);
                      Tensor<T>& gp = gr.grad(pred);
                      for (std::int64_t i = 0; i < gp.numel(); ++i)
                          gp[i] += go * (T(2) * y2[i] * denom - T(2) * s1) / (denom * denom);
                  });
}

// Summed BCE minus the soft Dice overlap term.
template <typename T>
std::int64_t seg_loss(Graph<T>& g, std::int64_t pred, std::int64_t target, T eps, bool mean = false) {
    const std::int64_t bce = bce_sum(g, pred, target, -1, mean);
    const std::int64_t dice = soft_dice(g, pred, target, eps);
    return sub(g, bce, dice);
}

}  // namespace ops

// Foreground/background weights w_k = log(V / V_k); empty classes are clamped
// to V_k = 1 so the weight stays finite.
template <typename T>
struct ClassWeights {
    T w_background;
    T w_foreground;
};

template <typename T>
ClassWeights<T> residual_class_weights(const Tensor<T>& target) {
    const auto v = static_cast<double>(target.numel());
    double v1 = 0;
    for (const auto& t : target.data) v1 += static_cast<double>(t);
    double v0 = v - v1;
    if (v1 < 1) v1 = 1;
    if (v0 < 1) v0 = 1;
    return {static_cast<T>(std::log(v / v0)), static_cast<T>(std::log(v / v1))};
}

namespace ops {

// Class-weighted BCE for one residual prediction level. Weights are derived
// from the patch's own voxel counts at every evaluation.
template <typename T>
std::int64_t res_loss_level(Graph<T>& g, std::int64_t pred, std::int64_t target, bool mean = false) {
    res_loss_eval_counter().fetch_add(1, std::memory_order_relaxed);
    const Tensor<T>& y = g.value(target);
    const ClassWeights<T> cw = residual_class_weights(y);
    Tensor<T> w(y.shape);
    for (std::int64_t i = 0; i < y.numel(); ++i) w[i] = y[i] > T(0.5) ? cw.w_foreground : cw.w_background;
    return bce_sum(g, pred, target, g.constant(std::move(w)), mean);
}

// L0 + lambda * (L1 + L2); exactly three levels, final prediction first.
template <typename T>
std::int64_t res_loss_total(Graph<T>& g, const std::vector<std::int64_t>& levels, T lambda) {
    if (levels.size() != 3) throw UsageError("res_loss_total: expected exactly 3 level losses");
    const std::int64_t aux = add(g, levels[1], levels[2]);
    return add(g, levels[0], scalar_mul(g, aux, lambda));
}

// Batched variants: dims [N,C] are treated as independent patches, so the
// Dice pool and the class weights stay per-sample-per-channel while BCE sums
// across everything.
template <typename T>
std::int64_t seg_loss_batched(Graph<T>& g, std::int64_t pred, std::int64_t target, T eps, bool mean = false) {
    const Tensor<T>& p = g.value(pred);
    const Tensor<T>& y = g.value(target);
    detail::check_same_shape(p, y, "seg_loss_batched");
    if (p.rank() != 5) throw ConfigError("seg_loss_batched: expected rank-5 [N,C,S,H,W]");
    const std::int64_t groups = p.shape[0] * p.shape[1];
    const std::int64_t inner = p.numel() / groups;

    std::vector<T> s1(static_cast<std::size_t>(groups), T(0)), denom(static_cast<std::size_t>(groups), T(0));
    T total = T(0);
    for (std::int64_t grp = 0; grp < groups; ++grp) {
        T a = T(0), b = T(0);
        for (std::int64_t i = 0; i < inner; ++i) {
            a += p[grp * inner + i] * y[grp * inner + i];
            b += p[grp * inner + i] + y[grp * inner + i];
        }
        s1[static_cast<std::size_t>(grp)] = a;
        denom[static_cast<std::size_t>(grp)] = b + eps;
        total += T(2) * a / (b + eps);
    }
    const std::int64_t bce = bce_sum(g, pred, target, -1, mean);
    const std::int64_t dice = g.emit(
        Tensor<T>::scalar(total), {pred},
        [pred, target, groups, inner, s1 = std::move(s1), denom = std::move(denom)](Graph<T>& gr, std::int64_t self) {
            const T go = gr.grad(self)[0];
            const Tensor<T>& y2 = gr.value(target);
            Tensor<T>& gp = gr.grad(pred);
            for (std::int64_t grp = 0; grp < groups; ++grp) {
                const T a = s1[static_cast<std::size_t>(grp)];
                const T d = denom[static_cast<std::size_t>(grp)];
                for (std::int64_t i = 0; i < inner; ++i)
                    gp[grp * inner + i] += go * (T(2) * y2[grp * inner + i] * d - T(2) * a) / (d * d);
            }
        });
    return sub(g, bce, dice);
}

template <typename T>
std::int64_t res_loss_level_batched(Graph<T>& g, std::int64_t pred, std::int64_t target, bool mean = false) {
    res_loss_eval_counter().fetch_add(1, std::memory_order_relaxed);
    const Tensor<T>& y = g.value(target);
    if (y.rank() != 5) throw ConfigError("res_loss_level_batched: expected rank-5 [N,C,S,H,W]");
    const std::int64_t groups = y.shape[0] * y.shape[1];
    const std::int64_t inner = y.numel() / groups;
    Tensor<T> w(y.shape);
    for (std::int64_t grp = 0; grp < groups; ++grp) {
        Tensor<T> slice({inner});
        for (std::int64_t i = 0; i < inner; ++i) slice[i] = y[grp * inner + i];
        const ClassWeights<T> cw = residual_class_weights(slice);
        for (std::int64_t i = 0; i < inner; ++i)
            w[grp * inner + i] = y[grp * inner + i] > T(0.5) ? cw.w_foreground : cw.w_background;
    }
    return bce_sum(g, pred, target, g.constant(std::move(w)), mean);
}

}  // namespace ops
}  // namespace conres
