#pragma once

// Brute-force reference implementations used by the verification suites and
// the test oracles. Deliberately naive, shares no code with the fast paths it
// is compared against.

#include "conres/conv.hpp"
#include "conres/masks.hpp"
#include "conres/metrics.hpp"

namespace conres {
namespace oracle {

template <typename T>
Tensor<T> conv3d_reference(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, const ConvSpec& sp) {
    const std::int64_t n = x.shape[0];
    const std::array<std::int64_t, 3> in{x.shape[2], x.shape[3], x.shape[4]};
    const auto out = sp.out_extents(in);
    Tensor<T> y({n, sp.out_channels, out[0], out[1], out[2]});
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t co = 0; co < sp.out_channels; ++co)
            for (std::int64_t os = 0; os < out[0]; ++os)
                for (std::int64_t oh = 0; oh < out[1]; ++oh)
                    for (std::int64_t ow = 0; ow < out[2]; ++ow) {
                        double acc = static_cast<double>(bias[co]);
                        for (std::int64_t ci = 0; ci < sp.in_channels; ++ci)
                            for (std::int64_t ks = 0; ks < sp.kernel[0]; ++ks)
                                for (std::int64_t kh = 0; kh < sp.kernel[1]; ++kh)
                                    for (std::int64_t kw = 0; kw < sp.kernel[2]; ++kw) {
                                        const std::int64_t is = os * sp.stride[0] - sp.pad[0] + ks * sp.dilation[0];
                                        const std::int64_t ih = oh * sp.stride[1] - sp.pad[1] + kh * sp.dilation[1];
                                        const std::int64_t iw = ow * sp.stride[2] - sp.pad[2] + kw * sp.dilation[2];
                                        if (is < 0 || is >= in[0] || ih < 0 || ih >= in[1] || iw < 0 || iw >= in[2])
                                            continue;
                                        acc += static_cast<double>(
                                                   x.at({b, ci, is, ih, iw})) *
                                               static_cast<double>(w.at({co, ci, ks, kh, kw}));
                                    }
                        y.at({b, co, os, oh, ow}) = static_cast<T>(acc);
                    }
    return y;
}

inline double dice_reference(const Mask& pred, const Mask& target, double eps) {
    std::int64_t inter = 0, p = 0, y = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        if (pred[i] != 0 && target[i] != 0) ++inter;
        if (pred[i] != 0) ++p;
        if (target[i] != 0) ++y;
    }
    return 2.0 * static_cast<double>(inter) / (static_cast<double>(p) + static_cast<double>(y) + eps);
}

// Independent surface extraction plus O(|dP| * |dY|) scan.
inline double hausdorff_reference(const Mask& pred, const Mask& target, const std::array<double, 3>& spacing) {
    const std::int64_t S = pred.shape[0], H = pred.shape[1], W = pred.shape[2];
    auto surface = [&](const Mask& m) {
        std::vector<std::array<std::int64_t, 3>> pts;
        for (std::int64_t s = 0; s < S; ++s)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t w = 0; w < W; ++w) {
                    if (m[(s * H + h) * W + w] == 0) continue;
                    bool on_surface = false;
                    const std::int64_t d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    for (const auto& dd : d) {
                        const std::int64_t ns = s + dd[0], nh = h + dd[1], nw = w + dd[2];
                        if (ns < 0 || ns >= S || nh < 0 || nh >= H || nw < 0 || nw >= W ||
                            m[(ns * H + nh) * W + nw] == 0) {
                            on_surface = true;
                            break;
                        }
                    }
                    if (on_surface) pts.push_back({s, h, w});
                }
        return pts;
    };
    const auto a = surface(pred);
    const auto b = surface(target);
    if (a.empty() || b.empty()) throw UndefinedHausdorff();
    auto directed = [&](const std::vector<std::array<std::int64_t, 3>>& from,
                        const std::vector<std::array<std::int64_t, 3>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k) {
                    const double dd = static_cast<double>(p[static_cast<std::size_t>(k)] -
                                                          q[static_cast<std::size_t>(k)]) *
                                      spacing[static_cast<std::size_t>(k)];
                    acc += dd * dd;
                }
                best = std::min(best, acc);
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

// Direct evaluation of the adjacent-slice definition on [S,H,W], axial axis.
inline Mask residual_mask_reference_axial(const Mask& seg) {
    const std::int64_t S = seg.shape[0], H = seg.shape[1], W = seg.shape[2];
    Mask out(seg.shape);
    for (std::int64_t s = 1; s < S; ++s)
        for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w) {
                const int a = seg[(s * H + h) * W + w];
                const int b = seg[((s - 1) * H + h) * W + w];
                out[(s * H + h) * W + w] = static_cast<std::uint8_t>(a > b ? a - b : b - a);
            }
    return out;
}

}  // namespace oracle
}  // namespace conres
