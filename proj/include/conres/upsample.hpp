#pragma once

#include <array>

#include "conres/graph.hpp"

namespace conres {
namespace ops {

namespace up_detail {

// Half-pixel-centered source coordinate with edge clamping.
struct LerpTap {
    std::int64_t i0, i1;
    double w0, w1;
};

inline std::vector<LerpTap> lerp_taps(std::int64_t in, std::int64_t scale) {
    std::vector<LerpTap> taps(static_cast<std::size_t>(in * scale));
    for (std::int64_t i = 0; i < in * scale; ++i) {
        double src = (static_cast<double>(i) + 0.5) / static_cast<double>(scale) - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > static_cast<double>(in - 1)) src = static_cast<double>(in - 1);
        const auto i0 = static_cast<std::int64_t>(src);
        const std::int64_t i1 = std::min(i0 + 1, in - 1);
        const double w1 = src - static_cast<double>(i0);
        taps[static_cast<std::size_t>(i)] = {i0, i1, 1.0 - w1, w1};
    }
    return taps;
}

}  // namespace up_detail

// Integer-factor trilinear upsampling of [N,C,S,H,W].
template <typename T>
std::int64_t upsample_trilinear(Graph<T>& g, std::int64_t x, const std::array<std::int64_t, 3>& scale) {
    const Tensor<T>& vx = g.value(x);
    if (vx.rank() != 5) throw ConfigError("upsample_trilinear: input must be rank 5, got " + shape_str(vx.shape));
    for (auto s : scale)
        if (s < 1) throw ConfigError("upsample_trilinear: scale factors must be >= 1");
    const std::int64_t n = vx.shape[0], c = vx.shape[1];
    const std::array<std::int64_t, 3> in{vx.shape[2], vx.shape[3], vx.shape[4]};
    const std::array<std::int64_t, 3> out{in[0] * scale[0], in[1] * scale[1], in[2] * scale[2]};

    const auto ts = up_detail::lerp_taps(in[0], scale[0]);
    const auto th = up_detail::lerp_taps(in[1], scale[1]);
    const auto tw = up_detail::lerp_taps(in[2], scale[2]);

    Tensor<T> y({n, c, out[0], out[1], out[2]});
    const std::int64_t in_hw = in[1] * in[2];
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
        const T* src = vx.data.data() + nc * in[0] * in_hw;
        T* dst = y.data.data() + nc * out[0] * out[1] * out[2];
        for (std::int64_t os = 0; os < out[0]; ++os) {
            const auto& a = ts[static_cast<std::size_t>(os)];
            for (std::int64_t oh = 0; oh < out[1]; ++oh) {
                const auto& b = th[static_cast<std::size_t>(oh)];
                for (std::int64_t ow = 0; ow < out[2]; ++ow) {
                    const auto& d = tw[static_cast<std::size_t>(ow)];
                    const double v =
                        a.w0 * (b.w0 * (d.w0 * src[a.i0 * in_hw + b.i0 * in[2] + d.i0] +
                                        d.w1 * src[a.i0 * in_hw + b.i0 * in[2] + d.i1]) +
                                b.w1 * (d.w0 * src[a.i0 * in_hw + b.i1 * in[2] + d.i0] +
                                        d.w1 * src[a.i0 * in_hw + b.i1 * in[2] + d.i1])) +
                        a.w1 * (b.w0 * (d.w0 * src[a.i1 * in_hw + b.i0 * in[2] + d.i0] +
                                        d.w1 * src[a.i1 * in_hw + b.i0 * in[2] + d.i1]) +
                                b.w1 * (d.w0 * src[a.i1 * in_hw + b.i1 * in[2] + d.i0] +
                                        d.w1 * src[a.i1 * in_hw + b.i1 * in[2] + d.i1]));
                    *dst++ = static_cast<T>(v);
                }
            }
        }
    }

    return g.emit(std::move(y), {x}, [x, n, c, in, out, ts, th, tw](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        Tensor<T>& gx = gr.grad(x);
        const std::int64_t in_hw = in[1] * in[2];
        for (std::int64_t nc = 0; nc < n * c; ++nc) {
            T* dst = gx.data.data() + nc * in[0] * in_hw;
            const T* src = go.data.data() + nc * out[0] * out[1] * out[2];
            for (std::int64_t os = 0; os < out[0]; ++os) {
                const auto& a = ts[static_cast<std::size_t>(os)];
                for (std::int64_t oh = 0; oh < out[1]; ++oh) {
                    const auto& b = th[static_cast<std::size_t>(oh)];
                    for (std::int64_t ow = 0; ow < out[2]; ++ow) {
                        const auto& d = tw[static_cast<std::size_t>(ow)];
                        const T gv = *src++;
                        dst[a.i0 * in_hw + b.i0 * in[2] + d.i0] += static_cast<T>(a.w0 * b.w0 * d.w0) * gv;
                        dst[a.i0 * in_hw + b.i0 * in[2] + d.i1] += static_cast<T>(a.w0 * b.w0 * d.w1) * gv;
                        dst[a.i0 * in_hw + b.i1 * in[2] + d.i0] += static_cast<T>(a.w0 * b.w1 * d.w0) * gv;
                        dst[a.i0 * in_hw + b.i1 * in[2] + d.i1] += static_cast<T>(a.w0 * b.w1 * d.w1) * gv;
                        dst[a.i1 * in_hw + b.i0 * in[2] + d.i0] += static_cast<T>(a.w1 * b.w0 * d.w0) * gv;
                        dst[a.i1 * in_hw + b.i0 * in[2] + d.i1] += static_cast<T>(a.w1 * b.w0 * d.w1) * gv;
                        dst[a.i1 * in_hw + b.i1 * in[2] + d.i0] += static_cast<T>(a.w1 * b.w1 * d.w0) * gv;
                        dst[a.i1 * in_hw + b.i1 * in[2] + d.i1] += static_cast<T>(a.w1 * b.w1 * d.w1) * gv;
                    }
                }
            }
        }
    });
}

}  // namespace ops
}  // namespace conres
