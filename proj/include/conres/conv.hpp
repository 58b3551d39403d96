#pragma once

#include <array>
#include <cblas.h>

#include "conres/graph.hpp"

namespace conres {

struct ConvSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::array<std::int64_t, 3> kernel{3, 3, 3};
    std::array<std::int64_t, 3> stride{1, 1, 1};
    std::array<std::int64_t, 3> dilation{1, 1, 1};
    std::array<std::int64_t, 3> pad{0, 0, 0};

    std::int64_t out_extent(std::int64_t in, int axis) const {
        const auto k = kernel[static_cast<std::size_t>(axis)];
        const auto s = stride[static_cast<std::size_t>(axis)];
        const auto d = dilation[static_cast<std::size_t>(axis)];
        const auto p = pad[static_cast<std::size_t>(axis)];
        return (in + 2 * p - d * (k - 1) - 1) / s + 1;
    }

    std::array<std::int64_t, 3> out_extents(const std::array<std::int64_t, 3>& in) const {
        std::array<std::int64_t, 3> out{};
        for (int a = 0; a < 3; ++a) {
            out[static_cast<std::size_t>(a)] = out_extent(in[static_cast<std::size_t>(a)], a);
            if (out[static_cast<std::size_t>(a)] < 1)
                throw ConfigError("conv3d: output extent < 1 on axis " + std::to_string(a) + " (in=" +
                                  std::to_string(in[static_cast<std::size_t>(a)]) + ", kernel=" +
                                  std::to_string(kernel[static_cast<std::size_t>(a)]) + ", stride=" +
                                  std::to_string(stride[static_cast<std::size_t>(a)]) + ", dilation=" +
                                  std::to_string(dilation[static_cast<std::size_t>(a)]) + ", pad=" +
                                  std::to_string(pad[static_cast<std::size_t>(a)]) + ")");
        }
        return out;
    }
};

namespace conv_detail {

inline void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, float alpha,
                 const float* a, std::int64_t lda, const float* b, std::int64_t ldb, float beta, float* c,
                 std::int64_t ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
                static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

inline void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
                 const double* a, std::int64_t lda, const double* b, std::int64_t ldb, double beta, double* c,
                 std::int64_t ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
                static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

// col is [Cin*ks*kh*kw, S'*H'*W'] row-major; zero padding materialized here.
template <typename T>
void im2col(const T* x, const std::array<std::int64_t, 3>& in, const std::array<std::int64_t, 3>& out,
            const ConvSpec& sp, T* col) {
    const std::int64_t in_hw = in[1] * in[2];
    const std::int64_t n_vox = out[0] * out[1] * out[2];
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < sp.in_channels; ++c) {
        const T* xc = x + c * in[0] * in_hw;
        for (std::int64_t ks = 0; ks < sp.kernel[0]; ++ks) {
            for (std::int64_t kh = 0; kh < sp.kernel[1]; ++kh) {
                for (std::int64_t kw = 0; kw < sp.kernel[2]; ++kw, ++row) {
                    T* dst = col + row * n_vox;
                    for (std::int64_t os = 0; os < out[0]; ++os) {
                        const std::int64_t is = os * sp.stride[0] - sp.pad[0] + ks * sp.dilation[0];
                        if (is < 0 || is >= in[0]) {
                            for (std::int64_t i = 0; i < out[1] * out[2]; ++i) *dst++ = T(0);
                            continue;
                        }
                        for (std::int64_t oh = 0; oh < out[1]; ++oh) {
                            const std::int64_t ih = oh * sp.stride[1] - sp.pad[1] + kh * sp.dilation[1];
                            if (ih < 0 || ih >= in[1]) {
                                for (std::int64_t i = 0; i < out[2]; ++i) *dst++ = T(0);
                                continue;
                            }
                            const T* src = xc + is * in_hw + ih * in[2];
                            for (std::int64_t ow = 0; ow < out[2]; ++ow) {
                                const std::int64_t iw = ow * sp.stride[2] - sp.pad[2] + kw * sp.dilation[2];
                                *dst++ = (iw < 0 || iw >= in[2]) ? T(0) : src[iw];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const std::array<std::int64_t, 3>& in, const std::array<std::int64_t, 3>& out,
                const ConvSpec& sp, T* gx) {
    const std::int64_t in_hw = in[1] * in[2];
    const std::int64_t n_vox = out[0] * out[1] * out[2];
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < sp.in_channels; ++c) {
        T* gc = gx + c * in[0] * in_hw;
        for (std::int64_t ks = 0; ks < sp.kernel[0]; ++ks) {
            for (std::int64_t kh = 0; kh < sp.kernel[1]; ++kh) {
                for (std::int64_t kw = 0; kw < sp.kernel[2]; ++kw, ++row) {
                    const T* src = col + row * n_vox;
                    for (std::int64_t os = 0; os < out[0]; ++os) {
                        const std::int64_t is = os * sp.stride[0] - sp.pad[0] + ks * sp.dilation[0];
                        if (is < 0 || is >= in[0]) {
                            src += out[1] * out[2];
                            continue;
                        }
                        for (std::int64_t oh = 0; oh < out[1]; ++oh) {
                            const std::int64_t ih = oh * sp.stride[1] - sp.pad[1] + kh * sp.dilation[1];
                            if (ih < 0 || ih >= in[1]) {
                                src += out[2];
                                continue;
                            }
                            T* dst = gc + is * in_hw + ih * in[2];
                            for (std::int64_t ow = 0; ow < out[2]; ++ow, ++src) {
                                const std::int64_t iw = ow * sp.stride[2] - sp.pad[2] + kw * sp.dilation[2];
                                if (iw >= 0 && iw < in[2]) dst[iw] += *src;
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace conv_detail

namespace ops {

// Zero-padded cross-correlation of [N,Cin,S,H,W] with [Cout,Cin,ks,kh,kw],
// GEMM over im2col columns. The column buffer is rebuilt in backward instead
// of being saved.
template <typename T>
std::int64_t conv3d(Graph<T>& g, std::int64_t x, std::int64_t w, std::int64_t bias, const ConvSpec& sp) {
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vw = g.value(w);
    const Tensor<T>& vb = g.value(bias);
    if (vx.rank() != 5) throw ConfigError("conv3d: input must be rank 5 [N,C,S,H,W], got " + shape_str(vx.shape));
    if (vw.rank() != 5) throw ConfigError("conv3d: weight must be rank 5, got " + shape_str(vw.shape));
    if (vx.shape[1] != sp.in_channels || vw.shape[1] != sp.in_channels || vw.shape[0] != sp.out_channels)
        throw ConfigError("conv3d: channel mismatch, input " + shape_str(vx.shape) + " vs weight " +
                          shape_str(vw.shape));
    for (int a = 0; a < 3; ++a)
        if (vw.shape[static_cast<std::size_t>(2 + a)] != sp.kernel[static_cast<std::size_t>(a)])
            throw ConfigError("conv3d: weight kernel extents " + shape_str(vw.shape) + " disagree with spec");
    if (vb.numel() != sp.out_channels)
        throw ConfigError("conv3d: bias shape " + shape_str(vb.shape) + " must be [out_channels]");

    const std::int64_t n = vx.shape[0];
    const std::array<std::int64_t, 3> in{vx.shape[2], vx.shape[3], vx.shape[4]};
    const std::array<std::int64_t, 3> out = sp.out_extents(in);
    const std::int64_t k_rows = sp.in_channels * sp.kernel[0] * sp.kernel[1] * sp.kernel[2];
    const std::int64_t n_vox = out[0] * out[1] * out[2];
    const std::int64_t in_vox = in[0] * in[1] * in[2];

    Tensor<T> y({n, sp.out_channels, out[0], out[1], out[2]});
    std::vector<T> col(static_cast<std::size_t>(k_rows * n_vox));
    for (std::int64_t b = 0; b < n; ++b) {
        conv_detail::im2col(vx.data.data() + b * sp.in_channels * in_vox, in, out, sp, col.data());
        conv_detail::gemm(false, false, sp.out_channels, n_vox, k_rows, T(1), vw.data.data(), k_rows, col.data(), n_vox,
                     T(0), y.data.data() + b * sp.out_channels * n_vox, n_vox);
        for (std::int64_t c = 0; c < sp.out_channels; ++c) {
            T* yc = y.data.data() + (b * sp.out_channels + c) * n_vox;
            const T bv = vb[c];
            for (std::int64_t i = 0; i < n_vox; ++i) yc[i] += bv;
        }
    }

    return g.emit(std::move(y), {x, w, bias},
                  [x, w, bias, sp, n, in, out, k_rows, n_vox, in_vox](Graph<T>& gr, std::int64_t self) {
                      const Tensor<T>& go = gr.grad(self);
                      const Tensor<T>& vx2 = gr.value(x);
                      const Tensor<T>& vw2 = gr.value(w);
                      std::vector<T> col(static_cast<std::size_t>(k_rows * n_vox));
                      const bool need_x = gr.needs_grad(x);
                      const bool need_w = gr.needs_grad(w);
                      const bool need_b = gr.needs_grad(bias);
                      std::vector<T> dcol(need_x ? static_cast<std::size_t>(k_rows * n_vox) : 0);
                      for (std::int64_t b = 0; b < n; ++b) {
                          const T* go_b = go.data.data() + b * sp.out_channels * n_vox;
                          if (need_w || need_x)
                              conv_detail::im2col(vx2.data.data() + b * sp.in_channels * in_vox, in, out, sp, col.data());
                          if (need_w) {
                              Tensor<T>& gw = gr.grad(w);
                              conv_detail::gemm(false, true, sp.out_channels, k_rows, n_vox, T(1), go_b, n_vox, col.data(),
                                           n_vox, T(1), gw.data.data(), k_rows);
                          }
                          if (need_b) {
                              Tensor<T>& gb = gr.grad(bias);
                              for (std::int64_t c = 0; c < sp.out_channels; ++c) {
                                  T acc = T(0);
                                  const T* src = go_b + c * n_vox;
                                  for (std::int64_t i = 0; i < n_vox; ++i) acc += src[i];
                                  gb[c] += acc;
                              }
                          }
                          if (need_x) {
                              conv_detail::gemm(true, false, k_rows, n_vox, sp.out_channels, T(1), vw2.data.data(), k_rows,
                                           go_b, n_vox, T(0), dcol.data(), n_vox);
                              Tensor<T>& gx = gr.grad(x);
                              conv_detail::col2im_add(dcol.data(), in, out, sp,
                                                 gx.data.data() + b * sp.in_channels * in_vox);
                          }
                      }
                  });
}

// Per output channel: subtract the mean and divide by the population standard
// deviation (+eps) over the remaining axes.
template <typename T>
std::int64_t weight_standardize(Graph<T>& g, std::int64_t w, T eps) {
    const Tensor<T>& vw = g.value(w);
    if (vw.rank() < 2) throw ConfigError("weight_standardize: weight rank must be >= 2");
    const std::int64_t cout = vw.shape[0];
    const std::int64_t per = vw.numel() / cout;
    if (per < 2)
        throw ConfigError("weight_standardize: needs >= 2 elements per output channel, got " + std::to_string(per));

    Tensor<T> out(vw.shape);
    std::vector<T> means(static_cast<std::size_t>(cout)), stds(static_cast<std::size_t>(cout));
    for (std::int64_t c = 0; c < cout; ++c) {
        const T* src = vw.data.data() + c * per;
        T mean = T(0);
        for (std::int64_t i = 0; i < per; ++i) mean += src[i];
        mean /= static_cast<T>(per);
        T var = T(0);
        for (std::int64_t i = 0; i < per; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<T>(per);
        const T std = std::sqrt(var);
        means[static_cast<std::size_t>(c)] = mean;
        stds[static_cast<std::size_t>(c)] = std;
        T* dst = out.data.data() + c * per;
        for (std::int64_t i = 0; i < per; ++i) dst[i] = (src[i] - mean) / (std + eps);
    }
    return g.emit(std::move(out), {w},
                  [w, eps, cout, per, means = std::move(means), stds = std::move(stds)](Graph<T>& gr,
                                                                                        std::int64_t self) {
                      const Tensor<T>& go = gr.grad(self);
                      const Tensor<T>& vw2 = gr.value(w);
                      Tensor<T>& gw = gr.grad(w);
                      for (std::int64_t c = 0; c < cout; ++c) {
                          const T* gsrc = go.data.data() + c * per;
                          const T* wsrc = vw2.data.data() + c * per;
                          const T mean = means[static_cast<std::size_t>(c)];
                          const T std = stds[static_cast<std::size_t>(c)];
                          const T denom = std + eps;
                          T gmean = T(0), gdot = T(0);
                          for (std::int64_t i = 0; i < per; ++i) {
                              gmean += gsrc[i];
                              gdot += gsrc[i] * (wsrc[i] - mean);
                          }
                          gmean /= static_cast<T>(per);
                          // d std / d w_j = (w_j - mean) / (n * std); constant channels have
                          // zero centered values so the term vanishes with them.
                          const T scale = std > T(1e-30) ? gdot / (static_cast<T>(per) * std * denom * denom) : T(0);
                          T* gdst = gw.data.data() + c * per;
                          for (std::int64_t i = 0; i < per; ++i)
                              gdst[i] += (gsrc[i] - gmean) / denom - scale * (wsrc[i] - mean);
                      }
                  });
}

}  // namespace ops
}  // namespace conres
