#pragma once

#include "conres/graph.hpp"

namespace conres {
namespace ops {

// Normalizes over (channels-in-group x spatial) per sample, then applies the
// per-channel affine. Batch-size independent by construction.
template <typename T>
std::int64_t group_norm(Graph<T>& g, std::int64_t x, std::int64_t groups, std::int64_t gamma, std::int64_t beta,
                        T eps) {
    const Tensor<T>& vx = g.value(x);
    if (vx.rank() < 2) throw ConfigError("group_norm: input rank must be >= 2 [N,C,...]");
    const std::int64_t n = vx.shape[0], c = vx.shape[1];
    if (groups < 1 || c % groups != 0)
        throw ConfigError("group_norm: groups=" + std::to_string(groups) + " must divide channels=" +
                          std::to_string(c));
    if (g.value(gamma).numel() != c || g.value(beta).numel() != c)
        throw ConfigError("group_norm: gamma/beta must have one entry per channel");
    std::int64_t spatial = 1;
    for (std::int64_t i = 2; i < vx.rank(); ++i) spatial *= vx.shape[static_cast<std::size_t>(i)];
    const std::int64_t cg = c / groups;           // channels per group
    const std::int64_t gsize = cg * spatial;      // elements per (sample, group)

    const Tensor<T>& vgamma = g.value(gamma);
    const Tensor<T>& vbeta = g.value(beta);
    Tensor<T> out(vx.shape);
    std::vector<T> mean_save(static_cast<std::size_t>(n * groups));
    std::vector<T> istd_save(static_cast<std::size_t>(n * groups));
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t grp = 0; grp < groups; ++grp) {
            const std::int64_t base = (b * c + grp * cg) * spatial;
            T mean = T(0);
            for (std::int64_t i = 0; i < gsize; ++i) mean += vx[base + i];
            mean /= static_cast<T>(gsize);
            T var = T(0);
            for (std::int64_t i = 0; i < gsize; ++i) var += (vx[base + i] - mean) * (vx[base + i] - mean);
            var /= static_cast<T>(gsize);
            const T istd = T(1) / std::sqrt(var + eps);
            mean_save[static_cast<std::size_t>(b * groups + grp)] = mean;
            istd_save[static_cast<std::size_t>(b * groups + grp)] = istd;
            for (std::int64_t j = 0; j < cg; ++j) {
                const T gm = vgamma[grp * cg + j];
                const T bt = vbeta[grp * cg + j];
                const std::int64_t off = base + j * spatial;
                for (std::int64_t i = 0; i < spatial; ++i) out[off + i] = gm * (vx[off + i] - mean) * istd + bt;
            }
        }
    }

    return g.emit(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, n, c, groups, cg, spatial, gsize, mean_save = std::move(mean_save),
                   istd_save = std::move(istd_save)](Graph<T>& gr, std::int64_t self) {
                      const Tensor<T>& go = gr.grad(self);
                      const Tensor<T>& vx2 = gr.value(x);
                      const Tensor<T>& vgamma2 = gr.value(gamma);
                      const bool need_x = gr.needs_grad(x);
                      const bool need_g = gr.needs_grad(gamma);
                      const bool need_b = gr.needs_grad(beta);
                      for (std::int64_t b = 0; b < n; ++b) {
                          for (std::int64_t grp = 0; grp < groups; ++grp) {
                              const std::int64_t base = (b * c + grp * cg) * spatial;
                              const T mean = mean_save[static_cast<std::size_t>(b * groups + grp)];
                              const T istd = istd_save[static_cast<std::size_t>(b * groups + grp)];
                              if (need_g || need_b) {
                                  Tensor<T>& gg = gr.grad(gamma);
                                  Tensor<T>& gb = gr.grad(beta);
                                  for (std::int64_t j = 0; j < cg; ++j) {
                                      const std::int64_t off = base + j * spatial;
                                      T dg = T(0), db = T(0);
                                      for (std::int64_t i = 0; i < spatial; ++i) {
                                          dg += go[off + i] * (vx2[off + i] - mean) * istd;
                                          db += go[off + i];
                                      }
                                      if (need_g) gg[grp * cg + j] += dg;
                                      if (need_b) gb[grp * cg + j] += db;
                                  }
                              }
                              if (need_x) {
                                  // dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
                                  T sum_dxh = T(0), sum_dxh_xh = T(0);
                                  for (std::int64_t j = 0; j < cg; ++j) {
                                      const T gm = vgamma2[grp * cg + j];
                                      const std::int64_t off = base + j * spatial;
                                      for (std::int64_t i = 0; i < spatial; ++i) {
                                          const T dxh = go[off + i] * gm;
                                          sum_dxh += dxh;
                                          sum_dxh_xh += dxh * (vx2[off + i] - mean) * istd;
                                      }
                                  }
                                  const T m1 = sum_dxh / static_cast<T>(gsize);
                                  const T m2 = sum_dxh_xh / static_cast<T>(gsize);
                                  Tensor<T>& gx = gr.grad(x);
                                  for (std::int64_t j = 0; j < cg; ++j) {
                                      const T gm = vgamma2[grp * cg + j];
                                      const std::int64_t off = base + j * spatial;
                                      for (std::int64_t i = 0; i < spatial; ++i) {
                                          const T xh = (vx2[off + i] - mean) * istd;
                                          gx[off + i] += istd * (go[off + i] * gm - m1 - xh * m2);
                                      }
                                  }
                              }
                          }
                      }
                  });
}

}  // namespace ops
}  // namespace conres
