#pragma once

#include <array>
#include <limits>

#include "conres/masks.hpp"

namespace conres {

// Hausdorff distance of an empty mask is undefined; callers decide policy.
struct UndefinedHausdorff : std::runtime_error {
    UndefinedHausdorff() : std::runtime_error("undefined HD: empty mask has no surface") {}
};

inline double dice_score(const Mask& pred, const Mask& target, double eps = 1e-5) {
    validate_binary(pred, "dice pred");
    validate_binary(target, "dice target");
    if (pred.shape != target.shape)
        throw ValidationError("dice: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(target.shape));
    std::int64_t inter = 0, p = 0, y = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        inter += pred[i] & target[i];
        p += pred[i];
        y += target[i];
    }
    return 2.0 * static_cast<double>(inter) / (static_cast<double>(p + y) + eps);
}

struct Voxel {
    std::int64_t s, h, w;
};

// Foreground voxels with at least one background 6-neighbor; the volume
// boundary counts as background.
inline std::vector<Voxel> surface_voxels(const Mask& m) {
    if (m.rank() != 3) throw ValidationError("surface_voxels: mask must be [S,H,W]");
    const std::int64_t S = m.shape[0], H = m.shape[1], W = m.shape[2];
    auto fg = [&](std::int64_t s, std::int64_t h, std::int64_t w) {
        if (s < 0 || s >= S || h < 0 || h >= H || w < 0 || w >= W) return false;
        return m[(s * H + h) * W + w] != 0;
    };
    std::vector<Voxel> out;
    for (std::int64_t s = 0; s < S; ++s)
        for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w) {
                if (!fg(s, h, w)) continue;
                if (!fg(s - 1, h, w) || !fg(s + 1, h, w) || !fg(s, h - 1, w) || !fg(s, h + 1, w) ||
                    !fg(s, h, w - 1) || !fg(s, h, w + 1))
                    out.push_back({s, h, w});
            }
    return out;
}

namespace detail {

inline double directed_sq(const std::vector<Voxel>& from, const std::vector<Voxel>& to,
                          const std::array<double, 3>& sp) {
    double worst = 0.0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            const double ds = static_cast<double>(p.s - q.s) * sp[0];
            const double dh = static_cast<double>(p.h - q.h) * sp[1];
            const double dw = static_cast<double>(p.w - q.w) * sp[2];
            const double d = ds * ds + dh * dh + dw * dw;
            if (d < best) best = d;
        }
        if (best > worst) worst = best;
    }
    return worst;
}

// 1D lower-envelope pass of the squared distance transform; `w2` is the
// squared spacing along this axis.
inline void edt_1d(std::vector<double>& f, std::vector<double>& d, std::vector<std::int64_t>& v,
                   std::vector<double>& z, double w2) {
    const auto n = static_cast<std::int64_t>(f.size());
    std::int64_t k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (std::int64_t q = 1; q < n; ++q) {
        double s;
        while (true) {
            const std::int64_t p = v[static_cast<std::size_t>(k)];
            s = (f[static_cast<std::size_t>(q)] + w2 * q * q - (f[static_cast<std::size_t>(p)] + w2 * p * p)) /
                (2.0 * w2 * (q - p));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < static_cast<double>(q)) ++k;
        const std::int64_t p = v[static_cast<std::size_t>(k)];
        d[static_cast<std::size_t>(q)] = w2 * (q - p) * (q - p) + f[static_cast<std::size_t>(p)];
    }
}

// Exact squared Euclidean distance to the seed set, anisotropic spacing.
// Seedless lines carry a large finite sentinel, not infinity: the parabola
// intersections must stay finite.
inline std::vector<double> edt_sq(const std::vector<Voxel>& seeds, const Shape& shape,
                                  const std::array<double, 3>& sp) {
    const std::int64_t S = shape[0], H = shape[1], W = shape[2];
    const double inf = 1e15;
    std::vector<double> d(static_cast<std::size_t>(S * H * W), inf);
    for (const auto& v : seeds) d[static_cast<std::size_t>((v.s * H + v.h) * W + v.w)] = 0.0;

    const std::int64_t n_max = std::max({S, H, W});
    std::vector<double> f(static_cast<std::size_t>(n_max)), out(static_cast<std::size_t>(n_max));
    std::vector<std::int64_t> v(static_cast<std::size_t>(n_max));
    std::vector<double> z(static_cast<std::size_t>(n_max) + 1);

    for (std::int64_t h = 0; h < H; ++h)  // along S
        for (std::int64_t w = 0; w < W; ++w) {
            f.resize(static_cast<std::size_t>(S));
            out.resize(static_cast<std::size_t>(S));
            for (std::int64_t s = 0; s < S; ++s) f[static_cast<std::size_t>(s)] = d[static_cast<std::size_t>((s * H + h) * W + w)];
            edt_1d(f, out, v, z, sp[0] * sp[0]);
            for (std::int64_t s = 0; s < S; ++s) d[static_cast<std::size_t>((s * H + h) * W + w)] = out[static_cast<std::size_t>(s)];
        }
    for (std::int64_t s = 0; s < S; ++s)  // along H
        for (std::int64_t w = 0; w < W; ++w) {
            f.resize(static_cast<std::size_t>(H));
            out.resize(static_cast<std::size_t>(H));
            for (std::int64_t h = 0; h < H; ++h) f[static_cast<std::size_t>(h)] = d[static_cast<std::size_t>((s * H + h) * W + w)];
            edt_1d(f, out, v, z, sp[1] * sp[1]);
            for (std::int64_t h = 0; h < H; ++h) d[static_cast<std::size_t>((s * H + h) * W + w)] = out[static_cast<std::size_t>(h)];
        }
    for (std::int64_t s = 0; s < S; ++s)  // along W
        for (std::int64_t h = 0; h < H; ++h) {
            f.resize(static_cast<std::size_t>(W));
            out.resize(static_cast<std::size_t>(W));
            for (std::int64_t w = 0; w < W; ++w) f[static_cast<std::size_t>(w)] = d[static_cast<std::size_t>((s * H + h) * W + w)];
            edt_1d(f, out, v, z, sp[2] * sp[2]);
            for (std::int64_t w = 0; w < W; ++w) d[static_cast<std::size_t>((s * H + h) * W + w)] = out[static_cast<std::size_t>(w)];
        }
    return d;
}

}  // namespace detail

// Max of the two directed sup-inf Euclidean distances between surface point
// sets, by exact pairwise search.
inline double hausdorff_distance(const Mask& pred, const Mask& target,
                                 const std::array<double, 3>& spacing = {1.0, 1.0, 1.0}) {
    validate_binary(pred, "hausdorff pred");
    validate_binary(target, "hausdorff target");
    if (pred.shape != target.shape)
        throw ValidationError("hausdorff: shape mismatch " + shape_str(pred.shape) + " vs " +
                              shape_str(target.shape));
    const auto sp = surface_voxels(pred);
    const auto st = surface_voxels(target);
    if (sp.empty() || st.empty()) throw UndefinedHausdorff();
    return std::sqrt(std::max(detail::directed_sq(sp, st, spacing), detail::directed_sq(st, sp, spacing)));
}

// Distance-transform fast path; agrees exactly with the pairwise version on
// integer grids.
inline double hausdorff_distance_dt(const Mask& pred, const Mask& target,
                                    const std::array<double, 3>& spacing = {1.0, 1.0, 1.0}) {
    validate_binary(pred, "hausdorff pred");
    validate_binary(target, "hausdorff target");
    if (pred.shape != target.shape)
        throw ValidationError("hausdorff: shape mismatch " + shape_str(pred.shape) + " vs " +
                              shape_str(target.shape));
    const auto sp = surface_voxels(pred);
    const auto st = surface_voxels(target);
    if (sp.empty() || st.empty()) throw UndefinedHausdorff();
    const std::int64_t H = pred.shape[1], W = pred.shape[2];
    const auto d_to_t = detail::edt_sq(st, pred.shape, spacing);
    const auto d_to_p = detail::edt_sq(sp, pred.shape, spacing);
    double worst = 0.0;
    for (const auto& v : sp) worst = std::max(worst, d_to_t[static_cast<std::size_t>((v.s * H + v.h) * W + v.w)]);
    for (const auto& v : st) worst = std::max(worst, d_to_p[static_cast<std::size_t>((v.s * H + v.h) * W + v.w)]);
    return std::sqrt(worst);
}

}  // namespace conres
