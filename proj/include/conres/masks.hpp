#pragma once

#include <cstdint>

#include "conres/axis.hpp"
#include "conres/tensor.hpp"

namespace conres {

// Masks and label volumes are [S,H,W] uint8 tensors: binary masks hold {0,1},
// label volumes hold class ids 0..C with 0 = background.
using Mask = Tensor<std::uint8_t>;

inline void validate_binary(const Mask& m, const char* what) {
    for (const auto v : m.data)
        if (v > 1) throw ValidationError(std::string(what) + ": mask values must be 0 or 1, found " +
                                         std::to_string(static_cast<int>(v)));
}

inline void validate_labels(const Mask& m, std::int64_t classes) {
    for (const auto v : m.data)
        if (v > classes)
            throw ValidationError("label volume: value " + std::to_string(static_cast<int>(v)) +
                                  " outside 0.." + std::to_string(classes));
}

// out[s] = |seg[s] - seg[s-1]| along the residual axis, first slice zero.
// For binary masks this is the voxel-wise XOR of adjacent slices.
inline Mask compute_residual_mask(const Mask& seg, ResidualAxis axis) {
    validate_binary(seg, "compute_residual_mask");
    const std::int64_t dim = residual_axis_dim(axis, seg.rank());
    const AxisSplit sp = split_at_axis(seg.shape, dim);
    if (sp.extent < 2)
        throw ConfigError("compute_residual_mask: axis extent must be >= 2, got " + std::to_string(sp.extent));
    Mask out(seg.shape);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        const std::int64_t base = o * sp.extent * sp.inner;
        for (std::int64_t s = 1; s < sp.extent; ++s)
            for (std::int64_t i = 0; i < sp.inner; ++i)
                out[base + s * sp.inner + i] =
                    static_cast<std::uint8_t>(seg[base + s * sp.inner + i] ^ seg[base + (s - 1) * sp.inner + i]);
    }
    return out;
}

// Per-class residuals of a label volume; channel c-1 holds the residual of
// the indicator of class c. The background class has no channel.
inline Mask compute_residual_mask_multiclass(const Mask& labels, std::int64_t classes, ResidualAxis axis) {
    validate_labels(labels, classes);
    if (classes < 1) throw ConfigError("compute_residual_mask_multiclass: need at least one foreground class");
    Shape out_shape = labels.shape;
    out_shape.insert(out_shape.begin(), classes);
    Mask out(out_shape);
    Mask indicator(labels.shape);
    for (std::int64_t c = 1; c <= classes; ++c) {
        for (std::int64_t i = 0; i < labels.numel(); ++i)
            indicator[i] = labels[i] == static_cast<std::uint8_t>(c) ? 1 : 0;
        Mask res = compute_residual_mask(indicator, axis);
        std::copy(res.data.begin(), res.data.end(), out.data.begin() + (c - 1) * labels.numel());
    }
    return out;
}

inline Mask extract_first_slice(const Mask& seg, ResidualAxis axis) {
    const std::int64_t dim = residual_axis_dim(axis, seg.rank());
    const AxisSplit sp = split_at_axis(seg.shape, dim);
    Shape out_shape = seg.shape;
    out_shape[static_cast<std::size_t>(dim)] = 1;
    Mask out(out_shape);
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] = seg[o * sp.extent * sp.inner + i];
    return out;
}

// Rebuilds the full mask from its first slice and the residual mask:
// seg[s] = seg[s-1] XOR res[s].
inline Mask xor_reconstruct(const Mask& first_slice, const Mask& res, ResidualAxis axis) {
    validate_binary(first_slice, "xor_reconstruct first slice");
    validate_binary(res, "xor_reconstruct residual");
    const std::int64_t dim = residual_axis_dim(axis, res.rank());
    const AxisSplit sp = split_at_axis(res.shape, dim);
    if (first_slice.numel() != sp.outer * sp.inner)
        throw ConfigError("xor_reconstruct: first slice shape " + shape_str(first_slice.shape) +
                          " inconsistent with residual shape " + shape_str(res.shape));
    Mask out(res.shape);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        const std::int64_t base = o * sp.extent * sp.inner;
        for (std::int64_t i = 0; i < sp.inner; ++i) out[base + i] = first_slice[o * sp.inner + i];
        for (std::int64_t s = 1; s < sp.extent; ++s)
            for (std::int64_t i = 0; i < sp.inner; ++i)
                out[base + s * sp.inner + i] =
                    static_cast<std::uint8_t>(out[base + (s - 1) * sp.inner + i] ^ res[base + s * sp.inner + i]);
    }
    return out;
}

inline Mask class_indicator(const Mask& labels, std::int64_t cls) {
    Mask out(labels.shape);
    for (std::int64_t i = 0; i < labels.numel(); ++i)
        out[i] = labels[i] == static_cast<std::uint8_t>(cls) ? 1 : 0;
    return out;
}

// One-hot over classes 0..C as a float-family tensor [C+1, S, H, W].
template <typename T>
Tensor<T> one_hot(const Mask& labels, std::int64_t classes) {
    validate_labels(labels, classes);
    Shape out_shape = labels.shape;
    out_shape.insert(out_shape.begin(), classes + 1);
    Tensor<T> out(out_shape);
    for (std::int64_t i = 0; i < labels.numel(); ++i)
        out[static_cast<std::int64_t>(labels[i]) * labels.numel() + i] = T(1);
    return out;
}

}  // namespace conres
