#pragma once

#include <cstdint>
#include <string>

#include "conres/errors.hpp"
#include "conres/tensor.hpp"

namespace conres {

// Volumes are [..., S, H, W]; the residual axis names which of the three
// trailing spatial axes adjacent-slice differences run along.
enum class ResidualAxis { axial, sagittal, coronal };  // S, H, W

inline std::int64_t residual_axis_dim(ResidualAxis axis, std::int64_t rank) {
    if (rank < 3) throw ConfigError("residual axis requires rank >= 3, got rank " + std::to_string(rank));
    switch (axis) {
        case ResidualAxis::axial: return rank - 3;
        case ResidualAxis::sagittal: return rank - 2;
        default: return rank - 1;
    }
}

inline std::string to_string(ResidualAxis axis) {
    switch (axis) {
        case ResidualAxis::axial: return "axial";
        case ResidualAxis::sagittal: return "sagittal";
        default: return "coronal";
    }
}

inline ResidualAxis residual_axis_from_string(const std::string& s) {
    if (s == "axial") return ResidualAxis::axial;
    if (s == "sagittal") return ResidualAxis::sagittal;
    if (s == "coronal") return ResidualAxis::coronal;
    throw ConfigError("unknown residual axis '" + s + "' (expected axial|sagittal|coronal)");
}

// Splits a shape into (outer, extent, inner) around one axis, the standard
// decomposition for striding along that axis of a row-major array.
struct AxisSplit {
    std::int64_t outer;
    std::int64_t extent;
    std::int64_t inner;
};

inline AxisSplit split_at_axis(const Shape& shape, std::int64_t dim) {
    if (dim < 0 || dim >= static_cast<std::int64_t>(shape.size()))
        throw ConfigError("axis " + std::to_string(dim) + " out of range for shape " + shape_str(shape));
    AxisSplit s{1, shape[static_cast<std::size_t>(dim)], 1};
    for (std::int64_t i = 0; i < dim; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
    for (std::int64_t i = dim + 1; i < static_cast<std::int64_t>(shape.size()); ++i)
        s.inner *= shape[static_cast<std::size_t>(i)];
    return s;
}

}  // namespace conres
