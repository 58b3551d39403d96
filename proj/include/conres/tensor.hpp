#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "conres/errors.hpp"
#include "conres/rng.hpp"

namespace conres {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major N-d array. Plain value type: copy copies, no views.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)) {
        validate_shape();
        data.assign(static_cast<std::size_t>(shape_numel(shape)), T(0));
    }

    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        validate_shape();
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
            throw ConfigError("tensor data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
        }
    }

    static Tensor full(Shape s, T value) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape.size()); }

    T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    Shape strides() const {
        Shape st(shape.size(), 1);
        for (std::int64_t i = rank() - 2; i >= 0; --i)
            st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i + 1)] * shape[static_cast<std::size_t>(i + 1)];
        return st;
    }

    T& at(const Shape& idx) { return data[static_cast<std::size_t>(flat_index(idx))]; }
    const T& at(const Shape& idx) const { return data[static_cast<std::size_t>(flat_index(idx))]; }

    std::int64_t flat_index(const Shape& idx) const {
        if (idx.size() != shape.size()) throw UsageError("index rank mismatch for shape " + shape_str(shape));
        std::int64_t flat = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] < 0 || idx[k] >= shape[k])
                throw UsageError("index out of bounds at axis " + std::to_string(k));
            flat = flat * shape[k] + idx[k];
        }
        return flat;
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

private:
    void validate_shape() const {
        if (shape.empty()) throw ConfigError("tensor shape must have at least one axis");
        for (auto e : shape)
            if (e < 1) throw ConfigError("tensor shape extents must be >= 1, got " + shape_str(shape));
    }
};

template <typename T>
Tensor<T> random_normal(Shape shape, Rng& rng, double mean = 0.0, double std = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal(mean, std));
    return t;
}

template <typename T>
Tensor<T> random_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

}  // namespace conres
