#pragma once

#include <cmath>
#include <vector>

#include "conres/axis.hpp"
#include "conres/graph.hpp"

namespace conres {
namespace ops {

namespace detail {
template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape)
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) {
        T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
}
}  // namespace detail

template <typename T>
std::int64_t add(Graph<T>& g, std::int64_t a, std::int64_t b) {
    detail::check_same_shape(g.value(a), g.value(b), "add");
    Tensor<T> out = g.value(a);
    const Tensor<T>& vb = g.value(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        if (gr.needs_grad(a)) {
            Tensor<T>& ga = gr.grad(a);
            for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
        }
        if (gr.needs_grad(b)) {
            Tensor<T>& gb = gr.grad(b);
            for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
        }
    });
}

template <typename T>
std::int64_t mul(Graph<T>& g, std::int64_t a, std::int64_t b) {
    detail::check_same_shape(g.value(a), g.value(b), "mul");
    Tensor<T> out = g.value(a);
    const Tensor<T>& vb = g.value(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        const Tensor<T>& va = gr.value(a);
        const Tensor<T>& vb2 = gr.value(b);
        if (gr.needs_grad(a)) {
            Tensor<T>& ga = gr.grad(a);
            for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * vb2[i];
        }
        if (gr.needs_grad(b)) {
            Tensor<T>& gb = gr.grad(b);
            for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * va[i];
        }
    });
}

template <typename T>
std::int64_t sub(Graph<T>& g, std::int64_t a, std::int64_t b) {
    detail::check_same_shape(g.value(a), g.value(b), "sub");
    Tensor<T> out = g.value(a);
    const Tensor<T>& vb = g.value(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        if (gr.needs_grad(a)) {
            Tensor<T>& ga = gr.grad(a);
            for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
        }
        if (gr.needs_grad(b)) {
            Tensor<T>& gb = gr.grad(b);
            for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
        }
    });
}

template <typename T>
std::int64_t scalar_mul(Graph<T>& g, std::int64_t x, T c) {
    Tensor<T> out = g.value(x);
    for (auto& v : out.data) v *= c;
    return g.emit(std::move(out), {x}, [x, c](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * c;
    });
}

template <typename T>
std::int64_t scalar_add(Graph<T>& g, std::int64_t x, T c) {
    Tensor<T> out = g.value(x);
    for (auto& v : out.data) v += c;
    return g.emit(std::move(out), {x}, [x](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
    });
}

template <typename T>
std::int64_t sigmoid(Graph<T>& g, std::int64_t x) {
    Tensor<T> out = g.value(x);
    for (auto& v : out.data) v = detail::stable_sigmoid(v);
    return g.emit(std::move(out), {x}, [x](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        const Tensor<T>& y = gr.value(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * y[i] * (T(1) - y[i]);
    });
}

template <typename T>
std::int64_t relu(Graph<T>& g, std::int64_t x) {
    Tensor<T> out = g.value(x);
    for (const auto& v : g.value(x).data) {
        g.note_kink(std::abs(static_cast<double>(v)));
        g.note_sign(v > T(0));
    }
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return g.emit(std::move(out), {x}, [x](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        const Tensor<T>& vx = gr.value(x);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i)
            if (vx[i] > T(0)) gx[i] += go[i];
    });
}

// Normalized exponentials along one axis; rows sum to 1.
template <typename T>
std::int64_t softmax(Graph<T>& g, std::int64_t x, std::int64_t dim) {
    const Tensor<T>& vx = g.value(x);
    const AxisSplit sp = split_at_axis(vx.shape, dim);
    Tensor<T> out(vx.shape);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            const std::int64_t base = o * sp.extent * sp.inner + i;
            T mx = vx[base];
            for (std::int64_t s = 1; s < sp.extent; ++s) mx = std::max(mx, vx[base + s * sp.inner]);
            T denom = T(0);
            for (std::int64_t s = 0; s < sp.extent; ++s) {
                T e = std::exp(vx[base + s * sp.inner] - mx);
                out[base + s * sp.inner] = e;
                denom += e;
            }
            for (std::int64_t s = 0; s < sp.extent; ++s) out[base + s * sp.inner] /= denom;
        }
    }
    return g.emit(std::move(out), {x}, [x, sp](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        const Tensor<T>& y = gr.value(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                const std::int64_t base = o * sp.extent * sp.inner + i;
                T dot = T(0);
                for (std::int64_t s = 0; s < sp.extent; ++s) dot += go[base + s * sp.inner] * y[base + s * sp.inner];
                for (std::int64_t s = 0; s < sp.extent; ++s) {
                    const std::int64_t k = base + s * sp.inner;
                    gx[k] += y[k] * (go[k] - dot);
                }
            }
        }
    });
}

template <typename T>
std::int64_t sum(Graph<T>& g, std::int64_t x) {
    T acc = T(0);
    for (const auto& v : g.value(x).data) acc += v;
    return g.emit(Tensor<T>::scalar(acc), {x}, [x](Graph<T>& gr, std::int64_t self) {
        const T go = gr.grad(self)[0];
        Tensor<T>& gx = gr.grad(x);
        for (auto& v : gx.data) v += go;
    });
}

template <typename T>
std::int64_t mean(Graph<T>& g, std::int64_t x) {
    const std::int64_t n = g.value(x).numel();
    T acc = T(0);
    for (const auto& v : g.value(x).data) acc += v;
    acc /= static_cast<T>(n);
    return g.emit(Tensor<T>::scalar(acc), {x}, [x, n](Graph<T>& gr, std::int64_t self) {
        const T go = gr.grad(self)[0] / static_cast<T>(n);
        Tensor<T>& gx = gr.grad(x);
        for (auto& v : gx.data) v += go;
    });
}

// out[s] = |x[s] - x[s-1]| along `dim`; slice 0 is zero-filled so the shape
// is preserved. Subgradient 0 where the difference is exactly 0.
template <typename T>
std::int64_t slicewise_abs_diff(Graph<T>& g, std::int64_t x, std::int64_t dim) {
    const Tensor<T>& vx = g.value(x);
    const AxisSplit sp = split_at_axis(vx.shape, dim);
    if (sp.extent < 2)
        throw ConfigError("slicewise_abs_diff: axis extent must be >= 2, got " + std::to_string(sp.extent));
    Tensor<T> out(vx.shape);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        const std::int64_t base = o * sp.extent * sp.inner;
        for (std::int64_t s = 1; s < sp.extent; ++s) {
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                const T d = vx[base + s * sp.inner + i] - vx[base + (s - 1) * sp.inner + i];
                g.note_kink(std::abs(static_cast<double>(d)));
                g.note_sign(d > T(0));
                out[base + s * sp.inner + i] = std::abs(d);
            }
        }
    }
    return g.emit(std::move(out), {x}, [x, sp](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        const Tensor<T>& vx2 = gr.value(x);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            const std::int64_t base = o * sp.extent * sp.inner;
            for (std::int64_t s = 1; s < sp.extent; ++s) {
                for (std::int64_t i = 0; i < sp.inner; ++i) {
                    const std::int64_t hi = base + s * sp.inner + i;
                    const std::int64_t lo = base + (s - 1) * sp.inner + i;
                    const T d = vx2[hi] - vx2[lo];
                    const T sign = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                    gx[hi] += go[hi] * sign;
                    gx[lo] -= go[hi] * sign;
                }
            }
        }
    });
}

// Copies channels [c0, c0+count) of [N,C,...] into [N,count,...]; backward scatters.
template <typename T>
std::int64_t slice_channels(Graph<T>& g, std::int64_t x, std::int64_t c0, std::int64_t count) {
    const Tensor<T>& vx = g.value(x);
    if (vx.rank() < 2) throw ConfigError("slice_channels: rank must be >= 2");
    const std::int64_t n = vx.shape[0], ch = vx.shape[1];
    if (c0 < 0 || count < 1 || c0 + count > ch)
        throw ConfigError("slice_channels: range [" + std::to_string(c0) + "," + std::to_string(c0 + count) +
                          ") out of bounds for " + std::to_string(ch) + " channels");
    std::int64_t inner = 1;
    for (std::int64_t i = 2; i < vx.rank(); ++i) inner *= vx.shape[static_cast<std::size_t>(i)];
    Shape out_shape = vx.shape;
    out_shape[1] = count;
    Tensor<T> out(out_shape);
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t c = 0; c < count; ++c)
            for (std::int64_t i = 0; i < inner; ++i)
                out[(b * count + c) * inner + i] = vx[(b * ch + c0 + c) * inner + i];
    return g.emit(std::move(out), {x}, [x, c0, count, n, ch, inner](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t c = 0; c < count; ++c)
                for (std::int64_t i = 0; i < inner; ++i)
                    gx[(b * ch + c0 + c) * inner + i] += go[(b * count + c) * inner + i];
    });
}

// Copies channel c of [N,C,...] into [N,1,...]; backward scatters.
template <typename T>
std::int64_t select_channel(Graph<T>& g, std::int64_t x, std::int64_t c) {
    const Tensor<T>& vx = g.value(x);
    if (vx.rank() < 2) throw ConfigError("select_channel: rank must be >= 2");
    const std::int64_t n = vx.shape[0], ch = vx.shape[1];
    if (c < 0 || c >= ch) throw ConfigError("select_channel: channel " + std::to_string(c) + " out of range");
    std::int64_t inner = 1;
    for (std::int64_t i = 2; i < vx.rank(); ++i) inner *= vx.shape[static_cast<std::size_t>(i)];
    Shape out_shape = vx.shape;
    out_shape[1] = 1;
    Tensor<T> out(out_shape);
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t i = 0; i < inner; ++i) out[b * inner + i] = vx[(b * ch + c) * inner + i];
    return g.emit(std::move(out), {x}, [x, c, n, ch, inner](Graph<T>& gr, std::int64_t self) {
        const Tensor<T>& go = gr.grad(self);
        Tensor<T>& gx = gr.grad(x);
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t i = 0; i < inner; ++i) gx[(b * ch + c) * inner + i] += go[b * inner + i];
    });
}

}  // namespace ops
}  // namespace conres
