#pragma once

#include <array>
#include <string>

#include "conres/masks.hpp"
#include "conres/rng.hpp"

namespace conres {

struct VolumeSample {
    Tensor<float> image;  // [C,S,H,W]
    Mask label;           // [S,H,W], values 0..label_classes
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::int64_t label_classes = 1;
    std::string id;
};

enum class ObjectFamily { sphere, ellipsoid, lobed, mix };

inline std::string to_string(ObjectFamily f) {
    switch (f) {
        case ObjectFamily::sphere: return "sphere";
        case ObjectFamily::ellipsoid: return "ellipsoid";
        case ObjectFamily::lobed: return "lobed";
        default: return "mix";
    }
}

inline ObjectFamily object_family_from_string(const std::string& s) {
    if (s == "sphere") return ObjectFamily::sphere;
    if (s == "ellipsoid") return ObjectFamily::ellipsoid;
    if (s == "lobed") return ObjectFamily::lobed;
    if (s == "mix") return ObjectFamily::mix;
    throw ConfigError("unknown object family '" + s + "' (expected sphere|ellipsoid|lobed|mix)");
}

struct PhantomSpec {
    std::array<std::int64_t, 3> shape{32, 64, 64};
    std::int64_t min_objects = 1;
    std::int64_t max_objects = 3;
    ObjectFamily family = ObjectFamily::mix;
    double contrast = 1.0;
    double noise_std = 0.1;
    std::int64_t classes = 1;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
    std::string id = "phantom";

    void validate() const {
        for (const auto e : shape)
            if (e < 4) throw ConfigError("phantom volume extents must be >= 4");
        if (min_objects < 1 || max_objects < min_objects)
            throw ConfigError("phantom object count range is invalid");
        if (classes < 1) throw ConfigError("phantom classes must be >= 1");
        if (noise_std < 0) throw ConfigError("phantom noise_std must be >= 0");
        if (contrast <= 0) throw ConfigError("phantom contrast must be > 0");
    }
};

// One rasterizable object: an ellipsoid, optionally with a low-frequency
// radial perturbation so the cross-section changes from slice to slice.
struct Blob {
    std::array<double, 3> center{};
    std::array<double, 3> radii{};
    double lobe_amp = 0.0;
    int lobe_freq = 2;
    double lobe_phase_a = 0.0;
    double lobe_phase_b = 0.0;
    std::uint8_t cls = 1;
    double contrast = 1.0;
};

inline Blob make_sphere(std::array<double, 3> center, double radius, std::uint8_t cls = 1) {
    Blob b;
    b.center = center;
    b.radii = {radius, radius, radius};
    b.cls = cls;
    return b;
}

inline bool blob_contains(const Blob& b, std::int64_t s, std::int64_t h, std::int64_t w) {
    const double ds = (static_cast<double>(s) - b.center[0]) / b.radii[0];
    const double dh = (static_cast<double>(h) - b.center[1]) / b.radii[1];
    const double dw = (static_cast<double>(w) - b.center[2]) / b.radii[2];
    const double rho2 = ds * ds + dh * dh + dw * dw;
    double threshold = 1.0;
    if (b.lobe_amp > 0.0) {
        const double theta = std::atan2(dw, dh);
        const double psi = std::atan2(ds, std::sqrt(dh * dh + dw * dw));
        threshold += b.lobe_amp * std::sin(b.lobe_freq * theta + b.lobe_phase_a) *
                     std::cos(2.0 * psi + b.lobe_phase_b);
    }
    return rho2 <= threshold * threshold;
}

inline void rasterize_blob(Mask& label, Tensor<float>* intensity, const Blob& b) {
    const std::int64_t S = label.shape[0], H = label.shape[1], W = label.shape[2];
    const std::int64_t s_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(b.center[0] - 2 * b.radii[0]));
    const std::int64_t s_hi = std::min(S - 1, static_cast<std::int64_t>(b.center[0] + 2 * b.radii[0]) + 1);
    for (std::int64_t s = s_lo; s <= s_hi; ++s)
        for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w)
                if (blob_contains(b, s, h, w)) {
                    label[(s * H + h) * W + w] = b.cls;
                    if (intensity) (*intensity)[(s * H + h) * W + w] = static_cast<float>(b.contrast);
                }
}

// Deterministic per spec.seed. Label is the union of the rasterized objects
// (later objects overwrite); image is background zero plus per-object
// contrast plus Gaussian noise.
inline VolumeSample generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, 0x7068616eull));
    const auto& sh = spec.shape;
    const double min_extent = static_cast<double>(std::min({sh[0], sh[1], sh[2]}));
    const double r_max = std::max(2.0, min_extent * 0.3);
    const double r_min = std::max(2.0, r_max / 3.0);

    VolumeSample out;
    out.label = Mask({sh[0], sh[1], sh[2]});
    out.spacing = spec.spacing;
    out.label_classes = spec.classes;
    out.id = spec.id;
    Tensor<float> base({sh[0], sh[1], sh[2]});

    const std::int64_t n_objects = rng.uniform_int(spec.min_objects, spec.max_objects);
    std::int64_t placed = 0;
    for (std::int64_t o = 0; o < n_objects; ++o) {
        Blob b;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            ObjectFamily fam = spec.family;
            if (fam == ObjectFamily::mix)
                fam = static_cast<ObjectFamily>(rng.uniform_int(0, 2));
            const double r = rng.uniform(r_min, r_max);
            b.radii = {r, r, r};
            if (fam != ObjectFamily::sphere)
                for (auto& rr : b.radii) rr = r * rng.uniform(0.6, 1.4);
            if (fam == ObjectFamily::lobed) {
                b.lobe_amp = rng.uniform(0.15, 0.35);
                b.lobe_freq = static_cast<int>(rng.uniform_int(2, 3));
                b.lobe_phase_a = rng.uniform(0.0, 6.28318530717958647692);
                b.lobe_phase_b = rng.uniform(0.0, 6.28318530717958647692);
            }
            ok = true;
            const double margin = 1.0 + (fam == ObjectFamily::lobed ? b.lobe_amp : 0.0);
            for (int a = 0; a < 3 && ok; ++a) {
                const double reach = b.radii[static_cast<std::size_t>(a)] * margin;
                const double lo = reach + 1.0;
                const double hi = static_cast<double>(sh[static_cast<std::size_t>(a)] - 1) - reach - 1.0;
                if (lo > hi) {
                    ok = false;
                    break;
                }
                b.center[static_cast<std::size_t>(a)] = rng.uniform(lo, hi);
            }
        }
        if (!ok) continue;
        b.cls = static_cast<std::uint8_t>(1 + placed % spec.classes);
        b.contrast = spec.contrast * rng.uniform(0.8, 1.2);
        rasterize_blob(out.label, &base, b);
        ++placed;
    }

    bool any_fg = false;
    for (const auto v : out.label.data) any_fg = any_fg || v != 0;
    if (placed == 0 || !any_fg)
        throw GenerationError("phantom spec unsatisfiable: no object fits volume " +
                              shape_str({sh[0], sh[1], sh[2]}) + " after bounded retries");

    if (spec.noise_std > 0)
        for (auto& v : base.data) v += static_cast<float>(rng.normal(0.0, spec.noise_std));
    out.image = Tensor<float>({1, sh[0], sh[1], sh[2]}, std::move(base.data));
    return out;
}

// --- preprocessing ---

// Per-channel standardization; constant channels are only mean-centered.
template <typename T>
Tensor<T> zscore_normalize(const Tensor<T>& image) {
    if (image.rank() < 2) throw ConfigError("zscore_normalize expects [C,...]");
    const std::int64_t c = image.shape[0];
    const std::int64_t per = image.numel() / c;
    Tensor<T> out = image;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        T* d = out.data.data() + ch * per;
        double mean = 0;
        for (std::int64_t i = 0; i < per; ++i) mean += d[i];
        mean /= static_cast<double>(per);
        double var = 0;
        for (std::int64_t i = 0; i < per; ++i) var += (d[i] - mean) * (d[i] - mean);
        var /= static_cast<double>(per);
        const double std_dev = std::sqrt(var);
        if (std_dev > 0)
            for (std::int64_t i = 0; i < per; ++i) d[i] = static_cast<T>((d[i] - mean) / std_dev);
        else
            for (std::int64_t i = 0; i < per; ++i) d[i] = static_cast<T>(d[i] - mean);
    }
    return out;
}

// Clamp to [lo, hi], then map linearly onto [0, 1].
template <typename T>
Tensor<T> truncate_intensity(const Tensor<T>& image, double lo, double hi) {
    if (lo >= hi) throw ConfigError("truncate_intensity: lo must be < hi");
    Tensor<T> out = image;
    for (auto& v : out.data) {
        double x = static_cast<double>(v);
        x = std::min(std::max(x, lo), hi);
        v = static_cast<T>((x - lo) / (hi - lo));
    }
    return out;
}

// --- augmentation / cropping ---

template <typename T>
Tensor<T> flip_tensor(const Tensor<T>& t, std::int64_t dim) {
    const AxisSplit sp = split_at_axis(t.shape, dim);
    Tensor<T> out(t.shape);
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t s = 0; s < sp.extent; ++s)
            for (std::int64_t i = 0; i < sp.inner; ++i)
                out[(o * sp.extent + (sp.extent - 1 - s)) * sp.inner + i] = t[(o * sp.extent + s) * sp.inner + i];
    return out;
}

// Mirrors image and label congruently along the flagged spatial axes.
inline VolumeSample flip_sample(const VolumeSample& sample, const std::array<bool, 3>& axes) {
    VolumeSample out = sample;
    for (int a = 0; a < 3; ++a) {
        if (!axes[static_cast<std::size_t>(a)]) continue;
        out.image = flip_tensor(out.image, a + 1);  // image is [C,S,H,W]
        out.label = flip_tensor(out.label, a);
    }
    return out;
}

// Independent 0.5-probability flips per spatial axis plus a uniform [0.9,1.1]
// intensity scale on the image; the label is never resampled.
inline VolumeSample augment(const VolumeSample& sample, Rng& rng) {
    std::array<bool, 3> axes{};
    for (auto& a : axes) a = rng.bernoulli(0.5);
    VolumeSample out = flip_sample(sample, axes);
    const auto scale = static_cast<float>(rng.uniform(0.9, 1.1));
    for (auto& v : out.image.data) v *= scale;
    return out;
}

inline VolumeSample crop_at(const VolumeSample& sample, const std::array<std::int64_t, 3>& corner,
                            const std::array<std::int64_t, 3>& patch) {
    const std::int64_t c = sample.image.shape[0];
    VolumeSample out;
    out.spacing = sample.spacing;
    out.label_classes = sample.label_classes;
    out.id = sample.id;
    out.image = Tensor<float>({c, patch[0], patch[1], patch[2]});
    out.label = Mask({patch[0], patch[1], patch[2]});
    const auto& ish = sample.image.shape;
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t s = 0; s < patch[0]; ++s)
            for (std::int64_t h = 0; h < patch[1]; ++h)
                for (std::int64_t w = 0; w < patch[2]; ++w)
                    out.image[((ch * patch[0] + s) * patch[1] + h) * patch[2] + w] =
                        sample.image[((ch * ish[2] + corner[0] + s) * ish[3] + corner[1] + h) * ish[4] + corner[2] +
                                     w];
    const auto& lsh = sample.label.shape;
    for (std::int64_t s = 0; s < patch[0]; ++s)
        for (std::int64_t h = 0; h < patch[1]; ++h)
            for (std::int64_t w = 0; w < patch[2]; ++w)
                out.label[(s * patch[1] + h) * patch[2] + w] =
                    sample.label[((corner[0] + s) * lsh[1] + corner[1] + h) * lsh[2] + corner[2] + w];
    return out;
}

namespace phantom_detail {

inline bool patch_has_foreground(const Mask& label, const std::array<std::int64_t, 3>& corner,
                                 const std::array<std::int64_t, 3>& patch) {
    const auto& sh = label.shape;
    for (std::int64_t s = corner[0]; s < corner[0] + patch[0]; ++s)
        for (std::int64_t h = corner[1]; h < corner[1] + patch[1]; ++h)
            for (std::int64_t w = corner[2]; w < corner[2] + patch[2]; ++w)
                if (label[(s * sh[1] + h) * sh[2] + w] != 0) return true;
    return false;
}

}  // namespace phantom_detail

// Uniformly random patch; with probability fg_bias the corner is redrawn
// until the patch holds at least one foreground voxel (bounded retries, then
// a patch around a random foreground voxel).
inline VolumeSample crop_patch(const VolumeSample& sample, const std::array<std::int64_t, 3>& patch, Rng& rng,
                               double fg_bias) {
    const Shape vol{sample.label.shape[0], sample.label.shape[1], sample.label.shape[2]};
    for (int a = 0; a < 3; ++a) {
        if (patch[static_cast<std::size_t>(a)] > vol[static_cast<std::size_t>(a)])
            throw ConfigError("crop_patch: patch " + std::to_string(patch[static_cast<std::size_t>(a)]) +
                              " exceeds volume extent " + std::to_string(vol[static_cast<std::size_t>(a)]) +
                              " on axis " + std::to_string(a));
        if (patch[static_cast<std::size_t>(a)] % 8 != 0)
            throw ConfigError("crop_patch: patch extents must be divisible by 8");
    }
    auto draw_corner = [&] {
        std::array<std::int64_t, 3> c{};
        for (int a = 0; a < 3; ++a)
            c[static_cast<std::size_t>(a)] =
                rng.uniform_int(0, vol[static_cast<std::size_t>(a)] - patch[static_cast<std::size_t>(a)]);
        return c;
    };
    auto corner = draw_corner();
    if (rng.uniform() < fg_bias && !phantom_detail::patch_has_foreground(sample.label, corner, patch)) {
        bool found = false;
        for (int attempt = 0; attempt < 32 && !found; ++attempt) {
            corner = draw_corner();
            found = phantom_detail::patch_has_foreground(sample.label, corner, patch);
        }
        if (!found) {
            std::vector<std::int64_t> fg;
            for (std::int64_t i = 0; i < sample.label.numel(); ++i)
                if (sample.label[i] != 0) fg.push_back(i);
            if (!fg.empty()) {
                const std::int64_t pick = fg[static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<std::int64_t>(fg.size()) - 1))];
                const std::int64_t s = pick / (vol[1] * vol[2]);
                const std::int64_t h = (pick / vol[2]) % vol[1];
                const std::int64_t w = pick % vol[2];
                const std::array<std::int64_t, 3> at{s, h, w};
                for (int a = 0; a < 3; ++a) {
                    const std::int64_t half = patch[static_cast<std::size_t>(a)] / 2;
                    corner[static_cast<std::size_t>(a)] =
                        std::clamp<std::int64_t>(at[static_cast<std::size_t>(a)] - half, 0,
                                                 vol[static_cast<std::size_t>(a)] - patch[static_cast<std::size_t>(a)]);
                }
            }
        }
    }
    return crop_at(sample, corner, patch);
}

}  // namespace conres
