#pragma once

#include <functional>

#include "conres/graph.hpp"
#include "conres/rng.hpp"

namespace conres {

// Central finite differences against reverse-mode gradients, in 64-bit.
// Inputs are resampled until every relu/abs/clamp in the program keeps a
// minimum distance from its kink; finite differences are meaningless there.
// For programs too large to clear globally, individual probe points whose
// +/-h evaluations land on different sides of a kink are skipped instead
// (detected by comparing the recorded activation-sign hashes).
struct GradCheckOptions {
    double h = 1e-5;
    double rel_tol = 1e-4;
    double kink_margin = 1e-2;
    int max_resamples = 64;
    bool require_margin = true;  // false: keep first sample, rely on crossing skips
    std::int64_t max_coords_per_tensor = 64;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::int64_t coords_checked = 0;
    std::int64_t coords_skipped = 0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    int resamples = 0;
    bool pass = true;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor<double>>>;

// gen draws one input set; program wires them (in order) into a scalar loss.
using GradCheckGenerator = std::function<NamedTensors(Rng&)>;
using GradCheckProgram = std::function<std::int64_t(Graph<double>&, const std::vector<std::int64_t>&)>;

namespace detail {

struct EvalResult {
    double loss;
    std::uint64_t sign_hash;
    double kink_margin;
};

inline EvalResult eval_program(const GradCheckProgram& program, const NamedTensors& inputs, bool record) {
    Graph<double> g;
    g.recording = record;
    std::vector<std::int64_t> ids;
    ids.reserve(inputs.size());
    for (const auto& [name, tensor] : inputs) ids.push_back(g.parameter(name, tensor));
    const std::int64_t loss = program(g, ids);
    if (g.value(loss).numel() != 1) throw UsageError("grad_check: program must produce a scalar loss");
    return {g.value(loss)[0], g.sign_hash, g.kink_margin};
}

}  // namespace detail

inline GradCheckReport grad_check(const GradCheckGenerator& gen, const GradCheckProgram& program,
                                  const GradCheckOptions& opts = {}) {
    GradCheckReport report;

    NamedTensors inputs;
    for (int attempt = 0;; ++attempt) {
        Rng rng(mix_seed(opts.seed, 0x67636b, static_cast<std::uint64_t>(attempt)));
        inputs = gen(rng);
        const auto probe = detail::eval_program(program, inputs, false);
        if (!opts.require_margin || probe.kink_margin > opts.kink_margin) break;
        if (attempt >= opts.max_resamples)
            throw UsageError("grad_check: could not sample inputs clear of kinks after " +
                             std::to_string(opts.max_resamples) + " attempts");
        report.resamples = attempt + 1;
    }

    // analytic gradients
    Graph<double> g;
    std::vector<std::int64_t> ids;
    for (const auto& [name, tensor] : inputs) ids.push_back(g.parameter(name, tensor));
    const std::int64_t loss = program(g, ids);
    g.backward(loss);
    auto grads = g.parameter_gradients();

    for (std::size_t t = 0; t < inputs.size(); ++t) {
        GradCheckEntry entry;
        entry.name = inputs[t].first;
        const Tensor<double>& ad = grads.at(entry.name);
        const std::int64_t n = ad.numel();

        std::vector<std::int64_t> coords;
        if (n <= opts.max_coords_per_tensor) {
            coords.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            Rng pick(mix_seed(opts.seed, 0x636f6f7264, t));
            for (std::int64_t i = 0; i < opts.max_coords_per_tensor; ++i)
                coords.push_back(pick.uniform_int(0, n - 1));
        }

        for (const auto coord : coords) {
            NamedTensors probe = inputs;
            double& slot = probe[t].second[coord];
            const double orig = slot;
            slot = orig + opts.h;
            const auto plus = detail::eval_program(program, probe, false);
            slot = orig - opts.h;
            const auto minus = detail::eval_program(program, probe, false);
            slot = orig;
            if (plus.sign_hash != minus.sign_hash) {
                ++entry.coords_skipped;
                continue;
            }
            const double fd = (plus.loss - minus.loss) / (2.0 * opts.h);
            const double a = ad[coord];
            const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.coords_checked;
        }
        entry.pass = entry.max_rel_err <= opts.rel_tol;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace conres
