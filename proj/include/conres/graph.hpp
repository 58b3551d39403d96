#pragma once

#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "conres/tensor.hpp"

namespace conres {

// Opt-in NaN/Inf assertions on every forward op (CONRES_CHECK_FINITE=1).
inline bool& finite_checks_flag() {
    static bool flag = [] {
        const char* env = std::getenv("CONRES_CHECK_FINITE");
        return env != nullptr && env[0] != '\0' && env[0] != '0';
    }();
    return flag;
}

// Reverse-mode tape. Nodes are appended in execution order, which is also a
// topological order, so backward() is a single reverse sweep. One graph is
// single-writer; independent graphs may live on independent threads.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::int64_t self)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // empty until first accumulation
        BackwardFn backward;
        bool needs_grad = false;
        std::string param_name;  // nonempty only for registered parameters
    };

    // Set false for inference: values are still recorded, closures are not.
    bool recording = true;

    std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
    const Tensor<T>& value(std::int64_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor<T>& value(std::int64_t id) { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad(std::int64_t id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    std::int64_t leaf(Tensor<T> v, bool needs_grad = false) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return size() - 1;
    }

    std::int64_t constant(Tensor<T> v) { return leaf(std::move(v), false); }

    std::int64_t parameter(const std::string& name, Tensor<T> v) {
        std::int64_t id = leaf(std::move(v), true);
        nodes_[static_cast<std::size_t>(id)].param_name = name;
        param_ids_.push_back(id);
        return id;
    }

    // All ops funnel through here.
    std::int64_t emit(Tensor<T> v, const std::vector<std::int64_t>& inputs, BackwardFn fn) {
        if (finite_checks_flag() && !v.all_finite())
            throw ValidationError("non-finite value produced by forward op at node " + std::to_string(size()));
        Node n;
        n.value = std::move(v);
        for (auto id : inputs) n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(id)].needs_grad;
        if (recording && n.needs_grad) n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return size() - 1;
    }

    bool has_grad(std::int64_t id) const { return !nodes_[static_cast<std::size_t>(id)].grad.data.empty(); }

    // Zero-initialized on first touch.
    Tensor<T>& grad(std::int64_t id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
        return n.grad;
    }

    void backward(std::int64_t loss) {
        if (value(loss).numel() != 1) throw UsageError("backward() requires a scalar loss node");
        grad(loss)[0] = T(1);
        for (std::int64_t id = loss; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.backward && has_grad(id)) n.backward(*this, id);
        }
    }

    // Every registered parameter gets an entry; unreached ones get zeros.
    std::map<std::string, Tensor<T>> parameter_gradients() {
        std::map<std::string, Tensor<T>> out;
        for (auto id : param_ids_) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            out[n.param_name] = has_grad(id) ? n.grad : Tensor<T>(n.value.shape);
        }
        return out;
    }

    const std::vector<std::int64_t>& parameters() const { return param_ids_; }

    // --- kink instrumentation (finite-difference support) ---
    // relu/abs/clamp ops report how close they passed to their nondifferentiable
    // points, and fold the sign pattern into a hash so two nearby evaluations
    // can be checked for a kink crossing between them.
    double kink_margin = std::numeric_limits<double>::infinity();
    std::uint64_t sign_hash = 1469598103934665603ull;

    void note_kink(double distance_from_kink) {
        if (distance_from_kink < kink_margin) kink_margin = distance_from_kink;
    }
    void note_sign(bool s) {
        sign_hash ^= static_cast<std::uint64_t>(s) + 0x9e3779b97f4a7c15ull + (sign_hash << 6) + (sign_hash >> 2);
    }

private:
    // deque: node references handed out by value()/grad() survive later emits
    std::deque<Node> nodes_;
    std::vector<std::int64_t> param_ids_;
};

}  // namespace conres
