#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "conres/tensor.hpp"

namespace conres {

// Named parameter set with stable insertion order; the order defines the
// checkpoint payload layout.
template <typename T>
class ParamDict {
public:
    void add(const std::string& name, Tensor<T> value) {
        if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
        index_[name] = items_.size();
        items_.emplace_back(name, std::move(value));
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return items_[it->second].second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return items_[it->second].second;
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }

    std::size_t size() const { return items_.size(); }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : items_) n += t.numel();
        return n;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(items_.size());
        for (const auto& [name, t] : items_) out.push_back(name);
        return out;
    }

    template <typename U>
    ParamDict<U> cast() const {
        ParamDict<U> out;
        for (const auto& [name, t] : items_) out.add(name, t.template cast<U>());
        return out;
    }

private:
    std::vector<std::pair<std::string, Tensor<T>>> items_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace conres
