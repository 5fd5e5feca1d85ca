#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace hoigen {

/// Named map of trainable tensors. Initialization is order-independent and
/// deterministic: each tensor draws from an RNG seeded by (store seed, name),
/// so identical seeds yield bit-identical parameters.
template <class T>
class ParamStoreT {
public:
    explicit ParamStoreT(uint64_t seed = 0) : seed_(seed) {}

    uint64_t seed() const { return seed_; }

    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    TensorT<T>& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) tensor_fail("param_store", "unknown parameter '" + name + "'");
        return it->second;
    }

    const TensorT<T>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) tensor_fail("param_store", "unknown parameter '" + name + "'");
        return it->second;
    }

    /// Linear weight, uniform(+-1/sqrt(fan_in)), stored [in, out] so tokens
    /// multiply as x * W.
    TensorT<T>& weight(const std::string& name, int fan_in, int fan_out) {
        return create(name, {fan_in, fan_out}, InitKind::FanIn, fan_in);
    }

    TensorT<T>& bias(const std::string& name, int size) {
        return create(name, {1, size}, InitKind::Zero, 0);
    }

    TensorT<T>& ones_param(const std::string& name, int size) {
        return create(name, {1, size}, InitKind::One, 0);
    }

    TensorT<T>& scalar_param(const std::string& name, T v) {
        auto& t = create(name, {1}, InitKind::Zero, 0);
        if (fresh_) t.values()[0] = v;
        return t;
    }

    /// Embedding-style table, gaussian * 0.02.
    TensorT<T>& table(const std::string& name, int rows, int cols) {
        return create(name, {rows, cols}, InitKind::SmallNormal, 0);
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, t] : params_) out.push_back(name);
        return out;
    }

    std::map<std::string, TensorT<T>>& all() { return params_; }
    const std::map<std::string, TensorT<T>>& all() const { return params_; }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& [name, t] : params_) n += t.size();
        return n;
    }

private:
    enum class InitKind { Zero, One, FanIn, SmallNormal };

    TensorT<T>& create(const std::string& name, std::vector<int> shape, InitKind kind, int fan_in) {
        auto it = params_.find(name);
        if (it != params_.end()) {
            if (it->second.shape() != shape)
                tensor_fail("param_store", "parameter '" + name + "' re-registered with shape " +
                                               shape_str(shape) + " (was " +
                                               shape_str(it->second.shape()) + ")");
            fresh_ = false;
            return it->second;
        }
        fresh_ = true;
        TensorT<T> t = TensorT<T>::zeros(shape, true);
        Rng rng(Rng::hash64(name, seed_ * 0x9e3779b97f4a7c15ull + 0x1234abcd));
        switch (kind) {
            case InitKind::Zero:
                break;
            case InitKind::One:
                std::fill(t.values().begin(), t.values().end(), T(1));
                break;
            case InitKind::FanIn: {
                const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
                for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
                break;
            }
            case InitKind::SmallNormal:
                for (auto& v : t.values()) v = static_cast<T>(rng.gaussian() * 0.02);
                break;
        }
        auto [pos, inserted] = params_.emplace(name, std::move(t));
        (void)inserted;
        return pos->second;
    }

    uint64_t seed_;
    bool fresh_ = false;
    std::map<std::string, TensorT<T>> params_;
};

using ParamStore = ParamStoreT<float>;

}  // namespace hoigen
