#pragma once

#include <string>
#include <vector>

#include "core/nn.hpp"

namespace hoigen {

/// Router: logits = tau * (x W_route) R, full softmax over experts, top-k
/// selection by logit with lowest-index tie break, gates renormalized over
/// the selected experts. f counts each routed slot with weight 1/k so the
/// fractions sum to 1; P is the mean softmax probability per expert.
template <class T>
struct RouterT {
    TensorT<T> w_route;  // [d_in, hidden]
    TensorT<T> r;        // [hidden, n_experts]
    TensorT<T> tau;      // trainable temperature, multiplies the logits
    int n_experts = 0;

    static RouterT create(ParamStoreT<T>& ps, const std::string& name, int d_in, int hidden,
                          int n_experts) {
        return {ps.weight(name + ".w_route", d_in, hidden),
                ps.weight(name + ".r", hidden, n_experts),
                ps.scalar_param(name + ".tau", T(1)), n_experts};
    }
};

template <class T>
struct RouteResult {
    std::vector<int> indices;  // n_tokens * k expert ids
    TensorT<T> gates;          // [n_tokens, k], rows sum to 1
    TensorT<T> probs;          // [n_tokens, n_experts] full softmax
    TensorT<T> mean_probs;     // [1, n_experts] differentiable P
    std::vector<double> f;     // routed token-slot fraction per expert
    std::vector<double> p;     // value copy of mean_probs
};

template <class T>
RouteResult<T> route(const TensorT<T>& tokens, const RouterT<T>& router, int k,
                     const std::vector<int>* forced_indices = nullptr) {
    if (k < 1 || k > router.n_experts)
        tensor_fail("route", "k=" + std::to_string(k) + " out of range for " +
                                 std::to_string(router.n_experts) + " experts");
    const int n_tokens = tokens.rows();
    TensorT<T> logits = mul(matmul(matmul(tokens, router.w_route), router.r), router.tau);
    RouteResult<T> out;
    out.probs = softmax(logits, 1);
    out.mean_probs = mean_axis(out.probs, 0);

    if (forced_indices != nullptr) {
        if (static_cast<int>(forced_indices->size()) != n_tokens * k)
            tensor_fail("route", "forced index count mismatch");
        out.indices = *forced_indices;
    } else {
        out.indices = topk(logits, k).indices;
    }

    // gates: softmax restricted to the selected experts, renormalized
    TensorT<T> selected = gather_per_row(out.probs, out.indices, k);
    out.gates = div(selected, sum_axis(selected, 1));

    out.f.assign(static_cast<size_t>(router.n_experts), 0.0);
    for (int idx : out.indices) out.f[static_cast<size_t>(idx)] += 1.0 / (n_tokens * k);
    out.p.assign(out.mean_probs.values().begin(), out.mean_probs.values().end());
    return out;
}

/// Load-balancing term sum_i f_i * P_i; plain-number form.
inline double balance_loss_value(const std::vector<double>& f, const std::vector<double>& p) {
    if (f.size() != p.size()) tensor_fail("balance_loss", "f and P length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < f.size(); ++i) acc += f[i] * p[i];
    return acc;
}

/// Differentiable form: gradient flows through P, f enters as constants.
template <class T>
TensorT<T> balance_loss(const std::vector<double>& f, const TensorT<T>& mean_probs) {
    if (static_cast<int64_t>(f.size()) != mean_probs.size())
        tensor_fail("balance_loss", "f and P length mismatch");
    TensorT<T> fc = TensorT<T>::zeros({1, static_cast<int>(f.size())});
    for (size_t i = 0; i < f.size(); ++i) fc.values()[i] = static_cast<T>(f[i]);
    return sum(mul(mean_probs, fc));
}

/// FiLM-style conditioned expert: the pooled condition produces per-feature
/// scale and shift, a linear layer plus feed-forward transform the modulated
/// tokens.
template <class T>
struct FilmExpertT {
    LinearT<T> w1;  // cond -> 2 * d_model
    LinearT<T> w2;  // d_model -> d_model
    FeedForwardT<T> ffn;
    int d_model = 0;

    static FilmExpertT create(ParamStoreT<T>& ps, const std::string& name, int cond_dim,
                              int d_model, int ffn_hidden) {
        return {LinearT<T>::create(ps, name + ".w1", cond_dim, 2 * d_model),
                LinearT<T>::create(ps, name + ".w2", d_model, d_model),
                FeedForwardT<T>::create(ps, name + ".ffn", d_model, ffn_hidden), d_model};
    }

    /// cond is a pooled [1, cond_dim] row; scale/shift broadcast over tokens.
    TensorT<T> operator()(const TensorT<T>& tokens, const TensorT<T>& cond) const {
        if (tokens.cols() != d_model)
            tensor_fail("expert_forward", "token width " + shape_str(tokens.shape()) +
                                              " does not match d_model " + std::to_string(d_model));
        TensorT<T> c = w1(gelu(cond));  // [1, 2*d]
        TensorT<T> c1 = slice_cols(c, 0, d_model);
        TensorT<T> c2 = slice_cols(c, d_model, 2 * d_model);
        TensorT<T> modulated = add(mul(tokens, add_scalar(c1, 1.0)), c2);
        return ffn(w2(gelu(modulated)));
    }
};

template <class T>
struct MoEOutputT {
    TensorT<T> fused;         // [n_tokens, d_model]
    TensorT<T> balance;       // scalar
    std::vector<double> f;    // per-expert routed fraction
    std::vector<double> p;    // per-expert mean probability
    std::vector<int> indices; // n_tokens * k
};

/// Modality-aware MoE fusion layer: route each token to the top-k experts and
/// sum their FiLM-conditioned outputs weighted by the renormalized gates.
template <class T>
class MoELayerT {
public:
    MoELayerT(ParamStoreT<T>& ps, const std::string& prefix, int d_model, int cond_dim,
              int n_experts, int k, int router_hidden, int ffn_hidden)
        : k_(k), router_(RouterT<T>::create(ps, prefix + ".router", d_model, router_hidden, n_experts)) {
        for (int e = 0; e < n_experts; ++e)
            experts_.push_back(FilmExpertT<T>::create(ps, prefix + ".expert" + std::to_string(e),
                                                      cond_dim, d_model, ffn_hidden));
    }

    int num_experts() const { return static_cast<int>(experts_.size()); }
    int top_k() const { return k_; }
    const RouterT<T>& router() const { return router_; }
    const std::vector<FilmExpertT<T>>& experts() const { return experts_; }

    MoEOutputT<T> forward(const TensorT<T>& tokens, const TensorT<T>& cond,
                          const std::vector<int>* forced_indices = nullptr) const {
        const int n_tokens = tokens.rows();
        auto routing = route(tokens, router_, k_, forced_indices);

        // per-expert dispatch: gather assigned tokens, run the expert once,
        // scatter gate-weighted outputs back
        TensorT<T> fused = TensorT<T>::zeros({n_tokens, tokens.cols()});
        TensorT<T> gate_flat = reshape(routing.gates, {n_tokens * k_, 1});
        for (int e = 0; e < num_experts(); ++e) {
            std::vector<int> rows, slots;
            for (int t = 0; t < n_tokens; ++t)
                for (int j = 0; j < k_; ++j)
                    if (routing.indices[static_cast<size_t>(t) * k_ + j] == e) {
                        rows.push_back(t);
                        slots.push_back(t * k_ + j);
                    }
            if (rows.empty()) continue;
            TensorT<T> xin = gather_rows(tokens, rows);
            TensorT<T> y = experts_[static_cast<size_t>(e)](xin, cond);
            TensorT<T> g = gather_rows(gate_flat, slots);  // [n_e, 1]
            fused = add(fused, scatter_rows(mul(y, g), rows, n_tokens));
        }

        MoEOutputT<T> out;
        out.fused = fused;
        out.balance = balance_loss(routing.f, routing.mean_probs);
        out.f = routing.f;
        out.p = routing.p;
        out.indices = routing.indices;
        return out;
    }

private:
    int k_;
    RouterT<T> router_;
    std::vector<FilmExpertT<T>> experts_;
};

}  // namespace hoigen
