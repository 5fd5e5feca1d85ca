#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "core/param_store.hpp"
#include "core/tensor.hpp"

namespace hoigen {

template <class T>
struct LinearT {
    TensorT<T> w;  // [in, out]
    TensorT<T> b;  // [1, out]

    static LinearT create(ParamStoreT<T>& ps, const std::string& name, int in, int out) {
        return {ps.weight(name + ".w", in, out), ps.bias(name + ".b", out)};
    }

    TensorT<T> operator()(const TensorT<T>& x) const { return add(matmul(x, w), b); }
};

template <class T>
struct LayerNormT {
    TensorT<T> gamma;
    TensorT<T> beta;

    static LayerNormT create(ParamStoreT<T>& ps, const std::string& name, int dim) {
        return {ps.ones_param(name + ".gamma", dim), ps.bias(name + ".beta", dim)};
    }

    TensorT<T> operator()(const TensorT<T>& x) const { return layer_norm(x, gamma, beta); }
};

template <class T>
struct FeedForwardT {
    LinearT<T> fc1, fc2;

    static FeedForwardT create(ParamStoreT<T>& ps, const std::string& name, int dim, int hidden) {
        return {LinearT<T>::create(ps, name + ".fc1", dim, hidden),
                LinearT<T>::create(ps, name + ".fc2", hidden, dim)};
    }

    TensorT<T> operator()(const TensorT<T>& x) const { return fc2(gelu(fc1(x))); }
};

/// Standard scaled dot-product multi-head attention; queries may attend to a
/// different token set than they come from (cross attention).
template <class T>
struct MultiHeadAttentionT {
    LinearT<T> q, k, v, o;
    int heads = 1;

    static MultiHeadAttentionT create(ParamStoreT<T>& ps, const std::string& name, int dim,
                                      int heads) {
        if (dim % heads != 0) tensor_fail("attention", name + ": dim not divisible by heads");
        return {LinearT<T>::create(ps, name + ".q", dim, dim),
                LinearT<T>::create(ps, name + ".k", dim, dim),
                LinearT<T>::create(ps, name + ".v", dim, dim),
                LinearT<T>::create(ps, name + ".o", dim, dim), heads};
    }

    TensorT<T> operator()(const TensorT<T>& xq, const TensorT<T>& xkv) const {
        const int dim = xq.cols();
        const int dh = dim / heads;
        TensorT<T> qs = q(xq), ks = k(xkv), vs = v(xkv);
        std::vector<TensorT<T>> ctx;
        ctx.reserve(static_cast<size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            auto qh = slice_cols(qs, h * dh, (h + 1) * dh);
            auto kh = slice_cols(ks, h * dh, (h + 1) * dh);
            auto vh = slice_cols(vs, h * dh, (h + 1) * dh);
            auto scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
            ctx.push_back(matmul(softmax(scores, 1), vh));
        }
        return o(concat(ctx, 1));
    }
};

/// Pre-LN encoder block: self-attention + feed-forward with residuals.
template <class T>
struct EncoderBlockT {
    LayerNormT<T> ln1, ln2;
    MultiHeadAttentionT<T> attn;
    FeedForwardT<T> ffn;

    static EncoderBlockT create(ParamStoreT<T>& ps, const std::string& name, int dim, int heads,
                                int ffn_hidden) {
        return {LayerNormT<T>::create(ps, name + ".ln1", dim),
                LayerNormT<T>::create(ps, name + ".ln2", dim),
                MultiHeadAttentionT<T>::create(ps, name + ".attn", dim, heads),
                FeedForwardT<T>::create(ps, name + ".ffn", dim, ffn_hidden)};
    }

    TensorT<T> operator()(const TensorT<T>& x) const {
        auto n = ln1(x);
        auto h = add(x, attn(n, n));
        return add(h, ffn(ln2(h)));
    }
};

/// Sinusoidal table for positions 0..count-1, width dim (pairs of sin/cos).
template <class T>
TensorT<T> sinusoidal_table(int count, int dim) {
    TensorT<T> out = TensorT<T>::zeros({count, dim});
    auto& v = out.values();
    for (int p = 0; p < count; ++p)
        for (int i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(dim));
            const double a = p * rate;
            v[static_cast<size_t>(p) * dim + i] = static_cast<T>((i % 2 == 0) ? std::sin(a) : std::cos(a));
        }
    return out;
}

/// One-row sinusoidal embedding of a (possibly large) scalar position.
template <class T>
TensorT<T> sinusoidal_position(double pos, int dim) {
    TensorT<T> out = TensorT<T>::zeros({1, dim});
    auto& v = out.values();
    for (int i = 0; i < dim; ++i) {
        const double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(dim));
        const double a = pos * rate;
        v[static_cast<size_t>(i)] = static_cast<T>((i % 2 == 0) ? std::sin(a) : std::cos(a));
    }
    return out;
}

}  // namespace hoigen
