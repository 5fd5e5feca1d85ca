#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "core/rng.hpp"

namespace hoigen {

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void tensor_fail(const std::string& op, const std::string& detail) {
    throw TensorError(op + ": " + detail);
}

inline int64_t shape_numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) tensor_fail("tensor", "non-positive dim in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

/// Autodiff graph node. Values are dense row-major; grad has identical shape
/// when allocated. Nodes are created by ops and linked via `parents`; the
/// backward closure accumulates into the parents' grads.
template <class T>
struct NodeT {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT<T>>> parents;
    std::function<void()> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

/// Shape-carrying dense float tensor with reverse-mode differentiation.
/// Copying a TensorT copies the handle (shared node), matching how ops and
/// parameter stores pass tensors around.
template <class T>
class TensorT {
public:
    using Node = NodeT<T>;

    TensorT() = default;
    explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value.assign(static_cast<size_t>(shape_numel(n->shape)), T(0));
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT full(std::vector<int> shape, T v) {
        TensorT t = zeros(std::move(shape));
        std::fill(t.values().begin(), t.values().end(), v);
        return t;
    }

    static TensorT from_values(std::vector<int> shape, std::vector<T> vals,
                               bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        if (static_cast<int64_t>(vals.size()) != shape_numel(shape))
            tensor_fail("from_values", "value count " + std::to_string(vals.size()) +
                                           " does not match shape " + shape_str(shape));
        n->shape = std::move(shape);
        n->value = std::move(vals);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT scalar_value(T v) { return from_values({1}, {v}); }

    static TensorT randn(std::vector<int> shape, Rng& rng, T stdev = T(1)) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.values()) v = static_cast<T>(rng.gaussian()) * stdev;
        return t;
    }

    static TensorT uniform(std::vector<int> shape, Rng& rng, T lo, T hi) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.values())
            v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int rows() const { return node_->shape.at(0); }
    int cols() const { return node_->shape.at(1); }
    int64_t size() const { return static_cast<int64_t>(node_->value.size()); }

    std::vector<T>& values() { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }

    T item() const {
        if (size() != 1) tensor_fail("item", "tensor of shape " + shape_str(shape()) + " is not a scalar");
        return node_->value[0];
    }

    T at2(int i, int j) const { return node_->value[static_cast<size_t>(i) * cols() + j]; }
    T& at2(int i, int j) { return node_->value[static_cast<size_t>(i) * cols() + j]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const { return node_->grad; }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    /// New leaf sharing no graph history (values copied).
    TensorT detach() const {
        return from_values(shape(), values(), false);
    }

    TensorT clone() const { return from_values(shape(), values(), requires_grad()); }

    bool all_finite() const {
        for (T v : node_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void assert_finite(const std::string& op) const {
        if (!all_finite()) tensor_fail(op, "non-finite value in tensor of shape " + shape_str(shape()));
    }

    /// Reverse-mode backward from this scalar.
    void backward() const {
        if (size() != 1) tensor_fail("backward", "root must be scalar, got shape " + shape_str(shape()));
        // topological order via iterative DFS
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, size_t>> stack;
        stack.push_back({node_.get(), 0});
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward) (*it)->backward();
        }
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

namespace detail {

template <class T>
std::shared_ptr<NodeT<T>> make_node(std::vector<int> shape,
                                     std::vector<std::shared_ptr<NodeT<T>>> parents) {
    auto n = std::make_shared<NodeT<T>>();
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(shape_numel(n->shape)), T(0));
    for (auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    n->parents = std::move(parents);
    return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops; the second operand may be a broadcast row ([1,m] or
// [m] against [n,m]) or a single-element scalar.
// ---------------------------------------------------------------------------

enum class BcKind { Same, Row, Col, Scalar };

template <class T>
inline BcKind broadcast_kind(const std::string& op, const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() == b.shape()) return BcKind::Same;
    if (b.size() == 1) return BcKind::Scalar;
    if (a.rank() == 2) {
        const int m = a.cols();
        if ((b.rank() == 1 && b.dim(0) == m) ||
            (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == m))
            return BcKind::Row;
        if (b.rank() == 2 && b.dim(0) == a.rows() && b.dim(1) == 1) return BcKind::Col;
    }
    tensor_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T, class FwdFn, class BwdFn>
TensorT<T> binary_op(const std::string& name, const TensorT<T>& a, const TensorT<T>& b,
                     FwdFn fwd, BwdFn bwd) {
    const BcKind kind = broadcast_kind(name, a, b);
    auto out = detail::make_node<T>(a.shape(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    const int64_t n = a.size();
    const int64_t m = (kind == BcKind::Row || kind == BcKind::Col) ? a.cols() : 1;
    auto b_index = [kind, m](int64_t i) -> int64_t {
        switch (kind) {
            case BcKind::Same: return i;
            case BcKind::Scalar: return 0;
            case BcKind::Row: return i % m;
            case BcKind::Col: return i / m;
        }
        return 0;
    };
    for (int64_t i = 0; i < n; ++i) out->value[i] = fwd(av[i], bv[b_index(i)]);
    if (out->requires_grad) {
        auto an = a.node(), bn = b.node();
        NodeT<T>* o = out.get();
        out->backward = [an, bn, o, b_index, bwd]() {
            const int64_t n = static_cast<int64_t>(o->value.size());
            const bool need_a = an->requires_grad, need_b = bn->requires_grad;
            if (need_a) an->ensure_grad();
            if (need_b) bn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) {
                const int64_t bi = b_index(i);
                T da, db;
                bwd(an->value[i], bn->value[bi], o->grad[i], da, db);
                if (need_a) an->grad[i] += da;
                if (need_b) bn->grad[bi] += db;
            }
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_op<T>(
        "add", a, b, [](T x, T y) { return x + y; },
        [](T, T, T g, T& da, T& db) { da = g; db = g; });
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_op<T>(
        "sub", a, b, [](T x, T y) { return x - y; },
        [](T, T, T g, T& da, T& db) { da = g; db = -g; });
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_op<T>(
        "mul", a, b, [](T x, T y) { return x * y; },
        [](T x, T y, T g, T& da, T& db) { da = g * y; db = g * x; });
}

template <class T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_op<T>(
        "div", a, b, [](T x, T y) { return x / y; },
        [](T x, T y, T g, T& da, T& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, double s) {
    auto out = detail::make_node<T>(a.shape(), {a.node()});
    const auto& av = a.values();
    for (int64_t i = 0; i < a.size(); ++i) out->value[i] = static_cast<T>(av[i] * s);
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, s]() {
            an->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i)
                an->grad[i] += static_cast<T>(o->grad[i] * s);
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& a, double s) {
    auto out = detail::make_node<T>(a.shape(), {a.node()});
    const auto& av = a.values();
    for (int64_t i = 0; i < a.size(); ++i) out->value[i] = static_cast<T>(av[i] + s);
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o]() {
            an->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
        };
    }
    return TensorT<T>(out);
}

/// sqrt(x + eps); eps keeps the gradient finite at x = 0.
template <class T>
TensorT<T> sqrt_eps(const TensorT<T>& a, double eps = 1e-12) {
    auto out = detail::make_node<T>(a.shape(), {a.node()});
    const auto& av = a.values();
    for (int64_t i = 0; i < a.size(); ++i)
        out->value[i] = static_cast<T>(std::sqrt(static_cast<double>(av[i]) + eps));
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o]() {
            an->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i)
                an->grad[i] += static_cast<T>(o->grad[i] * 0.5 / static_cast<double>(o->value[i]));
        };
    }
    return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace detail {

/// c (n x m) = a (n x k) * b (k x m), accumulated in double.
template <class T>
void mm_acc(const T* a, const T* b, T* c, int n, int k, int m) {
    std::vector<double> acc(static_cast<size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        double* crow = acc.data() + static_cast<size_t>(i) * m;
        const T* arow = a + static_cast<size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double av = static_cast<double>(arow[l]);
            const T* brow = b + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * static_cast<double>(brow[j]);
        }
    }
    for (size_t i = 0; i < acc.size(); ++i) c[i] = static_cast<T>(acc[i]);
}

/// c (n x m) += a^T (n x k stored k x n) * b (k x m)
template <class T>
void mm_at_b_into(const T* a, const T* b, T* c, int k, int n, int m) {
    std::vector<double> acc(static_cast<size_t>(n) * m, 0.0);
    for (int l = 0; l < k; ++l) {
        const T* arow = a + static_cast<size_t>(l) * n;
        const T* brow = b + static_cast<size_t>(l) * m;
        for (int i = 0; i < n; ++i) {
            const double av = static_cast<double>(arow[i]);
            double* crow = acc.data() + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * static_cast<double>(brow[j]);
        }
    }
    for (size_t i = 0; i < acc.size(); ++i) c[i] += static_cast<T>(acc[i]);
}

/// c (n x m) += a (n x k) * b^T (k x m stored m x k)
template <class T>
void mm_a_bt_into(const T* a, const T* b, T* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const T* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += static_cast<double>(arow[l]) * static_cast<double>(brow[l]);
            crow[j] += static_cast<T>(s);
        }
    }
}

}  // namespace detail

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        tensor_fail("matmul", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int n = a.rows(), k = a.cols(), m = b.cols();
    auto out = detail::make_node<T>({n, m}, {a.node(), b.node()});
    detail::mm_acc(a.values().data(), b.values().data(), out->value.data(), n, k, m);
    if (out->requires_grad) {
        auto an = a.node(), bn = b.node();
        NodeT<T>* o = out.get();
        out->backward = [an, bn, o, n, k, m]() {
            if (an->requires_grad) {
                an->ensure_grad();
                // dA = dC * B^T  (n x k)
                detail::mm_a_bt_into(o->grad.data(), bn->value.data(), an->grad.data(), n, m, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                // dB = A^T * dC  (k x m)
                detail::mm_at_b_into(an->value.data(), o->grad.data(), bn->grad.data(), n, k, m);
            }
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> transpose(const TensorT<T>& a) {
    if (a.rank() != 2) tensor_fail("transpose", "rank-2 required, got " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols();
    auto out = detail::make_node<T>({m, n}, {a.node()});
    const auto& av = a.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out->value[static_cast<size_t>(j) * n + i] = av[static_cast<size_t>(i) * m + j];
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, n, m]() {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    an->grad[static_cast<size_t>(i) * m + j] += o->grad[static_cast<size_t>(j) * n + i];
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> reshape(const TensorT<T>& a, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != a.size())
        tensor_fail("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(new_shape));
    auto out = detail::make_node<T>(std::move(new_shape), {a.node()});
    out->value = a.values();
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o]() {
            an->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
        };
    }
    return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// concatenation / slicing / gathering
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> concat(const std::vector<TensorT<T>>& parts, int axis) {
    if (parts.empty()) tensor_fail("concat", "empty input list");
    const auto& s0 = parts[0].shape();
    const int rank = static_cast<int>(s0.size());
    if (axis < 0 || axis >= rank) tensor_fail("concat", "axis out of range");
    std::vector<int> out_shape = s0;
    int total_axis = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (static_cast<int>(s.size()) != rank)
            tensor_fail("concat", "rank mismatch " + shape_str(s0) + " vs " + shape_str(s));
        for (int d = 0; d < rank; ++d)
            if (d != axis && s[d] != s0[d])
                tensor_fail("concat", "shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
        total_axis += s[axis];
    }
    out_shape[axis] = total_axis;

    std::vector<std::shared_ptr<NodeT<T>>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) parents.push_back(p.node());
    auto out = detail::make_node<T>(out_shape, parents);

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[d];
    for (int d = axis + 1; d < rank; ++d) inner *= s0[d];

    // forward copy
    {
        int64_t axis_off = 0;
        for (const auto& p : parts) {
            const int len = p.shape()[axis];
            const auto& pv = p.values();
            for (int64_t ou = 0; ou < outer; ++ou) {
                const T* srcb = pv.data() + ou * len * inner;
                T* dstb = out->value.data() + (ou * total_axis + axis_off) * inner;
                std::copy(srcb, srcb + len * inner, dstb);
            }
            axis_off += len;
        }
    }
    if (out->requires_grad) {
        NodeT<T>* o = out.get();
        std::vector<int> lens;
        for (const auto& p : parts) lens.push_back(p.shape()[axis]);
        auto ps = parents;
        out->backward = [o, ps, lens, outer, inner, total_axis]() {
            int64_t axis_off = 0;
            for (size_t pi = 0; pi < ps.size(); ++pi) {
                const int len = lens[pi];
                if (ps[pi]->requires_grad) {
                    ps[pi]->ensure_grad();
                    for (int64_t ou = 0; ou < outer; ++ou) {
                        const T* srcb = o->grad.data() + (ou * total_axis + axis_off) * inner;
                        T* dstb = ps[pi]->grad.data() + ou * len * inner;
                        for (int64_t i = 0; i < len * inner; ++i) dstb[i] += srcb[i];
                    }
                }
                axis_off += len;
            }
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> slice_rows(const TensorT<T>& a, int r0, int r1) {
    if (a.rank() != 2 || r0 < 0 || r1 > a.rows() || r0 >= r1)
        tensor_fail("slice_rows", "bad range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                                      ") for shape " + shape_str(a.shape()));
    const int m = a.cols();
    auto out = detail::make_node<T>({r1 - r0, m}, {a.node()});
    std::copy(a.values().begin() + static_cast<size_t>(r0) * m,
              a.values().begin() + static_cast<size_t>(r1) * m, out->value.begin());
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, r0, m]() {
            an->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i)
                an->grad[static_cast<size_t>(r0) * m + i] += o->grad[i];
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> slice_cols(const TensorT<T>& a, int c0, int c1) {
    if (a.rank() != 2 || c0 < 0 || c1 > a.cols() || c0 >= c1)
        tensor_fail("slice_cols", "bad range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                                      ") for shape " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols(), w = c1 - c0;
    auto out = detail::make_node<T>({n, w}, {a.node()});
    const auto& av = a.values();
    for (int i = 0; i < n; ++i)
        std::copy(av.begin() + static_cast<size_t>(i) * m + c0,
                  av.begin() + static_cast<size_t>(i) * m + c1,
                  out->value.begin() + static_cast<size_t>(i) * w);
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, n, m, c0, w]() {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[static_cast<size_t>(i) * m + c0 + j] +=
                        o->grad[static_cast<size_t>(i) * w + j];
        };
    }
    return TensorT<T>(out);
}

/// out[i, j] = a[i, idx[i*k + j]]; differentiable in a, indices plain data.
template <class T>
TensorT<T> gather_per_row(const TensorT<T>& a, const std::vector<int>& idx, int k) {
    if (a.rank() != 2 || static_cast<int64_t>(idx.size()) != static_cast<int64_t>(a.rows()) * k)
        tensor_fail("gather_per_row", "index count " + std::to_string(idx.size()) +
                                          " does not match shape " + shape_str(a.shape()) +
                                          " with k=" + std::to_string(k));
    const int n = a.rows(), m = a.cols();
    for (int i : idx)
        if (i < 0 || i >= m) tensor_fail("gather_per_row", "column index out of range");
    auto out = detail::make_node<T>({n, k}, {a.node()});
    const auto& av = a.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j)
            out->value[static_cast<size_t>(i) * k + j] =
                av[static_cast<size_t>(i) * m + idx[static_cast<size_t>(i) * k + j]];
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, idx, n, m, k]() {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < k; ++j)
                    an->grad[static_cast<size_t>(i) * m + idx[static_cast<size_t>(i) * k + j]] +=
                        o->grad[static_cast<size_t>(i) * k + j];
        };
    }
    return TensorT<T>(out);
}

/// out[idx[r], :] += src[r, :]; rows not referenced stay zero. Differentiable
/// in src.
template <class T>
TensorT<T> scatter_rows(const TensorT<T>& src, const std::vector<int>& idx, int n_out) {
    if (src.rank() != 2 || static_cast<int>(idx.size()) != src.rows())
        tensor_fail("scatter_rows", "index count " + std::to_string(idx.size()) +
                                        " does not match shape " + shape_str(src.shape()));
    const int m = src.cols();
    for (int i : idx)
        if (i < 0 || i >= n_out) tensor_fail("scatter_rows", "row index out of range");
    auto out = detail::make_node<T>({n_out, m}, {src.node()});
    const auto& sv = src.values();
    for (size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < m; ++j)
            out->value[static_cast<size_t>(idx[r]) * m + j] += sv[r * m + j];
    if (out->requires_grad) {
        auto sn = src.node();
        NodeT<T>* o = out.get();
        out->backward = [sn, o, idx, m]() {
            sn->ensure_grad();
            for (size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < m; ++j)
                    sn->grad[r * m + j] += o->grad[static_cast<size_t>(idx[r]) * m + j];
        };
    }
    return TensorT<T>(out);
}

/// Differentiable row gather; indices are plain data (non-differentiable).
template <class T>
TensorT<T> gather_rows(const TensorT<T>& a, const std::vector<int>& idx) {
    if (a.rank() != 2) tensor_fail("gather_rows", "rank-2 required, got " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols();
    for (int i : idx)
        if (i < 0 || i >= n)
            tensor_fail("gather_rows", "index " + std::to_string(i) + " out of range for " +
                                           shape_str(a.shape()));
    auto out = detail::make_node<T>({static_cast<int>(idx.size()), m}, {a.node()});
    const auto& av = a.values();
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy(av.begin() + static_cast<size_t>(idx[r]) * m,
                  av.begin() + static_cast<size_t>(idx[r] + 1) * m,
                  out->value.begin() + r * m);
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, idx, m]() {
            an->ensure_grad();
            for (size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < m; ++j)
                    an->grad[static_cast<size_t>(idx[r]) * m + j] += o->grad[r * m + j];
        };
    }
    return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> sum(const TensorT<T>& a) {
    auto out = detail::make_node<T>({1}, {a.node()});
    double acc = 0.0;
    for (T v : a.values()) acc += static_cast<double>(v);
    out->value[0] = static_cast<T>(acc);
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o]() {
            an->ensure_grad();
            const T g = o->grad[0];
            for (auto& gv : an->grad) gv += g;
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// Row-2 reduction along `axis`; result keeps a collapsed dim of 1.
template <class T>
TensorT<T> sum_axis(const TensorT<T>& a, int axis) {
    if (a.rank() != 2 || (axis != 0 && axis != 1))
        tensor_fail("sum_axis", "rank-2 tensor and axis 0/1 required, got " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols();
    auto out = detail::make_node<T>(axis == 0 ? std::vector<int>{1, m} : std::vector<int>{n, 1},
                                    {a.node()});
    const auto& av = a.values();
    if (axis == 0) {
        std::vector<double> acc(static_cast<size_t>(m), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) acc[j] += static_cast<double>(av[static_cast<size_t>(i) * m + j]);
        for (int j = 0; j < m; ++j) out->value[j] = static_cast<T>(acc[j]);
    } else {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += static_cast<double>(av[static_cast<size_t>(i) * m + j]);
            out->value[i] = static_cast<T>(acc);
        }
    }
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, n, m, axis]() {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    an->grad[static_cast<size_t>(i) * m + j] += o->grad[axis == 0 ? j : i];
        };
    }
    return TensorT<T>(out);
}

template <class T>
TensorT<T> mean_axis(const TensorT<T>& a, int axis) {
    const double denom = axis == 0 ? a.rows() : a.cols();
    return scale(sum_axis(a, axis), 1.0 / denom);
}

// ---------------------------------------------------------------------------
// softmax / layer norm / activations
// ---------------------------------------------------------------------------

/// Softmax along `axis` of a rank-1 or rank-2 tensor. Each slice along the
/// axis sums to 1.
template <class T>
TensorT<T> softmax(const TensorT<T>& a, int axis) {
    if (a.rank() == 1) {
        if (axis != 0) tensor_fail("softmax", "axis out of range for " + shape_str(a.shape()));
    } else if (a.rank() != 2 || (axis != 0 && axis != 1)) {
        tensor_fail("softmax", "rank-1/2 tensor required, got " + shape_str(a.shape()));
    }
    const int n = a.rank() == 1 ? 1 : a.rows();
    const int m = a.rank() == 1 ? a.dim(0) : a.cols();
    const bool rows = (a.rank() == 1) || (axis == 1);
    auto out = detail::make_node<T>(a.shape(), {a.node()});
    const auto& av = a.values();
    const int slices = rows ? n : m;
    const int len = rows ? m : n;
    auto idx = [rows, m](int s, int i) -> size_t {
        return rows ? static_cast<size_t>(s) * m + i : static_cast<size_t>(i) * m + s;
    };
    for (int s = 0; s < slices; ++s) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < len; ++i) mx = std::max(mx, static_cast<double>(av[idx(s, i)]));
        double z = 0.0;
        for (int i = 0; i < len; ++i) z += std::exp(static_cast<double>(av[idx(s, i)]) - mx);
        for (int i = 0; i < len; ++i)
            out->value[idx(s, i)] = static_cast<T>(std::exp(static_cast<double>(av[idx(s, i)]) - mx) / z);
    }
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, slices, len, idx]() {
            an->ensure_grad();
            for (int s = 0; s < slices; ++s) {
                double dot = 0.0;
                for (int i = 0; i < len; ++i)
                    dot += static_cast<double>(o->grad[idx(s, i)]) * static_cast<double>(o->value[idx(s, i)]);
                for (int i = 0; i < len; ++i) {
                    const size_t k = idx(s, i);
                    an->grad[k] += static_cast<T>((static_cast<double>(o->grad[k]) - dot) *
                                                  static_cast<double>(o->value[k]));
                }
            }
        };
    }
    return TensorT<T>(out);
}

/// Layer normalization over the last axis of [n, m] with affine gamma/beta ([m] or [1, m]).
template <class T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      double eps = 1e-5) {
    if (x.rank() != 2) tensor_fail("layer_norm", "rank-2 required, got " + shape_str(x.shape()));
    const int n = x.rows(), m = x.cols();
    if (static_cast<int64_t>(gamma.size()) != m || static_cast<int64_t>(beta.size()) != m)
        tensor_fail("layer_norm", "affine shape " + shape_str(gamma.shape()) + " vs feature dim " +
                                      std::to_string(m));
    auto out = detail::make_node<T>(x.shape(), {x.node(), gamma.node(), beta.node()});
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    std::vector<double> mu(n), istd(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += static_cast<double>(xv[static_cast<size_t>(i) * m + j]);
        mu[i] = s / m;
        double v = 0.0;
        for (int j = 0; j < m; ++j) {
            const double d = static_cast<double>(xv[static_cast<size_t>(i) * m + j]) - mu[i];
            v += d * d;
        }
        istd[i] = 1.0 / std::sqrt(v / m + eps);
        for (int j = 0; j < m; ++j) {
            const size_t k = static_cast<size_t>(i) * m + j;
            const double xh = (static_cast<double>(xv[k]) - mu[i]) * istd[i];
            out->value[k] = static_cast<T>(xh * static_cast<double>(gv[j]) + static_cast<double>(bv[j]));
        }
    }
    if (out->requires_grad) {
        auto xn = x.node(), gn = gamma.node(), bn = beta.node();
        NodeT<T>* o = out.get();
        out->backward = [xn, gn, bn, o, n, m, mu, istd]() {
            const bool need_x = xn->requires_grad, need_g = gn->requires_grad, need_b = bn->requires_grad;
            if (need_x) xn->ensure_grad();
            if (need_g) gn->ensure_grad();
            if (need_b) bn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int j = 0; j < m; ++j) {
                    const size_t k = static_cast<size_t>(i) * m + j;
                    const double xh = (static_cast<double>(xn->value[k]) - mu[i]) * istd[i];
                    const double dxh = static_cast<double>(o->grad[k]) * static_cast<double>(gn->value[j]);
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh;
                    if (need_g) gn->grad[j] += static_cast<T>(static_cast<double>(o->grad[k]) * xh);
                    if (need_b) bn->grad[j] += o->grad[k];
                }
                if (need_x) {
                    for (int j = 0; j < m; ++j) {
                        const size_t k = static_cast<size_t>(i) * m + j;
                        const double xh = (static_cast<double>(xn->value[k]) - mu[i]) * istd[i];
                        const double dxh = static_cast<double>(o->grad[k]) * static_cast<double>(gn->value[j]);
                        xn->grad[k] += static_cast<T>(istd[i] * (dxh - sum_dxh / m - xh * sum_dxh_xh / m));
                    }
                }
            }
        };
    }
    return TensorT<T>(out);
}

/// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
template <class T>
TensorT<T> gelu(const TensorT<T>& a) {
    auto out = detail::make_node<T>(a.shape(), {a.node()});
    const auto& av = a.values();
    for (int64_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(av[i]);
        out->value[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475)));
    }
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o]() {
            an->ensure_grad();
            constexpr double inv_sqrt2pi = 0.3989422804014327;
            for (size_t i = 0; i < o->grad.size(); ++i) {
                const double x = static_cast<double>(an->value[i]);
                const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                an->grad[i] += static_cast<T>(static_cast<double>(o->grad[i]) * (cdf + x * pdf));
            }
        };
    }
    return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// top-k and max pooling
// ---------------------------------------------------------------------------

/// Top-k along the last axis of [n, m]: largest values first, ties broken by
/// lowest index. Indices are plain data; values are a differentiable gather.
template <class T>
struct TopK {
    std::vector<int> indices;  // n * k, row-major
    TensorT<T> values;         // [n, k]
};

template <class T>
TopK<T> topk(const TensorT<T>& a, int k) {
    if (a.rank() != 2 || k < 1 || k > a.cols())
        tensor_fail("topk", "k=" + std::to_string(k) + " invalid for shape " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols();
    TopK<T> result;
    result.indices.resize(static_cast<size_t>(n) * k);
    const auto& av = a.values();
    for (int i = 0; i < n; ++i) {
        std::vector<char> used(static_cast<size_t>(m), 0);
        for (int j = 0; j < k; ++j) {
            int best = -1;
            for (int c = 0; c < m; ++c) {
                if (used[c]) continue;
                if (best < 0 || av[static_cast<size_t>(i) * m + c] > av[static_cast<size_t>(i) * m + best])
                    best = c;
            }
            used[best] = 1;
            result.indices[static_cast<size_t>(i) * k + j] = best;
        }
    }
    // differentiable gather of the selected entries
    auto out = detail::make_node<T>({n, k}, {a.node()});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j)
            out->value[static_cast<size_t>(i) * k + j] =
                av[static_cast<size_t>(i) * m + result.indices[static_cast<size_t>(i) * k + j]];
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        auto idx = result.indices;
        out->backward = [an, o, idx, n, k, m]() {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < k; ++j)
                    an->grad[static_cast<size_t>(i) * m + idx[static_cast<size_t>(i) * k + j]] +=
                        o->grad[static_cast<size_t>(i) * k + j];
        };
    }
    result.values = TensorT<T>(out);
    return result;
}

/// Max over axis 0 of [n, m] -> [1, m]; gradient routes to the argmax
/// (lowest index on ties).
template <class T>
TensorT<T> max_pool_rows(const TensorT<T>& a) {
    if (a.rank() != 2) tensor_fail("max_pool_rows", "rank-2 required, got " + shape_str(a.shape()));
    const int n = a.rows(), m = a.cols();
    auto out = detail::make_node<T>({1, m}, {a.node()});
    std::vector<int> argmax(static_cast<size_t>(m), 0);
    const auto& av = a.values();
    for (int j = 0; j < m; ++j) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (av[static_cast<size_t>(i) * m + j] > av[static_cast<size_t>(best) * m + j]) best = i;
        argmax[j] = best;
        out->value[j] = av[static_cast<size_t>(best) * m + j];
    }
    if (out->requires_grad) {
        auto an = a.node();
        NodeT<T>* o = out.get();
        out->backward = [an, o, argmax, m]() {
            an->ensure_grad();
            for (int j = 0; j < m; ++j)
                an->grad[static_cast<size_t>(argmax[j]) * m + j] += o->grad[j];
        };
    }
    return TensorT<T>(out);
}

// convenience operators
template <class T>
TensorT<T> operator+(const TensorT<T>& a, const TensorT<T>& b) { return add(a, b); }
template <class T>
TensorT<T> operator-(const TensorT<T>& a, const TensorT<T>& b) { return sub(a, b); }
template <class T>
TensorT<T> operator*(const TensorT<T>& a, const TensorT<T>& b) { return mul(a, b); }

using Tensor = TensorT<float>;

}  // namespace hoigen
