#pragma once

// Reverse-mode autodiff over dense row-major tensors. The tape is implicit:
// each node keeps shared pointers to its parents plus a per-thread creation
// sequence number, and backward() replays reachable nodes in descending
// sequence order, which is a topological order of the DAG. A tape is confined
// to the thread that built it.
//
// The same code runs in 32-bit mode (Tensor<float>, training and generation)
// and 64-bit mode (Tensor<double>, verification).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ratecast/errors.hpp"
#include "ratecast/rng.hpp"

namespace ratecast {

using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

enum class OpKind {
    leaf,
    add,
    sub,
    mul,
    scale,
    add_rowvec,
    matmul,
    transpose,
    softmax_rows,
    rms_norm,
    silu,
    concat_channels,
    slice_channels,
    rotate_pairs,
    mse,
    sum,
};

enum class Elementwise { add, sub, mul };

// ---------------------------------------------------------------------------
// Multiply-add accounting. Each operation adds its documented cost to a
// thread-local counter as it executes; the closed-form model cost functions
// reuse the same per-op formulas. Index shuffling (transpose, concat, slice,
// rotate) and table construction are free.
namespace flopcost {
inline std::uint64_t matmul(std::int64_t m, std::int64_t k, std::int64_t n) {
    return std::uint64_t(m) * std::uint64_t(k) * std::uint64_t(n);
}
inline std::uint64_t elementwise(std::int64_t n) { return std::uint64_t(n); }
inline std::uint64_t scale(std::int64_t n) { return std::uint64_t(n); }
inline std::uint64_t add_rowvec(std::int64_t r, std::int64_t c) {
    return std::uint64_t(r) * std::uint64_t(c);
}
// max, exp, accumulate, normalize: four passes per element.
inline std::uint64_t softmax_rows(std::int64_t r, std::int64_t c) {
    return 4u * std::uint64_t(r) * std::uint64_t(c);
}
// square-accumulate, scale, gain: three passes per element plus a root per row.
inline std::uint64_t rms_norm(std::int64_t r, std::int64_t c) {
    return 3u * std::uint64_t(r) * std::uint64_t(c) + std::uint64_t(r);
}
// sigmoid (exp, divide) and the product.
inline std::uint64_t silu(std::int64_t n) { return 3u * std::uint64_t(n); }
inline std::uint64_t mse(std::int64_t n) { return 2u * std::uint64_t(n) + 1u; }
inline std::uint64_t sum(std::int64_t n) { return std::uint64_t(n); }
}  // namespace flopcost

inline std::uint64_t& flop_counter() {
    thread_local std::uint64_t macs = 0;
    return macs;
}
inline void flops_reset() { flop_counter() = 0; }
inline std::uint64_t flops_count() { return flop_counter(); }
inline void flops_add(std::uint64_t n) { flop_counter() += n; }

// ---------------------------------------------------------------------------

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables gradient tracking in a scope (used by samplers for speed).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

inline std::uint64_t next_node_seq() {
    thread_local std::uint64_t seq = 0;
    return ++seq;
}

template <typename Real>
struct TensorNode {
    Shape shape;
    std::shared_ptr<std::vector<Real>> values;
    std::vector<Real> grad;  // allocated lazily, same length as values
    bool grad_enabled = false;
    std::uint64_t seq = 0;
    OpKind op = OpKind::leaf;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::int64_t size() const { return shape_size(shape); }
    void ensure_grad() {
        if (grad.size() != values->size()) grad.assign(values->size(), Real(0));
    }
};

template <typename Real>
class Tensor {
public:
    using Node = TensorNode<Real>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor from(Shape shape, std::vector<Real> values, bool track = false) {
        check_dim(shape_size(shape) == std::int64_t(values.size()),
                  "tensor data length " + std::to_string(values.size()) +
                      " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values = std::make_shared<std::vector<Real>>(std::move(values));
        n->grad_enabled = track && grad_mode();
        n->seq = next_node_seq();
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool track = false) {
        const std::int64_t n = shape_size(shape);
        return from(std::move(shape), std::vector<Real>(n, Real(0)), track);
    }

    static Tensor full(Shape shape, Real v, bool track = false) {
        const std::int64_t n = shape_size(shape);
        return from(std::move(shape), std::vector<Real>(n, v), track);
    }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool track = false) {
        std::vector<Real> v(shape_size(shape));
        for (auto& x : v) x = Real(rng.gaussian() * stddev);
        return from(std::move(shape), std::move(v), track);
    }

    // New leaf sharing this tensor's storage but with its own gradient buffer.
    // Used to run independent tapes over shared parameters in parallel.
    Tensor alias_leaf(bool track = true) const {
        auto n = std::make_shared<Node>();
        n->shape = node_->shape;
        n->values = node_->values;
        n->grad_enabled = track && grad_mode();
        n->seq = next_node_seq();
        return Tensor(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t size() const { return node_->size(); }
    int rank() const { return int(node_->shape.size()); }
    int rows() const { return node_->shape.size() == 2 ? node_->shape[0] : 1; }
    int cols() const { return node_->shape.back(); }
    bool grad_enabled() const { return node_->grad_enabled; }

    std::span<const Real> vals() const { return *node_->values; }
    // Direct mutation is only sound on leaves that no tape refers to yet.
    std::span<Real> mutable_vals() { return *node_->values; }

    std::span<const Real> grad() const {
        check_contract(node_->grad_enabled, "gradient requested on untracked tensor");
        const_cast<Node*>(node_.get())->ensure_grad();
        return node_->grad;
    }
    std::span<Real> mutable_grad() {
        check_contract(node_->grad_enabled, "gradient requested on untracked tensor");
        node_->ensure_grad();
        return node_->grad;
    }

    void zero_grad() { node_->grad.assign(node_->values->size(), Real(0)); }

    Real item() const {
        check_contract(size() == 1, "item() on tensor of shape " + shape_str(shape()));
        return (*node_->values)[0];
    }
    Real at(std::int64_t i) const { return (*node_->values)[i]; }
    Real at(std::int64_t r, std::int64_t c) const {
        return (*node_->values)[r * node_->shape.back() + c];
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename Real>
Tensor<Real> make_op(Shape shape, std::vector<Real> values, OpKind op,
                     std::vector<std::shared_ptr<TensorNode<Real>>> parents,
                     std::function<void(TensorNode<Real>&)> backward) {
    auto n = std::make_shared<TensorNode<Real>>();
    n->shape = std::move(shape);
    n->values = std::make_shared<std::vector<Real>>(std::move(values));
    n->op = op;
    n->seq = next_node_seq();
    bool track = false;
    if (grad_mode()) {
        for (auto& p : parents)
            if (p->grad_enabled) track = true;
    }
    if (track) {
        n->grad_enabled = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward);
    }
    return Tensor<Real>(std::move(n));
}

template <typename Real>
void accumulate(TensorNode<Real>& p, const std::vector<Real>& contrib) {
    if (!p.grad_enabled) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < contrib.size(); ++i) p.grad[i] += contrib[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw kernels. C += or = A * B variants on row-major buffers.

template <typename Real>
void gemm_nn(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        Real* crow = c + std::int64_t(i) * n;
        const Real* arow = a + std::int64_t(i) * k;
        for (int p = 0; p < k; ++p) {
            Real av = arow[p];
            const Real* brow = b + std::int64_t(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x n] += a[m x k] * b^T where b is [n x k]
template <typename Real>
void gemm_nt(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* arow = a + std::int64_t(i) * k;
        Real* crow = c + std::int64_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const Real* brow = b + std::int64_t(j) * k;
            Real acc = 0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// c[k x n] += a^T * b where a is [m x k], b is [m x n]
template <typename Real>
void gemm_tn(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* arow = a + std::int64_t(i) * k;
        const Real* brow = b + std::int64_t(i) * n;
        for (int p = 0; p < k; ++p) {
            Real av = arow[p];
            Real* crow = c + std::int64_t(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Operations.

template <typename Real>
Tensor<Real> elementwise_op(const Tensor<Real>& a, const Tensor<Real>& b, Elementwise kind) {
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    check_dim(a.shape() == b.shape() || a_scalar || b_scalar,
              "elementwise operands " + shape_str(a.shape()) + " vs " +
                  shape_str(b.shape()) + " (shapes must match or one must be scalar)");
    const Tensor<Real>& big = b_scalar ? a : b;
    const std::int64_t n = big.size();
    std::vector<Real> out(n);
    auto av = a.vals();
    auto bv = b.vals();
    for (std::int64_t i = 0; i < n; ++i) {
        Real x = a_scalar ? av[0] : av[i];
        Real y = b_scalar ? bv[0] : bv[i];
        switch (kind) {
            case Elementwise::add: out[i] = x + y; break;
            case Elementwise::sub: out[i] = x - y; break;
            case Elementwise::mul: out[i] = x * y; break;
        }
    }
    flops_add(flopcost::elementwise(n));

    OpKind op = kind == Elementwise::add   ? OpKind::add
                : kind == Elementwise::sub ? OpKind::sub
                                           : OpKind::mul;
    auto an = a.node();
    auto bn = b.node();
    return detail::make_op<Real>(
        big.shape(), std::move(out), op, {an, bn},
        [an, bn, kind, a_scalar, b_scalar, n](TensorNode<Real>& node) {
            const auto& g = node.grad;
            auto reduce_into = [&](TensorNode<Real>& p, bool scalar, auto per_elem) {
                if (!p.grad_enabled) return;
                p.ensure_grad();
                if (scalar) {
                    Real acc = 0;
                    for (std::int64_t i = 0; i < n; ++i) acc += per_elem(i);
                    p.grad[0] += acc;
                } else {
                    for (std::int64_t i = 0; i < n; ++i) p.grad[i] += per_elem(i);
                }
            };
            const auto& avv = *an->values;
            const auto& bvv = *bn->values;
            switch (kind) {
                case Elementwise::add:
                    reduce_into(*an, a_scalar, [&](std::int64_t i) { return g[i]; });
                    reduce_into(*bn, b_scalar, [&](std::int64_t i) { return g[i]; });
                    break;
                case Elementwise::sub:
                    reduce_into(*an, a_scalar, [&](std::int64_t i) { return g[i]; });
                    reduce_into(*bn, b_scalar, [&](std::int64_t i) { return -g[i]; });
                    break;
                case Elementwise::mul:
                    reduce_into(*an, a_scalar, [&](std::int64_t i) {
                        return g[i] * (b_scalar ? bvv[0] : bvv[i]);
                    });
                    reduce_into(*bn, b_scalar, [&](std::int64_t i) {
                        return g[i] * (a_scalar ? avv[0] : avv[i]);
                    });
                    break;
            }
        });
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    return elementwise_op(a, b, Elementwise::add);
}
template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    return elementwise_op(a, b, Elementwise::sub);
}
template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    return elementwise_op(a, b, Elementwise::mul);
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real s) {
    const std::int64_t n = a.size();
    std::vector<Real> out(n);
    auto av = a.vals();
    for (std::int64_t i = 0; i < n; ++i) out[i] = av[i] * s;
    flops_add(flopcost::scale(n));
    auto an = a.node();
    return detail::make_op<Real>(a.shape(), std::move(out), OpKind::scale, {an},
                                 [an, s, n](TensorNode<Real>& node) {
                                     if (!an->grad_enabled) return;
                                     an->ensure_grad();
                                     for (std::int64_t i = 0; i < n; ++i)
                                         an->grad[i] += node.grad[i] * s;
                                 });
}

// a[r x c] + v broadcast over rows; v may be [c] or [1 x c].
template <typename Real>
Tensor<Real> add_rowvec(const Tensor<Real>& a, const Tensor<Real>& v) {
    check_dim(a.rank() == 2, "add_rowvec needs a rank-2 left operand, got " + shape_str(a.shape()));
    const int r = a.shape()[0];
    const int c = a.shape()[1];
    check_dim(v.size() == c, "add_rowvec vector " + shape_str(v.shape()) +
                                 " does not match row width " + std::to_string(c));
    std::vector<Real> out(std::int64_t(r) * c);
    auto av = a.vals();
    auto vv = v.vals();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[std::int64_t(i) * c + j] = av[std::int64_t(i) * c + j] + vv[j];
    flops_add(flopcost::add_rowvec(r, c));
    auto an = a.node();
    auto vn = v.node();
    return detail::make_op<Real>(
        a.shape(), std::move(out), OpKind::add_rowvec, {an, vn},
        [an, vn, r, c](TensorNode<Real>& node) {
            if (an->grad_enabled) {
                an->ensure_grad();
                for (std::int64_t i = 0; i < std::int64_t(r) * c; ++i) an->grad[i] += node.grad[i];
            }
            if (vn->grad_enabled) {
                vn->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) vn->grad[j] += node.grad[std::int64_t(i) * c + j];
            }
        });
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    check_dim(a.rank() == 2 && b.rank() == 2,
              "matmul needs rank-2 operands, got " + shape_str(a.shape()) + " and " +
                  shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    check_dim(b.shape()[0] == k, "matmul inner dimensions disagree: " + shape_str(a.shape()) +
                                     " * " + shape_str(b.shape()));
    const int n = b.shape()[1];
    std::vector<Real> out(std::int64_t(m) * n, Real(0));
    gemm_nn(a.vals().data(), b.vals().data(), out.data(), m, k, n);
    flops_add(flopcost::matmul(m, k, n));
    auto an = a.node();
    auto bn = b.node();
    return detail::make_op<Real>(
        Shape{m, n}, std::move(out), OpKind::matmul, {an, bn},
        [an, bn, m, k, n](TensorNode<Real>& node) {
            if (an->grad_enabled) {
                an->ensure_grad();
                gemm_nt(node.grad.data(), bn->values->data(), an->grad.data(), m, n, k);
            }
            if (bn->grad_enabled) {
                bn->ensure_grad();
                gemm_tn(an->values->data(), node.grad.data(), bn->grad.data(), m, k, n);
            }
        });
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
    check_dim(a.rank() == 2, "transpose needs a rank-2 operand, got " + shape_str(a.shape()));
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<Real> out(std::int64_t(r) * c);
    auto av = a.vals();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[std::int64_t(j) * r + i] = av[std::int64_t(i) * c + j];
    auto an = a.node();
    return detail::make_op<Real>(Shape{c, r}, std::move(out), OpKind::transpose, {an},
                                 [an, r, c](TensorNode<Real>& node) {
                                     if (!an->grad_enabled) return;
                                     an->ensure_grad();
                                     for (int i = 0; i < r; ++i)
                                         for (int j = 0; j < c; ++j)
                                             an->grad[std::int64_t(i) * c + j] +=
                                                 node.grad[std::int64_t(j) * r + i];
                                 });
}

template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& a) {
    check_dim(a.rank() == 2, "softmax_rows needs a rank-2 operand, got " + shape_str(a.shape()));
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<Real> out(std::int64_t(r) * c);
    auto av = a.vals();
    for (int i = 0; i < r; ++i) {
        const Real* row = av.data() + std::int64_t(i) * c;
        Real* orow = out.data() + std::int64_t(i) * c;
        Real mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        Real denom = 0;
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (int j = 0; j < c; ++j) orow[j] /= denom;
    }
    flops_add(flopcost::softmax_rows(r, c));
    auto an = a.node();
    return detail::make_op<Real>(
        a.shape(), std::move(out), OpKind::softmax_rows, {an},
        [an, r, c](TensorNode<Real>& node) {
            if (!an->grad_enabled) return;
            an->ensure_grad();
            const auto& y = *node.values;
            for (int i = 0; i < r; ++i) {
                const Real* yrow = y.data() + std::int64_t(i) * c;
                const Real* grow = node.grad.data() + std::int64_t(i) * c;
                Real dot = 0;
                for (int j = 0; j < c; ++j) dot += yrow[j] * grow[j];
                Real* arow = an->grad.data() + std::int64_t(i) * c;
                for (int j = 0; j < c; ++j) arow[j] += yrow[j] * (grow[j] - dot);
            }
        });
}

// Per-row RMS normalization with a learned gain on the channel axis.
// y[i][j] = gain[j] * x[i][j] / sqrt(mean_j(x[i][j]^2) + eps)
template <typename Real>
Tensor<Real> rms_norm(const Tensor<Real>& a, const Tensor<Real>& gain, Real eps = Real(1e-6)) {
    check_dim(a.rank() == 2, "rms_norm needs a rank-2 operand, got " + shape_str(a.shape()));
    const int r = a.shape()[0], c = a.shape()[1];
    check_dim(gain.size() == c, "rms_norm gain " + shape_str(gain.shape()) +
                                    " does not match channel width " + std::to_string(c));
    std::vector<Real> out(std::int64_t(r) * c);
    std::vector<Real> inv_rms(r);
    auto av = a.vals();
    auto gv = gain.vals();
    for (int i = 0; i < r; ++i) {
        const Real* row = av.data() + std::int64_t(i) * c;
        Real ss = 0;
        for (int j = 0; j < c; ++j) ss += row[j] * row[j];
        inv_rms[i] = Real(1) / std::sqrt(ss / Real(c) + eps);
        Real* orow = out.data() + std::int64_t(i) * c;
        for (int j = 0; j < c; ++j) orow[j] = gv[j] * row[j] * inv_rms[i];
    }
    flops_add(flopcost::rms_norm(r, c));
    auto an = a.node();
    auto gn = gain.node();
    return detail::make_op<Real>(
        a.shape(), std::move(out), OpKind::rms_norm, {an, gn},
        [an, gn, r, c, inv_rms](TensorNode<Real>& node) {
            const auto& x = *an->values;
            const auto& g = *gn->values;
            for (int i = 0; i < r; ++i) {
                const Real* xrow = x.data() + std::int64_t(i) * c;
                const Real* grow = node.grad.data() + std::int64_t(i) * c;
                const Real ir = inv_rms[i];
                if (an->grad_enabled) {
                    an->ensure_grad();
                    Real dot = 0;  // sum_k dy[k] * gain[k] * x[k]
                    for (int j = 0; j < c; ++j) dot += grow[j] * g[j] * xrow[j];
                    const Real coef = dot * ir * ir * ir / Real(c);
                    Real* arow = an->grad.data() + std::int64_t(i) * c;
                    for (int j = 0; j < c; ++j) arow[j] += grow[j] * g[j] * ir - xrow[j] * coef;
                }
                if (gn->grad_enabled) {
                    gn->ensure_grad();
                    for (int j = 0; j < c; ++j) gn->grad[j] += grow[j] * xrow[j] * ir;
                }
            }
        });
}

template <typename Real>
Tensor<Real> silu(const Tensor<Real>& a) {
    const std::int64_t n = a.size();
    std::vector<Real> out(n);
    auto av = a.vals();
    for (std::int64_t i = 0; i < n; ++i) {
        Real s = Real(1) / (Real(1) + std::exp(-av[i]));
        out[i] = av[i] * s;
    }
    flops_add(flopcost::silu(n));
    auto an = a.node();
    return detail::make_op<Real>(
        a.shape(), std::move(out), OpKind::silu, {an},
        [an, n](TensorNode<Real>& node) {
            if (!an->grad_enabled) return;
            an->ensure_grad();
            const auto& x = *an->values;
            for (std::int64_t i = 0; i < n; ++i) {
                Real s = Real(1) / (Real(1) + std::exp(-x[i]));
                an->grad[i] += node.grad[i] * s * (Real(1) + x[i] * (Real(1) - s));
            }
        });
}

// Concatenation along the channel (last) axis of rank-2 tensors.
template <typename Real>
Tensor<Real> concat_channels(const std::vector<Tensor<Real>>& parts) {
    check_contract(!parts.empty(), "concat_channels needs at least one part");
    const int r = parts[0].rank() == 2 ? parts[0].shape()[0] : -1;
    check_dim(r > 0, "concat_channels needs rank-2 parts, got " + shape_str(parts[0].shape()));
    int total = 0;
    for (const auto& p : parts) {
        check_dim(p.rank() == 2 && p.shape()[0] == r,
                  "concat_channels parts disagree on rows: " + shape_str(parts[0].shape()) +
                      " vs " + shape_str(p.shape()));
        total += p.shape()[1];
    }
    std::vector<Real> out(std::int64_t(r) * total);
    std::vector<int> offsets;
    int off = 0;
    for (const auto& p : parts) {
        const int pc = p.shape()[1];
        auto pv = p.vals();
        for (int i = 0; i < r; ++i)
            std::copy(pv.data() + std::int64_t(i) * pc, pv.data() + std::int64_t(i + 1) * pc,
                      out.data() + std::int64_t(i) * total + off);
        offsets.push_back(off);
        off += pc;
    }
    std::vector<std::shared_ptr<TensorNode<Real>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return detail::make_op<Real>(
        Shape{r, total}, std::move(out), OpKind::concat_channels, nodes,
        [nodes, offsets, r, total](TensorNode<Real>& node) {
            for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                auto& p = *nodes[pi];
                if (!p.grad_enabled) continue;
                p.ensure_grad();
                const int pc = p.shape[1];
                const int off = offsets[pi];
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < pc; ++j)
                        p.grad[std::int64_t(i) * pc + j] +=
                            node.grad[std::int64_t(i) * total + off + j];
            }
        });
}

template <typename Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b) {
    return concat_channels(std::vector<Tensor<Real>>{a, b});
}
template <typename Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b, const Tensor<Real>& c) {
    return concat_channels(std::vector<Tensor<Real>>{a, b, c});
}

template <typename Real>
Tensor<Real> slice_channels(const Tensor<Real>& a, int start, int len) {
    check_dim(a.rank() == 2, "slice_channels needs a rank-2 operand, got " + shape_str(a.shape()));
    const int r = a.shape()[0], c = a.shape()[1];
    check_contract(start >= 0 && len > 0 && start + len <= c,
                   "slice_channels range [" + std::to_string(start) + ", " +
                       std::to_string(start + len) + ") outside width " + std::to_string(c));
    std::vector<Real> out(std::int64_t(r) * len);
    auto av = a.vals();
    for (int i = 0; i < r; ++i)
        std::copy(av.data() + std::int64_t(i) * c + start,
                  av.data() + std::int64_t(i) * c + start + len, out.data() + std::int64_t(i) * len);
    auto an = a.node();
    return detail::make_op<Real>(
        Shape{r, len}, std::move(out), OpKind::slice_channels, {an},
        [an, r, c, start, len](TensorNode<Real>& node) {
            if (!an->grad_enabled) return;
            an->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < len; ++j)
                    an->grad[std::int64_t(i) * c + start + j] += node.grad[std::int64_t(i) * len + j];
        });
}

// Pairwise quarter rotation on the channel axis: (x0, x1) -> (-x1, x0).
template <typename Real>
Tensor<Real> rotate_pairs(const Tensor<Real>& a) {
    check_dim(a.cols() % 2 == 0,
              "rotate_pairs needs an even channel count, got " + shape_str(a.shape()));
    const std::int64_t n = a.size();
    std::vector<Real> out(n);
    auto av = a.vals();
    for (std::int64_t i = 0; i < n; i += 2) {
        out[i] = -av[i + 1];
        out[i + 1] = av[i];
    }
    auto an = a.node();
    return detail::make_op<Real>(a.shape(), std::move(out), OpKind::rotate_pairs, {an},
                                 [an, n](TensorNode<Real>& node) {
                                     if (!an->grad_enabled) return;
                                     an->ensure_grad();
                                     for (std::int64_t i = 0; i < n; i += 2) {
                                         an->grad[i] += node.grad[i + 1];
                                         an->grad[i + 1] += -node.grad[i];
                                     }
                                 });
}

template <typename Real>
Tensor<Real> mse(const Tensor<Real>& a, const Tensor<Real>& b) {
    check_dim(a.shape() == b.shape(), "mse operands " + shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
    const std::int64_t n = a.size();
    auto av = a.vals();
    auto bv = b.vals();
    Real acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        Real d = av[i] - bv[i];
        acc += d * d;
    }
    flops_add(flopcost::mse(n));
    auto an = a.node();
    auto bn = b.node();
    return detail::make_op<Real>(
        Shape{1}, {acc / Real(n)}, OpKind::mse, {an, bn},
        [an, bn, n](TensorNode<Real>& node) {
            const Real g = node.grad[0] * Real(2) / Real(n);
            const auto& avv = *an->values;
            const auto& bvv = *bn->values;
            if (an->grad_enabled) {
                an->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) an->grad[i] += g * (avv[i] - bvv[i]);
            }
            if (bn->grad_enabled) {
                bn->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) bn->grad[i] -= g * (avv[i] - bvv[i]);
            }
        });
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& a) {
    const std::int64_t n = a.size();
    auto av = a.vals();
    Real acc = 0;
    for (std::int64_t i = 0; i < n; ++i) acc += av[i];
    flops_add(flopcost::sum(n));
    auto an = a.node();
    return detail::make_op<Real>(Shape{1}, {acc}, OpKind::sum, {an},
                                 [an, n](TensorNode<Real>& node) {
                                     if (!an->grad_enabled) return;
                                     an->ensure_grad();
                                     for (std::int64_t i = 0; i < n; ++i)
                                         an->grad[i] += node.grad[0];
                                 });
}

// ---------------------------------------------------------------------------
// Backward pass: seed d(loss)/d(loss) = 1 and visit reachable tracked nodes
// once each, in descending creation order. Calling backward repeatedly
// without zeroing gradients accumulates, by design.

template <typename Real>
void backward(const Tensor<Real>& loss) {
    check_contract(loss.size() == 1,
                   "backward needs a scalar loss, got " + shape_str(loss.shape()));
    check_contract(loss.grad_enabled(), "backward on a tensor with no tracked inputs");

    std::vector<TensorNode<Real>*> order;
    std::vector<TensorNode<Real>*> stack;
    // Visited marking via a local set of pointers; graphs are small enough
    // that a sorted vector would also do, but hashing keeps it simple.
    std::vector<TensorNode<Real>*> seen;
    auto mark = [&](TensorNode<Real>* n) {
        auto it = std::lower_bound(seen.begin(), seen.end(), n);
        if (it != seen.end() && *it == n) return false;
        seen.insert(it, n);
        return true;
    };
    stack.push_back(loss.node().get());
    mark(loss.node().get());
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->grad_enabled && mark(p.get())) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const auto* a, const auto* b) { return a->seq > b->seq; });

    auto* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += Real(1);
    for (auto* n : order) {
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

template <typename Real>
bool all_finite(const Tensor<Real>& t) {
    for (Real v : t.vals())
        if (!std::isfinite(double(v))) return false;
    return true;
}

}  // namespace ratecast
