#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace afnio {

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline int64_t shape_numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(s));
        n *= d;
    }
    return n;
}

/// Thread-local switch: while disabled, ops do not record backward closures.
class GradMode {
public:
    static bool enabled() { return flag(); }
    static void set(bool on) { flag() = on; }

private:
    static bool& flag() {
        thread_local bool f = true;
        return f;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// One entry of the computation record: the value, the operands that
/// produced it and the rule that routes gradients back to them.
template <typename T>
struct TensorNode {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until first needed
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backprop;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
    }
};

/// Value-semantics handle to a node of the computation record.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, T fill = T(0)) {
        int64_t n = shape_numel(shape);
        n_ = std::make_shared<TensorNode<T>>();
        n_->shape = std::move(shape);
        n_->value.assign(static_cast<size_t>(n), fill);
    }

    Tensor(std::vector<int> shape, std::vector<T> data) {
        int64_t n = shape_numel(shape);
        if (n != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        n_ = std::make_shared<TensorNode<T>>();
        n_->shape = std::move(shape);
        n_->value = std::move(data);
    }

    static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return n_->numel(); }

    std::vector<T>& value() { return n_->value; }
    const std::vector<T>& value() const { return n_->value; }
    T* data() { return n_->value.data(); }
    const T* data() const { return n_->value.data(); }
    T item() const {
        if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        n_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<T>& grad() const {
        if (n_->grad.empty()) throw std::runtime_error("tensor has no gradient");
        return n_->grad;
    }
    std::vector<T>& grad_mut() {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    Tensor detach() const {
        Tensor t;
        t.n_ = std::make_shared<TensorNode<T>>();
        t.n_->shape = n_->shape;
        t.n_->value = n_->value;
        return t;
    }

    std::shared_ptr<TensorNode<T>> node() const { return n_; }

    static Tensor from_node(std::shared_ptr<TensorNode<T>> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    std::shared_ptr<TensorNode<T>> n_;
};

// Builds an op output node. The backward closure is recorded only when
// gradients are both enabled and needed.
template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                  std::function<void(TensorNode<T>&)> backprop) {
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool need = false;
    for (const auto& p : parents) need = need || p.requires_grad();
    if (need && GradMode::enabled()) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backprop = std::move(backprop);
    }
    return Tensor<T>::from_node(std::move(n));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.value());
    const T* pb = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& o) {
        for (int side = 0; side < 2; ++side) {
            auto& p = o.parents[static_cast<size_t>(side)];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> out(a.value());
    const T* pb = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
    return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& o) {
        if (o.parents[0]->requires_grad) {
            o.parents[0]->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) o.parents[0]->grad[i] += o.grad[i];
        }
        if (o.parents[1]->requires_grad) {
            o.parents[1]->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) o.parents[1]->grad[i] -= o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> out(a.value());
    const T* pb = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
    return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& o) {
        const auto& av = o.parents[0]->value;
        const auto& bv = o.parents[1]->value;
        if (o.parents[0]->requires_grad) {
            o.parents[0]->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) o.parents[0]->grad[i] += o.grad[i] * bv[i];
        }
        if (o.parents[1]->requires_grad) {
            o.parents[1]->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) o.parents[1]->grad[i] += o.grad[i] * av[i];
        }
    });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T s) {
    std::vector<T> out(a.value());
    for (auto& v : out) v *= s;
    return make_op<T>(a.shape(), std::move(out), {a}, [s](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += s * o.grad[i];
    });
}

/// y = s * x where s is a one-element tensor (a trainable scalar).
template <typename T>
Tensor<T> scale_by(const Tensor<T>& x, const Tensor<T>& s) {
    if (s.numel() != 1) throw std::invalid_argument("scale_by: scale must have one element, got " + shape_str(s.shape()));
    T sv = s.value()[0];
    std::vector<T> out(x.value());
    for (auto& v : out) v *= sv;
    return make_op<T>(x.shape(), std::move(out), {x, s}, [](TensorNode<T>& o) {
        auto& px = o.parents[0];
        auto& ps = o.parents[1];
        T sv = ps->value[0];
        if (px->requires_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += sv * o.grad[i];
        }
        if (ps->requires_grad) {
            ps->ensure_grad();
            T acc = T(0);
            for (size_t i = 0; i < o.grad.size(); ++i) acc += o.grad[i] * px->value[i];
            ps->grad[0] += acc;
        }
    });
}

/// Channel-bias broadcast: x is [C,H,W] or [B,C,H,W], b is [C].
template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& b) {
    if (b.rank() != 1 || (x.rank() != 3 && x.rank() != 4))
        throw std::invalid_argument("bias_add: unsupported broadcast " + shape_str(x.shape()) + " + " +
                                    shape_str(b.shape()) + " (only channel bias over [C,H,W] or [B,C,H,W])");
    int caxis = x.rank() == 3 ? 0 : 1;
    int C = x.dim(caxis);
    if (C != b.dim(0))
        throw std::invalid_argument("bias_add: channel mismatch " + shape_str(x.shape()) + " + " + shape_str(b.shape()));
    int64_t inner = 1;
    for (int i = caxis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    int64_t outer = x.numel() / (C * inner);
    std::vector<T> out(x.value());
    {
        const T* pb = b.data();
        T* po = out.data();
        for (int64_t g = 0; g < outer; ++g)
            for (int c = 0; c < C; ++c) {
                T bv = pb[c];
                T* row = po + (g * C + c) * inner;
                for (int64_t i = 0; i < inner; ++i) row[i] += bv;
            }
    }
    return make_op<T>(x.shape(), std::move(out), {x, b}, [C, inner, outer](TensorNode<T>& o) {
        auto& px = o.parents[0];
        auto& pb = o.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            const T* g = o.grad.data();
            for (int64_t gi = 0; gi < outer; ++gi)
                for (int c = 0; c < C; ++c) {
                    const T* row = g + (gi * C + c) * inner;
                    T acc = T(0);
                    for (int64_t i = 0; i < inner; ++i) acc += row[i];
                    pb->grad[static_cast<size_t>(c)] += acc;
                }
        }
    });
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
    std::vector<T> out(x.value());
    for (auto& v : out) v = T(1) - v;
    return make_op<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) p->grad[i] -= o.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Exact GELU x*Phi(x) with Phi the standard normal CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    static const T inv_sqrt2 = static_cast<T>(0.70710678118654752440L);
    std::vector<T> out(x.value());
    for (auto& v : out) {
        T phi = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        v = v * phi;
    }
    return make_op<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& o) {
        static const T inv_sqrt2_ = static_cast<T>(0.70710678118654752440L);
        static const T inv_sqrt2pi = static_cast<T>(0.39894228040143267794L);
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            T v = p->value[i];
            T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2_));
            T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
            p->grad[i] += o.grad[i] * (cdf + v * pdf);
        }
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(x.value());
    for (auto& v : out) v = v > T(0) ? v : T(0);
    return make_op<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (p->value[i] > T(0)) p->grad[i] += o.grad[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    std::vector<T> out(x.value());
    for (auto& v : out) v = T(1) / (T(1) + std::exp(-v));
    return make_op<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            T y = o.value[i];
            p->grad[i] += o.grad[i] * y * (T(1) - y);
        }
    });
}

/// Softmax over axis 0 (e.g. the kernel-tap axis of a [K,H,W] field).
template <typename T>
Tensor<T> softmax0(const Tensor<T>& x) {
    int K = x.dim(0);
    int64_t inner = x.numel() / K;
    std::vector<T> out(x.value());
    for (int64_t i = 0; i < inner; ++i) {
        T mx = out[static_cast<size_t>(i)];
        for (int k = 1; k < K; ++k) mx = std::max(mx, out[static_cast<size_t>(k * inner + i)]);
        T sum = T(0);
        for (int k = 0; k < K; ++k) {
            T e = std::exp(out[static_cast<size_t>(k * inner + i)] - mx);
            out[static_cast<size_t>(k * inner + i)] = e;
            sum += e;
        }
        for (int k = 0; k < K; ++k) out[static_cast<size_t>(k * inner + i)] /= sum;
    }
    return make_op<T>(x.shape(), std::move(out), {x}, [K, inner](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (int64_t i = 0; i < inner; ++i) {
            T dot = T(0);
            for (int k = 0; k < K; ++k) {
                size_t idx = static_cast<size_t>(k * inner + i);
                dot += o.grad[idx] * o.value[idx];
            }
            for (int k = 0; k < K; ++k) {
                size_t idx = static_cast<size_t>(k * inner + i);
                p->grad[idx] += o.value[idx] * (o.grad[idx] - dot);
            }
        }
    });
}

template <typename T>
Tensor<T> abs_val(const Tensor<T>& x) {
    std::vector<T> out(x.value());
    for (auto& v : out) v = std::abs(v);
    return make_op<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            T v = p->value[i];
            T s = v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
            p->grad[i] += o.grad[i] * s;
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.value()) acc += v;
    return make_op<T>({1}, {acc}, {x}, [](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        T g = o.grad[0];
        for (auto& gv : p->grad) gv += g;
    });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.value()) acc += v;
    T n = static_cast<T>(x.numel());
    return make_op<T>({1}, {acc / n}, {x}, [n](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        T g = o.grad[0] / n;
        for (auto& gv : p->grad) gv += g;
    });
}

/// Concatenate along axis 0; trailing dimensions must agree.
template <typename T>
Tensor<T> concat0(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != b.rank() || a.rank() < 1)
        throw std::invalid_argument("concat0: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    for (int i = 1; i < a.rank(); ++i)
        if (a.dim(i) != b.dim(i))
            throw std::invalid_argument("concat0: trailing shape mismatch " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
    std::vector<int> shape = a.shape();
    shape[0] += b.dim(0);
    std::vector<T> out;
    out.reserve(static_cast<size_t>(a.numel() + b.numel()));
    out.insert(out.end(), a.value().begin(), a.value().end());
    out.insert(out.end(), b.value().begin(), b.value().end());
    size_t na = a.value().size();
    return make_op<T>(std::move(shape), std::move(out), {a, b}, [na](TensorNode<T>& o) {
        auto& pa = o.parents[0];
        auto& pb = o.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < na; ++i) pa->grad[i] += o.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = na; i < o.grad.size(); ++i) pb->grad[i - na] += o.grad[i];
        }
    });
}

/// y[c,:,:] = x[c,:,:] * m[0,:,:] — broadcast a one-channel map over channels.
template <typename T>
Tensor<T> mul_bcast_channel(const Tensor<T>& x, const Tensor<T>& m) {
    if (x.rank() != 3 || m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != x.dim(1) || m.dim(2) != x.dim(2))
        throw std::invalid_argument("mul_bcast_channel: shapes " + shape_str(x.shape()) + " vs " + shape_str(m.shape()));
    int C = x.dim(0);
    int64_t hw = static_cast<int64_t>(x.dim(1)) * x.dim(2);
    std::vector<T> out(x.value());
    for (int c = 0; c < C; ++c)
        for (int64_t i = 0; i < hw; ++i) out[static_cast<size_t>(c * hw + i)] *= m.value()[static_cast<size_t>(i)];
    return make_op<T>(x.shape(), std::move(out), {x, m}, [C, hw](TensorNode<T>& o) {
        auto& px = o.parents[0];
        auto& pm = o.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (int64_t i = 0; i < hw; ++i)
                    px->grad[static_cast<size_t>(c * hw + i)] +=
                        o.grad[static_cast<size_t>(c * hw + i)] * pm->value[static_cast<size_t>(i)];
        }
        if (pm->requires_grad) {
            pm->ensure_grad();
            for (int64_t i = 0; i < hw; ++i) {
                T acc = T(0);
                for (int c = 0; c < C; ++c)
                    acc += o.grad[static_cast<size_t>(c * hw + i)] * px->value[static_cast<size_t>(c * hw + i)];
                pm->grad[static_cast<size_t>(i)] += acc;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Gradients accumulate additively;
/// running backward twice from the same loss is rejected.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    auto root = loss.node();
    if (root->backward_done) throw std::runtime_error("backward: already run for this loss; rebuild the graph or reset");
    root->backward_done = true;
    if (!root->requires_grad) return;

    // Topological order, operands before consumers.
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> visited;
    std::vector<std::pair<TensorNode<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode<T>* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode<T>* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace afnio
