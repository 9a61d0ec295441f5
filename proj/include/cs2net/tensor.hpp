#ifndef CS2NET_TENSOR_HPP
#define CS2NET_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cs2net/error.hpp"

namespace cs2net {

using Index = std::int64_t;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

struct Shape {
    std::vector<Index> dims;

    Shape() = default;
    Shape(std::initializer_list<Index> d) : dims(d) { validate(); }
    explicit Shape(std::vector<Index> d) : dims(std::move(d)) { validate(); }

    Index rank() const { return static_cast<Index>(dims.size()); }

    Index numel() const {
        Index n = 1;
        for (Index d : dims) n *= d;
        return n;
    }

    Index operator[](Index i) const { return dims[static_cast<size_t>(i)]; }

    bool operator==(const Shape& o) const { return dims == o.dims; }
    bool operator!=(const Shape& o) const { return dims != o.dims; }

    std::string str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) os << 'x';
            os << dims[i];
        }
        os << ']';
        return os.str();
    }

private:
    void validate() const {
        for (Index d : dims)
            if (d < 1) throw DimensionError("shape dimension must be >= 1, got " + str());
    }
};

// ---------------------------------------------------------------------------
// Autodiff graph node
// ---------------------------------------------------------------------------

// Records are built implicitly during the forward pass; backward() linearizes
// them into a Tape (topological order) and replays the stored rules in reverse.

template <class T>
struct TensorImpl {
    Shape shape;
    std::shared_ptr<std::vector<T>> data;
    std::vector<T> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != data->size()) grad.assign(data->size(), T(0));
    }
};

template <class T>
using Tape = std::vector<TensorImpl<T>*>;

// Thread-local switch: when disabled, ops compute values but record nothing.
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
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev_); }

private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

template <class T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape s) { return filled(std::move(s), T(0)); }

    static Tensor filled(Shape s, T value) {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(s);
        t.impl_->data = std::make_shared<std::vector<T>>(
            static_cast<size_t>(t.impl_->shape.numel()), value);
        return t;
    }

    static Tensor from_vector(Shape s, std::vector<T> values) {
        if (static_cast<Index>(values.size()) != s.numel())
            throw DimensionError("from_vector: " + std::to_string(values.size()) +
                                 " values for shape " + s.str());
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(s);
        t.impl_->data = std::make_shared<std::vector<T>>(std::move(values));
        return t;
    }

    static Tensor uniform(Shape s, T lo, T hi, Rng& rng) {
        Tensor t = zeros(std::move(s));
        std::uniform_real_distribution<double> dist(static_cast<double>(lo),
                                                    static_cast<double>(hi));
        for (T& v : *t.impl_->data) v = static_cast<T>(dist(rng));
        return t;
    }

    static Tensor randn(Shape s, Rng& rng, T stddev = T(1)) {
        Tensor t = zeros(std::move(s));
        std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
        for (T& v : *t.impl_->data) v = static_cast<T>(dist(rng));
        return t;
    }

    bool valid() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    Index numel() const { return impl_->shape.numel(); }
    Index rank() const { return impl_->shape.rank(); }

    std::vector<T>& data() { return *impl_->data; }
    const std::vector<T>& data() const { return *impl_->data; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::vector<T>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        impl_->requires_grad = on;
        return *this;
    }

    // Scalar extraction; the tensor must hold exactly one value.
    T item() const {
        if (numel() != 1) throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
        return (*impl_->data)[0];
    }

    const std::string& op() const { return impl_->op; }
    std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

    // Deep copy of values (no graph history).
    Tensor clone_detached() const {
        Tensor t = from_vector(shape(), data());
        return t;
    }

private:
    std::shared_ptr<TensorImpl<T>> impl_;

    template <class U>
    friend Tensor<U> make_op_result(Shape, std::vector<U>, const char*,
                                    std::vector<Tensor<U>>,
                                    std::function<void(TensorImpl<U>&)>);
    template <class U>
    friend Tensor<U> make_view(const Tensor<U>&, Shape, const char*);
};

// ---------------------------------------------------------------------------
// Op plumbing
// ---------------------------------------------------------------------------

template <class T>
inline void check_all_finite(const std::vector<T>& v, const char* op) {
    for (const T& x : v)
        if (!std::isfinite(static_cast<double>(x)))
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
}

template <class T>
Tensor<T> make_op_result(Shape shape, std::vector<T> values, const char* op,
                         std::vector<Tensor<T>> inputs,
                         std::function<void(TensorImpl<T>&)> backward_fn) {
    check_all_finite(values, op);
    Tensor<T> out = Tensor<T>::from_vector(std::move(shape), std::move(values));
    out.impl_->op = op;
    bool track = GradMode::enabled();
    bool any_grad = false;
    if (track)
        for (const auto& in : inputs) any_grad = any_grad || in.requires_grad();
    if (track && any_grad) {
        out.impl_->requires_grad = true;
        for (const auto& in : inputs) out.impl_->parents.push_back(in.impl());
        out.impl_->backward_fn = std::move(backward_fn);
    }
    return out;
}

// Zero-copy reshape: shares the data buffer; backward adds the view's grad
// back into the base tensor.
template <class T>
Tensor<T> make_view(const Tensor<T>& base, Shape shape, const char* op) {
    if (shape.numel() != base.numel())
        throw DimensionError(std::string(op) + ": cannot view " + base.shape().str() +
                             " as " + shape.str());
    Tensor<T> out;
    out.impl_ = std::make_shared<TensorImpl<T>>();
    out.impl_->shape = std::move(shape);
    out.impl_->data = base.impl()->data;
    out.impl_->op = op;
    if (GradMode::enabled() && base.requires_grad()) {
        out.impl_->requires_grad = true;
        out.impl_->parents.push_back(base.impl());
        auto parent = base.impl();
        out.impl_->backward_fn = [parent](TensorImpl<T>& self) {
            parent->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) parent->grad[i] += self.grad[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& t, Shape s) {
    return make_view(t, std::move(s), "reshape");
}

// ---------------------------------------------------------------------------
// Core ops
// ---------------------------------------------------------------------------

namespace detail {

// C[m x p] += A[m x k] * B[k x p], row-major; ikj order for locality.
template <class T>
void gemm_acc(const T* a, const T* b, T* c, Index m, Index k, Index p) {
    for (Index i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * p;
        for (Index l = 0; l < k; ++l) {
            T av = arow[l];
            if (av == T(0)) continue;
            const T* brow = b + l * p;
            for (Index j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x p] += A^T[m x k] * B[k x p] where A is stored [k x m].
template <class T>
void gemm_at_b_acc(const T* a, const T* b, T* c, Index m, Index k, Index p) {
    for (Index l = 0; l < k; ++l) {
        const T* arow = a + l * m;
        const T* brow = b + l * p;
        for (Index i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * p;
            for (Index j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x p] += A[m x k] * B^T[k x p] where B is stored [p x k].
template <class T>
void gemm_a_bt_acc(const T* a, const T* b, T* c, Index m, Index k, Index p) {
    for (Index i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * p;
        for (Index j = 0; j < p; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (Index l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul: rank-2 operands required, got " + a.shape().str() +
                             " and " + b.shape().str());
    Index m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], p = b.shape()[1];
    if (k != k2)
        throw DimensionError("matmul: inner dimensions differ, " + a.shape().str() + " vs " +
                             b.shape().str());
    std::vector<T> out(static_cast<size_t>(m * p), T(0));
    detail::gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, p);

    auto ai = a.impl(), bi = b.impl();
    return make_op_result<T>(
        Shape{m, p}, std::move(out), "matmul", {a, b}, [ai, bi, m, k, p](TensorImpl<T>& self) {
            // dA = dC * B^T, dB = A^T * dC
            if (ai->requires_grad) {
                ai->ensure_grad();
                detail::gemm_a_bt_acc(self.grad.data(), bi->data->data(), ai->grad.data(), m, p, k);
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                detail::gemm_at_b_acc(ai->data->data(), self.grad.data(), bi->grad.data(), k, m, p);
            }
        });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) throw DimensionError("transpose: rank-2 tensor required");
    Index r = a.shape()[0], c = a.shape()[1];
    std::vector<T> out(static_cast<size_t>(r * c));
    const auto& src = a.data();
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) out[static_cast<size_t>(j * r + i)] = src[static_cast<size_t>(i * c + j)];
    auto ai = a.impl();
    return make_op_result<T>(Shape{c, r}, std::move(out), "transpose", {a},
                             [ai, r, c](TensorImpl<T>& self) {
                                 if (!ai->requires_grad) return;
                                 ai->ensure_grad();
                                 for (Index i = 0; i < r; ++i)
                                     for (Index j = 0; j < c; ++j)
                                         ai->grad[static_cast<size_t>(i * c + j)] +=
                                             self.grad[static_cast<size_t>(j * r + i)];
                             });
}

// Softmax along `axis`; the per-slice maximum is subtracted before
// exponentiation so large logits cannot overflow.
template <class T>
Tensor<T> softmax_axis(const Tensor<T>& t, Index axis) {
    if (axis < 0 || axis >= t.rank())
        throw DimensionError("softmax_axis: axis " + std::to_string(axis) + " out of range for " +
                             t.shape().str());
    const auto& dims = t.shape().dims;
    Index n = t.shape()[axis];
    Index inner = 1;
    for (Index i = axis + 1; i < t.rank(); ++i) inner *= dims[static_cast<size_t>(i)];
    Index outer = t.numel() / (n * inner);

    std::vector<T> out(t.data().size());
    const auto& src = t.data();
    for (Index o = 0; o < outer; ++o) {
        for (Index in = 0; in < inner; ++in) {
            Index base = o * n * inner + in;
            T mx = src[static_cast<size_t>(base)];
            for (Index i = 1; i < n; ++i) mx = std::max(mx, src[static_cast<size_t>(base + i * inner)]);
            T sum = T(0);
            for (Index i = 0; i < n; ++i) {
                T e = std::exp(src[static_cast<size_t>(base + i * inner)] - mx);
                out[static_cast<size_t>(base + i * inner)] = e;
                sum += e;
            }
            for (Index i = 0; i < n; ++i) out[static_cast<size_t>(base + i * inner)] /= sum;
        }
    }

    auto ti = t.impl();
    Shape oshape = t.shape();
    return make_op_result<T>(
        std::move(oshape), std::move(out), "softmax_axis", {t},
        [ti, n, inner, outer](TensorImpl<T>& self) {
            if (!ti->requires_grad) return;
            ti->ensure_grad();
            const auto& y = *self.data;
            for (Index o = 0; o < outer; ++o) {
                for (Index in = 0; in < inner; ++in) {
                    Index base = o * n * inner + in;
                    T dot = T(0);
                    for (Index i = 0; i < n; ++i) {
                        size_t idx = static_cast<size_t>(base + i * inner);
                        dot += self.grad[idx] * y[idx];
                    }
                    for (Index i = 0; i < n; ++i) {
                        size_t idx = static_cast<size_t>(base + i * inner);
                        ti->grad[idx] += y[idx] * (self.grad[idx] - dot);
                    }
                }
            }
        });
}

template <class T>
Tensor<T> relu(const Tensor<T>& t) {
    std::vector<T> out(t.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = t.data()[i] > T(0) ? t.data()[i] : T(0);
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(out), "relu", {t}, [ti](TensorImpl<T>& self) {
        if (!ti->requires_grad) return;
        ti->ensure_grad();
        const auto& x = *ti->data;
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (x[i] > T(0)) ti->grad[i] += self.grad[i];
    });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& t) {
    std::vector<T> out(t.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-t.data()[i]));
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(out), "sigmoid", {t}, [ti](TensorImpl<T>& self) {
        if (!ti->requires_grad) return;
        ti->ensure_grad();
        const auto& y = *self.data;
        for (size_t i = 0; i < self.grad.size(); ++i)
            ti->grad[i] += self.grad[i] * y[i] * (T(1) - y[i]);
    });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto ai = a.impl(), bi = b.impl();
    return make_op_result<T>(a.shape(), std::move(out), "add", {a, b}, [ai, bi](TensorImpl<T>& self) {
        if (ai->requires_grad) {
            ai->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i];
        }
        if (bi->requires_grad) {
            bi->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) bi->grad[i] += self.grad[i];
        }
    });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto ai = a.impl(), bi = b.impl();
    return make_op_result<T>(a.shape(), std::move(out), "mul", {a, b}, [ai, bi](TensorImpl<T>& self) {
        if (ai->requires_grad) {
            ai->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i] * (*bi->data)[i];
        }
        if (bi->requires_grad) {
            bi->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) bi->grad[i] += self.grad[i] * (*ai->data)[i];
        }
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    auto ai = a.impl();
    return make_op_result<T>(a.shape(), std::move(out), "scale", {a}, [ai, s](TensorImpl<T>& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i] * s;
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    T s = std::accumulate(a.data().begin(), a.data().end(), T(0));
    auto ai = a.impl();
    return make_op_result<T>(Shape{1}, std::vector<T>{s}, "sum", {a}, [ai](TensorImpl<T>& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        T g = self.grad[0];
        for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += g;
    });
}

// Concatenate along `axis`; shapes must agree elsewhere.
template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, Index axis) {
    if (a.rank() != b.rank()) throw DimensionError("concat: rank mismatch");
    if (axis < 0 || axis >= a.rank()) throw DimensionError("concat: axis out of range");
    for (Index i = 0; i < a.rank(); ++i)
        if (i != axis && a.shape()[i] != b.shape()[i])
            throw DimensionError("concat: shape mismatch " + a.shape().str() + " vs " +
                                 b.shape().str());
    std::vector<Index> odims = a.shape().dims;
    odims[static_cast<size_t>(axis)] += b.shape()[axis];

    Index inner = 1;
    for (Index i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    Index an = a.shape()[axis] * inner, bn = b.shape()[axis] * inner;
    Index outer = a.numel() / an;

    std::vector<T> out(static_cast<size_t>(a.numel() + b.numel()));
    for (Index o = 0; o < outer; ++o) {
        std::copy_n(a.data().begin() + o * an, an, out.begin() + o * (an + bn));
        std::copy_n(b.data().begin() + o * bn, bn, out.begin() + o * (an + bn) + an);
    }
    auto ai = a.impl(), bi = b.impl();
    return make_op_result<T>(Shape(odims), std::move(out), "concat", {a, b},
                             [ai, bi, outer, an, bn](TensorImpl<T>& self) {
                                 for (Index o = 0; o < outer; ++o) {
                                     if (ai->requires_grad) {
                                         ai->ensure_grad();
                                         for (Index i = 0; i < an; ++i)
                                             ai->grad[static_cast<size_t>(o * an + i)] +=
                                                 self.grad[static_cast<size_t>(o * (an + bn) + i)];
                                     }
                                     if (bi->requires_grad) {
                                         bi->ensure_grad();
                                         for (Index i = 0; i < bn; ++i)
                                             bi->grad[static_cast<size_t>(o * bn + i)] +=
                                                 self.grad[static_cast<size_t>(o * (an + bn) + an + i)];
                                     }
                                 }
                             });
}

// Extract sample `b` from a batched tensor [B, ...] as [...].
template <class T>
Tensor<T> select_batch(const Tensor<T>& t, Index b) {
    if (t.rank() < 2) throw DimensionError("select_batch: rank >= 2 required");
    Index B = t.shape()[0];
    if (b < 0 || b >= B) throw DimensionError("select_batch: index out of range");
    Index chunk = t.numel() / B;
    std::vector<Index> odims(t.shape().dims.begin() + 1, t.shape().dims.end());
    std::vector<T> out(t.data().begin() + b * chunk, t.data().begin() + (b + 1) * chunk);
    auto ti = t.impl();
    return make_op_result<T>(Shape(odims), std::move(out), "select_batch", {t},
                             [ti, b, chunk](TensorImpl<T>& self) {
                                 if (!ti->requires_grad) return;
                                 ti->ensure_grad();
                                 for (Index i = 0; i < chunk; ++i)
                                     ti->grad[static_cast<size_t>(b * chunk + i)] += self.grad[static_cast<size_t>(i)];
                             });
}

// Stack equal-shape tensors into a batched tensor [B, ...].
template <class T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ContractError("stack_batch: empty input");
    Index chunk = parts[0].numel();
    for (const auto& p : parts)
        if (p.shape() != parts[0].shape()) throw DimensionError("stack_batch: shape mismatch");
    std::vector<Index> odims;
    odims.push_back(static_cast<Index>(parts.size()));
    odims.insert(odims.end(), parts[0].shape().dims.begin(), parts[0].shape().dims.end());
    std::vector<T> out;
    out.reserve(static_cast<size_t>(chunk) * parts.size());
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<std::shared_ptr<TensorImpl<T>>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    return make_op_result<T>(Shape(odims), std::move(out), "stack_batch", parts,
                             [impls, chunk](TensorImpl<T>& self) {
                                 for (size_t b = 0; b < impls.size(); ++b) {
                                     if (!impls[b]->requires_grad) continue;
                                     impls[b]->ensure_grad();
                                     for (Index i = 0; i < chunk; ++i)
                                         impls[b]->grad[static_cast<size_t>(i)] +=
                                             self.grad[b * static_cast<size_t>(chunk) + static_cast<size_t>(i)];
                                 }
                             });
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

template <class T>
Tape<T> build_tape(const Tensor<T>& root) {
    Tape<T> tape;
    std::unordered_set<TensorImpl<T>*> seen;
    // Iterative post-order DFS; parents end up before their consumers.
    std::vector<std::pair<TensorImpl<T>*, size_t>> stack;
    stack.emplace_back(root.impl().get(), 0);
    seen.insert(root.impl().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl<T>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            tape.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

template <class T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw ContractError("backward: loss must be scalar, got " + loss.shape().str());
    if (!loss.requires_grad()) throw ContractError("backward: loss does not require grad");
    Tape<T> tape = build_tape(loss);
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] = T(1);
    for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
        TensorImpl<T>* node = *it;
        if (!node->backward_fn) continue;
        node->ensure_grad();
        for (const T& g : node->grad)
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericError("non-finite gradient flowing into op '" + node->op + "'");
        node->backward_fn(*node);
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` must return a scalar tensor built from its argument.
template <class T>
double finite_diff_check(const std::function<Tensor<T>(Tensor<T>&)>& f, Tensor<T> point,
                         T h = T(1e-5)) {
    point.set_requires_grad(true);
    point.zero_grad();
    Tensor<T> loss = f(point);
    backward(loss);
    std::vector<T> analytic = point.grad();

    double worst = 0.0;
    NoGradGuard ng;
    for (size_t i = 0; i < point.data().size(); ++i) {
        T orig = point.data()[i];
        point.data()[i] = orig + h;
        double fp = static_cast<double>(f(point).item());
        point.data()[i] = orig - h;
        double fm = static_cast<double>(f(point).item());
        point.data()[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_check: non-finite function value at probe point");
        double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
        double a = static_cast<double>(analytic[i]);
        double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace cs2net

#endif
