#ifndef CS2NET_NN_HPP
#define CS2NET_NN_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cs2net/tensor.hpp"

namespace cs2net {

// Named handles to learnable tensors; the optimizer and the checkpoint writer
// both walk this list. Tensors are shared, mutation is in place.
template <class T>
using ParamMap = std::vector<std::pair<std::string, Tensor<T>>>;

// ---------------------------------------------------------------------------
// ConvSpec
// ---------------------------------------------------------------------------

struct ConvSpec {
    int in_channels = 1;
    int out_channels = 1;
    std::vector<int> kernel;   // per spatial axis (2 or 3 entries)
    std::vector<int> stride;   // same length as kernel
    std::vector<int> padding;  // same length as kernel
    bool bias = true;

    int spatial_rank() const { return static_cast<int>(kernel.size()); }

    static ConvSpec make(int in_ch, int out_ch, std::vector<int> k, std::vector<int> pad,
                         bool with_bias = true) {
        ConvSpec s;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = std::move(k);
        s.stride.assign(s.kernel.size(), 1);
        s.padding = std::move(pad);
        s.bias = with_bias;
        return s;
    }

    Index kernel_volume() const {
        Index v = 1;
        for (int k : kernel) v *= k;
        return v;
    }

    std::vector<Index> out_size(const std::vector<Index>& in_size) const {
        if (in_size.size() != kernel.size())
            throw DimensionError("conv: spatial rank mismatch");
        std::vector<Index> out(in_size.size());
        for (size_t a = 0; a < in_size.size(); ++a) {
            Index num = in_size[a] + 2 * padding[a] - kernel[a];
            if (num < 0 || num % stride[a] != 0)
                throw DimensionError("conv: non-integral output size on axis " + std::to_string(a));
            out[a] = num / stride[a] + 1;
        }
        return out;
    }
};

namespace detail {

// im2col for 2 or 3 spatial axes. col is [Cin*Kvol, Ospatial], row-major.
template <class T>
void im2col(const T* x, const ConvSpec& s, const std::vector<Index>& in, T* col) {
    Index cin = s.in_channels;
    if (s.spatial_rank() == 2) {
        Index H = in[0], W = in[1];
        Index OH = (H + 2 * s.padding[0] - s.kernel[0]) / s.stride[0] + 1;
        Index OW = (W + 2 * s.padding[1] - s.kernel[1]) / s.stride[1] + 1;
        Index O = OH * OW;
        Index row = 0;
        for (Index c = 0; c < cin; ++c)
            for (int ki = 0; ki < s.kernel[0]; ++ki)
                for (int kj = 0; kj < s.kernel[1]; ++kj, ++row) {
                    T* dst = col + row * O;
                    for (Index oi = 0; oi < OH; ++oi) {
                        Index ii = oi * s.stride[0] + ki - s.padding[0];
                        if (ii < 0 || ii >= H) {
                            for (Index oj = 0; oj < OW; ++oj) dst[oi * OW + oj] = T(0);
                            continue;
                        }
                        const T* src = x + (c * H + ii) * W;
                        for (Index oj = 0; oj < OW; ++oj) {
                            Index jj = oj * s.stride[1] + kj - s.padding[1];
                            dst[oi * OW + oj] = (jj >= 0 && jj < W) ? src[jj] : T(0);
                        }
                    }
                }
    } else {
        Index H = in[0], W = in[1], D = in[2];
        Index OH = (H + 2 * s.padding[0] - s.kernel[0]) / s.stride[0] + 1;
        Index OW = (W + 2 * s.padding[1] - s.kernel[1]) / s.stride[1] + 1;
        Index OD = (D + 2 * s.padding[2] - s.kernel[2]) / s.stride[2] + 1;
        Index O = OH * OW * OD;
        Index row = 0;
        for (Index c = 0; c < cin; ++c)
            for (int ki = 0; ki < s.kernel[0]; ++ki)
                for (int kj = 0; kj < s.kernel[1]; ++kj)
                    for (int kk = 0; kk < s.kernel[2]; ++kk, ++row) {
                        T* dst = col + row * O;
                        for (Index oi = 0; oi < OH; ++oi) {
                            Index ii = oi * s.stride[0] + ki - s.padding[0];
                            for (Index oj = 0; oj < OW; ++oj) {
                                Index jj = oj * s.stride[1] + kj - s.padding[1];
                                T* drow = dst + (oi * OW + oj) * OD;
                                if (ii < 0 || ii >= H || jj < 0 || jj >= W) {
                                    for (Index ok = 0; ok < OD; ++ok) drow[ok] = T(0);
                                    continue;
                                }
                                const T* src = x + ((c * H + ii) * W + jj) * D;
                                for (Index ok = 0; ok < OD; ++ok) {
                                    Index kk2 = ok * s.stride[2] + kk - s.padding[2];
                                    drow[ok] = (kk2 >= 0 && kk2 < D) ? src[kk2] : T(0);
                                }
                            }
                        }
                    }
    }
}

// Adjoint of im2col: scatter-add col gradients back onto the input image.
template <class T>
void col2im_acc(const T* col, const ConvSpec& s, const std::vector<Index>& in, T* dx) {
    Index cin = s.in_channels;
    if (s.spatial_rank() == 2) {
        Index H = in[0], W = in[1];
        Index OH = (H + 2 * s.padding[0] - s.kernel[0]) / s.stride[0] + 1;
        Index OW = (W + 2 * s.padding[1] - s.kernel[1]) / s.stride[1] + 1;
        Index O = OH * OW;
        Index row = 0;
        for (Index c = 0; c < cin; ++c)
            for (int ki = 0; ki < s.kernel[0]; ++ki)
                for (int kj = 0; kj < s.kernel[1]; ++kj, ++row) {
                    const T* src = col + row * O;
                    for (Index oi = 0; oi < OH; ++oi) {
                        Index ii = oi * s.stride[0] + ki - s.padding[0];
                        if (ii < 0 || ii >= H) continue;
                        for (Index oj = 0; oj < OW; ++oj) {
                            Index jj = oj * s.stride[1] + kj - s.padding[1];
                            if (jj < 0 || jj >= W) continue;
                            dx[(c * H + ii) * W + jj] += src[oi * OW + oj];
                        }
                    }
                }
    } else {
        Index H = in[0], W = in[1], D = in[2];
        Index OH = (H + 2 * s.padding[0] - s.kernel[0]) / s.stride[0] + 1;
        Index OW = (W + 2 * s.padding[1] - s.kernel[1]) / s.stride[1] + 1;
        Index OD = (D + 2 * s.padding[2] - s.kernel[2]) / s.stride[2] + 1;
        Index O = OH * OW * OD;
        Index row = 0;
        for (Index c = 0; c < cin; ++c)
            for (int ki = 0; ki < s.kernel[0]; ++ki)
                for (int kj = 0; kj < s.kernel[1]; ++kj)
                    for (int kk = 0; kk < s.kernel[2]; ++kk, ++row) {
                        const T* src = col + row * O;
                        for (Index oi = 0; oi < OH; ++oi) {
                            Index ii = oi * s.stride[0] + ki - s.padding[0];
                            if (ii < 0 || ii >= H) continue;
                            for (Index oj = 0; oj < OW; ++oj) {
                                Index jj = oj * s.stride[1] + kj - s.padding[1];
                                if (jj < 0 || jj >= W) continue;
                                for (Index ok = 0; ok < OD; ++ok) {
                                    Index kk2 = ok * s.stride[2] + kk - s.padding[2];
                                    if (kk2 < 0 || kk2 >= D) continue;
                                    dx[((c * H + ii) * W + jj) * D + kk2] +=
                                        src[(oi * OW + oj) * OD + ok];
                                }
                            }
                        }
                    }
    }
}

struct BatchView {
    Index batch = 1;
    bool batched = false;
    std::vector<Index> spatial;
};

// Accepts [C, spatial...] or [B, C, spatial...] for a given spatial rank.
inline BatchView split_batch(const Shape& s, int spatial_rank, Index channels, const char* op) {
    BatchView v;
    if (s.rank() == spatial_rank + 1) {
        if (s[0] != channels)
            throw DimensionError(std::string(op) + ": expected " + std::to_string(channels) +
                                 " channels, got " + s.str());
        v.batched = false;
        v.batch = 1;
        v.spatial.assign(s.dims.begin() + 1, s.dims.end());
    } else if (s.rank() == spatial_rank + 2) {
        if (s[1] != channels)
            throw DimensionError(std::string(op) + ": expected " + std::to_string(channels) +
                                 " channels, got " + s.str());
        v.batched = true;
        v.batch = s[0];
        v.spatial.assign(s.dims.begin() + 2, s.dims.end());
    } else {
        throw DimensionError(std::string(op) + ": rank " + std::to_string(s.rank()) +
                             " incompatible with spatial rank " + std::to_string(spatial_rank));
    }
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv_forward: cross-correlation (no kernel flip). weight [Cout, Cin, k...].
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> conv_forward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                       const Tensor<T>& bias) {
    auto view = detail::split_batch(x.shape(), spec.spatial_rank(), spec.in_channels, "conv");
    std::vector<Index> osp = spec.out_size(view.spatial);
    Index O = 1;
    for (Index d : osp) O *= d;
    Index K = spec.in_channels * spec.kernel_volume();
    Index cout = spec.out_channels;
    Index in_chunk = x.numel() / view.batch;
    Index out_chunk = cout * O;

    auto cols = std::make_shared<std::vector<std::vector<T>>>();
    std::vector<T> out(static_cast<size_t>(view.batch * out_chunk), T(0));
    for (Index b = 0; b < view.batch; ++b) {
        std::vector<T> col(static_cast<size_t>(K * O));
        detail::im2col(x.data().data() + b * in_chunk, spec, view.spatial, col.data());
        detail::gemm_acc(weight.data().data(), col.data(), out.data() + b * out_chunk, cout, K, O);
        if (spec.bias) {
            T* o = out.data() + b * out_chunk;
            for (Index c = 0; c < cout; ++c) {
                T bv = bias.data()[static_cast<size_t>(c)];
                for (Index i = 0; i < O; ++i) o[c * O + i] += bv;
            }
        }
        cols->push_back(std::move(col));
    }

    std::vector<Index> odims;
    if (view.batched) odims.push_back(view.batch);
    odims.push_back(cout);
    odims.insert(odims.end(), osp.begin(), osp.end());

    auto xi = x.impl(), wi = weight.impl(), bi = bias.valid() ? bias.impl() : nullptr;
    std::vector<Tensor<T>> inputs = {x, weight};
    if (spec.bias) inputs.push_back(bias);
    Index batch = view.batch;
    auto spatial = view.spatial;
    return make_op_result<T>(
        Shape(odims), std::move(out), "conv", inputs,
        [xi, wi, bi, spec, cols, batch, spatial, K, O, cout, in_chunk, out_chunk](TensorImpl<T>& self) {
            for (Index b = 0; b < batch; ++b) {
                const T* dout = self.grad.data() + b * out_chunk;
                if (wi->requires_grad) {
                    wi->ensure_grad();
                    // dW += dOut * col^T
                    detail::gemm_a_bt_acc(dout, (*cols)[static_cast<size_t>(b)].data(),
                                          wi->grad.data(), cout, O, K);
                }
                if (spec.bias && bi && bi->requires_grad) {
                    bi->ensure_grad();
                    for (Index c = 0; c < cout; ++c) {
                        T acc = T(0);
                        for (Index i = 0; i < O; ++i) acc += dout[c * O + i];
                        bi->grad[static_cast<size_t>(c)] += acc;
                    }
                }
                if (xi->requires_grad) {
                    xi->ensure_grad();
                    std::vector<T> dcol(static_cast<size_t>(K * O), T(0));
                    detail::gemm_at_b_acc(wi->data->data(), dout, dcol.data(), K, cout, O);
                    detail::col2im_acc(dcol.data(), spec, spatial, xi->grad.data() + b * in_chunk);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Conv layer wrapper with Kaiming-uniform init
// ---------------------------------------------------------------------------

template <class T>
struct Conv {
    ConvSpec spec;
    Tensor<T> weight;
    Tensor<T> bias;

    Conv() = default;
    Conv(ConvSpec s, Rng& rng) : spec(std::move(s)) {
        std::vector<Index> wdims = {spec.out_channels, spec.in_channels};
        for (int k : spec.kernel) wdims.push_back(k);
        Index fan_in = spec.in_channels * spec.kernel_volume();
        T bound = static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in)));
        weight = Tensor<T>::uniform(Shape(wdims), -bound, bound, rng);
        weight.set_requires_grad(true);
        bias = Tensor<T>::zeros(Shape{spec.out_channels});
        bias.set_requires_grad(true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv_forward(x, spec, weight, bias); }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".weight", weight);
        if (spec.bias) out.emplace_back(prefix + ".bias", bias);
    }
};

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <class T>
struct BatchNorm {
    Index channels = 0;
    int spatial_rank = 2;
    T momentum = T(0.1);
    T epsilon = T(1e-5);
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;  // buffers, no grad

    BatchNorm() = default;
    BatchNorm(Index c, int srank) : channels(c), spatial_rank(srank) {
        gamma = Tensor<T>::filled(Shape{c}, T(1));
        gamma.set_requires_grad(true);
        beta = Tensor<T>::zeros(Shape{c});
        beta.set_requires_grad(true);
        running_mean = Tensor<T>::zeros(Shape{c});
        running_var = Tensor<T>::filled(Shape{c}, T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        auto view = detail::split_batch(x.shape(), spatial_rank, channels, "batch_norm");
        Index sp = 1;
        for (Index d : view.spatial) sp *= d;
        Index B = view.batch, C = channels;
        Index m = B * sp;  // reduction count per channel
        const auto& src = x.data();

        std::vector<T> mean(static_cast<size_t>(C)), var(static_cast<size_t>(C));
        if (training) {
            for (Index c = 0; c < C; ++c) {
                double acc = 0;
                for (Index b = 0; b < B; ++b) {
                    const T* p = src.data() + (b * C + c) * sp;
                    for (Index i = 0; i < sp; ++i) acc += static_cast<double>(p[i]);
                }
                mean[static_cast<size_t>(c)] = static_cast<T>(acc / static_cast<double>(m));
                double vacc = 0;
                for (Index b = 0; b < B; ++b) {
                    const T* p = src.data() + (b * C + c) * sp;
                    for (Index i = 0; i < sp; ++i) {
                        double d = static_cast<double>(p[i]) - static_cast<double>(mean[static_cast<size_t>(c)]);
                        vacc += d * d;
                    }
                }
                var[static_cast<size_t>(c)] = static_cast<T>(vacc / static_cast<double>(m));
            }
            // running stats use the unbiased variance when m > 1
            for (Index c = 0; c < C; ++c) {
                T rv = var[static_cast<size_t>(c)];
                if (m > 1) rv = rv * static_cast<T>(m) / static_cast<T>(m - 1);
                running_mean.data()[static_cast<size_t>(c)] =
                    (T(1) - momentum) * running_mean.data()[static_cast<size_t>(c)] +
                    momentum * mean[static_cast<size_t>(c)];
                running_var.data()[static_cast<size_t>(c)] =
                    (T(1) - momentum) * running_var.data()[static_cast<size_t>(c)] + momentum * rv;
            }
        } else {
            mean.assign(running_mean.data().begin(), running_mean.data().end());
            var.assign(running_var.data().begin(), running_var.data().end());
        }

        std::vector<T> out(src.size());
        std::vector<T> xhat(src.size());
        for (Index b = 0; b < B; ++b)
            for (Index c = 0; c < C; ++c) {
                T inv = T(1) / std::sqrt(var[static_cast<size_t>(c)] + epsilon);
                T g = gamma.data()[static_cast<size_t>(c)], bta = beta.data()[static_cast<size_t>(c)];
                const T* p = src.data() + (b * C + c) * sp;
                T* q = out.data() + (b * C + c) * sp;
                T* h = xhat.data() + (b * C + c) * sp;
                for (Index i = 0; i < sp; ++i) {
                    h[i] = (p[i] - mean[static_cast<size_t>(c)]) * inv;
                    q[i] = g * h[i] + bta;
                }
            }

        auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
        auto xhat_p = std::make_shared<std::vector<T>>(std::move(xhat));
        auto var_p = std::make_shared<std::vector<T>>(var);
        T eps = epsilon;
        return make_op_result<T>(
            x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
            [xi, gi, bi, xhat_p, var_p, B, C, sp, m, eps, training](TensorImpl<T>& self) {
                const auto& xh = *xhat_p;
                for (Index c = 0; c < C; ++c) {
                    T inv = T(1) / std::sqrt((*var_p)[static_cast<size_t>(c)] + eps);
                    T g = (*gi->data)[static_cast<size_t>(c)];
                    double dgacc = 0, dbacc = 0, dxhat_sum = 0, dxhat_xhat_sum = 0;
                    for (Index b = 0; b < B; ++b) {
                        const T* go = self.grad.data() + (b * C + c) * sp;
                        const T* h = xh.data() + (b * C + c) * sp;
                        for (Index i = 0; i < sp; ++i) {
                            dgacc += static_cast<double>(go[i]) * static_cast<double>(h[i]);
                            dbacc += static_cast<double>(go[i]);
                            double dxh = static_cast<double>(go[i]) * static_cast<double>(g);
                            dxhat_sum += dxh;
                            dxhat_xhat_sum += dxh * static_cast<double>(h[i]);
                        }
                    }
                    if (gi->requires_grad) {
                        gi->ensure_grad();
                        gi->grad[static_cast<size_t>(c)] += static_cast<T>(dgacc);
                    }
                    if (bi->requires_grad) {
                        bi->ensure_grad();
                        bi->grad[static_cast<size_t>(c)] += static_cast<T>(dbacc);
                    }
                    if (xi->requires_grad) {
                        xi->ensure_grad();
                        for (Index b = 0; b < B; ++b) {
                            const T* go = self.grad.data() + (b * C + c) * sp;
                            const T* h = xh.data() + (b * C + c) * sp;
                            T* dx = xi->grad.data() + (b * C + c) * sp;
                            for (Index i = 0; i < sp; ++i) {
                                double dxh = static_cast<double>(go[i]) * static_cast<double>(g);
                                double v;
                                if (training) {
                                    v = (dxh - dxhat_sum / static_cast<double>(m) -
                                         static_cast<double>(h[i]) * dxhat_xhat_sum /
                                             static_cast<double>(m)) *
                                        static_cast<double>(inv);
                                } else {
                                    v = dxh * static_cast<double>(inv);
                                }
                                dx[i] += static_cast<T>(v);
                            }
                        }
                    }
                }
            });
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
    void collect_buffers(ParamMap<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".running_mean", running_mean);
        out.emplace_back(prefix + ".running_var", running_var);
    }
};

// ---------------------------------------------------------------------------
// Max pooling, window 2 / stride 2 on every spatial axis
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> max_pool(const Tensor<T>& x, int spatial_rank) {
    const auto& dims = x.shape().dims;
    if (x.rank() < spatial_rank + 1) throw DimensionError("max_pool: rank too small");
    Index lead = 1;
    for (Index i = 0; i < x.rank() - spatial_rank; ++i) lead *= dims[static_cast<size_t>(i)];
    std::vector<Index> sp(dims.end() - spatial_rank, dims.end());
    for (Index d : sp)
        if (d % 2 != 0) throw DimensionError("max_pool: spatial dim " + std::to_string(d) + " not divisible by 2");

    std::vector<Index> osp(sp);
    for (Index& d : osp) d /= 2;
    Index in_sp = 1, out_sp = 1;
    for (Index d : sp) in_sp *= d;
    for (Index d : osp) out_sp *= d;

    std::vector<T> out(static_cast<size_t>(lead * out_sp));
    auto argmax = std::make_shared<std::vector<Index>>(static_cast<size_t>(lead * out_sp));
    const auto& src = x.data();

    if (spatial_rank == 2) {
        Index H = sp[0], W = sp[1], OH = osp[0], OW = osp[1];
        for (Index l = 0; l < lead; ++l) {
            const T* p = src.data() + l * in_sp;
            for (Index oi = 0; oi < OH; ++oi)
                for (Index oj = 0; oj < OW; ++oj) {
                    Index best = (2 * oi) * W + 2 * oj;
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b) {
                            Index idx = (2 * oi + a) * W + (2 * oj + b);
                            if (p[idx] > p[best]) best = idx;
                        }
                    out[static_cast<size_t>(l * out_sp + oi * OW + oj)] = p[best];
                    (*argmax)[static_cast<size_t>(l * out_sp + oi * OW + oj)] = l * in_sp + best;
                }
        }
    } else {
        Index H = sp[0], W = sp[1], D = sp[2], OH = osp[0], OW = osp[1], OD = osp[2];
        for (Index l = 0; l < lead; ++l) {
            const T* p = src.data() + l * in_sp;
            for (Index oi = 0; oi < OH; ++oi)
                for (Index oj = 0; oj < OW; ++oj)
                    for (Index ok = 0; ok < OD; ++ok) {
                        Index best = ((2 * oi) * W + 2 * oj) * D + 2 * ok;
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b)
                                for (int c = 0; c < 2; ++c) {
                                    Index idx = ((2 * oi + a) * W + (2 * oj + b)) * D + (2 * ok + c);
                                    if (p[idx] > p[best]) best = idx;
                                }
                        Index o = (oi * OW + oj) * OD + ok;
                        out[static_cast<size_t>(l * out_sp + o)] = p[best];
                        (*argmax)[static_cast<size_t>(l * out_sp + o)] = l * in_sp + best;
                    }
        }
    }

    std::vector<Index> odims(dims.begin(), dims.end() - spatial_rank);
    odims.insert(odims.end(), osp.begin(), osp.end());
    auto xi = x.impl();
    return make_op_result<T>(Shape(odims), std::move(out), "max_pool", {x},
                             [xi, argmax](TensorImpl<T>& self) {
                                 if (!xi->requires_grad) return;
                                 xi->ensure_grad();
                                 for (size_t i = 0; i < self.grad.size(); ++i)
                                     xi->grad[static_cast<size_t>((*argmax)[i])] += self.grad[i];
                             });
}

// ---------------------------------------------------------------------------
// Transposed convolution, kernel 2 / stride 2: each input position expands
// into a disjoint 2x2(x2) block. weight [Cout, Cin, 2...].
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> transposed_conv(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                          const Tensor<T>& bias) {
    for (int k : spec.kernel)
        if (k != 2) throw DimensionError("transposed_conv: kernel must be 2 per axis");
    auto view = detail::split_batch(x.shape(), spec.spatial_rank(), spec.in_channels, "transposed_conv");
    int sr = spec.spatial_rank();
    Index cin = spec.in_channels, cout = spec.out_channels;
    Index in_sp = 1;
    for (Index d : view.spatial) in_sp *= d;
    Index kv = spec.kernel_volume();
    Index out_sp = in_sp * kv;
    Index in_chunk = cin * in_sp, out_chunk = cout * out_sp;

    std::vector<Index> osp(view.spatial);
    for (Index& d : osp) d *= 2;

    std::vector<T> out(static_cast<size_t>(view.batch * out_chunk), T(0));
    const auto& src = x.data();
    const auto& w = weight.data();

    // offset of sub-position t (0..kv-1) within the output block, per sample;
    // captures by value so the backward closure can outlive this frame
    auto out_index = [sr, isp = view.spatial, osp](Index pos, Index t) {
        Index rem = pos, tt = t, idx = 0;
        std::vector<Index> ic(static_cast<size_t>(sr)), kc(static_cast<size_t>(sr));
        for (int a = sr - 1; a >= 0; --a) {
            ic[static_cast<size_t>(a)] = rem % isp[static_cast<size_t>(a)];
            rem /= isp[static_cast<size_t>(a)];
            kc[static_cast<size_t>(a)] = tt % 2;
            tt /= 2;
        }
        for (int a = 0; a < sr; ++a)
            idx = idx * osp[static_cast<size_t>(a)] + (2 * ic[static_cast<size_t>(a)] + kc[static_cast<size_t>(a)]);
        return idx;
    };

    for (Index b = 0; b < view.batch; ++b) {
        T* o = out.data() + b * out_chunk;
        const T* xin = src.data() + b * in_chunk;
        for (Index co = 0; co < cout; ++co) {
            for (Index ci = 0; ci < cin; ++ci) {
                const T* wk = w.data() + (co * cin + ci) * kv;
                const T* xc = xin + ci * in_sp;
                for (Index pos = 0; pos < in_sp; ++pos) {
                    T xv = xc[pos];
                    for (Index t = 0; t < kv; ++t) o[co * out_sp + out_index(pos, t)] += wk[t] * xv;
                }
            }
            if (spec.bias) {
                T bv = bias.data()[static_cast<size_t>(co)];
                for (Index i = 0; i < out_sp; ++i) o[co * out_sp + i] += bv;
            }
        }
    }

    std::vector<Index> odims;
    if (view.batched) odims.push_back(view.batch);
    odims.push_back(cout);
    odims.insert(odims.end(), osp.begin(), osp.end());

    auto xi = x.impl(), wi = weight.impl(), bi = bias.valid() ? bias.impl() : nullptr;
    std::vector<Tensor<T>> inputs = {x, weight};
    if (spec.bias) inputs.push_back(bias);
    Index batch = view.batch;
    return make_op_result<T>(
        Shape(odims), std::move(out), "transposed_conv", inputs,
        [xi, wi, bi, spec, batch, cin, cout, in_sp, out_sp, kv, in_chunk, out_chunk,
         out_index](TensorImpl<T>& self) {
            for (Index b = 0; b < batch; ++b) {
                const T* dout = self.grad.data() + b * out_chunk;
                const T* xin = xi->data->data() + b * in_chunk;
                for (Index co = 0; co < cout; ++co) {
                    for (Index ci = 0; ci < cin; ++ci) {
                        const T* wk = wi->data->data() + (co * cin + ci) * kv;
                        for (Index pos = 0; pos < in_sp; ++pos) {
                            for (Index t = 0; t < kv; ++t) {
                                T g = dout[co * out_sp + out_index(pos, t)];
                                if (wi->requires_grad) {
                                    wi->ensure_grad();
                                    wi->grad[static_cast<size_t>((co * cin + ci) * kv + t)] +=
                                        g * xin[ci * in_sp + pos];
                                }
                                if (xi->requires_grad) {
                                    xi->ensure_grad();
                                    xi->grad[static_cast<size_t>(b * in_chunk + ci * in_sp + pos)] +=
                                        g * wk[t];
                                }
                            }
                        }
                    }
                    if (spec.bias && bi && bi->requires_grad) {
                        bi->ensure_grad();
                        T acc = T(0);
                        for (Index i = 0; i < out_sp; ++i) acc += dout[co * out_sp + i];
                        bi->grad[static_cast<size_t>(co)] += acc;
                    }
                }
            }
        });
}

template <class T>
struct TConv {
    ConvSpec spec;
    Tensor<T> weight;
    Tensor<T> bias;

    TConv() = default;
    TConv(int in_ch, int out_ch, int spatial_rank, Rng& rng) {
        spec.in_channels = in_ch;
        spec.out_channels = out_ch;
        spec.kernel.assign(static_cast<size_t>(spatial_rank), 2);
        spec.stride.assign(static_cast<size_t>(spatial_rank), 2);
        spec.padding.assign(static_cast<size_t>(spatial_rank), 0);
        Index fan_in = in_ch * spec.kernel_volume();
        T bound = static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in)));
        std::vector<Index> wdims = {out_ch, in_ch};
        for (int k : spec.kernel) wdims.push_back(k);
        weight = Tensor<T>::uniform(Shape(wdims), -bound, bound, rng);
        weight.set_requires_grad(true);
        bias = Tensor<T>::zeros(Shape{out_ch});
        bias.set_requires_grad(true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return transposed_conv(x, spec, weight, bias); }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

// ---------------------------------------------------------------------------
// Residual block: ReLU(BN(conv(ReLU(BN(conv(x))))) + shortcut(x))
// ---------------------------------------------------------------------------

template <class T>
struct ResidualBlock {
    Conv<T> conv1, conv2;
    BatchNorm<T> bn1, bn2;
    bool has_projection = false;
    Conv<T> projection;

    ResidualBlock() = default;
    ResidualBlock(int in_ch, int out_ch, int spatial_rank, Rng& rng) {
        std::vector<int> k3(static_cast<size_t>(spatial_rank), 3);
        std::vector<int> p1(static_cast<size_t>(spatial_rank), 1);
        conv1 = Conv<T>(ConvSpec::make(in_ch, out_ch, k3, p1, /*bias=*/false), rng);
        conv2 = Conv<T>(ConvSpec::make(out_ch, out_ch, k3, p1, /*bias=*/false), rng);
        bn1 = BatchNorm<T>(out_ch, spatial_rank);
        bn2 = BatchNorm<T>(out_ch, spatial_rank);
        if (in_ch != out_ch) {
            has_projection = true;
            std::vector<int> k1(static_cast<size_t>(spatial_rank), 1);
            std::vector<int> p0(static_cast<size_t>(spatial_rank), 0);
            projection = Conv<T>(ConvSpec::make(in_ch, out_ch, k1, p0, /*bias=*/false), rng);
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> h = relu(bn1.forward(conv1.forward(x), training));
        Tensor<T> h2 = bn2.forward(conv2.forward(h), training);
        Tensor<T> sc = has_projection ? projection.forward(x) : x;
        return relu(add(h2, sc));
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        conv1.collect(out, prefix + ".conv1");
        bn1.collect(out, prefix + ".bn1");
        conv2.collect(out, prefix + ".conv2");
        bn2.collect(out, prefix + ".bn2");
        if (has_projection) projection.collect(out, prefix + ".proj");
    }
    void collect_buffers(ParamMap<T>& out, const std::string& prefix) const {
        bn1.collect_buffers(out, prefix + ".bn1");
        bn2.collect_buffers(out, prefix + ".bn2");
    }
};

}  // namespace cs2net

#endif
