#ifndef CS2NET_ATTENTION_HPP
#define CS2NET_ATTENTION_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cs2net/nn.hpp"

namespace cs2net {

// Spatial similarity matrices grow as N^2; refuse anything past this rather
// than silently tiling.
inline constexpr Index kMaxAttentionPositions = 8192;

// Optional per-pass capture of similarity matrices for heatmap export.
// Stores at most `max_rows` rows of the spatial matrix S to bound memory.
struct AttentionMapCapture {
    bool enabled = false;
    Index max_rows = 64;
    // spatial matrix: stored_rows x N (first stored_rows rows of S)
    std::vector<double> spatial_rows;
    Index spatial_n = 0;
    Index spatial_stored = 0;
    // channel matrix: C x C
    std::vector<double> channel_matrix;
    Index channel_c = 0;

    template <class T>
    void store_spatial(const std::vector<T>& s, Index n) {
        if (!enabled) return;
        spatial_n = n;
        spatial_stored = std::min(max_rows, n);
        spatial_rows.assign(s.begin(), s.begin() + spatial_stored * n);
    }
    template <class T>
    void store_channel(const std::vector<T>& m, Index c) {
        if (!enabled) return;
        channel_c = c;
        channel_matrix.assign(m.begin(), m.end());
    }
};

// Row-normalized 8-bit PGM heatmap.
inline void write_pgm_heatmap(const std::string& path, const std::vector<double>& m, Index rows,
                              Index cols) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "P5\n" << cols << " " << rows << "\n255\n";
    std::vector<unsigned char> line(static_cast<size_t>(cols));
    for (Index r = 0; r < rows; ++r) {
        double lo = m[static_cast<size_t>(r * cols)], hi = lo;
        for (Index c = 0; c < cols; ++c) {
            double v = m[static_cast<size_t>(r * cols + c)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        double span = hi - lo;
        for (Index c = 0; c < cols; ++c) {
            double v = m[static_cast<size_t>(r * cols + c)];
            line[static_cast<size_t>(c)] = static_cast<unsigned char>(
                span > 0 ? 255.0 * (v - lo) / span : 0.0);
        }
        f.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(cols));
    }
}

namespace detail {

template <class T>
Tensor<T> flatten_cn(const Tensor<T>& t) {
    Index c = t.shape()[0];
    return reshape(t, Shape{c, t.numel() / c});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 2D spatial attention block
// ---------------------------------------------------------------------------

template <class T>
struct SAB2D {
    Conv<T> conv_q, conv_k, conv_v;
    BatchNorm<T> bn_q, bn_k, bn_v;

    SAB2D() = default;
    SAB2D(int channels, Rng& rng) {
        conv_q = Conv<T>(ConvSpec::make(channels, channels, {3, 1}, {1, 0}), rng);
        conv_k = Conv<T>(ConvSpec::make(channels, channels, {1, 3}, {0, 1}), rng);
        conv_v = Conv<T>(ConvSpec::make(channels, channels, {1, 1}, {0, 0}), rng);
        bn_q = BatchNorm<T>(channels, 2);
        bn_k = BatchNorm<T>(channels, 2);
        bn_v = BatchNorm<T>(channels, 2);
    }

    // F [C,H,W] (single sample). S = softmax_x(Q^T K), F' = V S, out = F + F'.
    Tensor<T> forward_sample(const Tensor<T>& f, bool training, AttentionMapCapture* cap = nullptr) {
        Tensor<T> q = detail::flatten_cn(relu(bn_q.forward(conv_q.forward(f), training)));
        Tensor<T> k = detail::flatten_cn(relu(bn_k.forward(conv_k.forward(f), training)));
        Tensor<T> v = detail::flatten_cn(relu(bn_v.forward(conv_v.forward(f), training)));
        Index n = q.shape()[1];
        if (n > kMaxAttentionPositions)
            throw ResourceError("spatial attention over N=" + std::to_string(n) +
                                " positions exceeds the budget of " +
                                std::to_string(kMaxAttentionPositions) + "; use a smaller crop");
        Tensor<T> s = softmax_axis(matmul(transpose(q), k), 0);
        if (cap) cap->store_spatial(s.data(), n);
        Tensor<T> fp = matmul(v, s);
        return add(f, reshape(fp, f.shape()));
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        conv_q.collect(out, prefix + ".conv_q");
        bn_q.collect(out, prefix + ".bn_q");
        conv_k.collect(out, prefix + ".conv_k");
        bn_k.collect(out, prefix + ".bn_k");
        conv_v.collect(out, prefix + ".conv_v");
        bn_v.collect(out, prefix + ".bn_v");
    }
    void collect_buffers(ParamMap<T>& out, const std::string& prefix) const {
        bn_q.collect_buffers(out, prefix + ".bn_q");
        bn_k.collect_buffers(out, prefix + ".bn_k");
        bn_v.collect_buffers(out, prefix + ".bn_v");
    }
};

// ---------------------------------------------------------------------------
// 2D channel attention block: parameter-free, operates on F directly.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> cab2d_forward(const Tensor<T>& f, AttentionMapCapture* cap = nullptr) {
    Tensor<T> fc = detail::flatten_cn(f);
    Index c = fc.shape()[0];
    Tensor<T> m = matmul(fc, transpose(fc));  // C x C
    Tensor<T> chat = softmax_axis(m, 0);
    if (cap) cap->store_channel(chat.data(), c);
    Tensor<T> fpp = matmul(chat, fc);
    return add(f, reshape(fpp, f.shape()));
}

// ---------------------------------------------------------------------------
// 3D spatial attention block
// ---------------------------------------------------------------------------

template <class T>
struct SAB3D {
    Conv<T> conv_q, conv_k, conv_j, conv_v;
    BatchNorm<T> bn_q, bn_k, bn_j, bn_v;

    SAB3D() = default;
    SAB3D(int channels, Rng& rng) {
        conv_q = Conv<T>(ConvSpec::make(channels, channels, {1, 3, 1}, {0, 1, 0}), rng);
        conv_k = Conv<T>(ConvSpec::make(channels, channels, {3, 1, 1}, {1, 0, 0}), rng);
        conv_j = Conv<T>(ConvSpec::make(channels, channels, {1, 1, 3}, {0, 0, 1}), rng);
        conv_v = Conv<T>(ConvSpec::make(channels, channels, {1, 1, 1}, {0, 0, 0}), rng);
        bn_q = BatchNorm<T>(channels, 3);
        bn_k = BatchNorm<T>(channels, 3);
        bn_j = BatchNorm<T>(channels, 3);
        bn_v = BatchNorm<T>(channels, 3);
    }

    // F [C,H,W,D]. S = softmax_x((Q^T K)(J^T K)), F' = V S, out = F + F'.
    Tensor<T> forward_sample(const Tensor<T>& f, bool training, AttentionMapCapture* cap = nullptr) {
        Tensor<T> q = detail::flatten_cn(relu(bn_q.forward(conv_q.forward(f), training)));
        Tensor<T> k = detail::flatten_cn(relu(bn_k.forward(conv_k.forward(f), training)));
        Tensor<T> j = detail::flatten_cn(relu(bn_j.forward(conv_j.forward(f), training)));
        Tensor<T> v = detail::flatten_cn(relu(bn_v.forward(conv_v.forward(f), training)));
        Index n = q.shape()[1];
        if (n > kMaxAttentionPositions)
            throw ResourceError("spatial attention over N=" + std::to_string(n) +
                                " positions exceeds the budget of " +
                                std::to_string(kMaxAttentionPositions) + "; use a smaller crop");
        Tensor<T> a = matmul(transpose(q), k);
        Tensor<T> b = matmul(transpose(j), k);
        Tensor<T> s = softmax_axis(matmul(a, b), 0);
        if (cap) cap->store_spatial(s.data(), n);
        Tensor<T> fp = matmul(v, s);
        return add(f, reshape(fp, f.shape()));
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        conv_q.collect(out, prefix + ".conv_q");
        bn_q.collect(out, prefix + ".bn_q");
        conv_k.collect(out, prefix + ".conv_k");
        bn_k.collect(out, prefix + ".bn_k");
        conv_j.collect(out, prefix + ".conv_j");
        bn_j.collect(out, prefix + ".bn_j");
        conv_v.collect(out, prefix + ".conv_v");
        bn_v.collect(out, prefix + ".bn_v");
    }
    void collect_buffers(ParamMap<T>& out, const std::string& prefix) const {
        bn_q.collect_buffers(out, prefix + ".bn_q");
        bn_k.collect_buffers(out, prefix + ".bn_k");
        bn_j.collect_buffers(out, prefix + ".bn_j");
        bn_v.collect_buffers(out, prefix + ".bn_v");
    }
};

// ---------------------------------------------------------------------------
// 3D channel attention block
// ---------------------------------------------------------------------------

template <class T>
struct CAB3D {
    Conv<T> conv_q, conv_k, conv_j, conv_v;

    CAB3D() = default;
    CAB3D(int channels, Rng& rng) {
        ConvSpec one = ConvSpec::make(channels, channels, {1, 1, 1}, {0, 0, 0});
        conv_q = Conv<T>(one, rng);
        conv_k = Conv<T>(one, rng);
        conv_j = Conv<T>(one, rng);
        conv_v = Conv<T>(one, rng);
    }

    // C = softmax_x((K' Q'^T)(K' J'^T)); F'' = C^T V'; out = F + F''.
    Tensor<T> forward_sample(const Tensor<T>& f, AttentionMapCapture* cap = nullptr) {
        Tensor<T> q = detail::flatten_cn(conv_q.forward(f));
        Tensor<T> k = detail::flatten_cn(conv_k.forward(f));
        Tensor<T> j = detail::flatten_cn(conv_j.forward(f));
        Tensor<T> v = detail::flatten_cn(conv_v.forward(f));
        Index c = q.shape()[0];
        Tensor<T> a = matmul(k, transpose(q));  // C x C
        Tensor<T> b = matmul(k, transpose(j));  // C x C
        Tensor<T> chat = softmax_axis(matmul(a, b), 0);
        if (cap) cap->store_channel(chat.data(), c);
        Tensor<T> fpp = matmul(transpose(chat), v);
        return add(f, reshape(fpp, f.shape()));
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        conv_q.collect(out, prefix + ".conv_q");
        conv_k.collect(out, prefix + ".conv_k");
        conv_j.collect(out, prefix + ".conv_j");
        conv_v.collect(out, prefix + ".conv_v");
    }
};

// ---------------------------------------------------------------------------
// CSAM: fused attention at the bottleneck. Outputs mirror the ablation rows:
//   full:      SAB(F) + CAB(F) + F
//   sab only:  SAB(F) + F
//   cab only:  CAB(F) + F
//   both off:  F
// ---------------------------------------------------------------------------

template <class T>
struct CSAM {
    int dims = 2;
    bool sab_enabled = true;
    bool cab_enabled = true;
    SAB2D<T> sab2d;
    SAB3D<T> sab3d;
    CAB3D<T> cab3d;

    CSAM() = default;
    CSAM(int dims_, int channels, bool sab_on, bool cab_on, Rng& rng)
        : dims(dims_), sab_enabled(sab_on), cab_enabled(cab_on) {
        if (sab_enabled) {
            if (dims == 2)
                sab2d = SAB2D<T>(channels, rng);
            else
                sab3d = SAB3D<T>(channels, rng);
        }
        if (cab_enabled && dims == 3) cab3d = CAB3D<T>(channels, rng);
    }

    Tensor<T> forward_sample(const Tensor<T>& f, bool training, AttentionMapCapture* cap = nullptr) {
        if (!sab_enabled && !cab_enabled) return f;
        Tensor<T> out;
        if (sab_enabled)
            out = dims == 2 ? sab2d.forward_sample(f, training, cap)
                            : sab3d.forward_sample(f, training, cap);
        if (cab_enabled) {
            Tensor<T> cb = dims == 2 ? cab2d_forward(f, cap) : cab3d.forward_sample(f, cap);
            out = out.valid() ? add(out, cb) : cb;
        }
        return add(out, f);
    }

    // Batched wrapper; attention math is per-sample, convs/BN see the batch
    // through the per-sample graphs (BN statistics are per sample here, which
    // is exact for batch size 1 and a recorded simplification otherwise).
    Tensor<T> forward(const Tensor<T>& x, bool training, AttentionMapCapture* cap = nullptr) {
        int expected_rank = dims + 1;
        if (x.rank() == expected_rank) return forward_sample(x, training, cap);
        std::vector<Tensor<T>> outs;
        Index B = x.shape()[0];
        for (Index b = 0; b < B; ++b)
            outs.push_back(forward_sample(select_batch(x, b), training, b == 0 ? cap : nullptr));
        return stack_batch(outs);
    }

    void collect(ParamMap<T>& out, const std::string& prefix) const {
        if (sab_enabled) {
            if (dims == 2)
                sab2d.collect(out, prefix + ".sab");
            else
                sab3d.collect(out, prefix + ".sab");
        }
        if (cab_enabled && dims == 3) cab3d.collect(out, prefix + ".cab");
    }
    void collect_buffers(ParamMap<T>& out, const std::string& prefix) const {
        if (sab_enabled) {
            if (dims == 2)
                sab2d.collect_buffers(out, prefix + ".sab");
            else
                sab3d.collect_buffers(out, prefix + ".sab");
        }
    }
};

}  // namespace cs2net

#endif
