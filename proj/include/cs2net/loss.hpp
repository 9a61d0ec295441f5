#ifndef CS2NET_LOSS_HPP
#define CS2NET_LOSS_HPP

#include <cmath>

#include "cs2net/tensor.hpp"

namespace cs2net {

struct LossConfig {
    double alpha = 0.6;    // balance between WCE and Dice
    double epsilon = 1.0;  // Laplace smoothing in the Dice term
    double clamp = 1e-7;   // probability clamp before logarithms
    double omega_max = 1e6;

    void validate() const {
        if (alpha < 0 || alpha > 1) throw ConfigError("LossConfig: alpha must be in [0,1]");
        if (epsilon <= 0) throw ConfigError("LossConfig: epsilon must be > 0");
        if (clamp <= 0 || clamp >= 0.5) throw ConfigError("LossConfig: clamp must be in (0,0.5)");
    }
};

namespace detail {

template <class T>
void check_binary_labels(const Tensor<T>& g) {
    for (T v : g.data())
        if (v != T(0) && v != T(1))
            throw ContractError("loss: ground truth must be binary {0,1}");
}

template <class T>
void check_same_shape(const Tensor<T>& p, const Tensor<T>& g) {
    if (p.shape() != g.shape())
        throw DimensionError("loss: shape mismatch " + p.shape().str() + " vs " + g.shape().str());
}

}  // namespace detail

// Weighted binary cross-entropy. omega multiplies the positive-class term and
// is treated as a constant for the gradient. omega = 1 gives plain BCE.
template <class T>
Tensor<T> wce_loss(const Tensor<T>& p, const Tensor<T>& g, T omega, T clamp = T(1e-7)) {
    detail::check_same_shape(p, g);
    detail::check_binary_labels(g);
    Index n = p.numel();
    const auto& pd = p.data();
    const auto& gd = g.data();
    double acc = 0;
    for (Index i = 0; i < n; ++i) {
        double pc = std::min(std::max(static_cast<double>(pd[static_cast<size_t>(i)]),
                                      static_cast<double>(clamp)),
                             1.0 - static_cast<double>(clamp));
        double gv = static_cast<double>(gd[static_cast<size_t>(i)]);
        acc += static_cast<double>(omega) * gv * std::log(pc) + (1.0 - gv) * std::log(1.0 - pc);
    }
    T loss = static_cast<T>(-acc / static_cast<double>(n));

    auto pi = p.impl(), gi = g.impl();
    return make_op_result<T>(
        Shape{1}, std::vector<T>{loss}, "wce_loss", {p}, [pi, gi, omega, clamp, n](TensorImpl<T>& self) {
            if (!pi->requires_grad) return;
            pi->ensure_grad();
            T go = self.grad[0];
            const auto& pd = *pi->data;
            const auto& gd = *gi->data;
            for (Index i = 0; i < n; ++i) {
                T pv = pd[static_cast<size_t>(i)];
                if (pv < clamp || pv > T(1) - clamp) continue;  // clamped region: zero slope
                T gv = gd[static_cast<size_t>(i)];
                T d = -(omega * gv / pv - (T(1) - gv) / (T(1) - pv)) / static_cast<T>(n);
                pi->grad[static_cast<size_t>(i)] += go * d;
            }
        });
}

template <class T>
Tensor<T> bce_loss(const Tensor<T>& p, const Tensor<T>& g, T clamp = T(1e-7)) {
    return wce_loss(p, g, T(1), clamp);
}

// omega = (N - sum p) / (sum p); guarded against an all-background estimate.
template <class T>
T class_weight(const Tensor<T>& p, T omega_max = T(1e6), bool* saturated = nullptr) {
    double sp = 0;
    for (T v : p.data()) sp += static_cast<double>(v);
    if (saturated) *saturated = false;
    if (sp < 1e-12) {
        if (saturated) *saturated = true;
        return omega_max;
    }
    return static_cast<T>((static_cast<double>(p.numel()) - sp) / sp);
}

// L = 1 - (2 sum(p g) + eps) / (sum p^2 + sum g^2 + eps)
template <class T>
Tensor<T> dice_loss(const Tensor<T>& p, const Tensor<T>& g, T epsilon = T(1)) {
    detail::check_same_shape(p, g);
    const auto& pd = p.data();
    const auto& gd = g.data();
    double inter = 0, psq = 0, gsq = 0;
    for (size_t i = 0; i < pd.size(); ++i) {
        inter += static_cast<double>(pd[i]) * static_cast<double>(gd[i]);
        psq += static_cast<double>(pd[i]) * static_cast<double>(pd[i]);
        gsq += static_cast<double>(gd[i]) * static_cast<double>(gd[i]);
    }
    double num = 2.0 * inter + static_cast<double>(epsilon);
    double den = psq + gsq + static_cast<double>(epsilon);
    T loss = static_cast<T>(1.0 - num / den);

    auto pi = p.impl(), gi = g.impl();
    return make_op_result<T>(
        Shape{1}, std::vector<T>{loss}, "dice_loss", {p},
        [pi, gi, num, den](TensorImpl<T>& self) {
            if (!pi->requires_grad) return;
            pi->ensure_grad();
            T go = self.grad[0];
            const auto& pd = *pi->data;
            const auto& gd = *gi->data;
            for (size_t i = 0; i < pd.size(); ++i) {
                double d = -(2.0 * static_cast<double>(gd[i]) * den -
                             num * 2.0 * static_cast<double>(pd[i])) /
                           (den * den);
                pi->grad[i] += go * static_cast<T>(d);
            }
        });
}

// L = alpha * WCE + (1 - alpha) * Dice, omega recomputed from this batch.
template <class T>
Tensor<T> combined_loss(const Tensor<T>& p, const Tensor<T>& g, const LossConfig& cfg) {
    cfg.validate();
    T omega = class_weight(p, static_cast<T>(cfg.omega_max));
    Tensor<T> w = wce_loss(p, g, omega, static_cast<T>(cfg.clamp));
    Tensor<T> d = dice_loss(p, g, static_cast<T>(cfg.epsilon));
    return add(scale(w, static_cast<T>(cfg.alpha)), scale(d, static_cast<T>(1.0 - cfg.alpha)));
}

}  // namespace cs2net

#endif
