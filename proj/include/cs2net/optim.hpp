#ifndef CS2NET_OPTIM_HPP
#define CS2NET_OPTIM_HPP

#include <cmath>
#include <string>
#include <vector>

#include "cs2net/nn.hpp"

namespace cs2net {

// lr = base * (1 - iter/max_iter)^power; iter past max_iter clamps to 0.
struct PolySchedule {
    double base_lr = 1e-4;
    double power = 0.9;
    long max_iter = 100;

    void validate() const {
        if (power <= 0) throw ConfigError("PolySchedule: power must be > 0");
        if (max_iter < 1) throw ConfigError("PolySchedule: max_iter must be >= 1");
    }
};

inline double poly_lr(const PolySchedule& s, long iter) {
    s.validate();
    if (iter < 0) throw ContractError("poly_lr: negative iteration");
    if (iter >= s.max_iter) return 0.0;
    return s.base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(s.max_iter),
                                s.power);
}

// Adam with coupled L2 weight decay:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd * theta)
template <class T>
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    Adam() = default;
    explicit Adam(const ParamMap<T>& params, double wd = 0.0) : weight_decay(wd) {
        for (const auto& [name, t] : params) {
            slots_.push_back({name, t,
                              std::vector<double>(t.data().size(), 0.0),
                              std::vector<double>(t.data().size(), 0.0)});
        }
    }

    long step_count() const { return step_; }

    void zero_grad() {
        for (auto& s : slots_) s.param.zero_grad();
    }

    void step(double lr) {
        ++step_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& s : slots_) {
            auto& data = s.param.data();
            if (!s.param.has_grad()) continue;
            auto& grad = s.param.grad();
            for (size_t i = 0; i < data.size(); ++i) {
                double g = static_cast<double>(grad[i]);
                if (!std::isfinite(g))
                    throw NumericError("adam_step: non-finite gradient in parameter '" + s.name + "'");
                s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g;
                s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g * g;
                double mhat = s.m[i] / bc1;
                double vhat = s.v[i] / bc2;
                double upd = mhat / (std::sqrt(vhat) + eps) +
                             weight_decay * static_cast<double>(data[i]);
                data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * upd);
            }
        }
    }

    // Optimizer state as float tensors for the checkpoint.
    std::vector<std::pair<std::string, std::pair<Shape, std::vector<float>>>> state_tensors() const {
        std::vector<std::pair<std::string, std::pair<Shape, std::vector<float>>>> out;
        for (const auto& s : slots_) {
            out.push_back({"adam.m." + s.name,
                           {s.param.shape(), std::vector<float>(s.m.begin(), s.m.end())}});
            out.push_back({"adam.v." + s.name,
                           {s.param.shape(), std::vector<float>(s.v.begin(), s.v.end())}});
        }
        return out;
    }

    void load_state(const std::string& name, const std::vector<float>& data) {
        for (auto& s : slots_) {
            if (name == "adam.m." + s.name) {
                s.m.assign(data.begin(), data.end());
                return;
            }
            if (name == "adam.v." + s.name) {
                s.v.assign(data.begin(), data.end());
                return;
            }
        }
    }

    void set_step(long s) { step_ = s; }

private:
    struct Slot {
        std::string name;
        Tensor<T> param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    long step_ = 0;
};

}  // namespace cs2net

#endif
