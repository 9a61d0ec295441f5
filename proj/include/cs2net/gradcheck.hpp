#ifndef CS2NET_GRADCHECK_HPP
#define CS2NET_GRADCHECK_HPP

#include <string>
#include <utility>
#include <vector>

#include "cs2net/attention.hpp"
#include "cs2net/loss.hpp"
#include "cs2net/nn.hpp"

namespace cs2net {

// Finite-difference verification of every layer, the four attention blocks,
// and the three losses, on small randomized shapes. Returns (block, worst
// relative error) pairs.
template <class T>
std::vector<std::pair<std::string, double>> run_gradcheck(std::uint64_t seed) {
    const T h = sizeof(T) == sizeof(double) ? T(1e-5) : T(1e-2);
    Rng rng(seed);
    std::vector<std::pair<std::string, double>> results;

    auto record = [&](const std::string& name, const std::function<Tensor<T>(Tensor<T>&)>& f,
                      Tensor<T> point) {
        results.emplace_back(name, finite_diff_check<T>(f, std::move(point), h));
    };

    // --- tensor primitives ---
    {
        Tensor<T> b = Tensor<T>::uniform(Shape{3, 2}, T(-1), T(1), rng);
        record("matmul", [b](Tensor<T>& a) { return sum(matmul(a, b)); },
               Tensor<T>::uniform(Shape{2, 3}, T(-1), T(1), rng));
    }
    {
        Tensor<T> c = Tensor<T>::uniform(Shape{4, 3}, T(-1), T(1), rng);
        record("softmax_axis", [c](Tensor<T>& x) { return sum(mul(softmax_axis(x, 0), c)); },
               Tensor<T>::uniform(Shape{4, 3}, T(-2), T(2), rng));
    }
    {
        Tensor<T> c = Tensor<T>::uniform(Shape{12}, T(-1), T(1), rng);
        record("relu", [c](Tensor<T>& x) { return sum(mul(relu(x), c)); },
               Tensor<T>::uniform(Shape{12}, T(0.2), T(2), rng));
        record("sigmoid", [c](Tensor<T>& x) { return sum(mul(sigmoid(x), c)); },
               Tensor<T>::uniform(Shape{12}, T(-2), T(2), rng));
    }

    // --- conv layers ---
    {
        ConvSpec spec = ConvSpec::make(2, 3, {3, 3}, {1, 1});
        Conv<T> conv(spec, rng);
        Tensor<T> x = Tensor<T>::uniform(Shape{2, 5, 5}, T(-1), T(1), rng);
        record("conv2d_3x3/input",
               [&conv](Tensor<T>& p) { return sum(conv.forward(p)); }, x.clone_detached());
        record("conv2d_3x3/weight",
               [&](Tensor<T>& w) { return sum(conv_forward(x, spec, w, conv.bias)); },
               conv.weight.clone_detached());
        record("conv2d_3x3/bias",
               [&](Tensor<T>& b) { return sum(conv_forward(x, spec, conv.weight, b)); },
               conv.bias.clone_detached());
    }
    {
        Conv<T> conv(ConvSpec::make(2, 2, {1, 3}, {0, 1}), rng);
        record("conv2d_1x3/input", [&conv](Tensor<T>& p) { return sum(conv.forward(p)); },
               Tensor<T>::uniform(Shape{2, 4, 4}, T(-1), T(1), rng));
    }
    {
        Conv<T> conv(ConvSpec::make(2, 2, {3, 1}, {1, 0}), rng);
        record("conv2d_3x1/input", [&conv](Tensor<T>& p) { return sum(conv.forward(p)); },
               Tensor<T>::uniform(Shape{2, 4, 4}, T(-1), T(1), rng));
    }
    {
        Conv<T> conv(ConvSpec::make(2, 2, {1, 1, 3}, {0, 0, 1}), rng);
        record("conv3d_1x1x3/input", [&conv](Tensor<T>& p) { return sum(conv.forward(p)); },
               Tensor<T>::uniform(Shape{2, 3, 3, 3}, T(-1), T(1), rng));
    }

    // --- batch norm (train mode, batched input) ---
    {
        BatchNorm<T> bn(3, 2);
        Tensor<T> c = Tensor<T>::uniform(Shape{2, 3, 4, 4}, T(-1), T(1), rng);
        record("batch_norm/input",
               [&bn, c](Tensor<T>& x) { return sum(mul(bn.forward(x, true), c)); },
               Tensor<T>::uniform(Shape{2, 3, 4, 4}, T(-1), T(1), rng));
        Tensor<T> x = Tensor<T>::uniform(Shape{2, 3, 4, 4}, T(-1), T(1), rng);
        record("batch_norm/gamma",
               [&bn, &x, c](Tensor<T>& g) {
                   BatchNorm<T> local = bn;
                   local.gamma = g;
                   return sum(mul(local.forward(x, true), c));
               },
               Tensor<T>::uniform(Shape{3}, T(0.5), T(1.5), rng));
    }

    // --- pooling and upsampling ---
    {
        Tensor<T> c = Tensor<T>::uniform(Shape{2, 2, 2}, T(-1), T(1), rng);
        record("max_pool2d", [c](Tensor<T>& x) { return sum(mul(max_pool(x, 2), c)); },
               Tensor<T>::uniform(Shape{2, 4, 4}, T(-1), T(1), rng));
    }
    {
        TConv<T> up(2, 3, 2, rng);
        record("transposed_conv2d/input", [&up](Tensor<T>& x) { return sum(up.forward(x)); },
               Tensor<T>::uniform(Shape{2, 3, 3}, T(-1), T(1), rng));
        Tensor<T> x = Tensor<T>::uniform(Shape{2, 3, 3}, T(-1), T(1), rng);
        record("transposed_conv2d/weight",
               [&](Tensor<T>& w) { return sum(transposed_conv(x, up.spec, w, up.bias)); },
               up.weight.clone_detached());
    }

    // --- residual blocks ---
    {
        ResidualBlock<T> block(2, 2, 2, rng);
        record("residual_block/input",
               [&block](Tensor<T>& x) { return sum(block.forward(x, true)); },
               Tensor<T>::uniform(Shape{2, 8, 8}, T(-1), T(1), rng));
    }
    {
        ResidualBlock<T> block(2, 4, 2, rng);
        record("residual_block_proj/input",
               [&block](Tensor<T>& x) { return sum(block.forward(x, true)); },
               Tensor<T>::uniform(Shape{2, 4, 4}, T(-1), T(1), rng));
    }

    // --- attention blocks ---
    {
        SAB2D<T> sab(2, rng);
        record("sab2d/input",
               [&sab](Tensor<T>& f) { return sum(sab.forward_sample(f, true)); },
               Tensor<T>::uniform(Shape{2, 4, 4}, T(-1), T(1), rng));
    }
    {
        record("cab2d/input", [](Tensor<T>& f) { return sum(cab2d_forward(f)); },
               Tensor<T>::uniform(Shape{3, 3, 3}, T(-1), T(1), rng));
    }
    {
        SAB3D<T> sab(2, rng);
        record("sab3d/input",
               [&sab](Tensor<T>& f) { return sum(sab.forward_sample(f, true)); },
               Tensor<T>::uniform(Shape{2, 2, 2, 2}, T(-1), T(1), rng));
    }
    {
        CAB3D<T> cab(2, rng);
        record("cab3d/input",
               [&cab](Tensor<T>& f) { return sum(cab.forward_sample(f)); },
               Tensor<T>::uniform(Shape{2, 2, 2, 2}, T(-1), T(1), rng));
    }

    // --- losses (wrt predicted probabilities, away from the clamp) ---
    {
        Tensor<T> g = Tensor<T>::zeros(Shape{16});
        {
            Rng lrng(seed ^ 0x9e3779b97f4a7c15ull);
            std::uniform_int_distribution<int> coin(0, 1);
            for (auto& v : g.data()) v = static_cast<T>(coin(lrng));
        }
        record("bce_loss", [g](Tensor<T>& p) { return bce_loss(p, g); },
               Tensor<T>::uniform(Shape{16}, T(0.1), T(0.9), rng));
        record("wce_loss", [g](Tensor<T>& p) { return wce_loss(p, g, T(2)); },
               Tensor<T>::uniform(Shape{16}, T(0.1), T(0.9), rng));
        record("dice_loss", [g](Tensor<T>& p) { return dice_loss(p, g, T(1)); },
               Tensor<T>::uniform(Shape{16}, T(0.1), T(0.9), rng));
    }

    return results;
}

}  // namespace cs2net

#endif
