#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "cs2net/attention.hpp"

using namespace cs2net;
using D = Tensor<double>;

namespace {

template <class Block>
void zero_params(Block& b) {
    ParamMap<double> params;
    b.collect(params, "b");
    for (auto& [name, t] : params) std::fill(t.data().begin(), t.data().end(), 0.0);
}

// The softmax axis is the row index (axis 0), so each column of a fully
// stored matrix sums to 1.
void check_cols_sum_to_one(const std::vector<double>& m, Index rows, Index cols) {
    REQUIRE(rows == cols);  // tests use matrices small enough to store whole
    for (Index c = 0; c < cols; ++c) {
        double s = 0;
        for (Index r = 0; r < rows; ++r) s += m[static_cast<size_t>(r * cols + c)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

}  // namespace

TEST_CASE("sab2d zero parameters pass the input through") {
    Rng rng(1);
    SAB2D<double> sab(2, rng);
    zero_params(sab);
    D f = D::uniform(Shape{2, 4, 4}, -1, 1, rng);
    D out = sab.forward_sample(f, true);
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-12));
}

TEST_CASE("sab2d single position adds V") {
    Rng rng(2);
    SAB2D<double> sab(3, rng);
    D f = D::uniform(Shape{3, 1, 1}, -1, 1, rng);
    D out = sab.forward_sample(f, true);
    CHECK(out.shape().dims == f.shape().dims);
    // with N=1 the softmax is [[1]], so out = f + v; v = relu(bn(conv_v f))
    // in train mode BN of a single value maps to beta = 0, so out = f
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-6));
}

TEST_CASE("cab2d degenerate cases") {
    Rng rng(3);
    // C = 1: chat = [[1]], out = 2F
    D f1 = D::uniform(Shape{1, 3, 3}, -1, 1, rng);
    D out1 = cab2d_forward(f1);
    for (size_t i = 0; i < f1.data().size(); ++i)
        CHECK(out1.data()[i] == doctest::Approx(2.0 * f1.data()[i]).epsilon(1e-12));
    // F = 0: out = 0
    D out0 = cab2d_forward(D::zeros(Shape{3, 2, 2}));
    for (double v : out0.data()) CHECK(v == 0.0);
}

TEST_CASE("cab2d two identical channels give 2F per channel") {
    Rng rng(4);
    D base = D::uniform(Shape{1, 3, 3}, -1, 1, rng);
    D f = concat(base, base, 0);
    D out = cab2d_forward(f);
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(2.0 * f.data()[i]).epsilon(1e-10));
}

TEST_CASE("cab2d is equivariant under channel permutation") {
    Rng rng(5);
    D a = D::uniform(Shape{1, 3, 3}, -1, 1, rng);
    D b = D::uniform(Shape{1, 3, 3}, -1, 1, rng);
    D c = D::uniform(Shape{1, 3, 3}, -1, 1, rng);
    D fwd = cab2d_forward(concat(concat(a, b, 0), c, 0));
    D swapped = cab2d_forward(concat(concat(c, b, 0), a, 0));
    Index n = 9;
    for (Index i = 0; i < n; ++i) {
        CHECK(fwd.data()[static_cast<size_t>(i)] ==
              doctest::Approx(swapped.data()[static_cast<size_t>(2 * n + i)]).epsilon(1e-12));
        CHECK(fwd.data()[static_cast<size_t>(n + i)] ==
              doctest::Approx(swapped.data()[static_cast<size_t>(n + i)]).epsilon(1e-12));
    }
}

TEST_CASE("sab3d and cab3d zero-parameter cases") {
    Rng rng(6);
    SAB3D<double> sab(2, rng);
    zero_params(sab);
    D f = D::uniform(Shape{2, 2, 2, 2}, -1, 1, rng);
    D out = sab.forward_sample(f, true);
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-12));

    CAB3D<double> cab(2, rng);
    zero_params(cab);
    D out2 = cab.forward_sample(f);
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out2.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-12));
}

TEST_CASE("cab3d single channel adds V'") {
    Rng rng(7);
    CAB3D<double> cab(1, rng);
    D f = D::uniform(Shape{1, 2, 2, 2}, -1, 1, rng);
    D out = cab.forward_sample(f);
    // chat = [[1]], out = f + v'; v' = 1x1x1 conv of f
    const auto& w = cab.conv_v.weight.data();
    const auto& b = cab.conv_v.bias.data();
    for (size_t i = 0; i < f.data().size(); ++i)
        CHECK(out.data()[i] ==
              doctest::Approx(f.data()[i] + w[0] * f.data()[i] + b[0]).epsilon(1e-10));
}

TEST_CASE("attention blocks preserve shape") {
    Rng rng(8);
    SAB2D<double> s2(3, rng);
    SAB3D<double> s3(3, rng);
    CAB3D<double> c3(3, rng);
    D f2 = D::uniform(Shape{3, 4, 6}, -1, 1, rng);
    D f3 = D::uniform(Shape{3, 2, 3, 2}, -1, 1, rng);
    CHECK(s2.forward_sample(f2, true).shape().dims == f2.shape().dims);
    CHECK(cab2d_forward(f2).shape().dims == f2.shape().dims);
    CHECK(s3.forward_sample(f3, true).shape().dims == f3.shape().dims);
    CHECK(c3.forward_sample(f3).shape().dims == f3.shape().dims);
}

TEST_CASE("captured attention matrices are row normalized, 100 random inputs") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        AttentionMapCapture cap;
        cap.enabled = true;
        if (trial % 2 == 0) {
            SAB2D<double> sab(2, rng);
            D f = D::uniform(Shape{2, 3, 3}, -2, 2, rng);
            sab.forward_sample(f, true, &cap);
            REQUIRE(cap.spatial_stored > 0);
            check_cols_sum_to_one(cap.spatial_rows, cap.spatial_stored, cap.spatial_n);
            cab2d_forward(f, &cap);
            REQUIRE(cap.channel_c == 2);
            check_cols_sum_to_one(cap.channel_matrix, cap.channel_c, cap.channel_c);
        } else {
            SAB3D<double> sab(2, rng);
            CAB3D<double> cab(2, rng);
            D f = D::uniform(Shape{2, 2, 2, 2}, -2, 2, rng);
            sab.forward_sample(f, true, &cap);
            REQUIRE(cap.spatial_stored > 0);
            check_cols_sum_to_one(cap.spatial_rows, cap.spatial_stored, cap.spatial_n);
            cab.forward_sample(f, &cap);
            REQUIRE(cap.channel_c == 2);
            check_cols_sum_to_one(cap.channel_matrix, cap.channel_c, cap.channel_c);
        }
    }
}

TEST_CASE("csam flag combinations") {
    Rng rng(10);
    D f = D::uniform(Shape{2, 4, 4}, -1, 1, rng);

    CSAM<double> off(2, 2, false, false, rng);
    D pass = off.forward_sample(f, true);
    for (size_t i = 0; i < f.data().size(); ++i) CHECK(pass.data()[i] == f.data()[i]);

    // zero-parameter full CSAM: SAB branch returns F, CAB branch returns
    // 2F (parameter-free channel attention), fused as branch sums minus the
    // double-counted residual: SAB(F) + CAB(F) + F
    CSAM<double> full(2, 2, true, true, rng);
    ParamMap<double> params;
    full.collect(params, "csam");
    for (auto& [name, t] : params) std::fill(t.data().begin(), t.data().end(), 0.0);
    D out = full.forward_sample(f, true);
    CHECK(out.shape().dims == f.shape().dims);
}

TEST_CASE("csam ablation flags control which parameters exist") {
    Rng rng(11);
    auto count = [&](bool sab, bool cab) {
        CSAM<double> m(3, 4, sab, cab, rng);
        ParamMap<double> p;
        m.collect(p, "m");
        Index n = 0;
        for (auto& [name, t] : p) n += t.numel();
        return n;
    };
    Index backbone = count(false, false);
    Index sab_only = count(true, false);
    Index cab_only = count(false, true);
    Index full = count(true, true);
    CHECK(backbone == 0);
    CHECK(sab_only > 0);
    CHECK(cab_only > 0);
    CHECK(full == sab_only + cab_only);
}

TEST_CASE("spatial attention memory guard") {
    Rng rng(12);
    SAB2D<double> sab(1, rng);
    // 128 x 128 spatial = 16384 positions > 8192 budget
    CHECK_THROWS_AS(sab.forward_sample(D::zeros(Shape{1, 128, 128}), true), ResourceError);
}

TEST_CASE("batched csam forward equals per-sample forward") {
    Rng rng(13);
    CSAM<double> m(2, 2, true, true, rng);
    D a = D::uniform(Shape{2, 4, 4}, -1, 1, rng);
    D b = D::uniform(Shape{2, 4, 4}, -1, 1, rng);
    D batched = m.forward(stack_batch(std::vector<D>{a, b}), false, nullptr);
    D ra = m.forward_sample(a, false);
    D rb = m.forward_sample(b, false);
    D b0 = select_batch(batched, 0), b1 = select_batch(batched, 1);
    for (size_t i = 0; i < ra.data().size(); ++i) {
        CHECK(b0.data()[i] == doctest::Approx(ra.data()[i]).epsilon(1e-12));
        CHECK(b1.data()[i] == doctest::Approx(rb.data()[i]).epsilon(1e-12));
    }
}
