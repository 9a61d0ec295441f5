#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cs2net/tensor.hpp"

using namespace cs2net;
using D = Tensor<double>;

TEST_CASE("shape validation") {
    CHECK_THROWS_AS(Shape({0, 2}), DimensionError);
    CHECK_THROWS_AS(Shape({-1}), DimensionError);
    CHECK(Shape({2, 3, 4}).numel() == 24);
    CHECK(Shape({5}).rank() == 1);
}

TEST_CASE("matmul values and gradient") {
    // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
    D a = D::from_vector(Shape{2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
    D b = D::from_vector(Shape{2, 2}, {5, 6, 7, 8}).set_requires_grad(true);
    D c = matmul(a, b);
    CHECK(c.data() == std::vector<double>{19, 22, 43, 50});

    D loss = sum(c);
    backward(loss);
    // d(sum AB)/dA = ones * B^T rows: each row of grad_a = col sums of B rows
    CHECK(a.grad() == std::vector<double>{11, 15, 11, 15});
    CHECK(b.grad() == std::vector<double>{4, 4, 6, 6});
}

TEST_CASE("matmul shape mismatch") {
    D a = D::zeros(Shape{2, 3});
    D b = D::zeros(Shape{2, 3});
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("transpose round trip") {
    Rng rng(3);
    D a = D::uniform(Shape{3, 5}, -1, 1, rng);
    D att = transpose(transpose(a));
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(att.data()[i] == a.data()[i]);
}

TEST_CASE("softmax columns sum to one and are shift invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        D x = D::uniform(Shape{6, 4}, -5, 5, rng);
        D s = softmax_axis(x, 0);
        for (Index j = 0; j < 4; ++j) {
            double col = 0;
            for (Index i = 0; i < 6; ++i) col += s.data()[static_cast<size_t>(i * 4 + j)];
            CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
        }
        D shifted = x.clone_detached();
        for (auto& v : shifted.data()) v += 123.0;
        D s2 = softmax_axis(shifted, 0);
        for (size_t i = 0; i < s.data().size(); ++i)
            CHECK(s2.data()[i] == doctest::Approx(s.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("softmax survives large magnitudes") {
    D x = D::from_vector(Shape{3, 1}, {1000.0, 1000.0, -1000.0});
    D s = softmax_axis(x, 0);
    CHECK(s.data()[0] == doctest::Approx(0.5));
    CHECK(s.data()[1] == doctest::Approx(0.5));
    CHECK(s.data()[2] == doctest::Approx(0.0));
}

TEST_CASE("relu and sigmoid values") {
    D x = D::from_vector(Shape{3}, {-2, 0, 3});
    CHECK(relu(x).data() == std::vector<double>{0, 0, 3});
    D s = sigmoid(x);
    CHECK(s.data()[1] == doctest::Approx(0.5));
    CHECK(s.data()[2] == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
}

TEST_CASE("elementwise add mul scale gradients") {
    D a = D::from_vector(Shape{3}, {1, 2, 3}).set_requires_grad(true);
    D b = D::from_vector(Shape{3}, {4, 5, 6}).set_requires_grad(true);
    D out = sum(mul(add(a, b), scale(a, 2.0)));
    backward(out);
    // f = sum(2a(a+b)) => df/da = 4a + 2b, df/db = 2a
    CHECK(a.grad() == std::vector<double>{12, 18, 24});
    CHECK(b.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("reshape is a zero copy view with gradient flow") {
    D a = D::from_vector(Shape{2, 3}, {1, 2, 3, 4, 5, 6}).set_requires_grad(true);
    D v = reshape(a, Shape{3, 2});
    CHECK(v.data().data() == a.data().data());  // shared buffer
    backward(sum(mul(v, v)));
    for (size_t i = 0; i < 6; ++i) CHECK(a.grad()[i] == doctest::Approx(2.0 * a.data()[i]));
    CHECK_THROWS_AS(reshape(a, Shape{4, 2}), DimensionError);
}

TEST_CASE("concat values and gradient routing") {
    D a = D::from_vector(Shape{1, 2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
    D b = D::from_vector(Shape{1, 2, 2}, {5, 6, 7, 8}).set_requires_grad(true);
    D c = concat(a, b, 0);
    CHECK(c.shape().dims == std::vector<Index>{2, 2, 2});
    CHECK(c.data() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
    backward(sum(mul(c, c)));
    CHECK(a.grad()[3] == doctest::Approx(8.0));
    CHECK(b.grad()[0] == doctest::Approx(10.0));
}

TEST_CASE("select and stack batch round trip") {
    Rng rng(5);
    D x = D::uniform(Shape{3, 2, 4}, -1, 1, rng);
    std::vector<D> parts;
    for (Index b = 0; b < 3; ++b) parts.push_back(select_batch(x, b));
    CHECK(parts[0].shape().dims == std::vector<Index>{2, 4});
    D y = stack_batch(parts);
    CHECK(y.shape().dims == x.shape().dims);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("backward requires scalar") {
    D a = D::from_vector(Shape{2}, {1, 2}).set_requires_grad(true);
    D b = add(a, a);
    CHECK_THROWS_AS(backward(b), ContractError);
}

TEST_CASE("non-finite forward value names the op") {
    D a = D::from_vector(Shape{1}, {1e308}).set_requires_grad(true);
    try {
        D c = mul(scale(a, 1e10), scale(a, 1e10));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("op '") != std::string::npos);
    }
}

TEST_CASE("no_grad mode records no graph") {
    D a = D::from_vector(Shape{2}, {1, 2}).set_requires_grad(true);
    NoGradGuard g;
    D b = mul(a, a);
    CHECK_FALSE(b.requires_grad());
    CHECK(b.impl()->parents.empty());
}

TEST_CASE("gradient accumulates across reuse") {
    D a = D::from_vector(Shape{1}, {3}).set_requires_grad(true);
    D out = add(mul(a, a), mul(a, a));  // 2a^2 -> d/da = 4a = 12
    backward(out);
    CHECK(a.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("finite difference on composite expression over 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        D c = D::uniform(Shape{4, 4}, -1, 1, rng);
        auto f = [c](D& x) { return sum(mul(sigmoid(matmul(x, transpose(x))), c)); };
        double err = finite_diff_check<double>(f, D::uniform(Shape{4, 4}, -1, 1, rng));
        CHECK(err < 1e-5);
    }
}
