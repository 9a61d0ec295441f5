#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cs2net/optim.hpp"

using namespace cs2net;
using F = Tensor<float>;

TEST_CASE("poly schedule endpoints and midpoint") {
    PolySchedule s;
    s.base_lr = 1e-4;
    s.max_iter = 100;
    CHECK(poly_lr(s, 0) == 1e-4);
    CHECK(poly_lr(s, 100) == 0.0);
    CHECK(poly_lr(s, 50) == doctest::Approx(1e-4 * std::pow(0.5, 0.9)).epsilon(1e-15));
    CHECK(poly_lr(s, 50) == doctest::Approx(5.3589e-5).epsilon(1e-4));
}

TEST_CASE("poly schedule is non-increasing and matches the closed form") {
    PolySchedule s;
    s.base_lr = 3e-3;
    s.max_iter = 37;
    double prev = poly_lr(s, 0);
    for (long i = 0; i <= 37; ++i) {
        double lr = poly_lr(s, i);
        double expected = 3e-3 * std::pow(1.0 - static_cast<double>(i) / 37.0, 0.9);
        CHECK(lr == expected);  // same expression, bit-identical
        CHECK(lr <= prev);
        prev = lr;
    }
    CHECK(poly_lr(s, 50) == 0.0);  // past the end clamps to zero
    CHECK_THROWS_AS(poly_lr(s, -1), ContractError);
}

TEST_CASE("adam zero gradient with zero weight decay is the identity") {
    F w = F::from_vector(Shape{3}, {1, -2, 3}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    Adam<float> opt(params, 0.0);
    w.grad();  // allocate zeros
    opt.step(1e-3);
    CHECK(w.data() == std::vector<float>{1, -2, 3});
}

TEST_CASE("adam first step moves by minus lr") {
    // theta=0, g=1, wd=0: mhat=1, vhat=1 -> theta = -lr/(1 + eps) ~ -lr
    F w = F::zeros(Shape{1}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    Adam<float> opt(params, 0.0);
    w.grad()[0] = 1.0f;
    opt.step(0.01);
    CHECK(w.data()[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam matches a scalar reference implementation for 50 steps") {
    F w = F::from_vector(Shape{1}, {0.5f}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    double wd = 0.01;
    Adam<float> opt(params, wd);

    double theta = 0.5, m = 0, v = 0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-2;
    Rng rng(7);
    std::uniform_real_distribution<double> gd(-1, 1);
    for (int t = 1; t <= 50; ++t) {
        double g = gd(rng);
        w.zero_grad();
        w.grad()[0] = static_cast<float>(g);
        opt.step(lr);

        double ge = static_cast<double>(static_cast<float>(g));
        m = b1 * m + (1 - b1) * ge;
        v = b2 * v + (1 - b2) * ge * ge;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        theta -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta);
        CHECK(w.data()[0] == doctest::Approx(theta).epsilon(1e-5));
        theta = static_cast<double>(w.data()[0]);  // resync to avoid drift accumulation
    }
}

TEST_CASE("constant gradient sign drives the parameter monotonically") {
    F w = F::zeros(Shape{1}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    Adam<float> opt(params, 0.0);
    float prev = 0.0f;
    for (int t = 0; t < 10; ++t) {
        w.zero_grad();
        w.grad()[0] = 1.0f;
        opt.step(1e-3);
        CHECK(w.data()[0] < prev);
        prev = w.data()[0];
    }
}

TEST_CASE("weight decay alone shrinks the parameter norm") {
    F w = F::from_vector(Shape{2}, {2, -3}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    Adam<float> opt(params, 0.1);
    w.grad();  // zero gradient
    double before = 2.0 * 2.0 + 3.0 * 3.0;
    opt.step(1e-2);
    double after = 0;
    for (float v : w.data()) after += static_cast<double>(v) * v;
    CHECK(after < before);
}

TEST_CASE("non-finite gradient aborts naming the parameter") {
    F w = F::zeros(Shape{1}).set_requires_grad(true);
    ParamMap<float> params = {{"enc0.conv1.weight", w}};
    Adam<float> opt(params, 0.0);
    w.grad()[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        opt.step(1e-3);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("enc0.conv1.weight") != std::string::npos);
    }
}

TEST_CASE("optimizer state round trips through the serialized form") {
    F w = F::from_vector(Shape{2}, {1, 2}).set_requires_grad(true);
    ParamMap<float> params = {{"w", w}};
    Adam<float> opt(params, 0.01);
    Rng warm(9);
    std::uniform_real_distribution<float> gd(-1, 1);
    for (int t = 0; t < 5; ++t) {
        w.zero_grad();
        for (auto& g : w.grad()) g = gd(warm);
        opt.step(1e-3);
    }
    auto state = opt.state_tensors();
    REQUIRE(state.size() == 2);  // adam.m.w and adam.v.w
    CHECK(state[0].first.rfind("adam.", 0) == 0);

    // clone the parameter, restore the moments into a fresh optimizer
    F w2 = F::from_vector(Shape{2}, w.data()).set_requires_grad(true);
    ParamMap<float> params2 = {{"w", w2}};
    Adam<float> opt2(params2, 0.01);
    for (const auto& [name, payload] : state) {
        std::string base = name.substr(name.find_last_of('.') + 1);
        (void)base;
        opt2.load_state(name, payload.second);
    }
    opt2.set_step(5);

    // identical future gradients produce identical trajectories
    Rng ra(11), rb(11);
    for (int t = 0; t < 3; ++t) {
        w.zero_grad();
        w2.zero_grad();
        for (auto& g : w.grad()) g = gd(ra);
        for (auto& g : w2.grad()) g = gd(rb);
        opt.step(1e-3);
        opt2.step(1e-3);
        // moments round-trip through f32, so allow last-ulp drift
        for (size_t i = 0; i < w.data().size(); ++i)
            CHECK(w2.data()[i] == doctest::Approx(w.data()[i]).epsilon(1e-5));
    }
}
