#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cs2net/loss.hpp"

using namespace cs2net;
using D = Tensor<double>;

TEST_CASE("loss config defaults and validation") {
    LossConfig cfg;
    CHECK(cfg.alpha == 0.6);
    CHECK(cfg.epsilon == 1.0);
    CHECK(cfg.clamp == 1e-7);
    LossConfig bad = cfg;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.clamp = 0.6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bce oracle values") {
    // g=1, p=0.5 -> -ln 0.5
    D p = D::from_vector(Shape{1}, {0.5});
    D g = D::from_vector(Shape{1}, {1});
    CHECK(bce_loss(p, g).item() == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    // g=[1,0], p=[0.9,0.1] -> -(ln .9 + ln .9)/2
    D p2 = D::from_vector(Shape{2}, {0.9, 0.1});
    D g2 = D::from_vector(Shape{2}, {1, 0});
    CHECK(bce_loss(p2, g2).item() == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("perfect binary prediction gives near-zero bce") {
    D p = D::from_vector(Shape{4}, {1, 0, 1, 0});
    D g = D::from_vector(Shape{4}, {1, 0, 1, 0});
    double loss = bce_loss(p, g).item();
    CHECK(loss >= 0.0);
    CHECK(loss <= 2e-7);  // -ln(1 - clamp) per element
}

TEST_CASE("bce rejects non-binary ground truth") {
    D p = D::from_vector(Shape{2}, {0.5, 0.5});
    D g = D::from_vector(Shape{2}, {1, 0.3});
    CHECK_THROWS_AS(bce_loss(p, g), ContractError);
}

TEST_CASE("wce with omega 1 equals bce to the last bit") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        D p = D::uniform(Shape{32}, 0.01, 0.99, rng);
        std::vector<double> gv(32);
        std::uniform_int_distribution<int> coin(0, 1);
        for (auto& v : gv) v = coin(rng);
        D g = D::from_vector(Shape{32}, gv);
        CHECK(wce_loss(p, g, 1.0).item() == bce_loss(p, g).item());
    }
}

TEST_CASE("wce oracle and omega scoping") {
    // g=1, p=0.5, omega=2 -> 2 * (-ln 0.5)
    D p = D::from_vector(Shape{1}, {0.5});
    D g = D::from_vector(Shape{1}, {1});
    CHECK(wce_loss(p, g, 2.0).item() == doctest::Approx(2 * 0.6931471805599453).epsilon(1e-12));
    // all-background truth is independent of omega
    D p2 = D::from_vector(Shape{3}, {0.2, 0.4, 0.7});
    D g2 = D::zeros(Shape{3});
    CHECK(wce_loss(p2, g2, 5.0).item() == wce_loss(p2, g2, 1.0).item());
}

TEST_CASE("class weight formula") {
    // all p = 0.5 -> omega = 1
    CHECK(class_weight(D::filled(Shape{8}, 0.5)) == doctest::Approx(1.0).epsilon(1e-12));
    // p = [.2,.2,.6], N=3 -> (3-1)/1 = 2
    CHECK(class_weight(D::from_vector(Shape{3}, {0.2, 0.2, 0.6})) ==
          doctest::Approx(2.0).epsilon(1e-12));
    // p -> 1: omega -> 0
    CHECK(class_weight(D::filled(Shape{4}, 1.0)) == doctest::Approx(0.0).epsilon(1e-12));
    // saturation guard
    bool saturated = false;
    CHECK(class_weight(D::zeros(Shape{4}), 1e6, &saturated) == 1e6);
    CHECK(saturated);
}

TEST_CASE("dice loss oracle values") {
    // p = g binary -> 0 exactly
    D g = D::from_vector(Shape{5}, {1, 0, 1, 1, 0});
    CHECK(dice_loss(g.clone_detached(), g).item() == 0.0);
    // p = 0, g has 4 ones, eps=1 -> 1 - 1/5
    D p0 = D::zeros(Shape{6});
    D g4 = D::from_vector(Shape{6}, {1, 1, 1, 1, 0, 0});
    CHECK(dice_loss(p0, g4).item() == doctest::Approx(0.8).epsilon(1e-12));
    // p = g = 0 -> 0 via epsilon
    CHECK(dice_loss(D::zeros(Shape{3}), D::zeros(Shape{3})).item() == 0.0);
}

TEST_CASE("dice loss stays in [0,1)") {
    Rng rng(2);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        D p = D::uniform(Shape{16}, 0, 1, rng);
        std::vector<double> gv(16);
        for (auto& v : gv) v = coin(rng);
        double l = dice_loss(p, D::from_vector(Shape{16}, gv)).item();
        CHECK(l >= 0.0);
        CHECK(l < 1.0);
    }
}

TEST_CASE("combined loss endpoints equal their components") {
    Rng rng(3);
    std::uniform_int_distribution<int> coin(0, 1);
    D p = D::uniform(Shape{16}, 0.05, 0.95, rng);
    std::vector<double> gv(16);
    for (auto& v : gv) v = coin(rng);
    D g = D::from_vector(Shape{16}, gv);
    double omega = class_weight(p);

    LossConfig cfg;
    cfg.alpha = 1.0;
    CHECK(combined_loss(p, g, cfg).item() == wce_loss(p, g, omega).item());
    cfg.alpha = 0.0;
    CHECK(combined_loss(p, g, cfg).item() == dice_loss(p, g, cfg.epsilon).item());
}

TEST_CASE("combined loss convex combination oracle") {
    // alpha=0.6, wce=1.0, dice=0.5 -> 0.8; verified on the actual op output
    Rng rng(4);
    std::uniform_int_distribution<int> coin(0, 1);
    D p = D::uniform(Shape{24}, 0.05, 0.95, rng);
    std::vector<double> gv(24);
    for (auto& v : gv) v = coin(rng);
    D g = D::from_vector(Shape{24}, gv);
    LossConfig cfg;
    double w = wce_loss(p, g, class_weight(p)).item();
    double d = dice_loss(p, g, cfg.epsilon).item();
    CHECK(combined_loss(p, g, cfg).item() ==
          doctest::Approx(0.6 * w + 0.4 * d).epsilon(1e-15));
    CHECK(0.6 * 1.0 + 0.4 * 0.5 == doctest::Approx(0.8));
}

TEST_CASE("combined loss is monotone in the wce component") {
    // worsen only the positive-class predictions: wce rises, so must the sum
    D g = D::from_vector(Shape{4}, {1, 1, 0, 0});
    D good = D::from_vector(Shape{4}, {0.9, 0.9, 0.2, 0.2});
    D worse = D::from_vector(Shape{4}, {0.6, 0.6, 0.2, 0.2});
    LossConfig cfg;
    CHECK(combined_loss(worse, g, cfg).item() > combined_loss(good, g, cfg).item());
}

TEST_CASE("loss gradients match finite differences over 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::uniform_int_distribution<int> coin(0, 1);
        std::vector<double> gv(12);
        for (auto& v : gv) v = coin(rng);
        D g = D::from_vector(Shape{12}, gv);
        D p = D::uniform(Shape{12}, 0.1, 0.9, rng);
        CHECK(finite_diff_check<double>([g](D& x) { return bce_loss(x, g); },
                                        p.clone_detached()) < 1e-5);
        CHECK(finite_diff_check<double>([g](D& x) { return wce_loss(x, g, 3.0); },
                                        p.clone_detached()) < 1e-5);
        CHECK(finite_diff_check<double>([g](D& x) { return dice_loss(x, g); },
                                        p.clone_detached()) < 1e-5);
    }
}

TEST_CASE("clamped region has zero gradient slope") {
    D g = D::from_vector(Shape{1}, {1});
    D p = D::from_vector(Shape{1}, {1e-9}).set_requires_grad(true);  // below clamp
    D l = bce_loss(p, g);
    backward(l);
    CHECK(p.grad()[0] == 0.0);
}
