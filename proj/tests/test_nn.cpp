#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cardicat/nn.hpp"
#include "cardicat/params.hpp"
#include "cardicat/rng.hpp"

using cardicat::DenseLayer;
using cardicat::Matrix;
using cardicat::ParamStore;
using cardicat::Rng;

TEST_CASE("dense forward is x*W + b") {
    ParamStore<double> store;
    Rng rng(1);
    auto layer = DenseLayer<double>::create(store, "fc", 3, 2, rng);
    // Identity-ish check with explicit weights.
    for (auto& v : layer.W->value.data) v = 0.0;
    layer.W->value(0, 0) = 1.0;
    layer.W->value(1, 1) = 1.0;
    layer.b->value(0, 0) = 0.5;
    Matrix<double> x(2, 3);
    x(0, 0) = 7;
    x(0, 1) = 8;
    x(0, 2) = 9;
    x(1, 0) = 1;
    x(1, 1) = 2;
    x(1, 2) = 3;
    Matrix<double> y = layer.eval(x);
    REQUIRE(y(0, 0) == Catch::Approx(7.5));
    REQUIRE(y(0, 1) == Catch::Approx(8.0));
    REQUIRE(y(1, 0) == Catch::Approx(1.5));
    REQUIRE(y(1, 1) == Catch::Approx(2.0));
}

TEST_CASE("glorot init respects the fan bound and biases start at zero") {
    ParamStore<double> store;
    Rng rng(2);
    auto layer = DenseLayer<double>::create(store, "fc", 30, 50, rng);
    const double bound = std::sqrt(6.0 / 80.0);
    for (double v : layer.W->value.data) {
        REQUIRE(v >= -bound);
        REQUIRE(v <= bound);
    }
    for (double v : layer.b->value.data) REQUIRE(v == 0.0);
}

TEST_CASE("embedding init is uniform(-1, 1)") {
    Rng rng(3);
    Matrix<double> e = cardicat::embedding_uniform<double>(rng, 200, 8);
    double lo = 1, hi = -1;
    for (double v : e.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(lo >= -1.0);
    REQUIRE(hi <= 1.0);
    REQUIRE(lo < -0.9);  // the range is actually used
    REQUIRE(hi > 0.9);
}

TEST_CASE("relu and tanh helpers") {
    Matrix<double> m(1, 3);
    m(0, 0) = -1;
    m(0, 1) = 0;
    m(0, 2) = 2;
    Matrix<double> r = m;
    cardicat::relu_inplace(r);
    REQUIRE(r(0, 0) == 0.0);
    REQUIRE(r(0, 1) == 0.0);
    REQUIRE(r(0, 2) == 2.0);
    Matrix<double> h = m;
    cardicat::tanh_inplace(h);
    REQUIRE(h(0, 1) == 0.0);
    REQUIRE(h(0, 2) == Catch::Approx(std::tanh(2.0)));
}

TEST_CASE("softmax rows sum to one, are positive, and equal logits are uniform") {
    Matrix<double> logits(2, 4);
    logits(1, 0) = 100;
    logits(1, 1) = 101;
    logits(1, 2) = 99;
    logits(1, 3) = 100;  // max-subtraction keeps this finite
    Matrix<double> p = cardicat::softmax_rows(logits);
    for (std::size_t i = 0; i < 2; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            REQUIRE(p(i, j) > 0.0);
            sum += p(i, j);
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
    for (std::size_t j = 0; j < 4; ++j) REQUIRE(p(0, j) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("adam first step with unit gradient moves by lr/(1+eps)") {
    ParamStore<double> store;
    auto& p = store.add("w", Matrix<double>(2, 2, 3.0));
    store.zero_grads();
    p.grad.fill(1.0);
    cardicat::AdamConfig cfg;  // lr 0.0005
    store.adam_step(cfg);
    const double want = 3.0 - cfg.lr / (1.0 + cfg.eps);
    for (double v : p.value.data) REQUIRE(v == Catch::Approx(want).margin(1e-15));
}

TEST_CASE("adam leaves parameters alone on zero gradient") {
    ParamStore<double> store;
    auto& p = store.add("w", Matrix<double>(1, 3, 1.25));
    store.zero_grads();
    store.adam_step(cardicat::AdamConfig{});
    for (double v : p.value.data) REQUIRE(v == 1.25);
}

TEST_CASE("adam rejects non-finite gradients without touching values") {
    ParamStore<double> store;
    auto& a = store.add("a", Matrix<double>(1, 2, 1.0));
    auto& b = store.add("b", Matrix<double>(1, 2, 2.0));
    store.zero_grads();
    a.grad.fill(1.0);
    b.grad(0, 1) = std::nan("");
    REQUIRE_THROWS_AS(store.adam_step(cardicat::AdamConfig{}), cardicat::NumericalError);
    for (double v : a.value.data) REQUIRE(v == 1.0);  // no partial update
    for (double v : b.value.data) REQUIRE(v == 2.0);
}

TEST_CASE("adam trajectories are bit-identical across runs") {
    auto run = [] {
        ParamStore<double> store;
        Rng rng(5);
        auto& p = store.add("w", cardicat::embedding_uniform<double>(rng, 4, 4));
        for (int step = 0; step < 10; ++step) {
            store.zero_grads();
            for (std::size_t i = 0; i < p.grad.size(); ++i)
                p.grad.data[i] = std::sin(static_cast<double>(step + 1) * p.value.data[i]);
            store.adam_step(cardicat::AdamConfig{});
        }
        return p.value.data;
    };
    REQUIRE(run() == run());
}

TEST_CASE("gauss_sample moments and reparameterize identities") {
    Rng rng(6);
    Matrix<double> g = cardicat::gauss_sample<double>(rng, 1000, 100);
    double sum = 0, ss = 0;
    for (double v : g.data) {
        sum += v;
        ss += v * v;
    }
    const double n = static_cast<double>(g.size());
    const double mean = sum / n;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(std::sqrt(ss / n - mean * mean) - 1.0) < 0.02);

    Matrix<double> mu(2, 3, 1.5), logvar(2, 3, 0.0), eps(2, 3, 0.0);
    Matrix<double> z = cardicat::reparameterize_eval(mu, logvar, eps);
    for (double v : z.data) REQUIRE(v == 1.5);  // eps = 0 -> z = mu
    eps.fill(2.0);
    logvar.fill(std::log(4.0));  // sigma = 2
    z = cardicat::reparameterize_eval(mu, logvar, eps);
    for (double v : z.data) REQUIRE(v == Catch::Approx(5.5).margin(1e-12));
}
