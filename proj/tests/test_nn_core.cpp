#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "hwaware/nn_core.hpp"

using namespace hwaware;

namespace {

const std::vector<std::size_t> kWidths{2, 8, 1};

Matrix random_inputs(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.5, 2.5);
    Matrix X(n, 2);
    for (double& v : X.values()) v = u(rng);
    return X;
}

std::vector<std::uint8_t> random_labels(std::size_t n, Rng& rng) {
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = std::uint8_t(rng() & 1u);
    return y;
}

// Visits every parameter of a network in a fixed order.
void for_each_param(DenseNet& net, const std::function<void(double&)>& fn) {
    for (auto& layer : net.layers) {
        for (double& w : layer.weights.values()) fn(w);
        for (double& b : layer.bias) fn(b);
    }
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

TEST_CASE("forward: zero network outputs one half") {
    auto net = DenseNet::zeros(kWidths);
    Rng rng(1);
    auto cache = forward(net, random_inputs(16, rng));
    for (double v : cache.output().values()) CHECK(v == 0.5);
}

TEST_CASE("forward: hand-computed 1-1-1 chain") {
    DenseNet net = DenseNet::zeros(std::vector<std::size_t>{1, 1, 1});
    net.layers[0].weights(0, 0) = 2.0;
    net.layers[0].bias[0] = -1.0;
    net.layers[1].weights(0, 0) = -3.0;
    net.layers[1].bias[0] = 0.5;
    Matrix X(1, 1, 0.7);
    const double h = 1.0 / (1.0 + std::exp(-(2.0 * 0.7 - 1.0)));
    const double y = 1.0 / (1.0 + std::exp(-(-3.0 * h + 0.5)));
    CHECK(forward(net, X).output()(0, 0) == doctest::Approx(y).epsilon(1e-15));
}

TEST_CASE("bce_loss: ln 2 at one half, finite at saturated outputs") {
    Matrix half(4, 1, 0.5);
    std::vector<std::uint8_t> y{0, 1, 1, 0};
    CHECK(bce_loss(half, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    Matrix wrong(2, 1, std::vector<double>{1.0, 0.0});
    std::vector<std::uint8_t> y2{0, 1};
    const double l = bce_loss(wrong, y2);
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx(-std::log(kProbClamp)));
}

TEST_CASE("sigmoid: stable at extremes") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-3.0) + sigmoid(3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("backward: matches central finite differences") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        auto net = DenseNet::random(kWidths, rng);
        auto X = random_inputs(32, rng);
        auto y = random_labels(32, rng);
        auto grads = backward(net, forward(net, X), y);

        std::vector<double> analytic;
        for_each_param(grads, [&](double& g) { analytic.push_back(g); });

        const double h = 1e-5;
        std::size_t k = 0;
        for_each_param(net, [&](double& p) {
            const double keep = p;
            p = keep + h;
            const double up = bce_loss(forward(net, X).output(), y);
            p = keep - h;
            const double down = bce_loss(forward(net, X).output(), y);
            p = keep;
            CHECK(rel_err(analytic[k++], (up - down) / (2 * h)) <= 1e-5);
        });
    }
}

TEST_CASE("backward: a deeper net with wider layers") {
    Rng rng(8);
    const std::vector<std::size_t> widths{2, 5, 4, 1};
    auto net = DenseNet::random(widths, rng);
    auto X = random_inputs(10, rng);
    auto y = random_labels(10, rng);
    auto grads = backward(net, forward(net, X), y);
    CHECK(grads.widths() == widths);
    const double h = 1e-5;
    double& p = net.layers[1].weights(2, 3);
    const double keep = p;
    p = keep + h;
    const double up = bce_loss(forward(net, X).output(), y);
    p = keep - h;
    const double down = bce_loss(forward(net, X).output(), y);
    p = keep;
    CHECK(rel_err(grads.layers[1].weights(2, 3), (up - down) / (2 * h)) <= 1e-5);
}

TEST_CASE("adam_step: first step, zero gradient, determinism") {
    Rng rng(4);
    auto net = DenseNet::random(kWidths, rng);
    auto grads = DenseNet::zeros(kWidths);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for_each_param(grads, [&](double& g) { g = u(rng); });

    auto stepped = net;
    auto state = AdamState::for_net(stepped);
    adam_step(stepped, grads, state);
    std::vector<double> before, after, g;
    for_each_param(net, [&](double& v) { before.push_back(v); });
    for_each_param(stepped, [&](double& v) { after.push_back(v); });
    for_each_param(grads, [&](double& v) { g.push_back(v); });
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double expect = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
        CHECK(after[i] - before[i] == doctest::Approx(expect).epsilon(1e-9));
        CHECK(std::abs(std::abs(after[i] - before[i]) - 0.01) < 1e-6);
    }

    auto still = net;
    auto zero_state = AdamState::for_net(still);
    adam_step(still, DenseNet::zeros(kWidths), zero_state);
    CHECK(still == net);

    auto a = net, b = net;
    auto sa = AdamState::for_net(a), sb = AdamState::for_net(b);
    for (int i = 0; i < 5; ++i) {
        adam_step(a, grads, sa);
        adam_step(b, grads, sb);
    }
    CHECK(a == b);
}

TEST_CASE("Adam on a fixed batch drives the loss down") {
    Rng rng(12);
    auto net = DenseNet::random(kWidths, rng);
    auto X = random_inputs(64, rng);
    std::vector<std::uint8_t> y(64);
    for (std::size_t i = 0; i < 64; ++i) y[i] = X(i, 0) + X(i, 1) > 0.5;
    auto state = AdamState::for_net(net);
    const double first = bce_loss(forward(net, X).output(), y);
    for (int step = 0; step < 50; ++step) {
        auto cache = forward(net, X);
        adam_step(net, backward(net, cache, y), state);
    }
    CHECK(bce_loss(forward(net, X).output(), y) < first);
}

TEST_CASE("random init stays within +-sqrt(1/fan_in)") {
    Rng rng(6);
    const std::vector<std::size_t> widths{4, 16, 1};
    auto net = DenseNet::random(widths, rng);
    for (const auto& layer : net.layers) {
        const double bound = std::sqrt(1.0 / layer.fan_in());
        for (double w : layer.weights.values()) CHECK(std::abs(w) <= bound);
        for (double b : layer.bias) CHECK(std::abs(b) <= bound);
    }
}

TEST_CASE("checkpoint round trip and malformed checkpoints") {
    Rng rng(2);
    auto net = DenseNet::random(kWidths, rng);
    auto path = std::filesystem::temp_directory_path() / "hwaware_net_roundtrip.json";
    save_net(net, path);
    CHECK(load_net(path) == net);
    std::filesystem::remove(path);

    auto doc = net_to_json(net);
    doc["layers"][0]["weights"].erase(0);
    CHECK_THROWS(net_from_json(doc));
    CHECK_THROWS(net_from_json(nlohmann::json::object()));
}
