#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "hwaware/datasets.hpp"
#include "hwaware/hw_training.hpp"

using namespace hwaware;

namespace {

const std::vector<std::size_t> kWidths{2, 8, 1};

TransferSettings all_off() {
    TransferSettings s;
    s.tuning = s.bias = s.stuck = false;
    return s;
}

const VariabilityModel& model() {
    static const VariabilityModel m = make_synthetic_model(2023);
    return m;
}

const std::pair<LabeledSet, LabeledSet>& moons() {
    static const auto data = split(make_half_moons(1075, 0.1, 7), 875);
    return data;
}

// Full-length default training runs, shared by several cases.
const TrainingResult& hann_default() {
    static const TrainingResult r = train_hardware_aware(TrainingConfig{}, moons().first, model());
    return r;
}

const TrainingResult& nn_default() {
    static const TrainingResult r = train_regular(TrainingConfig{}, moons().first);
    return r;
}

std::uint64_t hash_matrices(const std::vector<Matrix>& ms) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& m : ms) {
        for (double v : m.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace

TEST_CASE("crossbar orientation round trip") {
    Rng rng(1);
    auto net = DenseNet::random(kWidths, rng);
    for (const auto& layer : net.layers) {
        auto x = to_crossbar(layer);
        CHECK(x.rows() == layer.fan_in() + 1);
        CHECK(x.cols() == layer.fan_out());
        CHECK(x(layer.fan_in(), 0) == layer.bias[0]);
        CHECK(from_crossbar(x) == layer);
    }
    auto layouts = layouts_for(net);
    CHECK(layouts[0].weight_rows() == 3);
    CHECK(layouts[0].weight_cols() == 8);
    CHECK(layouts[1].weight_rows() == 9);
    CHECK(layouts[1].weight_cols() == 1);
}

TEST_CASE("sample_epsilon: all sources off gives exact zeros") {
    Rng rng(2);
    auto net = DenseNet::random(kWidths, rng);
    auto s = sample_epsilon(net, layouts_for(net), model(), all_off(), rng);
    for (std::size_t l = 0; l < s.epsilon.size(); ++l) {
        for (double e : s.epsilon[l].values()) CHECK(e == 0.0);
        for (auto m : s.stuck_mask[l].values()) CHECK(m == 0);
        CHECK(s.snapshots[l] == WeightRangeSnapshot::of(to_crossbar(net.layers[l])));
    }
    CHECK(perturbed(net, s) == net);
}

TEST_CASE("sample_epsilon: x = 1 masks everything") {
    Rng rng(3);
    auto net = DenseNet::random(kWidths, rng);
    TransferSettings s = all_off();
    s.stuck = true;
    s.hrs_fraction = 1.0;
    s.lrs_fraction = 0.0;
    auto e = sample_epsilon(net, layouts_for(net), model(), s, rng);
    for (const auto& m : e.stuck_mask) {
        for (auto v : m.values()) CHECK(v == 1);
    }
}

TEST_CASE("hw_forward equals forward on phi + epsilon") {
    Rng rng(4);
    auto net = DenseNet::random(kWidths, rng);
    auto e = sample_epsilon(net, layouts_for(net), model(), TransferSettings{}, rng);
    Matrix X = moons().second.points;
    auto a = hw_forward(net, e, X);
    DenseNet manual = net;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = manual.layers[l];
        for (std::size_t o = 0; o < layer.fan_out(); ++o) {
            for (std::size_t i = 0; i < layer.fan_in(); ++i) layer.weights(o, i) += e.epsilon[l](i, o);
            layer.bias[o] += e.epsilon[l](layer.fan_in(), o);
        }
    }
    CHECK(a.output() == forward(manual, X).output());
}

TEST_CASE("masked_backward: a single masked entry is exactly zero, the rest untouched") {
    Rng rng(5);
    auto net = DenseNet::random(kWidths, rng);
    auto e = sample_epsilon(net, layouts_for(net), model(), all_off(), rng);
    auto X = moons().first.subset(0, 64);
    auto cache = hw_forward(net, e, X.points);
    auto full = masked_backward(net, e, cache, X.labels);
    e.stuck_mask[0](1, 3) = 1;  // weight from input 1 to hidden unit 3
    e.stuck_mask[0](2, 5) = 1;  // bias of hidden unit 5
    auto masked = masked_backward(net, e, cache, X.labels);
    CHECK(masked.layers[0].weights(3, 1) == 0.0);
    CHECK(masked.layers[0].bias[5] == 0.0);
    CHECK(full.layers[0].weights(3, 1) != 0.0);
    masked.layers[0].weights(3, 1) = full.layers[0].weights(3, 1);
    masked.layers[0].bias[5] = full.layers[0].bias[5];
    CHECK(masked == full);
}

TEST_CASE("masked_backward: finite differences w.r.t. phi with epsilon held fixed") {
    Rng rng(6);
    TransferSettings noisy;
    noisy.hrs_fraction = noisy.lrs_fraction = 0.1;
    const auto& data = moons().first;
    for (int trial = 0; trial < 5; ++trial) {
        auto net = DenseNet::random(kWidths, rng);
        auto layouts = layouts_for(net);
        auto e = sample_epsilon(net, layouts, model(), noisy, rng);
        auto batch = data.subset(trial * 100, trial * 100 + 100);
        auto grads = masked_backward(net, e, hw_forward(net, e, batch.points), batch.labels);
        auto loss_at = [&](const DenseNet& n) {
            return bce_loss(hw_forward(n, e, batch.points).output(), batch.labels);
        };
        const double h = 1e-5;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const auto& layer = net.layers[l];
            for (std::size_t r = 0; r <= layer.fan_in(); ++r) {
                for (std::size_t o = 0; o < layer.fan_out(); ++o) {
                    const bool is_bias = r == layer.fan_in();
                    const double g = is_bias ? grads.layers[l].bias[o] : grads.layers[l].weights(o, r);
                    if (e.stuck_mask[l](r, o)) {
                        CHECK(g == 0.0);
                        continue;
                    }
                    auto up = net, down = net;
                    (is_bias ? up.layers[l].bias[o] : up.layers[l].weights(o, r)) += h;
                    (is_bias ? down.layers[l].bias[o] : down.layers[l].weights(o, r)) -= h;
                    const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
                    CHECK(std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-4}) <= 1e-5);
                }
            }
        }
    }
}

TEST_CASE("zero variability: hardware-aware and regular training are bitwise identical") {
    TrainingConfig cfg;
    cfg.epochs = 60;
    cfg.transfer = all_off();
    auto a = train_hardware_aware(cfg, moons().first, model());
    auto b = train_regular(cfg, moons().first);
    CHECK(a.net == b.net);
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("training is deterministic under a fixed seed") {
    TrainingConfig cfg;
    cfg.epochs = 20;
    auto a = train_hardware_aware(cfg, moons().first, model());
    auto b = train_hardware_aware(cfg, moons().first, model());
    CHECK(a.net == b.net);
    cfg.seed = 2;
    CHECK_FALSE(train_hardware_aware(cfg, moons().first, model()).net == a.net);
}

TEST_CASE("epsilon is resampled for every batch") {
    TrainingConfig cfg;
    cfg.epochs = 3;
    std::vector<std::uint64_t> hashes;
    train_hardware_aware(cfg, moons().first, model(), [&](const BatchTrace& t) {
        REQUIRE(t.sample != nullptr);
        hashes.push_back(hash_matrices(t.sample->epsilon));
    });
    REQUIRE(hashes.size() == 12);  // 875 points, batch 256 -> 4 batches per epoch
    for (std::size_t i = 1; i < hashes.size(); ++i) CHECK(hashes[i] != hashes[i - 1]);
}

TEST_CASE("weight range snapshot is taken from the parameters of the previous update") {
    TrainingConfig cfg;
    cfg.epochs = 2;
    DenseNet previous;
    std::size_t checked = 0;
    train_hardware_aware(cfg, moons().first, model(), [&](const BatchTrace& t) {
        if (t.step > 0) {
            for (std::size_t l = 0; l < previous.layers.size(); ++l) {
                CHECK(t.sample->snapshots[l] == WeightRangeSnapshot::of(to_crossbar(previous.layers[l])));
            }
            ++checked;
        }
        previous = *t.params_after;
    });
    CHECK(checked == 7);
}

TEST_CASE("divergence is reported with the epoch and step") {
    auto bad = moons().first.subset(0, 10);
    bad.points(3, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainingConfig cfg;
    cfg.epochs = 1;
    try {
        train_regular(cfg, bad);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
    }
}

TEST_CASE("configuration errors") {
    TrainingConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train_regular(cfg, moons().first), std::invalid_argument);
    cfg = {};
    cfg.transfer.hrs_fraction = 0.7;
    cfg.transfer.lrs_fraction = 0.7;
    CHECK_THROWS_AS(train_hardware_aware(cfg, moons().first, model()), std::invalid_argument);
    cfg = {};
    cfg.widths = {3, 8, 1};
    CHECK_THROWS_AS(train_regular(cfg, moons().first), std::invalid_argument);
}

TEST_CASE("regular training reaches high clean test accuracy and its loss trends down") {
    const auto& r = nn_default();
    CHECK(accuracy(r.net, moons().second) >= 0.95);
    // Means over consecutive 500-epoch windows never rise.
    const std::size_t window = 500;
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t start = 0; start + window <= r.epoch_loss.size(); start += window) {
        const double mean = std::accumulate(r.epoch_loss.begin() + start,
                                            r.epoch_loss.begin() + start + window, 0.0) / window;
        CHECK(mean <= last);
        last = mean;
    }
}

TEST_CASE("hardware-aware training: deployed accuracy and stuck frequency") {
    const auto& r = hann_default();
    // The network is deployed through a transfer; without noise that is a
    // deterministic map of the weights.
    Rng rng(0);
    auto net = r.net;
    auto clean = sample_epsilon(net, layouts_for(net), model(), all_off(), rng);
    DenseNet deployed;
    for (const auto& layer : net.layers) {
        auto x = to_crossbar(layer);
        TileLayout layout(x.rows(), x.cols());
        deployed.layers.push_back(from_crossbar(simulate_transfer(x, layout, model(), all_off(), rng).phi_prime));
    }
    CHECK(perturbed(net, clean) == net);
    CHECK(accuracy(deployed, moons().first) >= 0.90);

    // 4 batches per epoch, 24 first-layer weights per batch.
    const double trials = 5000.0 * 4.0 * 24.0;
    const double p = 1.0 - std::pow(1.0 - 0.01, 2);
    CHECK(std::abs(r.mean_stuck_fraction[0] - p) <= 3.0 * std::sqrt(p * (1.0 - p) / trials));
}
