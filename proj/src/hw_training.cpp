#include "hwaware/hw_training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hwaware {

void TrainingConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (widths.size() < 2) throw std::invalid_argument("architecture needs at least two widths");
    if (tile_rows == 0 || tile_cols == 0) throw std::invalid_argument("tile size must be > 0");
    transfer.validate();
}

Matrix to_crossbar(const LayerParams& layer) {
    Matrix x(layer.fan_in() + 1, layer.fan_out());
    for (std::size_t o = 0; o < layer.fan_out(); ++o) {
        for (std::size_t i = 0; i < layer.fan_in(); ++i) x(i, o) = layer.weights(o, i);
        x(layer.fan_in(), o) = layer.bias[o];
    }
    return x;
}

LayerParams from_crossbar(const Matrix& crossbar) {
    if (crossbar.rows() < 2) throw std::invalid_argument("crossbar needs an input row and a bias row");
    const std::size_t fan_in = crossbar.rows() - 1;
    LayerParams layer{Matrix(crossbar.cols(), fan_in), std::vector<double>(crossbar.cols())};
    for (std::size_t o = 0; o < crossbar.cols(); ++o) {
        for (std::size_t i = 0; i < fan_in; ++i) layer.weights(o, i) = crossbar(i, o);
        layer.bias[o] = crossbar(fan_in, o);
    }
    return layer;
}

std::vector<TileLayout> layouts_for(const DenseNet& net, std::size_t tile_rows,
                                    std::size_t tile_cols) {
    std::vector<TileLayout> out;
    for (const auto& l : net.layers) out.emplace_back(l.fan_in() + 1, l.fan_out(), tile_rows, tile_cols);
    return out;
}

EpsilonSample sample_epsilon(const DenseNet& net, const std::vector<TileLayout>& layouts,
                             const VariabilityModel& model, const TransferSettings& settings,
                             Rng& rng) {
    if (layouts.size() != net.layers.size()) {
        throw std::invalid_argument("sample_epsilon: one layout per layer required");
    }
    EpsilonSample s;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Matrix phi = to_crossbar(net.layers[l]);
        s.snapshots.push_back(WeightRangeSnapshot::of(phi));
        if (settings.is_noise_free()) {
            s.epsilon.emplace_back(phi.rows(), phi.cols());
            s.stuck_mask.emplace_back(phi.rows(), phi.cols());
            continue;
        }
        auto outcome = simulate_transfer(phi, layouts[l], model, settings, rng);
        Matrix eps(phi.rows(), phi.cols());
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = outcome.phi_prime[i] - phi[i];
        s.epsilon.push_back(std::move(eps));
        s.stuck_mask.push_back(std::move(outcome.stuck_mask));
    }
    return s;
}

DenseNet perturbed(const DenseNet& net, const EpsilonSample& sample) {
    if (sample.epsilon.size() != net.layers.size()) {
        throw std::invalid_argument("epsilon sample does not match network depth");
    }
    DenseNet out;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix x = to_crossbar(net.layers[l]);
        if (!x.same_shape(sample.epsilon[l])) {
            throw std::invalid_argument("epsilon shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += sample.epsilon[l][i];
        out.layers.push_back(from_crossbar(x));
    }
    return out;
}

ForwardCache hw_forward(const DenseNet& net, const EpsilonSample& sample, const Matrix& X) {
    return forward(perturbed(net, sample), X);
}

Gradients masked_backward(const DenseNet& net, const EpsilonSample& sample,
                          const ForwardCache& cache, std::span<const std::uint8_t> labels) {
    // d phi' / d phi is the identity, so the gradient at phi' is the gradient at phi.
    Gradients g = backward(perturbed(net, sample), cache, labels);
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
        const Mask& mask = sample.stuck_mask[l];
        auto& layer = g.layers[l];
        if (mask.rows() != layer.fan_in() + 1 || mask.cols() != layer.fan_out()) {
            throw std::invalid_argument("stuck mask shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t o = 0; o < layer.fan_out(); ++o) {
            for (std::size_t i = 0; i < layer.fan_in(); ++i) {
                if (mask(i, o)) layer.weights(o, i) = 0.0;
            }
            if (mask(layer.fan_in(), o)) layer.bias[o] = 0.0;
        }
    }
    return g;
}

namespace {

// Stream indices under the training seed.
constexpr std::uint64_t kShuffleStream = 0;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

bool all_finite(const DenseNet& net) {
    for (const auto& l : net.layers) {
        for (double w : l.weights.values()) if (!std::isfinite(w)) return false;
        for (double b : l.bias) if (!std::isfinite(b)) return false;
    }
    return true;
}

TrainingResult run_training(const TrainingConfig& config, const LabeledSet& train_set,
                            const VariabilityModel* model, const BatchObserver& observer) {
    config.validate();
    train_set.validate();
    if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
    if (model) model->validate();

    Rng shuffle_rng = make_stream(config.seed, kShuffleStream);
    Rng init_rng = make_stream(config.seed, kInitStream);
    Rng noise_rng = make_stream(config.seed, kNoiseStream);

    TrainingResult result;
    result.net = DenseNet::random(config.widths, init_rng);
    if (result.net.input_width() != train_set.points.cols()) {
        throw std::invalid_argument("architecture input width does not match the data");
    }
    const auto layouts = layouts_for(result.net, config.tile_rows, config.tile_cols);
    AdamState adam = AdamState::for_net(result.net, {config.lr});
    result.mean_stuck_fraction.assign(result.net.layers.size(), 0.0);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Matrix X(end - start, train_set.points.cols());
            std::vector<std::uint8_t> y(end - start);
            for (std::size_t k = start; k < end; ++k) {
                for (std::size_t c = 0; c < X.cols(); ++c) X(k - start, c) = train_set.points(order[k], c);
                y[k - start] = train_set.labels[order[k]];
            }

            double loss;
            Gradients grads;
            EpsilonSample sample;
            if (model) {
                sample = sample_epsilon(result.net, layouts, *model, config.transfer, noise_rng);
                auto cache = hw_forward(result.net, sample, X);
                loss = bce_loss(cache.output(), y);
                grads = masked_backward(result.net, sample, cache, y);
                for (std::size_t l = 0; l < sample.stuck_mask.size(); ++l) {
                    const auto& m = sample.stuck_mask[l];
                    const auto hit = std::count(m.values().begin(), m.values().end(), std::uint8_t{1});
                    result.mean_stuck_fraction[l] += double(hit) / double(m.size());
                }
            } else {
                auto cache = forward(result.net, X);
                loss = bce_loss(cache.output(), y);
                grads = backward(result.net, cache, y);
            }

            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training diverged: non-finite loss at epoch " << epoch << ", step " << step;
                throw TrainingDiverged(msg.str());
            }
            adam_step(result.net, grads, adam);
            if (!all_finite(result.net)) {
                std::ostringstream msg;
                msg << "training diverged: non-finite parameter after epoch " << epoch << ", step "
                    << step << " (loss " << loss << ")";
                throw TrainingDiverged(msg.str());
            }
            if (observer) {
                observer(BatchTrace{epoch, step, loss, model ? &sample : nullptr, &result.net});
            }
            loss_sum += loss;
            ++batches;
            ++step;
        }
        result.epoch_loss.push_back(loss_sum / double(batches));
    }
    if (model && step > 0) {
        for (double& f : result.mean_stuck_fraction) f /= double(step);
    }
    return result;
}

}  // namespace

TrainingResult train_hardware_aware(const TrainingConfig& config, const LabeledSet& train_set,
                                    const VariabilityModel& model, const BatchObserver& observer) {
    return run_training(config, train_set, &model, observer);
}

TrainingResult train_regular(const TrainingConfig& config, const LabeledSet& train_set,
                             const BatchObserver& observer) {
    return run_training(config, train_set, nullptr, observer);
}

double accuracy(const DenseNet& net, const LabeledSet& set) {
    if (set.size() == 0) return 0.0;
    const auto cache = forward(net, set.points);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const std::uint8_t predicted = cache.output()(i, 0) > 0.5 ? 1 : 0;
        hits += predicted == set.labels[i];
    }
    return double(hits) / double(set.size());
}

}  // namespace hwaware
