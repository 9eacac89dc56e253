#pragma once

// Hardware-aware training: every batch sees a freshly simulated transfer of
// the current weights. The difference phi' - phi enters the forward pass as a
// constant (reparametrization), and stuck weights get no gradient.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hwaware/datasets.hpp"
#include "hwaware/nn_core.hpp"
#include "hwaware/transfer_sim.hpp"

namespace hwaware {

struct TrainingConfig {
    std::size_t batch_size = 256;
    double lr = 0.01;
    std::size_t epochs = 5000;
    TransferSettings transfer;  // sources and stuck fractions x (HRS), y (LRS)
    std::uint64_t seed = 1;
    std::vector<std::size_t> widths{2, 8, 1};
    std::size_t tile_rows = 8;
    std::size_t tile_cols = 8;

    void validate() const;
};

/// Crossbar orientation of a layer: (fan_in + 1) x fan_out, bias in the last row.
Matrix to_crossbar(const LayerParams& layer);
LayerParams from_crossbar(const Matrix& crossbar);

std::vector<TileLayout> layouts_for(const DenseNet& net, std::size_t tile_rows = 8,
                                    std::size_t tile_cols = 8);

/// Per-layer phi' - phi and stuck mask, both in crossbar orientation.
/// Adding epsilon to phi gives the transferred weights phi'.
struct EpsilonSample {
    std::vector<Matrix> epsilon;
    std::vector<Mask> stuck_mask;
    std::vector<WeightRangeSnapshot> snapshots;
};

/// Simulates one transfer of every layer. With every source disabled the
/// transfer is the identity and epsilon is exactly zero.
EpsilonSample sample_epsilon(const DenseNet& net, const std::vector<TileLayout>& layouts,
                             const VariabilityModel& model, const TransferSettings& settings,
                             Rng& rng);

/// net with epsilon added to every parameter.
DenseNet perturbed(const DenseNet& net, const EpsilonSample& sample);

/// Forward pass through phi + epsilon. Gradients from the returned cache are
/// gradients w.r.t. phi since epsilon is held constant.
ForwardCache hw_forward(const DenseNet& net, const EpsilonSample& sample, const Matrix& X);

/// Gradients of the loss at phi + epsilon, zeroed wherever the mask is set
/// (the bias row of the mask gates the bias gradient).
Gradients masked_backward(const DenseNet& net, const EpsilonSample& sample,
                          const ForwardCache& cache, std::span<const std::uint8_t> labels);

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Observation of one optimisation step.
struct BatchTrace {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
    const EpsilonSample* sample = nullptr;  // null for regular training
    const DenseNet* params_after = nullptr;
};
using BatchObserver = std::function<void(const BatchTrace&)>;

struct TrainingResult {
    DenseNet net;
    std::vector<double> epoch_loss;            // mean batch loss per epoch
    std::vector<double> mean_stuck_fraction;   // per layer, averaged over batches
};

TrainingResult train_hardware_aware(const TrainingConfig& config, const LabeledSet& train_set,
                                    const VariabilityModel& model,
                                    const BatchObserver& observer = {});

TrainingResult train_regular(const TrainingConfig& config, const LabeledSet& train_set,
                             const BatchObserver& observer = {});

double accuracy(const DenseNet& net, const LabeledSet& set);

}  // namespace hwaware
