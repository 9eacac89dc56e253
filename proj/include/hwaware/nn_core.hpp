#pragma once

// Fully connected sigmoid network with manual backpropagation, binary
// cross-entropy loss and Adam.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "hwaware/grid.hpp"
#include "hwaware/rng.hpp"

namespace hwaware {

struct LayerParams {
    Matrix weights;               // fan_out x fan_in
    std::vector<double> bias;     // fan_out

    std::size_t fan_in() const noexcept { return weights.cols(); }
    std::size_t fan_out() const noexcept { return weights.rows(); }

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct DenseNet {
    std::vector<LayerParams> layers;

    /// Zero-initialised network with the given layer widths, e.g. {2, 8, 1}.
    static DenseNet zeros(std::span<const std::size_t> widths);
    /// Weights and biases uniform on +-sqrt(1 / fan_in).
    static DenseNet random(std::span<const std::size_t> widths, Rng& rng);

    std::vector<std::size_t> widths() const;
    std::size_t input_width() const { return layers.front().fan_in(); }
    void validate() const;

    friend bool operator==(const DenseNet&, const DenseNet&) = default;
};

/// Activations kept for backward. pre[l] is layer l's pre-activation and
/// act[l] its input (act[0] = X, act.back() = network output).
struct ForwardCache {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;

    const Matrix& output() const { return act.back(); }
};

/// X is batch x fan_in. Sigmoid follows every layer.
ForwardCache forward(const DenseNet& net, const Matrix& X);

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy; y_hat is batch x 1, labels in {0, 1}.
double bce_loss(const Matrix& y_hat, std::span<const std::uint8_t> labels);

/// Same shapes as DenseNet, holding d loss / d parameter.
using Gradients = DenseNet;

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   std::span<const std::uint8_t> labels);

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    Gradients m;
    Gradients v;
    std::uint64_t step = 0;

    static AdamState for_net(const DenseNet& net, AdamConfig config = {});
};

/// theta -= lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments.
void adam_step(DenseNet& params, const Gradients& grads, AdamState& state);

double sigmoid(double z) noexcept;

// Checkpoints: {"format": "hwaware-network", "widths": [...],
//               "layers": [{"fan_in", "fan_out", "weights": [row-major], "bias": [...]}]}
nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& doc);
void save_net(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_net(const std::filesystem::path& path);

}  // namespace hwaware
