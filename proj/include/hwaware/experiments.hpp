#pragma once

// Monte-Carlo evaluation of trained networks over many simulated transfers.
//
// Transfer i always draws from stream derive_seed(seed, i), so results do not
// depend on the number of worker threads.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hwaware/datasets.hpp"
#include "hwaware/hw_training.hpp"

namespace hwaware {

struct RobustnessReport {
    std::vector<std::uint32_t> correct;  // per test point, in [0, transfers]
    std::uint32_t transfers = 0;

    double fraction(std::size_t i) const { return double(correct[i]) / transfers; }
    std::size_t size() const noexcept { return correct.size(); }
};

RobustnessReport evaluate_transfers(const DenseNet& net, const VariabilityModel& model,
                                    const std::vector<TileLayout>& layouts,
                                    const TransferSettings& settings, const LabeledSet& test_set,
                                    std::uint32_t transfers, std::uint64_t seed,
                                    unsigned threads = 1);

struct RobustnessBin {
    std::string label;
    std::size_t count = 0;
    double percent = 0.0;
};

/// Bins: "100" (every transfer correct), then [95,100), [90,95), [80,90),
/// [70,80), [60,70), [50,60) and "<50".
std::vector<RobustnessBin> robustness_table(const RobustnessReport& report);

struct CurvePoint {
    double threshold = 0.0;  // fraction of transfers, 0..1
    double share = 0.0;      // fraction of test points with correct fraction >= threshold
};

/// Thresholds 0, 0.005, ..., 1.
std::vector<CurvePoint> robustness_curve(const RobustnessReport& report);

/// Share of points whose correct fraction is >= permille / 1000.
double share_at_least(const RobustnessReport& report, std::uint32_t permille);

struct GridSpec {
    double x_min = -1.5;
    double x_max = 2.5;
    double y_min = -1.0;
    double y_max = 1.5;
    std::size_t nx = 200;
    std::size_t ny = 200;

    /// Cell centres.
    double x_at(std::size_t i) const { return x_min + (i + 0.5) * (x_max - x_min) / nx; }
    double y_at(std::size_t j) const { return y_min + (j + 0.5) * (y_max - y_min) / ny; }
};

struct HeatmapGrid {
    GridSpec spec;
    std::uint32_t repetitions = 0;
    Matrix mean;  // ny x nx, mean of the binary class outputs
    Matrix std;   // ny x nx, population std of the same outputs
};

/// Repetition r simulates one transfer (stream r) and classifies every cell with it.
HeatmapGrid heatmap(const DenseNet& net, const VariabilityModel& model,
                    const std::vector<TileLayout>& layouts, const TransferSettings& settings,
                    const GridSpec& grid, std::uint32_t repetitions, std::uint64_t seed,
                    unsigned threads = 1);

}  // namespace hwaware
