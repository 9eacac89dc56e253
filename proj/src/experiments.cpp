#include "hwaware/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

namespace hwaware {

namespace {

// Runs task(worker, index) for index in [0, count) over `threads` workers,
// each taking a contiguous block of indices.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(unsigned, std::size_t)>& task) {
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) task(0, i);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        pool.emplace_back([&task, w, begin, end] {
            for (std::size_t i = begin; i < end; ++i) task(w, i);
        });
    }
}

std::vector<std::uint8_t> classify(const DenseNet& net, const Matrix& X) {
    const auto cache = forward(net, X);
    std::vector<std::uint8_t> out(X.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cache.output()(i, 0) > 0.5 ? 1 : 0;
    return out;
}

DenseNet transferred(const DenseNet& net, const VariabilityModel& model,
                     const std::vector<TileLayout>& layouts, const TransferSettings& settings,
                     std::uint64_t seed, std::uint64_t index) {
    Rng rng = make_stream(seed, index);
    return perturbed(net, sample_epsilon(net, layouts, model, settings, rng));
}

}  // namespace

RobustnessReport evaluate_transfers(const DenseNet& net, const VariabilityModel& model,
                                    const std::vector<TileLayout>& layouts,
                                    const TransferSettings& settings, const LabeledSet& test_set,
                                    std::uint32_t transfers, std::uint64_t seed, unsigned threads) {
    if (transfers == 0) throw std::invalid_argument("evaluate_transfers: need at least one transfer");
    test_set.validate();
    settings.validate();
    const std::size_t n = test_set.size();
    std::vector<std::vector<std::uint32_t>> partial(std::max(1u, threads),
                                                    std::vector<std::uint32_t>(n, 0));
    parallel_for(transfers, threads, [&](unsigned worker, std::size_t t) {
        const auto predicted = classify(transferred(net, model, layouts, settings, seed, t), test_set.points);
        auto& counts = partial[worker];
        for (std::size_t i = 0; i < n; ++i) counts[i] += predicted[i] == test_set.labels[i];
    });
    RobustnessReport report{std::vector<std::uint32_t>(n, 0), transfers};
    for (const auto& counts : partial) {
        for (std::size_t i = 0; i < n; ++i) report.correct[i] += counts[i];
    }
    return report;
}

std::vector<RobustnessBin> robustness_table(const RobustnessReport& report) {
    // Lower edges in percent; a point with fraction f lands in the first bin
    // whose edge satisfies 100 * correct >= edge * transfers.
    static constexpr std::array<std::uint32_t, 6> kEdges{95, 90, 80, 70, 60, 50};
    std::vector<RobustnessBin> bins;
    bins.push_back({"100", 0, 0.0});
    std::uint32_t upper = 100;
    for (auto edge : kEdges) {
        bins.push_back({std::to_string(edge) + "<=x<" + std::to_string(upper), 0, 0.0});
        upper = edge;
    }
    bins.push_back({"x<50", 0, 0.0});

    const std::uint64_t n_transfers = report.transfers;
    for (auto c : report.correct) {
        const std::uint64_t scaled = 100ull * c;
        std::size_t bin = bins.size() - 1;
        if (c == report.transfers) {
            bin = 0;
        } else {
            for (std::size_t k = 0; k < kEdges.size(); ++k) {
                if (scaled >= kEdges[k] * n_transfers) {
                    bin = k + 1;
                    break;
                }
            }
        }
        ++bins[bin].count;
    }
    for (auto& b : bins) {
        b.percent = report.size() ? 100.0 * double(b.count) / double(report.size()) : 0.0;
    }
    return bins;
}

double share_at_least(const RobustnessReport& report, std::uint32_t permille) {
    if (report.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (auto c : report.correct) {
        hits += 1000ull * c >= std::uint64_t(permille) * report.transfers;
    }
    return double(hits) / double(report.size());
}

std::vector<CurvePoint> robustness_curve(const RobustnessReport& report) {
    std::vector<CurvePoint> curve;
    for (std::uint32_t permille = 0; permille <= 1000; permille += 5) {
        curve.push_back({permille / 1000.0, share_at_least(report, permille)});
    }
    return curve;
}

HeatmapGrid heatmap(const DenseNet& net, const VariabilityModel& model,
                    const std::vector<TileLayout>& layouts, const TransferSettings& settings,
                    const GridSpec& grid, std::uint32_t repetitions, std::uint64_t seed,
                    unsigned threads) {
    if (grid.nx == 0 || grid.ny == 0) throw std::invalid_argument("heatmap: grid is empty");
    if (repetitions == 0) throw std::invalid_argument("heatmap: need at least one repetition");
    settings.validate();

    const std::size_t cells = grid.nx * grid.ny;
    Matrix X(cells, 2);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            X(j * grid.nx + i, 0) = grid.x_at(i);
            X(j * grid.nx + i, 1) = grid.y_at(j);
        }
    }

    std::vector<std::vector<std::uint32_t>> partial(std::max(1u, threads),
                                                    std::vector<std::uint32_t>(cells, 0));
    parallel_for(repetitions, threads, [&](unsigned worker, std::size_t r) {
        const auto predicted = classify(transferred(net, model, layouts, settings, seed, r), X);
        auto& ones = partial[worker];
        for (std::size_t c = 0; c < cells; ++c) ones[c] += predicted[c];
    });

    HeatmapGrid out{grid, repetitions, Matrix(grid.ny, grid.nx), Matrix(grid.ny, grid.nx)};
    const double m_total = double(repetitions);
    for (std::size_t c = 0; c < cells; ++c) {
        std::uint64_t k = 0;
        for (const auto& ones : partial) k += ones[c];
        const double mean = double(k) / m_total;
        // Population variance over the k ones and (M - k) zeros.
        const double var = (double(k) * (1.0 - mean) * (1.0 - mean) +
                            double(repetitions - k) * mean * mean) / m_total;
        out.mean[c] = mean;
        out.std[c] = std::sqrt(var);
    }
    return out;
}

}  // namespace hwaware
