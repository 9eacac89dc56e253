#pragma once

// Simulated ex-situ transfer of one weight matrix onto differential device
// pairs: weights -> (G+, G-) conductances -> stuck substitution and
// programming noise -> weights again.
//
// Matrices handled here are in crossbar orientation: one row per input line
// (the last row carries the bias), one column per output neuron. Each entry
// is stored on two devices in adjacent grid columns (2j for G+, 2j+1 for G-).

#include <cstdint>

#include "hwaware/grid.hpp"
#include "hwaware/rng.hpp"
#include "hwaware/variability_db.hpp"

namespace hwaware {

struct WeightRangeSnapshot {
    double phi_min = 0.0;
    double phi_max = 0.0;
    double phi_absmax = 0.0;

    /// Throws std::invalid_argument for an empty or all-zero matrix.
    static WeightRangeSnapshot of(const Matrix& phi);
    /// phi_min = -a, phi_max = +a, phi_absmax = a.
    static WeightRangeSnapshot symmetric(double absmax);

    friend bool operator==(const WeightRangeSnapshot&, const WeightRangeSnapshot&) = default;
};

/// Placement of a weight matrix on 8x8 (by default) tiles and the resulting
/// programming-order exposure n_d of every device.
class TileLayout {
public:
    TileLayout() = default;
    TileLayout(std::size_t weight_rows, std::size_t weight_cols,
               std::size_t tile_rows = 8, std::size_t tile_cols = 8);

    std::size_t weight_rows() const noexcept { return nd_plus_.rows(); }
    std::size_t weight_cols() const noexcept { return nd_plus_.cols(); }
    std::size_t tile_rows() const noexcept { return tile_rows_; }
    std::size_t tile_cols() const noexcept { return tile_cols_; }

    /// n_d of the G+ / G- device holding weight (r, c).
    const Grid<std::uint32_t>& nd_plus() const noexcept { return nd_plus_; }
    const Grid<std::uint32_t>& nd_minus() const noexcept { return nd_minus_; }

    /// Device grid coordinates: rows = weight rows, cols = 2 * weight cols.
    static std::size_t device_col(std::size_t weight_col, bool minus) noexcept {
        return 2 * weight_col + (minus ? 1 : 0);
    }
    /// n_d by device grid coordinate.
    std::uint32_t nd_at_device(std::size_t row, std::size_t device_col) const;

private:
    std::size_t tile_rows_ = 8;
    std::size_t tile_cols_ = 8;
    Grid<std::uint32_t> nd_plus_;
    Grid<std::uint32_t> nd_minus_;
};

/// Which variability sources a transfer applies, plus stuck fractions.
struct TransferSettings {
    bool tuning = true;  // f(g) spread and the offset distribution
    bool bias = true;    // V/3 disturbance by programming order
    bool stuck = true;
    double hrs_fraction = 0.005;
    double lrs_fraction = 0.005;

    /// True when no source can change a conductance.
    bool is_noise_free() const noexcept;
    void validate() const;
};

struct SignedSplit {
    Matrix plus;
    Matrix minus;
};

SignedSplit split_signed(const Matrix& phi);

/// phi / absmax * (g_max - g_min) + g_min, elementwise.
Matrix to_conductance(const Matrix& component, const WeightRangeSnapshot& snap,
                      const ConductanceRange& range);

/// ((g+ - g-) - (g_min - g_max)) / (2 (g_max - g_min)) * (phi_max - phi_min) + phi_min.
Matrix from_conductance(const Matrix& g_plus, const Matrix& g_minus,
                        const WeightRangeSnapshot& snap, const ConductanceRange& range);

/// Programming noise for one device: tuning spread N(0, f(g)^2), offset and
/// bias disturbance. Clamped at 0 uS.
double perturb_device(double g, std::uint32_t n_d, const VariabilityModel& model,
                      const TransferSettings& sources, Rng& rng);

Matrix perturb_conductance(const Matrix& g, const Grid<std::uint32_t>& n_d,
                           const VariabilityModel& model, const TransferSettings& sources,
                           Rng& rng);

struct StuckResult {
    Matrix g_plus;
    Matrix g_minus;
    Mask stuck_plus;
    Mask stuck_minus;
    Mask stuck_mask;  // stuck_plus | stuck_minus
};

/// Each component independently becomes HRS-stuck with probability x and
/// LRS-stuck with probability y. Throws when x + y > 1.
StuckResult apply_stuck(const Matrix& g_plus, const Matrix& g_minus, double x, double y,
                        const VariabilityModel& model, Rng& rng);

struct TransferOutcome {
    Matrix phi_prime;
    Mask stuck_mask;
};

/// One Monte-Carlo transfer of `phi` (crossbar orientation, see header).
TransferOutcome simulate_transfer(const Matrix& phi, const TileLayout& layout,
                                  const VariabilityModel& model,
                                  const TransferSettings& settings, Rng& rng);

}  // namespace hwaware
