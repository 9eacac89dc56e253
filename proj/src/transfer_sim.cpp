#include "hwaware/transfer_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hwaware {

WeightRangeSnapshot WeightRangeSnapshot::of(const Matrix& phi) {
    if (phi.empty()) throw std::invalid_argument("weight range of an empty matrix");
    auto [lo, hi] = std::minmax_element(phi.values().begin(), phi.values().end());
    WeightRangeSnapshot s{*lo, *hi, std::max(std::abs(*lo), std::abs(*hi))};
    if (!(s.phi_absmax > 0.0)) {
        throw std::invalid_argument("weight matrix is all zero; it has no conductance mapping");
    }
    return s;
}

WeightRangeSnapshot WeightRangeSnapshot::symmetric(double absmax) {
    return {-absmax, absmax, absmax};
}

TileLayout::TileLayout(std::size_t weight_rows, std::size_t weight_cols, std::size_t tile_rows,
                       std::size_t tile_cols)
    : tile_rows_(tile_rows),
      tile_cols_(tile_cols),
      nd_plus_(weight_rows, weight_cols),
      nd_minus_(weight_rows, weight_cols) {
    if (tile_rows == 0 || tile_cols == 0) throw std::invalid_argument("tile size must be > 0");
    const std::size_t dev_rows = weight_rows;
    const std::size_t dev_cols = 2 * weight_cols;
    // Each tile is programmed top to bottom, left to right; n_d counts the
    // devices of the same tile programmed afterwards.
    for (std::size_t r = 0; r < dev_rows; ++r) {
        const std::size_t tr0 = (r / tile_rows) * tile_rows;
        const std::size_t h = std::min(tile_rows, dev_rows - tr0);
        for (std::size_t c = 0; c < dev_cols; ++c) {
            const std::size_t tc0 = (c / tile_cols) * tile_cols;
            const std::size_t w = std::min(tile_cols, dev_cols - tc0);
            const std::size_t index = (r - tr0) * w + (c - tc0);
            const auto n_d = static_cast<std::uint32_t>(h * w - 1 - index);
            (c % 2 == 0 ? nd_plus_ : nd_minus_)(r, c / 2) = n_d;
        }
    }
}

std::uint32_t TileLayout::nd_at_device(std::size_t row, std::size_t device_col) const {
    return (device_col % 2 == 0 ? nd_plus_ : nd_minus_)(row, device_col / 2);
}

bool TransferSettings::is_noise_free() const noexcept {
    return !tuning && !bias && (!stuck || (hrs_fraction == 0.0 && lrs_fraction == 0.0));
}

void TransferSettings::validate() const {
    if (!(hrs_fraction >= 0.0 && lrs_fraction >= 0.0 && hrs_fraction + lrs_fraction <= 1.0)) {
        throw std::invalid_argument("stuck fractions require x, y >= 0 and x + y <= 1");
    }
}

SignedSplit split_signed(const Matrix& phi) {
    SignedSplit s{Matrix(phi.rows(), phi.cols()), Matrix(phi.rows(), phi.cols())};
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (phi[i] > 0.0) s.plus[i] = phi[i];
        else if (phi[i] < 0.0) s.minus[i] = -phi[i];
    }
    return s;
}

Matrix to_conductance(const Matrix& component, const WeightRangeSnapshot& snap,
                      const ConductanceRange& range) {
    if (!(snap.phi_absmax > 0.0)) {
        throw std::invalid_argument("to_conductance: phi_absmax must be > 0");
    }
    Matrix g(component.rows(), component.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (component[i] < 0.0) throw std::invalid_argument("to_conductance: negative component");
        g[i] = component[i] / snap.phi_absmax * range.span() + range.g_min;
    }
    return g;
}

Matrix from_conductance(const Matrix& g_plus, const Matrix& g_minus,
                        const WeightRangeSnapshot& snap, const ConductanceRange& range) {
    if (!g_plus.same_shape(g_minus)) throw std::invalid_argument("from_conductance: shape mismatch");
    const double lowest = range.g_min - range.g_max;
    const double width = range.span() - lowest;  // 2 (g_max - g_min)
    const double phi_width = snap.phi_max - snap.phi_min;
    Matrix phi(g_plus.rows(), g_plus.cols());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] = ((g_plus[i] - g_minus[i]) - lowest) / width * phi_width + snap.phi_min;
    }
    return phi;
}

double perturb_device(double g, std::uint32_t n_d, const VariabilityModel& model,
                      const TransferSettings& sources, Rng& rng) {
    double out = g;
    if (sources.tuning) {
        const double sigma = model.std_model.absolute_at(g);
        if (sigma > 0.0) out += std::normal_distribution<double>(0.0, sigma)(rng);
        const auto& off = model.offset_model;
        double off_pct = off.mu_off;
        if (off.sigma_off > 0.0) off_pct = std::normal_distribution<double>(off.mu_off, off.sigma_off)(rng);
        out += off_pct * g / 100.0;
    }
    if (sources.bias) out += sample_bias(model.bias_db, n_d, rng);
    return std::max(out, 0.0);
}

Matrix perturb_conductance(const Matrix& g, const Grid<std::uint32_t>& n_d,
                           const VariabilityModel& model, const TransferSettings& sources,
                           Rng& rng) {
    if (g.rows() != n_d.rows() || g.cols() != n_d.cols()) {
        throw std::invalid_argument("perturb_conductance: n_d shape mismatch");
    }
    Matrix out(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = perturb_device(g[i], n_d[i], model, sources, rng);
    }
    return out;
}

StuckResult apply_stuck(const Matrix& g_plus, const Matrix& g_minus, double x, double y,
                        const VariabilityModel& model, Rng& rng) {
    if (!(x >= 0.0 && y >= 0.0 && x + y <= 1.0)) {
        throw std::invalid_argument("apply_stuck: requires x, y >= 0 and x + y <= 1");
    }
    if (!g_plus.same_shape(g_minus)) throw std::invalid_argument("apply_stuck: shape mismatch");
    StuckResult r{g_plus, g_minus, Mask(g_plus.rows(), g_plus.cols()),
                  Mask(g_plus.rows(), g_plus.cols()), Mask(g_plus.rows(), g_plus.cols())};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto substitute = [&](double& g, std::uint8_t& flag) {
        const double draw = u(rng);
        if (draw < x) {
            g = sample_stuck_hrs(model.stuck_model, rng);
            flag = 1;
        } else if (draw < x + y) {
            g = sample_stuck_lrs(model.stuck_model, rng);
            flag = 1;
        }
    };
    for (std::size_t i = 0; i < g_plus.size(); ++i) {
        substitute(r.g_plus[i], r.stuck_plus[i]);
        substitute(r.g_minus[i], r.stuck_minus[i]);
        r.stuck_mask[i] = r.stuck_plus[i] | r.stuck_minus[i];
    }
    return r;
}

TransferOutcome simulate_transfer(const Matrix& phi, const TileLayout& layout,
                                  const VariabilityModel& model,
                                  const TransferSettings& settings, Rng& rng) {
    settings.validate();
    if (layout.weight_rows() != phi.rows() || layout.weight_cols() != phi.cols()) {
        throw std::invalid_argument("simulate_transfer: layout does not match weight shape");
    }
    const auto snap = WeightRangeSnapshot::of(phi);
    const auto parts = split_signed(phi);
    Matrix g_plus = to_conductance(parts.plus, snap, model.range);
    Matrix g_minus = to_conductance(parts.minus, snap, model.range);

    Mask stuck_plus(phi.rows(), phi.cols());
    Mask stuck_minus(phi.rows(), phi.cols());
    Mask mask(phi.rows(), phi.cols());
    if (settings.stuck) {
        auto s = apply_stuck(g_plus, g_minus, settings.hrs_fraction, settings.lrs_fraction, model, rng);
        g_plus = std::move(s.g_plus);
        g_minus = std::move(s.g_minus);
        stuck_plus = std::move(s.stuck_plus);
        stuck_minus = std::move(s.stuck_minus);
        mask = std::move(s.stuck_mask);
    }

    if (settings.tuning || settings.bias) {
        // Stuck devices are never tuned, so they keep their sampled value.
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (!stuck_plus[i]) {
                g_plus[i] = perturb_device(g_plus[i], layout.nd_plus()[i], model, settings, rng);
            }
            if (!stuck_minus[i]) {
                g_minus[i] = perturb_device(g_minus[i], layout.nd_minus()[i], model, settings, rng);
            }
        }
    }

    return {from_conductance(g_plus, g_minus, snap, model.range), std::move(mask)};
}

}  // namespace hwaware
