#include "hwaware/variability_db.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "hwaware/shapiro_wilk.hpp"

namespace hwaware {

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

// Sample standard deviation (n - 1 denominator).
double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / double(v.size() - 1));
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

void ConductanceRange::validate() const {
    if (!(g_min > 0.0 && g_min < g_max) || !std::isfinite(g_max)) {
        throw std::invalid_argument("conductance range requires 0 < g_min < g_max, got [" +
                                    std::to_string(g_min) + ", " + std::to_string(g_max) + "]");
    }
}

double LinearStdModel::percent_at(double g) const noexcept {
    return std::max(0.0, slope * g + intercept);
}

double LinearStdModel::absolute_at(double g) const noexcept {
    return percent_at(g) * g / 100.0;
}

void OffsetModel::validate() const {
    if (!std::isfinite(mu_off) || !(sigma_off >= 0.0) || !std::isfinite(sigma_off)) {
        throw std::invalid_argument("offset model requires finite mu_off and sigma_off >= 0");
    }
}

BiasDisturbanceDb::BiasDisturbanceDb(std::map<std::uint32_t, std::vector<double>> entries)
    : entries_(std::move(entries)) {
    validate();
}

std::uint32_t BiasDisturbanceDb::nearest_key(std::uint32_t n_d) const {
    if (entries_.empty()) throw std::logic_error("bias database is empty");
    auto hi = entries_.lower_bound(n_d);
    if (hi == entries_.end()) return std::prev(hi)->first;
    if (hi->first == n_d || hi == entries_.begin()) return hi->first;
    auto lo = std::prev(hi);
    // Ties resolve to the smaller key.
    return (n_d - lo->first) <= (hi->first - n_d) ? lo->first : hi->first;
}

void BiasDisturbanceDb::validate() const {
    if (entries_.empty()) throw std::invalid_argument("bias database has no entries");
    for (const auto& [n_d, values] : entries_) {
        if (values.empty()) {
            throw std::invalid_argument("bias database entry n_d=" + std::to_string(n_d) +
                                        " is empty");
        }
        for (double v : values) {
            if (!std::isfinite(v) || std::abs(v) > kMaxBiasDisturbance) {
                throw std::invalid_argument("bias database entry n_d=" + std::to_string(n_d) +
                                            " holds out-of-range disturbance " +
                                            std::to_string(v));
            }
        }
    }
}

void StuckModel::validate(const ConductanceRange& range) const {
    if (!(hrs_low >= 0.0 && hrs_low < hrs_high)) {
        throw std::invalid_argument("stuck model requires 0 <= hrs_low < hrs_high");
    }
    if (lrs_samples.empty()) throw std::invalid_argument("stuck model has no LRS samples");
    for (double g : lrs_samples) {
        if (!(g > range.g_max) || !std::isfinite(g)) {
            throw std::invalid_argument("LRS sample " + std::to_string(g) +
                                        " uS is not above g_max");
        }
    }
}

void VariabilityModel::validate() const {
    range.validate();
    offset_model.validate();
    if (!std::isfinite(std_model.slope) || !std::isfinite(std_model.intercept)) {
        throw std::invalid_argument("std model coefficients must be finite");
    }
    bias_db.validate();
    stuck_model.validate(range);
}

void TuningRecord::validate() const {
    if (!(g_target > 0.0)) throw std::invalid_argument("tuning record needs g_target > 0");
    if (reads.empty()) throw std::invalid_argument("tuning record has no reads");
    for (double r : reads) {
        if (!(r > 0.0)) {
            throw std::invalid_argument("tuning record for device '" + device_id +
                                        "' has a non-positive read");
        }
    }
}

TuningFit fit_tuning_model(const std::vector<TuningRecord>& records) {
    std::map<std::pair<std::string, double>, std::vector<double>> pooled;
    std::set<double> targets;
    for (const auto& rec : records) {
        rec.validate();
        auto& reads = pooled[{rec.device_id, rec.g_target}];
        reads.insert(reads.end(), rec.reads.begin(), rec.reads.end());
        targets.insert(rec.g_target);
    }
    if (targets.size() < 2) {
        throw std::invalid_argument(
            "fit_tuning_model needs at least two distinct target conductances");
    }

    TuningFit fit;
    for (const auto& [key, reads] : pooled) {
        TuningGroupFit g;
        g.device_id = key.first;
        g.g_target = key.second;
        g.n_reads = reads.size();
        g.mean = mean_of(reads);
        g.std_percent = 100.0 * sample_std(reads, g.mean) / g.g_target;
        g.offset_percent = 100.0 * (g.mean - g.g_target) / g.g_target;
        bool constant = std::all_of(reads.begin(), reads.end(),
                                    [&](double r) { return r == reads.front(); });
        if (reads.size() >= 3 && reads.size() <= 5000 && !constant) {
            g.shapiro_p = shapiro_wilk(reads).p;
        }
        fit.groups.push_back(std::move(g));
    }

    // Ordinary least squares of std% on target.
    double n = double(fit.groups.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& g : fit.groups) {
        sx += g.g_target;
        sy += g.std_percent;
    }
    double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& g : fit.groups) {
        sxx += (g.g_target - mx) * (g.g_target - mx);
        sxy += (g.g_target - mx) * (g.std_percent - my);
    }
    fit.std_model.slope = sxy / sxx;
    fit.std_model.intercept = my - fit.std_model.slope * mx;

    std::vector<double> offsets;
    offsets.reserve(fit.groups.size());
    for (const auto& g : fit.groups) offsets.push_back(g.offset_percent);
    fit.offset_model.mu_off = mean_of(offsets);
    fit.offset_model.sigma_off = sample_std(offsets, fit.offset_model.mu_off);
    return fit;
}

BiasDisturbanceDb build_bias_db(const std::vector<BiasRecord>& records) {
    std::map<std::uint32_t, std::vector<double>> entries;
    for (const auto& r : records) {
        if (!std::isfinite(r.delta_g) || std::abs(r.delta_g) > kMaxBiasDisturbance) continue;
        entries[r.n_d].push_back(r.delta_g);
    }
    if (entries.empty()) {
        throw std::invalid_argument("no bias records left after the 60 uS filter");
    }
    return BiasDisturbanceDb(std::move(entries));
}

StuckModel build_stuck_model(const std::vector<double>& lrs_recordings) {
    StuckModel m;
    m.lrs_samples = lrs_recordings;
    return m;
}

double sample_bias(const BiasDisturbanceDb& db, std::uint32_t n_d, Rng& rng) {
    // The last-programmed device sees no later programming pulses.
    if (n_d == 0) return 0.0;
    const auto& values = db.entries().at(db.nearest_key(n_d));
    return values[uniform_index(values.size(), rng)];
}

double sample_stuck_hrs(const StuckModel& model, Rng& rng) {
    return std::uniform_real_distribution<double>(model.hrs_low, model.hrs_high)(rng);
}

double sample_stuck_lrs(const StuckModel& model, Rng& rng) {
    return model.lrs_samples[uniform_index(model.lrs_samples.size(), rng)];
}

VariabilityModel make_synthetic_model(std::uint64_t seed, const SyntheticModelOptions& opts) {
    Rng rng(seed);
    VariabilityModel m;
    m.std_model = {opts.slope, opts.intercept};
    m.offset_model = {opts.mu_off, opts.sigma_off};

    std::normal_distribution<double> step(opts.step_mean, opts.step_std);
    std::map<std::uint32_t, std::vector<double>> entries;
    for (std::uint32_t n_d = 1; n_d <= opts.max_n_d; ++n_d) {
        auto& values = entries[n_d];
        values.reserve(opts.samples_per_n_d);
        for (std::size_t s = 0; s < opts.samples_per_n_d; ++s) {
            double sum = 0.0;
            for (std::uint32_t k = 0; k < n_d; ++k) sum += step(rng);
            values.push_back(std::clamp(sum, -kMaxBiasDisturbance, kMaxBiasDisturbance));
        }
    }
    m.bias_db = BiasDisturbanceDb(std::move(entries));

    // Evenly spread over (lrs_low, lrs_high].
    m.stuck_model.lrs_samples.reserve(opts.lrs_count);
    for (std::size_t i = 1; i <= opts.lrs_count; ++i) {
        m.stuck_model.lrs_samples.push_back(
            opts.lrs_low + (opts.lrs_high - opts.lrs_low) * double(i) / double(opts.lrs_count));
    }
    m.validate();
    return m;
}

}  // namespace hwaware
