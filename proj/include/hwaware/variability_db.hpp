#pragma once

// Statistical description of TiO2 crossbar non-idealities: conductance tuning
// imprecision, V/3 biasing-scheme disturbances and stuck devices.
//
// Units: conductances are in microsiemens; percentages are plain numbers
// (0.57 means 0.57 %).

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwaware/rng.hpp"

namespace hwaware {

/// Achievable programming window [g_min, g_max].
struct ConductanceRange {
    double g_min = 100.0;
    double g_max = 400.0;

    double span() const noexcept { return g_max - g_min; }
    void validate() const;

    friend bool operator==(const ConductanceRange&, const ConductanceRange&) = default;
};

/// Tuning std as a percentage of the target, linear in the target.
struct LinearStdModel {
    double slope = 0.0;      // % per uS
    double intercept = 0.0;  // %

    /// f(g) in percent, clamped at zero.
    double percent_at(double g) const noexcept;
    /// f(g) * g / 100, in uS.
    double absolute_at(double g) const noexcept;

    friend bool operator==(const LinearStdModel&, const LinearStdModel&) = default;
};

/// Distribution of (achieved mean - target) / target, in percent.
struct OffsetModel {
    double mu_off = 0.0;
    double sigma_off = 0.0;

    void validate() const;
    friend bool operator==(const OffsetModel&, const OffsetModel&) = default;
};

/// Largest disturbance kept in the bias database; larger changes are device failures.
inline constexpr double kMaxBiasDisturbance = 60.0;

/// Recorded disturbances keyed by n_d, the number of devices programmed after
/// the disturbed one.
class BiasDisturbanceDb {
public:
    BiasDisturbanceDb() = default;
    explicit BiasDisturbanceDb(std::map<std::uint32_t, std::vector<double>> entries);

    const std::map<std::uint32_t, std::vector<double>>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    /// Populated key closest to n_d; ties go to the smaller key.
    std::uint32_t nearest_key(std::uint32_t n_d) const;

    void validate() const;
    friend bool operator==(const BiasDisturbanceDb&, const BiasDisturbanceDb&) = default;

private:
    std::map<std::uint32_t, std::vector<double>> entries_;
};

struct StuckModel {
    double hrs_low = 10.0;
    double hrs_high = 100.0;
    std::vector<double> lrs_samples;

    void validate(const ConductanceRange& range) const;
    friend bool operator==(const StuckModel&, const StuckModel&) = default;
};

struct VariabilityModel {
    LinearStdModel std_model;
    OffsetModel offset_model;
    BiasDisturbanceDb bias_db;
    StuckModel stuck_model;
    ConductanceRange range;

    void validate() const;
    friend bool operator==(const VariabilityModel&, const VariabilityModel&) = default;
};

// ---------------------------------------------------------------------------
// Fitting

/// One tune/untune repetition of one device at one target level.
struct TuningRecord {
    std::string device_id;
    double g_target = 0.0;
    std::vector<double> reads;

    void validate() const;
};

/// Per (device, level) group summary.
struct TuningGroupFit {
    std::string device_id;
    double g_target = 0.0;
    std::size_t n_reads = 0;
    double mean = 0.0;           // uS
    double std_percent = 0.0;    // 100 * std / g_target
    double offset_percent = 0.0; // 100 * (mean - g_target) / g_target
    std::optional<double> shapiro_p;  // absent when the group is too small or constant
};

struct TuningFit {
    LinearStdModel std_model;
    OffsetModel offset_model;
    std::vector<TuningGroupFit> groups;
};

/// Records sharing (device_id, g_target) are pooled into one group before the
/// normal fit. Throws std::invalid_argument with fewer than two distinct targets.
TuningFit fit_tuning_model(const std::vector<TuningRecord>& records);

struct BiasRecord {
    std::uint32_t n_d = 0;
    double delta_g = 0.0;
};

/// Drops |delta_g| > 60 uS and groups the rest by n_d. Throws when nothing is left.
BiasDisturbanceDb build_bias_db(const std::vector<BiasRecord>& records);

/// Stuck model from raw HRS / LRS recordings. HRS draws stay uniform on
/// [10, 100] uS regardless of the recorded values; the LRS recordings become
/// the empirical resampling pool.
StuckModel build_stuck_model(const std::vector<double>& lrs_recordings);

// ---------------------------------------------------------------------------
// Sampling. All samplers take the caller's RNG and never mutate the model.

double sample_bias(const BiasDisturbanceDb& db, std::uint32_t n_d, Rng& rng);
double sample_stuck_hrs(const StuckModel& model, Rng& rng);
double sample_stuck_lrs(const StuckModel& model, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic default model. These are fixture values, not measured data.

struct SyntheticModelOptions {
    double slope = -0.002;
    double intercept = 1.4;
    double mu_off = -0.5;
    double sigma_off = 0.5;
    std::uint32_t max_n_d = 63;
    std::size_t samples_per_n_d = 500;
    double step_mean = -0.3;
    double step_std = 1.5;
    std::size_t lrs_count = 64;
    double lrs_low = 400.0;
    double lrs_high = 1200.0;
};

VariabilityModel make_synthetic_model(std::uint64_t seed, const SyntheticModelOptions& opts = {});

}  // namespace hwaware
