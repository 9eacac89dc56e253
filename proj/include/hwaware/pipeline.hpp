#pragma once

// End-to-end experiment: train a hardware-aware and a regular network on the
// same half-moons split, evaluate both over the same simulated transfers and
// write the artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hwaware/experiments.hpp"
#include "hwaware/hw_training.hpp"

namespace hwaware {

inline constexpr const char* kToolVersion = "0.3.0";

/// Bad or unreadable inputs. The CLI maps this to exit status 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetOptions {
    std::size_t n_train = 875;
    std::size_t n_test = 200;
    double noise_std = 0.1;
    std::uint64_t seed = 7;
};

struct HeatmapOptions {
    bool enabled = true;
    GridSpec grid;
    std::uint32_t repetitions = 1000;
};

struct ExperimentConfig {
    TrainingConfig training;
    DatasetOptions dataset;
    std::optional<std::filesystem::path> model_path;  // synthetic model when absent
    std::uint64_t model_seed = 2023;
    std::uint32_t transfers = 10000;
    std::uint64_t eval_seed = 99;
    HeatmapOptions heatmap;
    unsigned threads = 1;
};

/// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
/// Relative model paths resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws InputError for a missing or malformed model file.
VariabilityModel resolve_model(const ExperimentConfig& config);

std::pair<LabeledSet, LabeledSet> make_dataset(const DatasetOptions& options);

/// FNV-1a 64 of the canonical config dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// Artifact writers. Formats are plain CSV with one header line.
void write_report_json(const RobustnessReport& report, const LabeledSet& test_set,
                       const std::filesystem::path& path);
void write_table_csv(const RobustnessReport& report, const std::filesystem::path& path);
void write_curve_csv(const RobustnessReport& report, const std::filesystem::path& path);
void write_heatmap_csv(const HeatmapGrid& grid, const std::filesystem::path& path);

struct ExperimentSummary {
    double hann_clean_test_accuracy = 0.0;
    double nn_clean_test_accuracy = 0.0;
    double hann_share_95 = 0.0;
    double nn_share_95 = 0.0;
    std::vector<double> hann_mean_stuck_fraction;
};

/// Writes into out_dir:
///   manifest.json
///   hann/{network.json,report.json,table.csv,curve.csv,heatmap.csv}
///   nn/  {network.json,report.json,table.csv,curve.csv,heatmap.csv}
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir);

}  // namespace hwaware
