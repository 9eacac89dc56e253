#pragma once

// Model file (JSON) and raw characterization CSV ingestion.
//
// Model file layout:
//   {
//     "format": "hwaware-variability-model", "version": 1,
//     "range":        {"g_min_uS": 100, "g_max_uS": 400},
//     "std_model":    {"slope_pct_per_uS": -0.002, "intercept_pct": 1.4},
//     "offset_model": {"mu_off_pct": -0.5, "sigma_off_pct": 0.5},
//     "bias_db":      {"1": [-0.2, ...], "2": [...], ...},
//     "stuck_model":  {"hrs_low_uS": 10, "hrs_high_uS": 100, "lrs_uS": [...]}
//   }
//
// Raw CSVs (header row required):
//   tuning: device_id,g_target_uS,read_uS
//   bias:   n_d,delta_g_uS
//   stuck:  kind,g_uS        (kind is HRS or LRS)

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hwaware/variability_db.hpp"

namespace hwaware {

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json model_to_json(const VariabilityModel& model);
VariabilityModel model_from_json(const nlohmann::json& doc);

void save_model(const VariabilityModel& model, const std::filesystem::path& path);
/// Throws ModelFormatError naming the file and the offending section or field.
VariabilityModel load_model(const std::filesystem::path& path);

std::vector<TuningRecord> read_tuning_csv(const std::filesystem::path& path);
std::vector<BiasRecord> read_bias_csv(const std::filesystem::path& path);

struct StuckRecordings {
    std::vector<double> hrs;
    std::vector<double> lrs;
};
StuckRecordings read_stuck_csv(const std::filesystem::path& path);

}  // namespace hwaware
