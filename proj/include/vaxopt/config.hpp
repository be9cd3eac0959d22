#pragma once

// Run configuration: one JSON document per run. Every field has a default, so "{}" is a valid
// configuration (Italian preset, deceased objective, homogeneous initial guess).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vaxopt/analysis.hpp"
#include "vaxopt/gradient.hpp"
#include "vaxopt/optimizer.hpp"
#include "vaxopt/serialize.hpp"

namespace vaxopt {

enum class ModelPreset { italy, two_age, synthetic_calibration };

std::string to_string(ModelPreset preset);
ModelPreset parse_preset(std::string_view name);

enum class CalibrationData { synthetic, epi_csv };

struct CalibrationConfig {
    bool enabled = false;
    CalibrationData data = CalibrationData::synthetic;
    double noise_fraction = 0.01;  // synthetic data: noise sd over the final cumulative deaths
    std::size_t n_phases = 0;      // 0 fits every beta phase of the model
    bool fit_recovery_time = false;
    bool fit_initial = false;
    std::size_t chain_length = 20'000;
    int restarts = 5;
};

struct ScanConfig {
    bool enabled = false;
    std::size_t resolution = 11;
    std::vector<int> weeks{0, 4, 8, 12, 16, 20};
};

struct RunConfig {
    std::string name = "run";
    ModelPreset preset = ModelPreset::italy;
    std::optional<ModelParams> params;        // replaces the preset parameters
    std::optional<EpiState> initial_state;    // replaces the preset initial state
    std::string start_date = "2021-02-12";    // calendar date of t = 0, aligns the CSV data
    std::filesystem::path epi_csv;
    std::filesystem::path vaccination_csv;
    double warmup_days = 0.0;                 // simulated without doses before t = 0
    CalibrationConfig calibration;
    Objective objective;
    ScenarioSpec scenario = [] {
        ScenarioSpec s;
        s.horizon_days = 0.0;  // 0 keeps the preset horizon
        return s;
    }();
    bool optimize = true;
    PgdConfig pgd;
    ScanConfig scan;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "runs";

    void validate() const;
};

/// Missing keys take their defaults; unknown keys are an error so typos do not go unnoticed.
RunConfig run_config_from_json(const Json& j);
/// Every field, in a fixed key order.
Json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON without output_dir: two configs that differ only in where
/// they are written describe the same run.
std::string config_hash(const RunConfig& cfg);

}  // namespace vaxopt
