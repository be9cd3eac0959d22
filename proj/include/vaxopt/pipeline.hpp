#pragma once

// warm-up -> calibration -> scenario -> baseline solve -> optimization -> diagnostics -> artifact

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vaxopt/artifact.hpp"
#include "vaxopt/calibration.hpp"
#include "vaxopt/config.hpp"
#include "vaxopt/presets.hpp"

namespace vaxopt {

struct CalibrationOutcome {
    std::vector<std::string> names;
    std::vector<double> truth;  // synthetic data only
    LeastSquaresResult least_squares;
    std::vector<ParameterSummary> posterior;
    double acceptance = 0.0;
    double noise_scale = 0.0;
    bool acceptance_warning = false;
};

struct RunResult {
    RunConfig config;
    std::string config_hash;
    Instance scenario;                  // after warm-up, calibration and scenario construction
    Trajectory baseline;                // the initial-guess policy
    std::optional<PolicyOptimum> optimum;
    std::optional<Trajectory> optimal;
    std::optional<VariationReport> variation;
    std::optional<SensitivityScan> sigma_scan;
    std::optional<SensitivityScan> theta_scan;
    std::optional<CalibrationOutcome> calibration;
    std::vector<std::string> warnings;
    std::string failed_stage;           // empty on success
    std::string error;
    double cost_baseline = 0.0;
    double cost_optimal = 0.0;

    bool ok() const { return failed_stage.empty(); }
};

/// Stage names in order: "config", "data", "warmup", "calibration", "scenario", "baseline",
/// "optimization", "diagnostics". `progress` is told each stage as it starts.
RunResult run_pipeline(const RunConfig& cfg, const std::function<void(const std::string&)>& progress = {});

/// summary.json, config.json, and CSV/JSON tables for every result the run produced.
ArtifactFiles render_artifact(const RunResult& run);

/// Runs the pipeline and writes the artifact to <output_dir>/<name>-<first 12 hex of config hash>.
/// Returns the artifact directory. An existing artifact for the same config is reused.
std::filesystem::path run_and_persist(const RunConfig& cfg, bool reuse_existing = true);

/// Directory run_and_persist uses for a config.
std::filesystem::path artifact_dir(const RunConfig& cfg);

}  // namespace vaxopt
