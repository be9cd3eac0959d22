#pragma once

// Batch workloads: many forward solves for one instance, the brute-force policy grid and
// seeded calibration replicates.

#include <cstdint>
#include <span>
#include <vector>

#include "vaxopt/execution.hpp"
#include "vaxopt/gradient.hpp"
#include "vaxopt/presets.hpp"

namespace vaxopt {

/// Cost of every first-dose table under every objective, row-major [table][objective].
/// A table whose forward solve fails costs +inf.
std::vector<double> batch_costs(const Instance& inst, std::span<const std::vector<double>> tables,
                                std::span<const Objective> objectives, Execution exec = Execution::parallel);

struct GridSearchResult {
    std::vector<double> best_cost;                // per objective
    std::vector<std::vector<double>> best_table;  // per objective
    std::size_t candidates = 0;
    std::size_t feasible = 0;
};

/// Every table with coordinates in {0, 1/(levels-1), ..., 1} times the daily cap of its week that
/// satisfies the weekly budgets, evaluated for each objective. Ties keep the first table in
/// enumeration order (coordinate 0 varies fastest).
GridSearchResult grid_search(const Instance& inst, std::span<const Objective> objectives, std::size_t levels,
                             Execution exec = Execution::parallel);

struct RecoveryStudyConfig {
    std::size_t replicates = 20;
    std::uint64_t first_seed = 1;
    double noise_fraction = 0.01;  // noise sd over the final cumulative deaths
    std::size_t chain_length = 20'000;
};

struct RecoveryReplicate {
    std::uint64_t seed = 0;
    std::vector<double> truth;
    std::vector<double> ls_estimates;
    std::vector<double> medians;
    std::vector<double> lo95;
    std::vector<double> hi95;
    double acceptance = 0.0;

    double worst_ls_error() const;      // max relative error of the LS estimates
    double worst_median_error() const;  // max relative error of the posterior medians
    bool covered() const;               // truth inside every 95% interval
};

/// LS then MCMC on synthetic_calibration_instance data, one replicate per seed.
std::vector<RecoveryReplicate> recovery_study(const RecoveryStudyConfig& cfg, Execution exec = Execution::parallel);

}  // namespace vaxopt
