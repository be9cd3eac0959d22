#pragma once

// Two-stage calibration of weekly transmission rates, recovery time and initial-state factors
// against per-age deceased series: bounded Nelder-Mead least squares, then random-walk
// Metropolis-Hastings.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

struct PriorConfig {
    double zeta_lo = 0.7;
    double zeta_hi = 1.3;
    double t_r_mean = 14.20;
    double t_r_variance = 5.94;
    double beta_relative_sd = 0.5;  // beta prior sd as a fraction of the LS estimate
};

enum class NoiseScaleRule {
    first_differences,   // s = RMS of first differences of the data
    second_differences,  // s = RMS of second differences / sqrt(6)
};

struct ChainConfig {
    std::size_t length = 50'000;
    double burn_in = 0.2;             // fraction of length discarded
    double proposal_fraction = 0.02;  // initial proposal sd as a fraction of the prior width
    double target_acceptance = 0.23;
    std::size_t adapt_interval = 100;
    std::uint64_t seed = 1;
    bool use_likelihood = true;
    NoiseScaleRule noise_rule = NoiseScaleRule::first_differences;
};

struct LeastSquaresConfig {
    int restarts = 5;  // random starts on top of the nominal one
    int max_iterations = 3000;
    double simplex_tolerance = 1e-8;  // characteristic simplex size in the unbounded coordinates
    std::uint64_t seed = 1;
    double beta_max = 1.0;
    double t_r_min = 1.0;
    double t_r_max = 60.0;
};

/// Parameters, in order: beta per phase, then t_R if fitted, then zeta_S, zeta_I, zeta_R per age
/// if fitted. The initial state is I = zeta_I I_D, R = zeta_R R_D, D = D_D and
/// S = (N - I - R - D) zeta_S, with V and W copied from the nominal state.
struct CalibrationSpec {
    ModelParams params;
    EpiState nominal;
    DosingPolicy policy;
    GridSpec grid;
    std::size_t n_phases = 1;
    bool fit_recovery_time = true;
    bool fit_initial = true;
    std::vector<std::vector<double>> deceased;  // [age][day] for days 0 .. tf
    PriorConfig priors;
    LeastSquaresConfig ls;
    ChainConfig chain;

    void validate() const;
    std::size_t n_parameters() const;
    std::vector<std::string> parameter_names() const;
    std::vector<double> lower_bounds() const;
    std::vector<double> upper_bounds() const;
    /// Betas from params (last value repeated), t_R = 1/gamma, all zetas 1.
    std::vector<double> nominal_parameters() const;

    ModelParams model_params(std::span<const double> theta) const;
    EpiState initial_state(std::span<const double> theta) const;
};

/// Per-age deceased at integer days, [age][day].
std::vector<std::vector<double>> deceased_series(const Trajectory& traj);

/// sum_i int (D_i - data_i)^2 dt by the trapezoidal rule on days.
double deceased_misfit(const std::vector<std::vector<double>>& model, const std::vector<std::vector<double>>& data);

/// Misfit of a forward solve at theta; +inf when the solve fails.
double error_functional(std::span<const double> theta, const CalibrationSpec& spec);

struct LeastSquaresResult {
    std::vector<double> estimates;
    double error = 0.0;
    double initial_error = 0.0;  // at the nominal parameters
    bool converged = false;
    int evaluations = 0;
    std::vector<std::string> at_bound;  // parameters within 1% of the box width from a bound
    bool boundary_flag() const { return !at_bound.empty(); }
};

LeastSquaresResult least_squares_fit(const CalibrationSpec& spec);

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double median = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
};

struct Posterior {
    std::vector<std::string> names;
    std::vector<double> samples;  // post burn-in, row-major [sample][parameter]
    std::vector<ParameterSummary> summaries;
    double acceptance = 0.0;      // post burn-in
    double noise_scale = 0.0;
    bool acceptance_warning = false;

    std::size_t n_samples() const { return names.empty() ? 0 : samples.size() / names.size(); }
    const ParameterSummary& summary(const std::string& name) const;
};

struct ChainResult {
    std::size_t dim = 0;
    std::vector<double> samples;  // post burn-in, row-major
    double acceptance = 0.0;
    std::vector<double> proposal_sd;  // after adaptation
};

using LogDensity = std::function<double(std::span<const double>)>;

/// Random-walk Metropolis with independent Gaussian proposals. During burn-in every
/// adapt_interval steps the proposal sds are multiplied by exp(rate - target).
ChainResult metropolis_hastings(const LogDensity& log_target, std::vector<double> start,
                                std::vector<double> proposal_sd, const ChainConfig& cfg);

/// Likelihood scale s from the data roughness.
double noise_scale(const std::vector<std::vector<double>>& data, NoiseScaleRule rule);

/// Targets exp(-E / (2 s^2)) times the priors, starting from the LS estimates.
Posterior mcmc_sample(const CalibrationSpec& spec, std::span<const double> seed_estimates);

std::vector<ParameterSummary> summarize(const std::vector<std::string>& names, std::span<const double> samples);

/// Deceased series of a forward solve with additive N(0, noise^2) errors.
std::vector<std::vector<double>> make_synthetic_truth(const ModelParams& params, const EpiState& x0,
                                                      const DosingPolicy& policy, const GridSpec& grid,
                                                      double noise, std::uint64_t seed);

}  // namespace vaxopt
