#pragma once

// Right-hand side of the SIRDVW model and the quantities derived from it.

#include <span>
#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

/// Value and partials of (S + θV σV V + θW σW W) / (S + σV V + σW W) for one age block.
/// Below kDenominatorGuard the ratio is 1 with zero partials.
struct SeverityRatio {
    double value = 1.0;
    double d_s = 0.0;
    double d_v = 0.0;
    double d_w = 0.0;
};
SeverityRatio severity_ratio(std::span<const double> age_block, const ModelParams& params);

/// Share of first doses that reach susceptibles: S / (S + (1 - δ) I), and its partials.
struct DoseSplit {
    double value = 0.0;
    double d_s = 0.0;
    double d_i = 0.0;
};
DoseSplit dose_split(double s, double i, double detection);

/// Derivative of the full state. `delayed` is the state at t - t_a.
/// `day` selects the weekly phase of β, δ and the controls (constant over the day).
void evaluate_rhs(std::span<const double> x, std::span<const double> delayed, double t, long day,
                  const ModelParams& params, const DosingPolicy& policy, std::span<double> dx);

/// d/dt of the state at time t, with delayed terms read from `history`.
EpiState rhs_eval(const EpiState& state, double t, const ModelParams& params,
                  const DosingPolicy& policy, const DenseHistory& history);

/// Fatality function: IFR_i for t <= t_a, otherwise IFR_i times the delayed severity ratio.
double fatality_from_delayed(std::size_t age, double t, std::span<const double> delayed,
                             const ModelParams& params);
double fatality_fraction(std::size_t age, double t, const DenseHistory& history,
                         const ModelParams& params);

/// H_i(t) = h κ_i I_i(t) × severity ratio at t - t_a.
double hospitalized_from(std::size_t age, std::span<const double> x, std::span<const double> delayed,
                         const ModelParams& params);
double hospitalized(std::size_t age, double t, const DenseHistory& history, const ModelParams& params);

/// Contact matrix with column k scaled by r_k, normalized to unit max entry.
SquareMatrix weighted_contact_matrix(const ModelParams& params);

/// Population-weighted mean IFR.
double aggregate_ifr(const ModelParams& params);

/// Weekly detection rate clamp(IFR_agg / CFR, floor, 1) from a daily CFR series (weekly mean).
WeeklySeries detection_rate(std::span<const double> cfr_daily, const ModelParams& params,
                            double floor = 1e-3);

}  // namespace vaxopt
