#pragma once

// Ready-made parameter sets: the Italian setting and small synthetic instances used by tests.

#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

/// Everything a forward solve needs.
struct Instance {
    ModelParams params;
    EpiState x0;
    DosingPolicy policy;
    GridSpec grid;
};

/// Median weekly transmission rates of the calibrated Italian window (21 phases).
const std::vector<double>& italy_beta_medians();

/// Divides c so that diag(r) c has spectral radius 1.
SquareMatrix scaled_to_unit_radius(SquareMatrix c, const std::vector<double>& r);

/// Illustrative 5x5 contact structure, scaled so that diag(r) C has spectral radius 1.
/// With that scaling a fully susceptible population has R0 = beta / gamma.
SquareMatrix italy_contact(const std::vector<double>& r);

/// Table parameters on the standard age axis with Italian populations and synthetic h, kappa.
ModelParams italy_params();
EpiState italy_initial_state(const ModelParams& params);

/// 151-day Italian horizon with a constant weekly budget and a zero policy.
Instance italy_instance(double n_week = 2.1e6, int delta_w = 21);

/// Single age class where the model reduces to SIRD (sigma = theta = 1, mu_r = 0, no doses).
Instance single_age_sird(double beta, double gamma, double ifr, double population, double infected,
                         double tf);

/// Two classes, four weeks, one-week dose spacing. Class 0 is elderly (high IFR, few contacts),
/// class 1 is young (low IFR, many contacts).
Instance two_age_instance();

/// One age class, beta 0.25 for a week then 0.10, no vaccination, 42 days.
/// Used to check that calibration recovers a known truth.
Instance synthetic_calibration_instance();

}  // namespace vaxopt
