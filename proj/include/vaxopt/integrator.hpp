#pragma once

// Fixed-step classical RK4 for the forward model and the backward adjoint system.

#include <functional>
#include <span>
#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

struct ForwardOptions {
    double negative_tolerance = kNegativeTolerance;
    /// Second doses leave V on a fixed schedule even though part of each first-dose cohort
    /// has already left V through infection, so V ends slightly negative once an age class
    /// stops receiving first doses. Set to also abort on that.
    bool strict_first_dose_pool = false;
};

/// RK4 on `grid`. Delayed states at t - t_a are cubic-Hermite interpolated from the
/// accumulated history; every stage of a step sees that day's controls and weekly phases.
/// Requires t_a == 0 or t_a >= grid.step.
Trajectory integrate_forward(const EpiState& x0, const ModelParams& params, const DosingPolicy& policy,
                             const GridSpec& grid, const ForwardOptions& options = {});

/// Where the backward sweep evaluates the adjoint right-hand side: time t lies in step `step`
/// at local coordinate theta (0 at the step start). `day` is the calendar day of the step.
struct AdjointPoint {
    double t = 0.0;
    std::size_t step = 0;
    double theta = 0.0;
    long day = 0;
};

/// dp/dt at `at` for adjoint value p. `adjoint` holds the already-swept part of the solution
/// (all steps after the current one).
using AdjointRhs = std::function<void(const AdjointPoint& at, std::span<const double> p,
                                      const DenseHistory& adjoint, std::span<double> dp_dt)>;

/// p(t_k^-) = p(t_k^+) + jump, applied when the backward sweep crosses node k.
struct AdjointImpulse {
    std::size_t node = 0;
    std::vector<double> jump;
};

/// Integrates dp/dt = rhs backward from p(tf) = terminal with RK4 on the reversed clock.
DenseHistory integrate_adjoint(const GridSpec& grid, std::span<const double> terminal,
                               const AdjointRhs& rhs, std::span<const AdjointImpulse> impulses = {});

}  // namespace vaxopt
