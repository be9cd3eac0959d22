#pragma once

// Piecewise-constant weekly dosing policies and the feasible set they live in.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace vaxopt {

/// Weekly first-dose and recovered-dose rates per age (doses/day, constant inside a week).
/// Second doses are never stored: u2(age, t) = u1(age, t - delta_w).
struct DosingPolicy {
    std::size_t n_ages = 0;
    std::size_t n_weeks = 0;
    std::vector<double> u1;      // [age * n_weeks + week], doses/day
    std::vector<double> u_r;     // same layout; exogenous data, never optimized
    std::vector<double> n_week;  // weekly dose budget, doses/week
    double n_s = std::numeric_limits<double>::infinity();  // sanitary capacity, doses/week
    int delta_w = 21;            // inter-dose delay, days (multiple of 7)
    double horizon_days = 0.0;   // controls defined on [0, horizon); 0 means 7 * n_weeks

    static DosingPolicy zeros(std::size_t n_ages, std::size_t n_weeks, std::vector<double> n_week,
                              int delta_w = 21);

    double& first(std::size_t age, std::size_t week) { return u1[age * n_weeks + week]; }
    double first(std::size_t age, std::size_t week) const { return u1[age * n_weeks + week]; }
    double recovered(std::size_t age, std::size_t week) const { return u_r[age * n_weeks + week]; }
    /// Second-dose rate in a given week (echo of the first dose delta_w/7 weeks earlier).
    double second(std::size_t age, std::size_t week) const;

    std::size_t echo_weeks() const { return static_cast<std::size_t>(delta_w / 7); }
    double horizon() const { return horizon_days > 0.0 ? horizon_days : 7.0 * n_weeks; }
    /// min(N_S, N_week) for the week.
    double weekly_cap(std::size_t week) const;

    void validate() const;
    bool operator==(const DosingPolicy&) const = default;
};

struct ControlValues {
    double u1 = 0.0;
    double u2 = 0.0;
    double u_r = 0.0;
};

/// Rates in effect on calendar day `day` (left-continuous: the whole day [day, day+1)).
ControlValues control_on_day(const DosingPolicy& policy, std::size_t age, long day);
/// Step-function value at time t. Throws outside [0, horizon).
ControlValues evaluate_control(const DosingPolicy& policy, std::size_t age, double t);

/// residual_j = 7 * sum_i (u1 + u2 + u_r)(week j) - min(N_S, N_week(j)). Feasible iff all <= 0.
std::vector<double> budget_residuals(const DosingPolicy& policy);
bool is_feasible(const DosingPolicy& policy);

/// Euclidean projection onto {x >= 0, sum x <= cap} by sort-and-threshold.
std::vector<double> simplex_project(std::span<const double> v, double cap);

struct ProjectionOptions {
    double tolerance = 1e-14;  // on the relative change between Dykstra sweeps
    int max_sweeps = 20'000;
};

struct ProjectionReport {
    int sweeps = 0;
    double last_change = 0.0;
    bool converged = false;
};

/// Euclidean projection of raw weekly first-dose rates onto the budget polytope described by
/// `skeleton` (its n_week, n_s, u_r, delta_w). Cyclic Dykstra over the per-week constraints,
/// followed by an exact feasibility repair. Throws InfeasibleError if u_r alone breaks a budget.
DosingPolicy project_feasible(std::span<const double> raw_u1, const DosingPolicy& skeleton,
                              const ProjectionOptions& options = {},
                              ProjectionReport* report = nullptr);

}  // namespace vaxopt
