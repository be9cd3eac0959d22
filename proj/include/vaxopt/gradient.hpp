#pragma once

// Cost functionals, their Hamiltonians, the adjoint solve and the weekly control gradient.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

enum class ObjectiveKind { deceased, infected, hospitalized };

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);

/// J = sum_i int X_i(t)^2 dt - terminal_weight * sum_i X_i(T)^2, with X = D, I or H.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::deceased;
    double terminal_weight = 0.0;

    /// X_i for a state and the state t_a earlier (the latter is only read for H).
    double quantity(std::size_t age, std::span<const double> x, std::span<const double> delayed,
                    const ModelParams& params) const;
};

/// Running cost by the trapezoidal rule on the trajectory grid, plus the terminal term.
double cost_value(const Trajectory& traj, const Objective& obj, const ModelParams& params);

/// sum_i X_i^2 + p^T F at one instant.
double hamiltonian_value(std::span<const double> x, std::span<const double> delayed,
                         std::span<const double> p, double t, long day, const Objective& obj,
                         const ModelParams& params, const DosingPolicy& policy);

/// Partials of hamiltonian_value: `current` with respect to x(t), `delayed` with respect to
/// x(t - t_a), both laid out like the state.
struct HamiltonianPartials {
    std::vector<double> current;
    std::vector<double> delayed;
};
HamiltonianPartials hamiltonian_partials(std::span<const double> x, std::span<const double> delayed,
                                         std::span<const double> p, double t, long day,
                                         const Objective& obj, const ModelParams& params,
                                         const DosingPolicy& policy, bool include_running_cost = true);

/// -d(sum_i X_i(T)^2)/dx, per age 6-vector. For D and I this is -2 X_i(T) on the matching slot.
/// For H the I slot is the derivative through I_i(T) and the S, V, W slots the derivative
/// through the delayed state x(T - t_a).
std::vector<double> terminal_condition(const Trajectory& traj, const Objective& obj,
                                       const ModelParams& params);

/// How the adjoint treats the arguments read at t - t_a (in f and in H).
enum class DelayTreatment {
    propagated,  // adds the advanced source p(t + t_a) and the delayed running-cost partials
    frozen,      // treats them as constants
};

/// How the running cost enters the adjoint.
enum class RunningCostTreatment {
    quadrature,  // node impulses with trapezoid weights: exact adjoint of cost_value's rule
    continuous,  // -dX^2/dx inside the adjoint right-hand side
};

struct GradientOptions {
    DelayTreatment delay = DelayTreatment::propagated;
    RunningCostTreatment running = RunningCostTreatment::quadrature;
};

/// Adjoint p with p(T) = terminal_weight * terminal_condition. Here p(t) is the sensitivity of
/// J to the state at t, so dJ = int p^T dF.
DenseHistory solve_adjoint(const Trajectory& traj, const Objective& obj, const ModelParams& params,
                           const GradientOptions& options = {});

/// Control gradient for weekly first-dose rates.
struct GradientField {
    std::size_t n_ages = 0;
    std::size_t n_weeks = 0;
    std::size_t n_days = 0;
    std::vector<double> daily;         // [age * n_days + day]: mean of G over that day
    std::vector<double> weekly;        // [age * n_weeks + week]: mean of the daily values
    std::vector<double> derivative;    // [age * n_weeks + week]: dJ/du1, the sum of the daily values

    double at_week(std::size_t age, std::size_t week) const { return weekly[age * n_weeks + week]; }
};

/// G_i(t) = S/(S+I_u) (p_V - p_S)(t) + (p_W - p_V)(t + delta_w) 1[t + delta_w <= T],
/// integrated per day with Simpson's rule on every grid step.
GradientField assemble_gradient(const DenseHistory& adjoint, const Trajectory& traj,
                                const ModelParams& params);

GradientField compute_gradient(const Trajectory& traj, const Objective& obj, const ModelParams& params,
                               const GradientOptions& options = {});

}  // namespace vaxopt
