#pragma once

// Reproduction number, sensitivity surfaces, daily variation reports, initial guesses and
// scenario construction.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vaxopt/execution.hpp"
#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"
#include "vaxopt/presets.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

/// K_ik = beta r_i (S_i + sigma_V V_i + sigma_W W_i) C_ik / (N_i gamma), with beta of `day`.
SquareMatrix next_generation_matrix(const ModelParams& params, const EpiState& state, long day = 0);

struct SpectralRadius {
    double value = 0.0;
    int iterations = 0;
    bool power_converged = false;  // false means the dense eigensolver gave the value
};

/// Power iteration to a relative change of `tol`, dense eigensolve when it does not settle.
SpectralRadius spectral_radius(const SquareMatrix& k, double tol = 1e-10, int max_iterations = 10'000);

/// R_t as the spectral radius of the next-generation matrix at the given state.
double reproduction_number(const ModelParams& params, const EpiState& state, long day = 0);

enum class ScanAxis { sigma, theta };

struct SensitivitySurface {
    int week = 0;
    std::vector<double> values;      // [a * n + b], a indexes the first parameter of the pair
    std::vector<double> increments;  // values minus the reference R_t
    double reference = 0.0;          // R_t at the parameters as given

    double at(std::size_t a, std::size_t b) const { return values[a * axis_points() + b]; }
    std::size_t axis_points() const;
    double spread() const;  // max - min
};

struct SensitivityScan {
    ScanAxis axis = ScanAxis::sigma;
    std::vector<double> levels;  // shared by both parameters of the pair
    std::vector<SensitivitySurface> surfaces;
};

/// Evaluates R_t over levels x levels of (sigma_V, sigma_W) or (theta_V, theta_W), spread
/// evenly on [0, 1], at each checkpoint state. Checkpoints pair a week with its state.
SensitivityScan sensitivity_scan(const ModelParams& params, const std::vector<std::pair<int, EpiState>>& checkpoints,
                                 ScanAxis axis, std::size_t resolution, Execution exec = Execution::parallel);

/// States at the start of the given weeks (clamped to the end of the trajectory). Round-off
/// negatives in the states are set to zero.
std::vector<std::pair<int, EpiState>> weekly_checkpoints(const Trajectory& traj,
                                                         const std::vector<int>& weeks = {0, 4, 8, 12, 16, 20});

/// Lambda_X(d) = sum_i X_i,base(d) - X_i,opt(d) for d = 1 .. N_days.
struct VariationReport {
    std::string base_id;
    std::string opt_id;
    std::vector<double> infected;
    std::vector<double> hospitalized;
    std::vector<double> deceased;
};

VariationReport variation_report(const Trajectory& base, const Trajectory& opt, const ModelParams& params,
                                 std::string base_id = "base", std::string opt_id = "optimized");

enum class InitialGuessKind { dpc, homogeneous, ig1, ig2, ig3 };

std::string to_string(InitialGuessKind kind);
InitialGuessKind parse_initial_guess(std::string_view name);

enum class BudgetMode { data, constant };

struct ScenarioSpec {
    InitialGuessKind ig_kind = InitialGuessKind::homogeneous;
    std::optional<double> r0_target;
    BudgetMode budget_mode = BudgetMode::data;
    double constant_budget = 2.1e6;  // doses/week when budget_mode is constant
    double horizon_days = 151.0;
    double extension_days = 0.0;     // extra days with no first doses

    void validate() const;
};

/// Raw first-dose table of the chosen kind on the skeleton's weeks and budgets, projected onto
/// the feasible set. `dpc` copies `observed` (the administered first doses).
DosingPolicy build_initial_guess(InitialGuessKind kind, const DosingPolicy& skeleton, const ModelParams& params,
                                 const std::vector<double>* observed = nullptr);

/// beta constant at r0 * gamma.
ModelParams fixed_r0_params(const ModelParams& base, double r0);

/// Appends `days` to the horizon with no first doses; echoed second doses still happen.
Instance extend_horizon(const Instance& inst, double days);

/// Applies the budget mode, R0 target, horizon, extension and initial guess to a base instance.
Instance build_scenario(const ScenarioSpec& spec, const Instance& base, const std::vector<double>* observed = nullptr);

}  // namespace vaxopt
