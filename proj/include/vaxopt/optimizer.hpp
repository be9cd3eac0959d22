#pragma once

// Projected gradient descent with Armijo backtracking on the weekly first-dose rates.

#include <any>
#include <span>
#include <string>
#include <vector>

#include "vaxopt/gradient.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/policy.hpp"

namespace vaxopt {

/// Cost at a point plus whatever the problem needs to produce the gradient there.
struct Evaluation {
    double cost = 0.0;  // +inf when the point cannot be evaluated
    std::any state;
};

/// A smooth cost over a closed convex set, in the variables the projection works in.
class ControlProblem {
public:
    virtual ~ControlProblem() = default;
    virtual std::size_t dimension() const = 0;
    virtual Evaluation evaluate(std::span<const double> u) const = 0;
    virtual std::vector<double> gradient(std::span<const double> u, const Evaluation& at) const = 0;
    virtual std::vector<double> project(std::span<const double> u, ProjectionReport* report = nullptr) const = 0;
    virtual bool feasible(std::span<const double> u) const = 0;
};

/// Minimizes an Objective over the feasible first-dose tables of a policy skeleton.
class EpidemicProblem final : public ControlProblem {
public:
    EpidemicProblem(ModelParams params, EpiState x0, DosingPolicy skeleton, GridSpec grid, Objective objective,
                    GradientOptions gradient = {}, ForwardOptions forward = {}, ProjectionOptions projection = {});

    std::size_t dimension() const override { return skeleton_.u1.size(); }
    Evaluation evaluate(std::span<const double> u) const override;
    std::vector<double> gradient(std::span<const double> u, const Evaluation& at) const override;
    std::vector<double> project(std::span<const double> u, ProjectionReport* report = nullptr) const override;
    bool feasible(std::span<const double> u) const override;

    DosingPolicy policy(std::span<const double> u) const;
    Trajectory simulate(std::span<const double> u) const;
    const DosingPolicy& skeleton() const { return skeleton_; }
    const Objective& objective() const { return objective_; }
    const ModelParams& params() const { return params_; }

private:
    ModelParams params_;
    EpiState x0_;
    DosingPolicy skeleton_;
    GridSpec grid_;
    Objective objective_;
    GradientOptions gradient_options_;
    ForwardOptions forward_options_;
    ProjectionOptions projection_options_;
};

struct ArmijoConfig {
    double alpha0 = 1e-2;      // first trial step of the first iteration
    double rho = 0.5;          // backtracking factor
    double c1 = 1e-4;          // sufficient-decrease constant
    int max_backtracks = 40;
    double growth = 2.0;       // next iteration starts from growth * last accepted step
};

struct ArmijoResult {
    bool success = false;
    double alpha = 0.0;
    int backtracks = 0;
    std::vector<double> point;
    Evaluation evaluation;
    ProjectionReport projection;
};

/// Tries u(a) = P(u - a * step_unit * g / |g|_inf) for a = alpha_start * rho^k, so `a` is the
/// move of the largest coordinate in step_unit. Accepts the first trial with
/// J(u(a)) <= J(u) + c1 * g . (u(a) - u) and J(u(a)) <= J(u).
ArmijoResult armijo_search(const ControlProblem& problem, std::span<const double> u, const Evaluation& at,
                           std::span<const double> gradient, double alpha_start, double step_unit,
                           const ArmijoConfig& cfg);

enum class StopRule { relative, absolute };

struct PgdConfig {
    double tol = 5e-4;
    StopRule stop = StopRule::relative;  // relative divides the cost change by max(J0, 1)
    int max_iters = 5000;
    ArmijoConfig armijo;
    double dose_scale = 1e5 / 7.0;       // doses/day per unit of step length (1e5 doses/week)
};

struct IterationRecord {
    int iteration = 0;
    double cost = 0.0;
    double alpha = 0.0;
    int backtracks = 0;
    int projection_sweeps = 0;
    double projection_change = 0.0;
    bool feasible = true;
};

struct OptimizationTrace {
    std::vector<IterationRecord> iterations;  // entry 0 is the (projected) initial guess
    bool converged = false;
    bool armijo_failed = false;
    std::string stop_reason;

    std::vector<double> costs() const;
    bool non_increasing() const;
    bool all_feasible() const;
};

struct PgdResult {
    std::vector<double> point;
    double cost = 0.0;
    OptimizationTrace trace;
};

PgdResult pgd_optimize(const ControlProblem& problem, std::span<const double> initial, const PgdConfig& cfg);

struct PolicyOptimum {
    DosingPolicy policy;
    OptimizationTrace trace;
};

PolicyOptimum pgd_optimize(const DosingPolicy& initial, const Objective& obj, const ModelParams& params,
                           const EpiState& x0, const GridSpec& grid, const PgdConfig& cfg,
                           const GradientOptions& gradient = {});

}  // namespace vaxopt
