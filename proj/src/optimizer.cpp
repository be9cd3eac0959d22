#include "vaxopt/optimizer.hpp"

#include <cmath>
#include <limits>

#include "vaxopt/errors.hpp"

namespace vaxopt {

EpidemicProblem::EpidemicProblem(ModelParams params, EpiState x0, DosingPolicy skeleton, GridSpec grid,
                                 Objective objective, GradientOptions gradient, ForwardOptions forward,
                                 ProjectionOptions projection)
    : params_(std::move(params)), x0_(std::move(x0)), skeleton_(std::move(skeleton)), grid_(grid),
      objective_(objective), gradient_options_(gradient), forward_options_(forward),
      projection_options_(projection) {
    params_.validate();
    skeleton_.validate();
    grid_.validate();
}

DosingPolicy EpidemicProblem::policy(std::span<const double> u) const {
    DosingPolicy p = skeleton_;
    p.u1.assign(u.begin(), u.end());
    return p;
}

Trajectory EpidemicProblem::simulate(std::span<const double> u) const {
    return integrate_forward(x0_, params_, policy(u), grid_, forward_options_);
}

Evaluation EpidemicProblem::evaluate(std::span<const double> u) const {
    try {
        Trajectory traj = simulate(u);
        const double cost = cost_value(traj, objective_, params_);
        return {cost, std::move(traj)};
    } catch (const NumericalError&) {
        return {std::numeric_limits<double>::infinity(), {}};
    }
}

std::vector<double> EpidemicProblem::gradient(std::span<const double> u, const Evaluation& at) const {
    const auto* traj = std::any_cast<Trajectory>(&at.state);
    const Trajectory fresh = traj ? Trajectory{} : simulate(u);
    return compute_gradient(traj ? *traj : fresh, objective_, params_, gradient_options_).derivative;
}

std::vector<double> EpidemicProblem::project(std::span<const double> u, ProjectionReport* report) const {
    return project_feasible(u, skeleton_, projection_options_, report).u1;
}

bool EpidemicProblem::feasible(std::span<const double> u) const { return is_feasible(policy(u)); }

ArmijoResult armijo_search(const ControlProblem& problem, std::span<const double> u, const Evaluation& at,
                           std::span<const double> gradient, double alpha_start, double step_unit,
                           const ArmijoConfig& cfg) {
    if (!(cfg.rho > 0.0 && cfg.rho < 1.0) || !(cfg.c1 > 0.0 && cfg.c1 < 1.0))
        throw InvalidArgument("Armijo needs 0 < rho < 1 and 0 < c1 < 1");
    double top = 0.0;
    for (double g : gradient) {
        if (!std::isfinite(g)) throw NumericalError("non-finite search direction", 0);
        top = std::max(top, std::abs(g));
    }
    const double scale = top > 0.0 ? step_unit / top : 0.0;

    ArmijoResult res;
    std::vector<double> trial(u.size());
    double alpha = alpha_start;
    for (int k = 0; k <= cfg.max_backtracks; ++k, alpha *= cfg.rho) {
        for (std::size_t j = 0; j < u.size(); ++j) trial[j] = u[j] - alpha * scale * gradient[j];
        ProjectionReport rep;
        std::vector<double> projected = problem.project(trial, &rep);
        double slope = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) slope += gradient[j] * (projected[j] - u[j]);
        Evaluation ev = problem.evaluate(projected);
        if (ev.cost <= at.cost + cfg.c1 * slope && ev.cost <= at.cost) {
            res.success = true;
            res.alpha = alpha;
            res.backtracks = k;
            res.point = std::move(projected);
            res.evaluation = std::move(ev);
            res.projection = rep;
            return res;
        }
        res.backtracks = k;
    }
    res.alpha = alpha / cfg.rho;
    return res;
}

std::vector<double> OptimizationTrace::costs() const {
    std::vector<double> c;
    c.reserve(iterations.size());
    for (const auto& it : iterations) c.push_back(it.cost);
    return c;
}

bool OptimizationTrace::non_increasing() const {
    for (std::size_t k = 1; k < iterations.size(); ++k)
        if (iterations[k].cost > iterations[k - 1].cost) return false;
    return true;
}

bool OptimizationTrace::all_feasible() const {
    for (const auto& it : iterations)
        if (!it.feasible) return false;
    return true;
}

PgdResult pgd_optimize(const ControlProblem& problem, std::span<const double> initial, const PgdConfig& cfg) {
    if (!(cfg.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (initial.size() != problem.dimension()) throw InvalidArgument("initial point has wrong dimension");

    PgdResult out;
    ProjectionReport rep;
    out.point = problem.project(initial, &rep);
    Evaluation current = problem.evaluate(out.point);
    if (!std::isfinite(current.cost)) throw NumericalError("initial policy cannot be simulated", 0);
    out.trace.iterations.push_back({0, current.cost, 0.0, 0, rep.sweeps, rep.last_change, problem.feasible(out.point)});

    const double stop_scale = cfg.stop == StopRule::relative ? std::max(current.cost, 1.0) : 1.0;

    double alpha = cfg.armijo.alpha0;
    int quiet = 0;
    out.trace.stop_reason = "max_iters";
    for (int it = 1; it <= cfg.max_iters; ++it) {
        const std::vector<double> grad = problem.gradient(out.point, current);
        ArmijoResult step = armijo_search(problem, out.point, current, grad, alpha, cfg.dose_scale, cfg.armijo);
        if (!step.success) {
            out.trace.armijo_failed = true;
            out.trace.stop_reason = "armijo_failed";
            break;
        }
        const double change = current.cost - step.evaluation.cost;
        const bool moved = step.point != out.point;
        out.point = std::move(step.point);
        current = std::move(step.evaluation);
        out.trace.iterations.push_back({it, current.cost, step.alpha, step.backtracks, step.projection.sweeps,
                                        step.projection.last_change, problem.feasible(out.point)});
        alpha = step.alpha * cfg.armijo.growth;
        if (!moved) {
            out.trace.converged = true;
            out.trace.stop_reason = "stationary";
            break;
        }
        // One small change can come from a timid first step, so require two in a row.
        quiet = std::abs(change) / stop_scale < cfg.tol ? quiet + 1 : 0;
        if (quiet >= 2) {
            out.trace.converged = true;
            out.trace.stop_reason = "tolerance";
            break;
        }
    }
    out.cost = current.cost;
    return out;
}

PolicyOptimum pgd_optimize(const DosingPolicy& initial, const Objective& obj, const ModelParams& params,
                           const EpiState& x0, const GridSpec& grid, const PgdConfig& cfg,
                           const GradientOptions& gradient) {
    const EpidemicProblem problem(params, x0, initial, grid, obj, gradient);
    PgdResult r = pgd_optimize(problem, initial.u1, cfg);
    return {problem.policy(r.point), std::move(r.trace)};
}

}  // namespace vaxopt
