#include "vaxopt/gradient.hpp"

#include <cmath>

#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"

namespace vaxopt {

std::string to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::deceased: return "deceased";
        case ObjectiveKind::infected: return "infected";
        case ObjectiveKind::hospitalized: return "hospitalized";
    }
    return "unknown";
}

ObjectiveKind parse_objective(std::string_view name) {
    if (name == "deceased") return ObjectiveKind::deceased;
    if (name == "infected") return ObjectiveKind::infected;
    if (name == "hospitalized") return ObjectiveKind::hospitalized;
    throw InvalidArgument("unknown objective '" + std::string(name) + "'");
}

double Objective::quantity(std::size_t age, std::span<const double> x, std::span<const double> delayed,
                           const ModelParams& params) const {
    switch (kind) {
        case ObjectiveKind::deceased: return x[age * kCompartments + D];
        case ObjectiveKind::infected: return x[age * kCompartments + I];
        case ObjectiveKind::hospitalized: return hospitalized_from(age, x, delayed, params);
    }
    return 0.0;
}

namespace {

double kappa_of(const ModelParams& p, std::size_t age) { return p.kappa.empty() ? 1.0 : p.kappa[age]; }

// Number of grid steps spanned by a delay; throws when it is not a whole number of steps.
std::size_t steps_in(double delay, const GridSpec& grid, const char* what) {
    const double k = delay / grid.step;
    if (std::abs(k - std::round(k)) > 1e-9)
        throw InvalidArgument(std::string(what) + " must be a whole number of grid steps");
    return static_cast<std::size_t>(std::llround(k));
}

// d(sum_i X_i^2)/dx and /d(delayed).
void running_partials(std::span<const double> x, std::span<const double> y, const Objective& obj,
                      const ModelParams& p, std::span<double> cur, std::span<double> del) {
    const std::size_t n = p.n_ages();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = i * kCompartments;
        switch (obj.kind) {
            case ObjectiveKind::deceased: cur[b + D] += 2.0 * x[b + D]; break;
            case ObjectiveKind::infected: cur[b + I] += 2.0 * x[b + I]; break;
            case ObjectiveKind::hospitalized: {
                const SeverityRatio rho = severity_ratio(y.subspan(b, kCompartments), p);
                const double scale = p.h * kappa_of(p, i);
                const double hosp = scale * x[b + I] * rho.value;
                // The output clamp at zero only matters for negative I, where H^2 is flat.
                if (hosp <= 0.0) break;
                cur[b + I] += 2.0 * hosp * scale * rho.value;
                const double common = 2.0 * hosp * scale * x[b + I];
                del[b + S] += common * rho.d_s;
                del[b + V] += common * rho.d_v;
                del[b + W] += common * rho.d_w;
                break;
            }
        }
    }
}

}  // namespace

double cost_value(const Trajectory& traj, const Objective& obj, const ModelParams& params) {
    const GridSpec& g = traj.grid();
    const std::size_t nodes = traj.n_nodes();
    const std::size_t n = params.n_ages();
    std::vector<double> delayed(traj.history.dim());
    auto squared_sum = [&](std::size_t k) {
        const auto x = traj.history.node(k);
        if (obj.kind == ObjectiveKind::hospitalized) traj.history.interpolate(g.time(k) - params.t_a, delayed);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double q = obj.quantity(i, x, delayed, params);
            s += q * q;
        }
        return s;
    };
    double integral = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double w = (k == 0 || k + 1 == nodes) ? 0.5 * g.step : g.step;
        integral += w * squared_sum(k);
    }
    if (obj.terminal_weight != 0.0) integral -= obj.terminal_weight * squared_sum(nodes - 1);
    return integral;
}

double hamiltonian_value(std::span<const double> x, std::span<const double> delayed,
                         std::span<const double> p, double t, long day, const Objective& obj,
                         const ModelParams& params, const DosingPolicy& policy) {
    std::vector<double> f(x.size());
    evaluate_rhs(x, delayed, t, day, params, policy, f);
    double h = 0.0;
    for (std::size_t i = 0; i < params.n_ages(); ++i) {
        const double q = obj.quantity(i, x, delayed, params);
        h += q * q;
    }
    for (std::size_t k = 0; k < x.size(); ++k) h += p[k] * f[k];
    return h;
}

HamiltonianPartials hamiltonian_partials(std::span<const double> x, std::span<const double> y,
                                         std::span<const double> p, double t, long day,
                                         const Objective& obj, const ModelParams& prm,
                                         const DosingPolicy& policy, bool include_running_cost) {
    const std::size_t n = prm.n_ages();
    HamiltonianPartials out{std::vector<double>(x.size(), 0.0), std::vector<double>(x.size(), 0.0)};
    auto& cur = out.current;
    auto& del = out.delayed;

    const double beta = prm.beta.at_day(day);
    const double detection = prm.detection.at_day(day);
    const bool delayed_active = t > prm.t_a;

    // Coefficient of lambda_i in p^T F, collected first for the cross-age I terms.
    std::vector<double> lambda_coeff(n), lambda(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = i * kCompartments;
        double contacts = 0.0;
        for (std::size_t k = 0; k < n; ++k) contacts += prm.contact(i, k) * x[k * kCompartments + I];
        lambda[i] = beta * prm.r[i] * contacts / prm.ages.populations[i];
        lambda_coeff[i] = (p[b + I] - p[b + S]) * x[b + S] + prm.sigma_v * (p[b + I] - p[b + V]) * x[b + V] +
                          prm.sigma_w * (p[b + I] - p[b + W]) * x[b + W];
    }

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = i * kCompartments;
        const double* q = &p[b];
        const ControlValues u = control_on_day(policy, i, day);
        const DoseSplit g = dose_split(x[b + S], x[b + I], detection);
        const SeverityRatio rho = severity_ratio(y.subspan(b, kCompartments), prm);
        const double f = delayed_active ? prm.ifr[i] * rho.value : prm.ifr[i];

        cur[b + S] += lambda[i] * (q[I] - q[S]) + u.u1 * g.d_s * (q[V] - q[S]);
        cur[b + V] += lambda[i] * prm.sigma_v * (q[I] - q[V]);
        cur[b + W] += lambda[i] * prm.sigma_w * (q[I] - q[W]);
        cur[b + R] += prm.mu_r * (q[S] - q[R]);

        double d_infected = prm.gamma * (-q[I] + (1.0 - f) * q[R] + f * q[D]) + u.u1 * g.d_i * (q[V] - q[S]);
        for (std::size_t j = 0; j < n; ++j)
            d_infected += lambda_coeff[j] * beta * prm.r[j] * prm.contact(j, i) / prm.ages.populations[j];
        cur[b + I] += d_infected;

        if (delayed_active) {
            const double common = prm.gamma * x[b + I] * (q[D] - q[R]) * prm.ifr[i];
            del[b + S] += common * rho.d_s;
            del[b + V] += common * rho.d_v;
            del[b + W] += common * rho.d_w;
        }
    }
    if (include_running_cost) running_partials(x, y, obj, prm, cur, del);
    return out;
}

std::vector<double> terminal_condition(const Trajectory& traj, const Objective& obj,
                                       const ModelParams& params) {
    const std::size_t last = traj.n_nodes() - 1;
    const auto x = traj.history.node(last);
    std::vector<double> delayed(x.size());
    traj.history.interpolate(traj.grid().time(last) - params.t_a, delayed);
    std::vector<double> cur(x.size(), 0.0), del(x.size(), 0.0);
    running_partials(x, delayed, obj, params, cur, del);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = -(cur[k] + del[k]);
    return out;
}

DenseHistory solve_adjoint(const Trajectory& traj, const Objective& obj, const ModelParams& params,
                           const GradientOptions& options) {
    const GridSpec& grid = traj.grid();
    const DenseHistory& fwd = traj.history;
    const DosingPolicy& policy = traj.policy;
    const std::size_t dim = fwd.dim();
    const std::size_t n_steps = grid.n_steps();
    const std::size_t shift = steps_in(params.t_a, grid, "t_a");
    const bool propagate = options.delay == DelayTreatment::propagated;
    const bool quadrature = options.running == RunningCostTreatment::quadrature;

    std::vector<AdjointImpulse> impulses;
    auto add_impulse = [&](std::size_t node, std::span<const double> v, double w) {
        if (node == 0) return;  // the initial state is not controlled
        AdjointImpulse imp{node, std::vector<double>(dim)};
        bool any = false;
        for (std::size_t c = 0; c < dim; ++c) {
            imp.jump[c] = w * v[c];
            any = any || imp.jump[c] != 0.0;
        }
        if (any) impulses.push_back(std::move(imp));
    };

    std::vector<double> y(dim), cur(dim), del(dim);
    auto node_partials = [&](std::size_t k) {
        std::fill(cur.begin(), cur.end(), 0.0);
        std::fill(del.begin(), del.end(), 0.0);
        fwd.interpolate(grid.time(k) - params.t_a, y);
        running_partials(fwd.node(k), y, obj, params, cur, del);
    };

    if (quadrature) {
        for (std::size_t k = 1; k <= n_steps; ++k) {
            const double w = k == n_steps ? 0.5 * grid.step : grid.step;
            node_partials(k);
            add_impulse(k, cur, w);
            if (propagate && k >= shift) add_impulse(k - shift, del, w);
        }
    }
    std::vector<double> terminal(dim, 0.0);
    if (obj.terminal_weight != 0.0) {
        // Phi = -w sum X(T)^2: the current-state part is p(T), the delayed part a jump at T - t_a.
        node_partials(n_steps);
        for (std::size_t c = 0; c < dim; ++c) terminal[c] = -obj.terminal_weight * cur[c];
        if (propagate && n_steps >= shift) {
            if (shift == 0)
                for (std::size_t c = 0; c < dim; ++c) terminal[c] -= obj.terminal_weight * del[c];
            else
                add_impulse(n_steps - shift, del, -obj.terminal_weight);
        }
    }

    const ModelParams& prm = params;
    const AdjointRhs rhs = [&, shift, n_steps](const AdjointPoint& at, std::span<const double> p,
                                               const DenseHistory& adj, std::span<double> dp) {
        std::vector<double> x(dim), yd(dim);
        fwd.interpolate_step(at.step, at.theta, x);
        if (at.step >= shift)
            fwd.interpolate_step(at.step - shift, at.theta, yd);
        else
            fwd.interpolate(grid.t0, yd);
        const HamiltonianPartials here =
            hamiltonian_partials(x, yd, p, at.t, at.day, obj, prm, policy, !quadrature);
        for (std::size_t c = 0; c < dim; ++c) dp[c] = -here.current[c];
        if (!propagate) return;
        if (shift == 0) {
            for (std::size_t c = 0; c < dim; ++c) dp[c] -= here.delayed[c];
            return;
        }
        const std::size_t ahead = at.step + shift;
        if (ahead >= n_steps) return;
        std::vector<double> xa(dim), pa(dim);
        fwd.interpolate_step(ahead, at.theta, xa);
        adj.interpolate_step(ahead, at.theta, pa);
        const HamiltonianPartials later = hamiltonian_partials(
            xa, x, pa, at.t + prm.t_a, grid.day_of_step(ahead), obj, prm, policy, !quadrature);
        for (std::size_t c = 0; c < dim; ++c) dp[c] -= later.delayed[c];
    };

    return integrate_adjoint(grid, terminal, rhs, impulses);
}

GradientField assemble_gradient(const DenseHistory& adjoint, const Trajectory& traj,
                                const ModelParams& params) {
    const GridSpec& grid = traj.grid();
    const DosingPolicy& policy = traj.policy;
    if (!(adjoint.grid() == grid) || adjoint.dim() != traj.history.dim())
        throw InvalidArgument("adjoint and trajectory grids differ");
    const std::size_t n = params.n_ages();
    const std::size_t n_steps = grid.n_steps();
    const std::size_t echo = steps_in(policy.delta_w, grid, "delta_w");
    const long first_day = static_cast<long>(std::llround(grid.t0));

    GradientField out;
    out.n_ages = n;
    out.n_weeks = policy.n_weeks;
    out.n_days = static_cast<std::size_t>(std::ceil(grid.tf - grid.t0 - 1e-9));
    out.daily.assign(n * out.n_days, 0.0);

    const std::size_t dim = traj.history.dim();
    std::vector<double> x(dim), p(dim), pa(dim);
    const double thetas[3] = {0.0, 0.5, 1.0};
    const double weights[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    for (std::size_t s = 0; s < n_steps; ++s) {
        const long day = grid.day_of_step(s);
        const auto d = static_cast<std::size_t>(day - first_day);
        const double detection = params.detection.at_day(day);
        const bool echoed = s + echo < n_steps;
        for (int q = 0; q < 3; ++q) {
            traj.history.interpolate_step(s, thetas[q], x);
            adjoint.interpolate_step(s, thetas[q], p);
            if (echoed) adjoint.interpolate_step(s + echo, thetas[q], pa);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t b = i * kCompartments;
                double g = dose_split(x[b + S], x[b + I], detection).value * (p[b + V] - p[b + S]);
                if (echoed) g += pa[b + W] - pa[b + V];
                out.daily[i * out.n_days + d] += grid.step * weights[q] * g;
            }
        }
    }

    out.weekly.assign(n * out.n_weeks, 0.0);
    out.derivative.assign(n * out.n_weeks, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t w = 0; w < out.n_weeks; ++w) {
            std::size_t count = 0;
            double sum = 0.0;
            for (std::size_t d = 7 * w; d < std::min(7 * w + 7, out.n_days); ++d, ++count)
                sum += out.daily[i * out.n_days + d];
            out.derivative[i * out.n_weeks + w] = sum;
            out.weekly[i * out.n_weeks + w] = count > 0 ? sum / static_cast<double>(count) : 0.0;
        }
    return out;
}

GradientField compute_gradient(const Trajectory& traj, const Objective& obj, const ModelParams& params,
                               const GradientOptions& options) {
    return assemble_gradient(solve_adjoint(traj, obj, params, options), traj, params);
}

}  // namespace vaxopt
