#include "vaxopt/integrator.hpp"

#include <cmath>
#include <string>

#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"

namespace vaxopt {

namespace {

void check_step(std::span<const double> x, std::size_t step, const ForwardOptions& options) {
    const double tol = options.negative_tolerance;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]))
            throw NumericalError(std::string("non-finite compartment ") + kCompartmentNames[k % kCompartments] +
                                     " in age " + std::to_string(k / kCompartments),
                                 step);
        if (x[k] < -tol && (options.strict_first_dose_pool || k % kCompartments != V))
            throw NumericalError(std::string("negative compartment ") + kCompartmentNames[k % kCompartments] +
                                     " in age " + std::to_string(k / kCompartments),
                                 step);
    }
}

}  // namespace

Trajectory integrate_forward(const EpiState& x0, const ModelParams& params, const DosingPolicy& policy,
                             const GridSpec& grid, const ForwardOptions& options) {
    grid.validate();
    if (x0.n_ages() != params.n_ages() || policy.n_ages != params.n_ages())
        throw InvalidArgument("state, params and policy disagree on the number of ages");
    if (params.t_a != 0.0 && params.t_a < grid.step - 1e-12)
        throw InvalidArgument("t_a must be zero or at least one grid step");
    check_step(x0.values(), 0, options);

    const std::size_t dim = x0.values().size();
    const std::size_t n_steps = grid.n_steps();
    const double h = grid.step;

    Trajectory traj;
    traj.n_ages = x0.n_ages();
    traj.policy = policy;
    traj.history = DenseHistory(grid, dim);
    DenseHistory& hist = traj.history;

    std::vector<double> x(x0.values().begin(), x0.values().end());
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), m1(dim), tmp(dim), next(dim);
    std::vector<double> delayed_a(dim), delayed_b(dim), delayed_c(dim);

    // t_a == 0 means the ratio reads the current stage state.
    const bool instantaneous = params.t_a == 0.0;
    auto delayed_at = [&](double t, std::span<const double> stage, std::vector<double>& out) {
        if (instantaneous)
            std::copy(stage.begin(), stage.end(), out.begin());
        else
            hist.interpolate(t - params.t_a, out);
    };

    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t = grid.time(n);
        const long day = grid.day_of_step(n);
        // Publish the step start so lookups landing exactly on t_n (or before t0) resolve.
        hist.set_step(n, x, x, k1, k1);

        delayed_at(t, x, delayed_a);
        evaluate_rhs(x, delayed_a, t, day, params, policy, k1);

        for (std::size_t c = 0; c < dim; ++c) tmp[c] = x[c] + 0.5 * h * k1[c];
        delayed_at(t + 0.5 * h, tmp, delayed_b);
        evaluate_rhs(tmp, delayed_b, t + 0.5 * h, day, params, policy, k2);

        for (std::size_t c = 0; c < dim; ++c) tmp[c] = x[c] + 0.5 * h * k2[c];
        if (instantaneous) delayed_at(t + 0.5 * h, tmp, delayed_b);
        evaluate_rhs(tmp, delayed_b, t + 0.5 * h, day, params, policy, k3);

        for (std::size_t c = 0; c < dim; ++c) tmp[c] = x[c] + h * k3[c];
        delayed_at(t + h, tmp, delayed_c);
        evaluate_rhs(tmp, delayed_c, t + h, day, params, policy, k4);

        for (std::size_t c = 0; c < dim; ++c)
            next[c] = x[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        check_step(next, n, options);

        if (instantaneous) delayed_at(t + h, next, delayed_c);
        evaluate_rhs(next, delayed_c, t + h, day, params, policy, m1);
        hist.set_step(n, x, next, k1, m1);
        x.swap(next);
    }
    return traj;
}

DenseHistory integrate_adjoint(const GridSpec& grid, std::span<const double> terminal,
                               const AdjointRhs& rhs, std::span<const AdjointImpulse> impulses) {
    grid.validate();
    const std::size_t dim = terminal.size();
    const std::size_t n_steps = grid.n_steps();
    const double h = grid.step;

    DenseHistory hist(grid, dim);
    std::vector<double> p(terminal.begin(), terminal.end());
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), m0(dim), tmp(dim), prev(dim);

    auto apply_impulses = [&](std::size_t node) {
        for (const auto& imp : impulses) {
            if (imp.node != node) continue;
            if (imp.jump.size() != dim) throw InvalidArgument("adjoint impulse has wrong dimension");
            for (std::size_t c = 0; c < dim; ++c) p[c] += imp.jump[c];
        }
    };
    apply_impulses(n_steps);

    for (std::size_t n = n_steps; n-- > 0;) {
        const double t1 = grid.time(n + 1);
        const double t0 = grid.time(n);
        const long day = grid.day_of_step(n);
        hist.set_step(n, p, p, k1, k1);

        const AdjointPoint end{t1, n, 1.0, day};
        const AdjointPoint mid{t1 - 0.5 * h, n, 0.5, day};
        const AdjointPoint start{t0, n, 0.0, day};

        rhs(end, p, hist, k1);
        for (std::size_t c = 0; c < dim; ++c) tmp[c] = p[c] - 0.5 * h * k1[c];
        rhs(mid, tmp, hist, k2);
        for (std::size_t c = 0; c < dim; ++c) tmp[c] = p[c] - 0.5 * h * k2[c];
        rhs(mid, tmp, hist, k3);
        for (std::size_t c = 0; c < dim; ++c) tmp[c] = p[c] - h * k3[c];
        rhs(start, tmp, hist, k4);

        for (std::size_t c = 0; c < dim; ++c)
            prev[c] = p[c] - h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        for (std::size_t c = 0; c < dim; ++c)
            if (!std::isfinite(prev[c])) throw NumericalError("non-finite adjoint", n);

        rhs(start, prev, hist, m0);
        hist.set_step(n, prev, p, m0, k1);
        p.swap(prev);
        if (n > 0) apply_impulses(n);
    }
    return hist;
}

}  // namespace vaxopt
