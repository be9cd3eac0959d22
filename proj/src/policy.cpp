#include "vaxopt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "vaxopt/errors.hpp"

namespace vaxopt {

DosingPolicy DosingPolicy::zeros(std::size_t n_ages, std::size_t n_weeks, std::vector<double> n_week,
                                 int delta_w) {
    DosingPolicy p;
    p.n_ages = n_ages;
    p.n_weeks = n_weeks;
    p.u1.assign(n_ages * n_weeks, 0.0);
    p.u_r.assign(n_ages * n_weeks, 0.0);
    p.n_week = std::move(n_week);
    p.delta_w = delta_w;
    p.validate();
    return p;
}

double DosingPolicy::second(std::size_t age, std::size_t week) const {
    const std::size_t k = echo_weeks();
    if (week < k || week - k >= n_weeks) return 0.0;
    return first(age, week - k);
}

double DosingPolicy::weekly_cap(std::size_t week) const {
    return std::min(n_s, n_week.at(week));
}

void DosingPolicy::validate() const {
    if (n_ages == 0) throw InvalidArgument("policy has no age classes");
    if (u1.size() != n_ages * n_weeks || u_r.size() != n_ages * n_weeks)
        throw InvalidArgument("policy tables must be n_ages x n_weeks");
    if (n_week.size() != n_weeks) throw InvalidArgument("n_week must have one entry per week");
    if (delta_w <= 0 || delta_w % 7 != 0)
        throw InvalidArgument("delta_w must be a positive multiple of 7 days");
    if (!(n_s >= 0.0)) throw InvalidArgument("n_s must be >= 0");
    for (double b : n_week)
        if (!(b >= 0.0)) throw InvalidArgument("weekly budget must be >= 0");
    for (double v : u1)
        if (!std::isfinite(v)) throw InvalidArgument("u1 must be finite");
    for (double v : u_r)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("u_r must be finite and >= 0");
    if (horizon_days != 0.0 && horizon_days < 0.0) throw InvalidArgument("horizon must be >= 0");
}

ControlValues control_on_day(const DosingPolicy& policy, std::size_t age, long day) {
    ControlValues out;
    if (day < 0) return out;
    const auto week = static_cast<std::size_t>(day / 7);
    if (week < policy.n_weeks) {
        out.u1 = policy.first(age, week);
        out.u_r = policy.recovered(age, week);
    }
    const long echo_day = day - policy.delta_w;
    if (echo_day >= 0) {
        const auto echo_week = static_cast<std::size_t>(echo_day / 7);
        if (echo_week < policy.n_weeks) out.u2 = policy.first(age, echo_week);
    }
    return out;
}

ControlValues evaluate_control(const DosingPolicy& policy, std::size_t age, double t) {
    if (!(t >= 0.0) || t >= policy.horizon()) throw InvalidArgument("control evaluated outside horizon");
    if (age >= policy.n_ages) throw InvalidArgument("age index out of range");
    return control_on_day(policy, age, static_cast<long>(std::floor(t)));
}

namespace {

// Shared by budget_residuals and the projection repair so both see identical rounding.
double week_residual(const DosingPolicy& p, std::size_t week) {
    double daily = 0.0;
    for (std::size_t i = 0; i < p.n_ages; ++i)
        daily += p.first(i, week) + p.second(i, week) + p.recovered(i, week);
    return 7.0 * daily - p.weekly_cap(week);
}

// Coordinates (indices into u1) that count against week j's budget.
std::vector<std::size_t> week_group(const DosingPolicy& p, std::size_t week) {
    std::vector<std::size_t> g;
    const std::size_t k = p.echo_weeks();
    for (std::size_t i = 0; i < p.n_ages; ++i) {
        g.push_back(i * p.n_weeks + week);
        if (week >= k) g.push_back(i * p.n_weeks + week - k);
    }
    return g;
}

double recovered_daily(const DosingPolicy& p, std::size_t week) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.n_ages; ++i) s += p.recovered(i, week);
    return s;
}

}  // namespace

std::vector<double> budget_residuals(const DosingPolicy& policy) {
    std::vector<double> res(policy.n_weeks);
    for (std::size_t j = 0; j < policy.n_weeks; ++j) res[j] = week_residual(policy, j);
    return res;
}

bool is_feasible(const DosingPolicy& policy) {
    for (double v : policy.u1)
        if (v < 0.0) return false;
    for (std::size_t j = 0; j < policy.n_weeks; ++j)
        if (week_residual(policy, j) > 0.0) return false;
    return true;
}

std::vector<double> simplex_project(std::span<const double> v, double cap) {
    if (!(cap >= 0.0)) throw InvalidArgument("simplex cap must be >= 0");
    std::vector<double> x(v.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!std::isfinite(v[k])) throw InvalidArgument("simplex_project input must be finite");
        x[k] = v[k] > 0.0 ? v[k] : 0.0;
        sum += x[k];
    }
    if (sum <= cap) return x;

    // Project onto {x >= 0, sum x = cap}: find theta with sum max(v - theta, 0) = cap.
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double candidate = (running - cap) / static_cast<double>(k + 1);
        if (k + 1 == sorted.size() || sorted[k + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    // Rounding can leave the sum a few ulps above cap; raise theta until it is not.
    const double nudge = std::max(std::abs(theta), cap / static_cast<double>(v.size())) *
                         std::numeric_limits<double>::epsilon();
    for (int attempt = 0; attempt < 64; ++attempt) {
        sum = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            x[k] = std::max(v[k] - theta, 0.0);
            sum += x[k];
        }
        if (sum <= cap) return x;
        theta += nudge * (attempt + 1);
    }
    std::fill(x.begin(), x.end(), 0.0);
    return x;
}

DosingPolicy project_feasible(std::span<const double> raw_u1, const DosingPolicy& skeleton,
                              const ProjectionOptions& options, ProjectionReport* report) {
    skeleton.validate();
    if (raw_u1.size() != skeleton.n_ages * skeleton.n_weeks)
        throw InvalidArgument("raw control has wrong size");

    const std::size_t n_weeks = skeleton.n_weeks;
    std::vector<double> caps(n_weeks);
    std::vector<std::vector<std::size_t>> groups(n_weeks);
    for (std::size_t j = 0; j < n_weeks; ++j) {
        const double ur = recovered_daily(skeleton, j);
        const double cap = skeleton.weekly_cap(j);
        if (7.0 * ur - cap > 0.0)
            throw InfeasibleError("recovered doses alone exceed the budget in week " + std::to_string(j));
        caps[j] = std::isinf(cap) ? cap : std::max(cap / 7.0 - ur, 0.0);
        groups[j] = week_group(skeleton, j);
    }

    std::vector<double> x(raw_u1.begin(), raw_u1.end());
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidArgument("raw control must be finite");

    // Dykstra increments, one per constraint set.
    std::vector<std::vector<double>> incr(n_weeks);
    for (std::size_t j = 0; j < n_weeks; ++j) incr[j].assign(groups[j].size(), 0.0);

    ProjectionReport rep;
    std::vector<double> w;
    std::vector<double> previous;
    for (rep.sweeps = 1; rep.sweeps <= options.max_sweeps; ++rep.sweeps) {
        previous = x;
        for (std::size_t j = 0; j < n_weeks; ++j) {
            const auto& g = groups[j];
            w.resize(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) w[k] = x[g[k]] + incr[j][k];
            const double cap = std::isinf(caps[j]) ? std::numeric_limits<double>::max() : caps[j];
            const std::vector<double> y = simplex_project(w, cap);
            for (std::size_t k = 0; k < g.size(); ++k) {
                incr[j][k] = w[k] - y[k];
                x[g[k]] = y[k];
            }
        }
        double change = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            change = std::max(change, std::abs(x[k] - previous[k]));
            scale = std::max(scale, std::abs(x[k]));
        }
        rep.last_change = scale > 0.0 ? change / scale : change;
        if (rep.last_change <= options.tolerance) {
            rep.converged = true;
            break;
        }
    }
    rep.sweeps = std::min(rep.sweeps, options.max_sweeps);

    DosingPolicy out = skeleton;
    out.u1 = std::move(x);
    for (double& v : out.u1)
        if (!(v > 0.0)) v = 0.0;

    // Dykstra leaves the earlier sets satisfied only to tolerance; shrink any week still over.
    // Shrinking only lowers other weeks' sums, so one ordered pass suffices.
    for (std::size_t j = 0; j < n_weeks; ++j) {
        if (week_residual(out, j) <= 0.0) continue;
        const auto& g = groups[j];
        double s = 0.0;
        for (std::size_t idx : g) s += out.u1[idx];
        double factor = s > 0.0 ? caps[j] / s : 0.0;
        for (int guard = 0; guard < 64; ++guard) {
            for (std::size_t idx : g) out.u1[idx] *= factor;
            if (week_residual(out, j) <= 0.0) break;
            factor = 1.0 - 4.0 * std::numeric_limits<double>::epsilon() * (guard + 1);
        }
        if (week_residual(out, j) > 0.0)
            for (std::size_t idx : g) out.u1[idx] = 0.0;
    }

    if (report) *report = rep;
    return out;
}

}  // namespace vaxopt
