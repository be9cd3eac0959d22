#include "vaxopt/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"

namespace vaxopt {

SquareMatrix next_generation_matrix(const ModelParams& params, const EpiState& state, long day) {
    params.validate();
    if (state.n_ages() != params.n_ages()) throw InvalidArgument("state and params disagree on the number of ages");
    state.check_valid();
    const std::size_t n = params.n_ages();
    const double beta = params.beta.at_day(day);
    SquareMatrix k(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double susceptible = state(i, S) + params.sigma_v * state(i, V) + params.sigma_w * state(i, W);
        const double row = beta * params.r[i] * susceptible / (params.ages.populations[i] * params.gamma);
        for (std::size_t j = 0; j < n; ++j) k(i, j) = row * params.contact(i, j);
    }
    return k;
}

SpectralRadius spectral_radius(const SquareMatrix& k, double tol, int max_iterations) {
    const std::size_t n = k.size();
    SpectralRadius out;
    if (n == 0) return out;
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), w(n);
    double lambda = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 0.0;
            for (std::size_t j = 0; j < n; ++j) w[i] += k(i, j) * v[j];
            norm += w[i] * w[i];
        }
        norm = std::sqrt(norm);
        out.iterations = it;
        if (norm == 0.0) {
            out.value = 0.0;
            out.power_converged = true;
            return out;
        }
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
        if (it > 1 && std::abs(norm - lambda) <= tol * norm) {
            out.value = norm;
            out.power_converged = true;
            return out;
        }
        lambda = norm;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k(i, j);
    out.value = Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
    return out;
}

double reproduction_number(const ModelParams& params, const EpiState& state, long day) {
    return spectral_radius(next_generation_matrix(params, state, day)).value;
}

std::size_t SensitivitySurface::axis_points() const {
    return static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(values.size()))));
}

double SensitivitySurface::spread() const {
    if (values.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
}

SensitivityScan sensitivity_scan(const ModelParams& params, const std::vector<std::pair<int, EpiState>>& checkpoints,
                                 ScanAxis axis, std::size_t resolution, Execution exec) {
    if (resolution < 2) throw InvalidArgument("a scan needs at least two levels per axis");
    SensitivityScan scan;
    scan.axis = axis;
    for (std::size_t a = 0; a < resolution; ++a)
        scan.levels.push_back(static_cast<double>(a) / static_cast<double>(resolution - 1));

    for (const auto& [week, state] : checkpoints) {
        SensitivitySurface s;
        s.week = week;
        const long day = 7L * week;
        s.reference = reproduction_number(params, state, day);
        s.values.resize(resolution * resolution);
        #pragma omp parallel for collapse(2) schedule(static) if (exec == Execution::parallel)
        for (std::size_t a = 0; a < resolution; ++a)
            for (std::size_t b = 0; b < resolution; ++b) {
                ModelParams p = params;
                if (axis == ScanAxis::sigma) {
                    p.sigma_v = scan.levels[a];
                    p.sigma_w = scan.levels[b];
                } else {
                    p.theta_v = scan.levels[a];
                    p.theta_w = scan.levels[b];
                }
                s.values[a * resolution + b] = reproduction_number(p, state, day);
            }
        s.increments.resize(s.values.size());
        for (std::size_t k = 0; k < s.values.size(); ++k) s.increments[k] = s.values[k] - s.reference;
        scan.surfaces.push_back(std::move(s));
    }
    return scan;
}

std::vector<std::pair<int, EpiState>> weekly_checkpoints(const Trajectory& traj, const std::vector<int>& weeks) {
    std::vector<std::pair<int, EpiState>> out;
    const std::vector<std::size_t> days = traj.daily_nodes();
    for (int w : weeks) {
        if (w < 0) throw InvalidArgument("checkpoint weeks must be non-negative");
        const std::size_t d = std::min(static_cast<std::size_t>(7 * w), days.size() - 1);
        out.emplace_back(w, traj.state(days[d]).clamped());
    }
    return out;
}

VariationReport variation_report(const Trajectory& base, const Trajectory& opt, const ModelParams& params,
                                 std::string base_id, std::string opt_id) {
    if (!(base.grid() == opt.grid()) || base.n_ages != opt.n_ages || base.n_ages != params.n_ages())
        throw InvalidArgument("variation report needs trajectories on the same grid and ages");
    const std::vector<std::size_t> days = base.daily_nodes();
    VariationReport r{std::move(base_id), std::move(opt_id), {}, {}, {}};
    for (std::size_t d = 1; d < days.size(); ++d) {
        const double t = base.grid().time(days[d]);
        double li = 0.0, lh = 0.0, ld = 0.0;
        for (std::size_t i = 0; i < base.n_ages; ++i) {
            li += base.value(days[d], i, I) - opt.value(days[d], i, I);
            lh += hospitalized(i, t, base.history, params) - hospitalized(i, t, opt.history, params);
            ld += base.value(days[d], i, D) - opt.value(days[d], i, D);
        }
        r.infected.push_back(li);
        r.hospitalized.push_back(lh);
        r.deceased.push_back(ld);
    }
    return r;
}

std::string to_string(InitialGuessKind kind) {
    switch (kind) {
        case InitialGuessKind::dpc: return "dpc";
        case InitialGuessKind::homogeneous: return "homogeneous";
        case InitialGuessKind::ig1: return "ig1";
        case InitialGuessKind::ig2: return "ig2";
        case InitialGuessKind::ig3: return "ig3";
    }
    return "?";
}

InitialGuessKind parse_initial_guess(std::string_view name) {
    for (auto k : {InitialGuessKind::dpc, InitialGuessKind::homogeneous, InitialGuessKind::ig1, InitialGuessKind::ig2,
                   InitialGuessKind::ig3})
        if (name == to_string(k)) return k;
    throw InvalidArgument("unknown initial guess '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const {
    if (r0_target && !(*r0_target > 0.0)) throw InvalidArgument("r0 target must be positive");
    if (!(constant_budget >= 0.0)) throw InvalidArgument("budget must be non-negative");
    if (!(horizon_days > 0.0) || !(extension_days >= 0.0)) throw InvalidArgument("bad horizon or extension");
}

DosingPolicy build_initial_guess(InitialGuessKind kind, const DosingPolicy& skeleton, const ModelParams& params,
                                 const std::vector<double>* observed) {
    skeleton.validate();
    if (skeleton.n_ages != params.n_ages()) throw InvalidArgument("skeleton and params disagree on the ages");
    const double total_n = params.ages.total();
    double total_ifr = 0.0;
    for (double f : params.ifr) total_ifr += f;

    std::vector<double> raw(skeleton.u1.size(), 0.0);
    if (kind == InitialGuessKind::dpc) {
        if (!observed || observed->size() != raw.size())
            throw InvalidArgument("the dpc initial guess needs the observed first-dose table");
        raw = *observed;
    } else {
        if (kind == InitialGuessKind::ig2 && !(total_ifr > 0.0)) throw InvalidArgument("ig2 needs a positive IFR");
        for (std::size_t i = 0; i < skeleton.n_ages; ++i)
            for (std::size_t w = 0; w < skeleton.n_weeks; ++w) {
                const double daily = skeleton.n_week[w] / 7.0;
                const double pop_share = params.ages.populations[i] / total_n;
                double v = 0.0;
                switch (kind) {
                    case InitialGuessKind::homogeneous: v = daily * pop_share; break;
                    case InitialGuessKind::ig1: v = 0.5 * daily * pop_share; break;
                    case InitialGuessKind::ig2: v = 0.5 * daily * params.ifr[i] / total_ifr; break;
                    case InitialGuessKind::ig3: v = (7 * w) % 42 < 21 ? daily * pop_share : 0.0; break;
                    case InitialGuessKind::dpc: break;
                }
                raw[i * skeleton.n_weeks + w] = v;
            }
    }
    return project_feasible(raw, skeleton);
}

ModelParams fixed_r0_params(const ModelParams& base, double r0) {
    if (!(r0 > 0.0)) throw InvalidArgument("r0 must be positive");
    ModelParams p = base;
    p.beta = WeeklySeries::constant(r0 * p.gamma);
    return p;
}

namespace {

// Resizes the weekly tables to cover `horizon` days. New weeks get no doses and the last budget.
DosingPolicy resize_policy(const DosingPolicy& p, double horizon) {
    const auto weeks = static_cast<std::size_t>(std::ceil(horizon / 7.0 - 1e-12));
    DosingPolicy q = DosingPolicy::zeros(p.n_ages, weeks, std::vector<double>(weeks, 0.0), p.delta_w);
    q.n_s = p.n_s;
    q.horizon_days = horizon;
    for (std::size_t w = 0; w < weeks; ++w)
        q.n_week[w] = p.n_week.empty() ? 0.0 : p.n_week[std::min(w, p.n_weeks - 1)];
    for (std::size_t i = 0; i < p.n_ages; ++i)
        for (std::size_t w = 0; w < std::min(weeks, p.n_weeks); ++w) {
            q.u1[i * weeks + w] = p.u1[i * p.n_weeks + w];
            q.u_r[i * weeks + w] = p.u_r[i * p.n_weeks + w];
        }
    return q;
}

}  // namespace

Instance extend_horizon(const Instance& inst, double days) {
    if (!(days >= 0.0)) throw InvalidArgument("extension must be non-negative");
    Instance out = inst;
    out.grid.tf = inst.grid.tf + days;
    out.policy = resize_policy(inst.policy, out.grid.tf - out.grid.t0);
    // A partial last week keeps its dose count, spread over the whole week.
    if (days > 0.0 && inst.policy.horizon() > inst.grid.tf - inst.grid.t0 + 1e-9) {
        const std::size_t last = inst.policy.n_weeks - 1;
        const double kept = (inst.grid.tf - inst.grid.t0 - 7.0 * static_cast<double>(last)) / 7.0;
        for (std::size_t i = 0; i < out.policy.n_ages; ++i) out.policy.u1[i * out.policy.n_weeks + last] *= kept;
    }
    return out;
}

Instance build_scenario(const ScenarioSpec& spec, const Instance& base, const std::vector<double>* observed) {
    spec.validate();
    Instance inst = base;
    inst.grid.tf = inst.grid.t0 + spec.horizon_days;
    inst.policy = resize_policy(base.policy, spec.horizon_days);
    if (spec.budget_mode == BudgetMode::constant)
        std::fill(inst.policy.n_week.begin(), inst.policy.n_week.end(), spec.constant_budget);
    if (spec.r0_target) inst.params = fixed_r0_params(inst.params, *spec.r0_target);

    std::vector<double> table;
    if (spec.ig_kind == InitialGuessKind::dpc) {
        if (!observed) throw InvalidArgument("the dpc initial guess needs the observed first-dose table");
        DosingPolicy obs = base.policy;
        obs.u1 = *observed;
        table = resize_policy(obs, spec.horizon_days).u1;
    }
    inst.policy = build_initial_guess(spec.ig_kind, inst.policy, inst.params, table.empty() ? nullptr : &table);
    if (spec.extension_days > 0.0) inst = extend_horizon(inst, spec.extension_days);
    return inst;
}

}  // namespace vaxopt
