#include "vaxopt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "vaxopt/calibration.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"

namespace vaxopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void costs_of(const Instance& inst, const std::vector<double>& table, std::span<const Objective> objectives,
              double* out) {
    DosingPolicy p = inst.policy;
    p.u1 = table;
    try {
        const Trajectory traj = integrate_forward(inst.x0, inst.params, p, inst.grid);
        for (std::size_t j = 0; j < objectives.size(); ++j) out[j] = cost_value(traj, objectives[j], inst.params);
    } catch (const Error&) {
        std::fill(out, out + objectives.size(), kInf);
    }
}

std::size_t grid_size(std::size_t levels, std::size_t dim) {
    std::size_t n = 1;
    for (std::size_t k = 0; k < dim; ++k) {
        if (n > 100'000'000 / levels) throw InvalidArgument("policy grid has more than 1e8 points");
        n *= levels;
    }
    return n;
}

// Table number `code` of the enumeration, or an empty vector when it breaks a budget.
std::vector<double> grid_table(const DosingPolicy& skel, std::size_t levels, std::size_t code) {
    std::vector<double> u(skel.u1.size());
    const double step = 1.0 / static_cast<double>(levels - 1);
    for (std::size_t k = 0; k < u.size(); ++k, code /= levels) {
        const std::size_t week = k % skel.n_weeks;
        u[k] = skel.weekly_cap(week) / 7.0 * step * static_cast<double>(code % levels);
    }
    DosingPolicy p = skel;
    p.u1 = u;
    const std::vector<double> res = budget_residuals(p);
    for (std::size_t j = 0; j < res.size(); ++j)
        if (res[j] > 1e-9 * skel.weekly_cap(j)) return {};
    return u;
}

double relative_error(double estimate, double truth) { return std::abs(estimate - truth) / std::abs(truth); }

RecoveryReplicate run_replicate(const Instance& inst, const std::vector<double>& clean_final,
                                const RecoveryStudyConfig& cfg, std::uint64_t seed) {
    RecoveryReplicate r;
    r.seed = seed;
    r.truth = inst.params.beta.values;

    CalibrationSpec spec;
    spec.params = inst.params;
    spec.params.beta = WeeklySeries{std::vector<double>(inst.params.beta.size(), 0.1)};
    spec.nominal = inst.x0;
    spec.policy = inst.policy;
    spec.grid = inst.grid;
    spec.n_phases = inst.params.beta.size();
    spec.fit_recovery_time = false;
    spec.fit_initial = false;
    spec.deceased = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid,
                                         cfg.noise_fraction * clean_final[0], seed);
    spec.ls.seed = seed;
    spec.chain.seed = seed;
    spec.chain.length = cfg.chain_length;

    const LeastSquaresResult ls = least_squares_fit(spec);
    const Posterior post = mcmc_sample(spec, ls.estimates);
    r.ls_estimates = ls.estimates;
    for (const ParameterSummary& s : post.summaries) {
        r.medians.push_back(s.median);
        r.lo95.push_back(s.lo95);
        r.hi95.push_back(s.hi95);
    }
    r.acceptance = post.acceptance;
    return r;
}

}  // namespace

std::vector<double> batch_costs(const Instance& inst, std::span<const std::vector<double>> tables,
                                std::span<const Objective> objectives, Execution exec) {
    const std::size_t m = objectives.size();
    std::vector<double> out(tables.size() * m);
    for (const auto& t : tables)
        if (t.size() != inst.policy.u1.size()) throw InvalidArgument("dose table has the wrong size");
    if (exec == Execution::serial) {
        for (std::size_t k = 0; k < tables.size(); ++k) costs_of(inst, tables[k], objectives, &out[k * m]);
        return out;
    }
    const auto n = static_cast<long>(tables.size());
    #pragma omp parallel for schedule(dynamic, 4)
    for (long k = 0; k < n; ++k)
        costs_of(inst, tables[static_cast<std::size_t>(k)], objectives, &out[static_cast<std::size_t>(k) * m]);
    return out;
}

GridSearchResult grid_search(const Instance& inst, std::span<const Objective> objectives, std::size_t levels,
                             Execution exec) {
    if (levels < 2) throw InvalidArgument("a policy grid needs at least two levels");
    inst.policy.validate();
    const std::size_t m = objectives.size();
    GridSearchResult r;
    r.candidates = grid_size(levels, inst.policy.u1.size());
    r.best_cost.assign(m, kInf);
    r.best_table.assign(m, {});

    if (exec == Execution::serial) {
        std::vector<double> c(m);
        for (std::size_t code = 0; code < r.candidates; ++code) {
            const std::vector<double> u = grid_table(inst.policy, levels, code);
            if (u.empty()) continue;
            ++r.feasible;
            costs_of(inst, u, objectives, c.data());
            for (std::size_t j = 0; j < m; ++j)
                if (c[j] < r.best_cost[j]) {
                    r.best_cost[j] = c[j];
                    r.best_table[j] = u;
                }
        }
        return r;
    }

    std::vector<double> costs(r.candidates * m, kInf);
    std::vector<char> kept(r.candidates, 0);
    const auto n = static_cast<long>(r.candidates);
    #pragma omp parallel for schedule(dynamic, 16)
    for (long code = 0; code < n; ++code) {
        const auto c = static_cast<std::size_t>(code);
        const std::vector<double> u = grid_table(inst.policy, levels, c);
        if (u.empty()) continue;
        kept[c] = 1;
        costs_of(inst, u, objectives, &costs[c * m]);
    }
    // In-order reduction so ties resolve exactly as in the serial loop.
    for (std::size_t c = 0; c < r.candidates; ++c) {
        if (!kept[c]) continue;
        ++r.feasible;
        for (std::size_t j = 0; j < m; ++j)
            if (costs[c * m + j] < r.best_cost[j]) {
                r.best_cost[j] = costs[c * m + j];
                r.best_table[j] = grid_table(inst.policy, levels, c);
            }
    }
    return r;
}

double RecoveryReplicate::worst_ls_error() const {
    double e = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) e = std::max(e, relative_error(ls_estimates[k], truth[k]));
    return e;
}

double RecoveryReplicate::worst_median_error() const {
    double e = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) e = std::max(e, relative_error(medians[k], truth[k]));
    return e;
}

bool RecoveryReplicate::covered() const {
    for (std::size_t k = 0; k < truth.size(); ++k)
        if (!(lo95[k] <= truth[k] && truth[k] <= hi95[k])) return false;
    return true;
}

std::vector<RecoveryReplicate> recovery_study(const RecoveryStudyConfig& cfg, Execution exec) {
    if (cfg.replicates == 0 || cfg.chain_length == 0) throw InvalidArgument("empty recovery study");
    if (!(cfg.noise_fraction >= 0.0)) throw InvalidArgument("noise fraction must be non-negative");
    const Instance inst = synthetic_calibration_instance();
    const auto clean = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 0);
    std::vector<double> clean_final;
    for (const auto& s : clean) clean_final.push_back(s.back());

    std::vector<RecoveryReplicate> out(cfg.replicates);
    if (exec == Execution::serial) {
        for (std::size_t k = 0; k < cfg.replicates; ++k) out[k] = run_replicate(inst, clean_final, cfg, cfg.first_seed + k);
        return out;
    }
    std::vector<std::exception_ptr> errors(cfg.replicates);
    const auto n = static_cast<long>(cfg.replicates);
    #pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        try {
            out[i] = run_replicate(inst, clean_final, cfg, cfg.first_seed + i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace vaxopt
