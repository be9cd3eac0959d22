#include "vaxopt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_statistics_double.h>

#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"

namespace vaxopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t zeta_offset(const CalibrationSpec& spec) { return spec.n_phases + (spec.fit_recovery_time ? 1 : 0); }

}  // namespace

void CalibrationSpec::validate() const {
    params.validate();
    grid.validate();
    if (n_phases == 0) throw InvalidArgument("calibration needs at least one beta phase");
    if (nominal.n_ages() != params.n_ages()) throw InvalidArgument("nominal state has the wrong number of ages");
    if (deceased.size() != params.n_ages()) throw InvalidArgument("deceased data needs one series per age");
    const auto days = static_cast<std::size_t>(std::floor(grid.tf - grid.t0 + 1e-9)) + 1;
    for (const auto& s : deceased)
        if (s.size() != days) throw InvalidArgument("deceased series must span the horizon day by day");
    if (!(priors.zeta_lo > 0.0 && priors.zeta_lo < priors.zeta_hi)) throw InvalidArgument("bad zeta prior range");
    if (!(priors.t_r_variance > 0.0) || !(priors.beta_relative_sd > 0.0))
        throw InvalidArgument("prior spreads must be positive");
    if (!(ls.beta_max > 0.0) || !(ls.t_r_min > 0.0 && ls.t_r_min < ls.t_r_max))
        throw InvalidArgument("bad least-squares bounds");
    if (!(chain.burn_in >= 0.0 && chain.burn_in < 1.0) || chain.length == 0)
        throw InvalidArgument("bad chain length or burn-in");
}

std::size_t CalibrationSpec::n_parameters() const {
    return n_phases + (fit_recovery_time ? 1 : 0) + (fit_initial ? 3 * params.n_ages() : 0);
}

std::vector<std::string> CalibrationSpec::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < n_phases; ++k) names.push_back("beta[" + std::to_string(k) + "]");
    if (fit_recovery_time) names.emplace_back("t_R");
    if (fit_initial)
        for (const char* x : {"S", "I", "R"})
            for (std::size_t i = 0; i < params.n_ages(); ++i)
                names.push_back(std::string("zeta_") + x + "[" + params.ages.labels.at(i) + "]");
    return names;
}

std::vector<double> CalibrationSpec::lower_bounds() const {
    std::vector<double> lo(n_phases, 0.0);
    if (fit_recovery_time) lo.push_back(ls.t_r_min);
    if (fit_initial) lo.resize(n_parameters(), priors.zeta_lo);
    return lo;
}

std::vector<double> CalibrationSpec::upper_bounds() const {
    std::vector<double> hi(n_phases, ls.beta_max);
    if (fit_recovery_time) hi.push_back(ls.t_r_max);
    if (fit_initial) hi.resize(n_parameters(), priors.zeta_hi);
    return hi;
}

std::vector<double> CalibrationSpec::nominal_parameters() const {
    std::vector<double> theta(n_phases);
    for (std::size_t k = 0; k < n_phases; ++k) theta[k] = params.beta.at_day(static_cast<long>(7 * k));
    if (fit_recovery_time) theta.push_back(1.0 / params.gamma);
    if (fit_initial) theta.resize(n_parameters(), 1.0);
    return theta;
}

ModelParams CalibrationSpec::model_params(std::span<const double> theta) const {
    if (theta.size() != n_parameters()) throw InvalidArgument("parameter vector has the wrong size");
    ModelParams p = params;
    p.beta.values.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n_phases));
    if (fit_recovery_time) p.gamma = 1.0 / theta[n_phases];
    return p;
}

EpiState CalibrationSpec::initial_state(std::span<const double> theta) const {
    if (theta.size() != n_parameters()) throw InvalidArgument("parameter vector has the wrong size");
    const std::size_t n = params.n_ages();
    EpiState x = nominal;
    const std::size_t z = zeta_offset(*this);
    for (std::size_t i = 0; i < n; ++i) {
        const double zs = fit_initial ? theta[z + i] : 1.0;
        const double zi = fit_initial ? theta[z + n + i] : 1.0;
        const double zr = fit_initial ? theta[z + 2 * n + i] : 1.0;
        x(i, I) = zi * nominal(i, I);
        x(i, R) = zr * nominal(i, R);
        x(i, D) = nominal(i, D);
        x(i, S) = (params.ages.populations[i] - x(i, I) - x(i, R) - x(i, D) - x(i, V) - x(i, W)) * zs;
    }
    return x;
}

std::vector<std::vector<double>> deceased_series(const Trajectory& traj) {
    const std::vector<std::size_t> nodes = traj.daily_nodes();
    std::vector<std::vector<double>> out(traj.n_ages, std::vector<double>(nodes.size()));
    for (std::size_t i = 0; i < traj.n_ages; ++i)
        for (std::size_t k = 0; k < nodes.size(); ++k) out[i][k] = traj.value(nodes[k], i, D);
    return out;
}

double deceased_misfit(const std::vector<std::vector<double>>& model, const std::vector<std::vector<double>>& data) {
    if (model.size() != data.size()) throw InvalidArgument("model and data disagree on the number of ages");
    double e = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (model[i].size() != data[i].size()) throw InvalidArgument("model and data disagree on the horizon");
        const std::size_t n = data[i].size();
        for (std::size_t k = 0; k < n; ++k) {
            const double r = model[i][k] - data[i][k];
            e += (k == 0 || k + 1 == n ? 0.5 : 1.0) * r * r;
        }
    }
    return e;
}

double error_functional(std::span<const double> theta, const CalibrationSpec& spec) {
    const std::vector<double> lo = spec.lower_bounds(), hi = spec.upper_bounds();
    for (std::size_t k = 0; k < theta.size(); ++k)
        if (!std::isfinite(theta[k]) || theta[k] < lo[k] || theta[k] > hi[k]) return kInf;
    try {
        const Trajectory traj =
            integrate_forward(spec.initial_state(theta), spec.model_params(theta), spec.policy, spec.grid);
        const double e = deceased_misfit(deceased_series(traj), spec.deceased);
        return std::isfinite(e) ? e : kInf;
    } catch (const NumericalError&) {
        return kInf;
    } catch (const InvalidArgument&) {
        return kInf;
    }
}

namespace {

// Box constraints through x = lo + (hi - lo) / (1 + exp(-z)).
struct BoxMap {
    std::vector<double> lo, hi;

    double to_box(std::size_t k, double z) const { return lo[k] + (hi[k] - lo[k]) / (1.0 + std::exp(-z)); }
    double to_free(std::size_t k, double x) const {
        const double w = hi[k] - lo[k];
        const double f = std::clamp((x - lo[k]) / w, 1e-9, 1.0 - 1e-9);
        return std::log(f / (1.0 - f));
    }
};

struct NmContext {
    const CalibrationSpec* spec;
    const BoxMap* map;
    std::vector<double> x;
    int evaluations = 0;
};

double nm_objective(const gsl_vector* z, void* raw) {
    auto* ctx = static_cast<NmContext*>(raw);
    for (std::size_t k = 0; k < ctx->x.size(); ++k) ctx->x[k] = ctx->map->to_box(k, gsl_vector_get(z, k));
    ++ctx->evaluations;
    const double e = error_functional(ctx->x, *ctx->spec);
    // nmsimplex2 rejects non-finite values.
    return std::isfinite(e) ? e : std::numeric_limits<double>::max() / 4;
}

struct NmRun {
    std::vector<double> x;
    double value = kInf;
    bool converged = false;
};

NmRun nelder_mead(NmContext& ctx, std::span<const double> start, const LeastSquaresConfig& cfg) {
    const std::size_t n = start.size();
    gsl_multimin_function fn{&nm_objective, n, &ctx};
    gsl_vector* z = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (std::size_t k = 0; k < n; ++k) gsl_vector_set(z, k, ctx.map->to_free(k, start[k]));
    gsl_vector_set_all(step, 0.5);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, z, step);

    NmRun run;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), cfg.simplex_tolerance) == GSL_SUCCESS) {
            run.converged = true;
            break;
        }
    }
    run.x.resize(n);
    for (std::size_t k = 0; k < n; ++k) run.x[k] = ctx.map->to_box(k, gsl_vector_get(s->x, k));
    run.value = error_functional(run.x, *ctx.spec);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(z);
    return run;
}

}  // namespace

LeastSquaresResult least_squares_fit(const CalibrationSpec& spec) {
    spec.validate();
    const BoxMap map{spec.lower_bounds(), spec.upper_bounds()};
    const std::size_t n = spec.n_parameters();
    NmContext ctx{&spec, &map, std::vector<double>(n)};

    std::vector<std::vector<double>> starts{spec.nominal_parameters()};
    std::mt19937_64 rng(spec.ls.seed);
    for (int r = 0; r < spec.ls.restarts; ++r) {
        std::vector<double> s(n);
        for (std::size_t k = 0; k < n; ++k) s[k] = std::uniform_real_distribution<double>(map.lo[k], map.hi[k])(rng);
        starts.push_back(std::move(s));
    }

    LeastSquaresResult out;
    out.initial_error = error_functional(starts.front(), spec);
    NmRun best{starts.front(), out.initial_error, false};
    for (const auto& s : starts) {
        NmRun run = nelder_mead(ctx, s, spec.ls);
        // A collapsed simplex can stall early; one fresh simplex from the end point settles it.
        NmRun again = nelder_mead(ctx, run.x, spec.ls);
        if (again.value <= run.value) run = std::move(again);
        if (run.value < best.value || (run.value == best.value && run.converged)) best = std::move(run);
    }
    out.estimates = best.x;
    out.error = best.value;
    out.converged = best.converged && std::isfinite(best.value);
    out.evaluations = ctx.evaluations;
    const std::vector<std::string> names = spec.parameter_names();
    for (std::size_t k = 0; k < n; ++k) {
        const double w = map.hi[k] - map.lo[k];
        if (out.estimates[k] - map.lo[k] < 0.01 * w || map.hi[k] - out.estimates[k] < 0.01 * w)
            out.at_bound.push_back(names[k]);
    }
    return out;
}

const ParameterSummary& Posterior::summary(const std::string& name) const {
    for (const auto& s : summaries)
        if (s.name == name) return s;
    throw InvalidArgument("no posterior summary for '" + name + "'");
}

ChainResult metropolis_hastings(const LogDensity& log_target, std::vector<double> start,
                                std::vector<double> proposal_sd, const ChainConfig& cfg) {
    const std::size_t dim = start.size();
    if (proposal_sd.size() != dim) throw InvalidArgument("one proposal scale per parameter");
    if (!(cfg.burn_in >= 0.0 && cfg.burn_in < 1.0) || cfg.length == 0)
        throw InvalidArgument("bad chain length or burn-in");
    const auto burn = static_cast<std::size_t>(cfg.burn_in * static_cast<double>(cfg.length));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;

    ChainResult out;
    out.dim = dim;
    out.samples.reserve((cfg.length - burn) * dim);
    std::vector<double> x = std::move(start), y(dim);
    double lx = log_target(x);
    if (!std::isfinite(lx)) throw InvalidArgument("chain starts outside the support of the target");

    std::size_t window_accepts = 0, accepted_after_burn = 0;
    for (std::size_t it = 0; it < cfg.length; ++it) {
        for (std::size_t k = 0; k < dim; ++k) y[k] = x[k] + proposal_sd[k] * normal(rng);
        const double ly = log_target(y);
        const double u = unif(rng);
        const bool accept = std::isfinite(ly) && std::log(u) < ly - lx;
        if (accept) {
            x.swap(y);
            lx = ly;
        }
        if (it < burn) {
            window_accepts += accept ? 1 : 0;
            if ((it + 1) % cfg.adapt_interval == 0) {
                const double rate = static_cast<double>(window_accepts) / static_cast<double>(cfg.adapt_interval);
                const double factor = std::exp(rate - cfg.target_acceptance);
                for (double& s : proposal_sd) s *= factor;
                window_accepts = 0;
            }
        } else {
            accepted_after_burn += accept ? 1 : 0;
            out.samples.insert(out.samples.end(), x.begin(), x.end());
        }
    }
    out.acceptance = static_cast<double>(accepted_after_burn) / static_cast<double>(cfg.length - burn);
    out.proposal_sd = std::move(proposal_sd);
    return out;
}

double noise_scale(const std::vector<std::vector<double>>& data, NoiseScaleRule rule) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : data) {
        if (rule == NoiseScaleRule::first_differences) {
            for (std::size_t k = 1; k < s.size(); ++k, ++count) sum += (s[k] - s[k - 1]) * (s[k] - s[k - 1]);
        } else {
            for (std::size_t k = 2; k < s.size(); ++k, ++count) {
                const double d = s[k] - 2.0 * s[k - 1] + s[k - 2];
                sum += d * d / 6.0;
            }
        }
    }
    return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

std::vector<ParameterSummary> summarize(const std::vector<std::string>& names, std::span<const double> samples) {
    const std::size_t dim = names.size();
    if (dim == 0 || samples.size() % dim != 0) throw InvalidArgument("samples do not match the parameter names");
    const std::size_t n = samples.size() / dim;
    std::vector<ParameterSummary> out;
    std::vector<double> col(n);
    for (std::size_t k = 0; k < dim; ++k) {
        for (std::size_t s = 0; s < n; ++s) col[s] = samples[s * dim + k];
        std::sort(col.begin(), col.end());
        ParameterSummary p;
        p.name = names[k];
        if (n > 0) {
            p.mean = gsl_stats_mean(col.data(), 1, n);
            p.median = gsl_stats_quantile_from_sorted_data(col.data(), 1, n, 0.5);
            p.lo95 = gsl_stats_quantile_from_sorted_data(col.data(), 1, n, 0.025);
            p.hi95 = gsl_stats_quantile_from_sorted_data(col.data(), 1, n, 0.975);
        }
        out.push_back(p);
    }
    return out;
}

Posterior mcmc_sample(const CalibrationSpec& spec, std::span<const double> seed_estimates) {
    spec.validate();
    const std::size_t n = spec.n_parameters();
    if (seed_estimates.size() != n) throw InvalidArgument("seed estimates have the wrong size");
    for (double v : seed_estimates)
        if (!std::isfinite(v)) throw InvalidArgument("seed estimates must be finite");

    const std::vector<double> lo = spec.lower_bounds(), hi = spec.upper_bounds();
    const std::vector<double> mean(seed_estimates.begin(), seed_estimates.end());
    std::vector<double> sd(n, 0.0), width(n);
    for (std::size_t k = 0; k < spec.n_phases; ++k) {
        sd[k] = spec.priors.beta_relative_sd * std::abs(mean[k]);
        width[k] = 2.0 * sd[k];
    }
    std::size_t k = spec.n_phases;
    if (spec.fit_recovery_time) {
        sd[k] = std::sqrt(spec.priors.t_r_variance);
        width[k] = 2.0 * sd[k];
        ++k;
    }
    for (; k < n; ++k) width[k] = spec.priors.zeta_hi - spec.priors.zeta_lo;

    Posterior post;
    post.names = spec.parameter_names();
    post.noise_scale = noise_scale(spec.deceased, spec.chain.noise_rule);
    const double s2 = post.noise_scale * post.noise_scale;
    if (spec.chain.use_likelihood && !(s2 > 0.0)) throw InvalidArgument("data give a zero noise scale");

    const std::size_t t_r_index = spec.fit_recovery_time ? spec.n_phases : n;
    auto log_target = [&](std::span<const double> theta) {
        double lp = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (theta[j] < lo[j] || theta[j] > hi[j]) return -kInf;
            if (j < spec.n_phases && sd[j] > 0.0) {
                const double z = (theta[j] - mean[j]) / sd[j];
                lp -= 0.5 * z * z;
            }
        }
        if (t_r_index < n) {
            const double z = (theta[t_r_index] - spec.priors.t_r_mean) / sd[t_r_index];
            lp -= 0.5 * z * z;
        }
        if (!spec.chain.use_likelihood) return lp;
        const double e = error_functional(theta, spec);
        return std::isfinite(e) ? lp - e / (2.0 * s2) : -kInf;
    };

    std::vector<double> proposal(n);
    for (std::size_t j = 0; j < n; ++j) proposal[j] = spec.chain.proposal_fraction * width[j];
    ChainResult chain = metropolis_hastings(log_target, mean, std::move(proposal), spec.chain);

    post.samples = std::move(chain.samples);
    post.acceptance = chain.acceptance;
    post.acceptance_warning = post.acceptance < 0.05 || post.acceptance > 0.6;
    post.summaries = summarize(post.names, post.samples);
    return post;
}

std::vector<std::vector<double>> make_synthetic_truth(const ModelParams& params, const EpiState& x0,
                                                      const DosingPolicy& policy, const GridSpec& grid,
                                                      double noise, std::uint64_t seed) {
    if (!(noise >= 0.0)) throw InvalidArgument("noise scale must be non-negative");
    std::vector<std::vector<double>> data = deceased_series(integrate_forward(x0, params, policy, grid));
    if (noise == 0.0) return data;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise);
    for (auto& s : data)
        for (double& v : s) v += normal(rng);
    return data;
}

}  // namespace vaxopt
