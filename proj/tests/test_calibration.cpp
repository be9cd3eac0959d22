#include <cmath>
#include <numeric>

#include "doctest.h"
#include "vaxopt/calibration.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/presets.hpp"

using namespace vaxopt;

namespace {

CalibrationSpec spec_from(const Instance& inst, std::vector<std::vector<double>> data, std::size_t n_phases) {
    CalibrationSpec spec;
    spec.params = inst.params;
    spec.nominal = inst.x0;
    spec.policy = inst.policy;
    spec.grid = inst.grid;
    spec.n_phases = n_phases;
    spec.deceased = std::move(data);
    return spec;
}

CalibrationSpec beta_only(const Instance& inst, std::vector<std::vector<double>> data) {
    CalibrationSpec spec = spec_from(inst, std::move(data), inst.params.beta.size());
    spec.fit_recovery_time = false;
    spec.fit_initial = false;
    spec.params.beta = WeeklySeries{std::vector<double>(spec.n_phases, 0.1)};
    return spec;
}

// Mean and its standard error from non-overlapping batch means.
struct BatchEstimate {
    double mean = 0.0;
    double se = 0.0;
};

BatchEstimate batch_means(const std::vector<double>& x, std::size_t batches = 50) {
    const std::size_t len = x.size() / batches;
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b)
        means[b] = std::accumulate(x.begin() + static_cast<std::ptrdiff_t>(b * len),
                                   x.begin() + static_cast<std::ptrdiff_t>((b + 1) * len), 0.0) /
                   static_cast<double>(len);
    BatchEstimate e;
    for (double m : means) e.mean += m / static_cast<double>(batches);
    double var = 0.0;
    for (double m : means) var += (m - e.mean) * (m - e.mean) / static_cast<double>(batches - 1);
    e.se = std::sqrt(var / static_cast<double>(batches));
    return e;
}

std::vector<double> column(const std::vector<double>& rows, std::size_t dim, std::size_t k) {
    std::vector<double> c;
    for (std::size_t s = k; s < rows.size(); s += dim) c.push_back(rows[s]);
    return c;
}

Instance permuted(const Instance& inst) {
    Instance p = inst;
    const std::size_t n = inst.params.n_ages();
    auto flip = [n](std::size_t i) { return n - 1 - i; };
    for (std::size_t i = 0; i < n; ++i) {
        p.params.ages.labels[i] = inst.params.ages.labels[flip(i)];
        p.params.ages.populations[i] = inst.params.ages.populations[flip(i)];
        p.params.r[i] = inst.params.r[flip(i)];
        p.params.ifr[i] = inst.params.ifr[flip(i)];
        p.params.kappa[i] = inst.params.kappa[flip(i)];
        for (std::size_t k = 0; k < n; ++k) p.params.contact(i, k) = inst.params.contact(flip(i), flip(k));
        for (std::size_t c = 0; c < kCompartments; ++c)
            p.x0(i, static_cast<Compartment>(c)) = inst.x0(flip(i), static_cast<Compartment>(c));
        for (std::size_t w = 0; w < inst.policy.n_weeks; ++w) p.policy.first(i, w) = inst.policy.first(flip(i), w);
    }
    return p;
}

}  // namespace

TEST_CASE("synthetic truth without noise equals the model and seeds only change the noise") {
    const Instance inst = synthetic_calibration_instance();
    const auto clean = deceased_series(integrate_forward(inst.x0, inst.params, inst.policy, inst.grid));
    CHECK(make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 3) == clean);

    const auto a = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 10.0, 1);
    const auto b = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 10.0, 2);
    CHECK(a != b);
    CHECK(a == make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 10.0, 1));
    for (const auto* d : {&a, &b}) {
        double ss = 0.0;
        for (std::size_t k = 0; k < clean[0].size(); ++k) ss += ((*d)[0][k] - clean[0][k]) * ((*d)[0][k] - clean[0][k]);
        const double rms = std::sqrt(ss / static_cast<double>(clean[0].size()));
        CHECK(rms > 5.0);
        CHECK(rms < 15.0);
    }
    CHECK_THROWS_AS(make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, -1.0, 1), InvalidArgument);
}

TEST_CASE("error functional examples") {
    const Instance inst = synthetic_calibration_instance();
    const auto data = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 1);
    CalibrationSpec spec = spec_from(inst, data, 2);
    spec.fit_recovery_time = false;
    spec.fit_initial = false;

    const std::vector<double> truth{0.25, 0.10};
    double scale = 0.0;
    for (double v : data[0]) scale += v * v;
    CHECK(error_functional(truth, spec) <= 1e-6 * scale);
    CHECK(error_functional(std::vector<double>{0.26, 0.10}, spec) > error_functional(truth, spec));
    CHECK(error_functional(std::vector<double>{0.25, 0.095}, spec) > error_functional(truth, spec));
    CHECK(std::isinf(error_functional(std::vector<double>{-0.1, 0.1}, spec)));
    CHECK(std::isinf(error_functional(std::vector<double>{0.2, 1.5}, spec)));
}

TEST_CASE("zero deaths against constant data give 5 c^2 T") {
    Instance inst = italy_instance();
    for (double& f : inst.params.ifr) f = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        inst.x0(i, S) += inst.x0(i, D);
        inst.x0(i, D) = 0.0;
    }
    const double c = 37.0;
    const double tf = inst.grid.tf;
    CalibrationSpec spec = spec_from(inst, std::vector<std::vector<double>>(5, std::vector<double>(152, c)), 21);
    spec.fit_recovery_time = false;
    spec.fit_initial = false;
    CHECK(tf == 151.0);
    CHECK(error_functional(spec.nominal_parameters(), spec) == doctest::Approx(5.0 * c * c * tf).epsilon(1e-14));
}

TEST_CASE("error functional is invariant under a consistent age permutation") {
    const Instance inst = two_age_instance();
    const Instance flipped = permuted(inst);
    auto data = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 50.0, 4);
    CalibrationSpec a = spec_from(inst, data, 4);
    std::swap(data[0], data[1]);
    CalibrationSpec b = spec_from(flipped, data, 4);

    std::vector<double> theta_a = a.nominal_parameters();
    theta_a[0] *= 1.1;
    theta_a[a.n_phases] = 12.0;
    theta_a[a.n_phases + 1] = 0.9;   // zeta_S of age 0
    theta_a[a.n_phases + 4] = 1.2;   // zeta_R of age 0
    std::vector<double> theta_b = theta_a;
    theta_b[b.n_phases + 1] = theta_a[a.n_phases + 2];
    theta_b[b.n_phases + 2] = theta_a[a.n_phases + 1];
    theta_b[b.n_phases + 3] = theta_a[a.n_phases + 4];
    theta_b[b.n_phases + 4] = theta_a[a.n_phases + 3];
    theta_b[b.n_phases + 5] = theta_a[a.n_phases + 6];
    theta_b[b.n_phases + 6] = theta_a[a.n_phases + 5];
    CHECK(error_functional(theta_a, a) == doctest::Approx(error_functional(theta_b, b)).epsilon(1e-12));
}

TEST_CASE("initial state follows the zeta factors") {
    const Instance inst = two_age_instance();
    CalibrationSpec spec = spec_from(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0, 1), 4);
    CHECK(spec.n_parameters() == 4 + 1 + 6);
    CHECK(spec.parameter_names()[4] == "t_R");
    CHECK(spec.parameter_names()[5] == "zeta_S[old]");
    CHECK(spec.parameter_names()[8] == "zeta_I[young]");
    std::vector<double> theta = spec.nominal_parameters();
    CHECK(spec.initial_state(theta) == inst.x0);
    theta[7] = 1.2;  // zeta_I[old]
    theta[5] = 0.8;  // zeta_S[old]
    const EpiState x = spec.initial_state(theta);
    CHECK(x(0, I) == doctest::Approx(1.2 * inst.x0(0, I)));
    CHECK(x(0, S) == doctest::Approx(0.8 * (2e5 - 1.2 * inst.x0(0, I) - inst.x0(0, R) - inst.x0(0, D))));
    CHECK(spec.model_params(theta).gamma == doctest::Approx(inst.params.gamma));

    spec.deceased[1].pop_back();
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

TEST_CASE("least squares recovers a two-phase beta at 1% noise") {
    const Instance inst = synthetic_calibration_instance();
    const auto clean = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 1);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        CAPTURE(seed);
        CalibrationSpec spec = beta_only(
            inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.01 * clean[0].back(), seed));
        spec.ls.seed = seed;
        const LeastSquaresResult r = least_squares_fit(spec);
        CHECK(r.converged);
        CHECK_FALSE(r.boundary_flag());
        CHECK(r.error <= r.initial_error);
        CHECK(r.estimates[0] == doctest::Approx(0.25).epsilon(0.05));
        CHECK(r.estimates[1] == doctest::Approx(0.10).epsilon(0.05));
    }
}

TEST_CASE("least squares does not go uphill from the prior means") {
    const Instance inst = two_age_instance();
    CalibrationSpec spec = spec_from(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0, 1), 1);
    spec.ls.restarts = 1;
    spec.ls.max_iterations = 400;
    const LeastSquaresResult r = least_squares_fit(spec);
    CHECK(r.error <= r.initial_error);
    CHECK(r.initial_error <= 1e-6);
}

TEST_CASE("flat deceased data push beta to its lower bound and raise the flag") {
    const Instance inst = synthetic_calibration_instance();
    CalibrationSpec spec = beta_only(inst, std::vector<std::vector<double>>(1, std::vector<double>(43, 0.0)));
    const LeastSquaresResult r = least_squares_fit(spec);
    CHECK(r.boundary_flag());
    CHECK(r.estimates[1] < 0.01);
}

TEST_CASE("Metropolis-Hastings reproduces the moments of a correlated Gaussian") {
    // Mean (1, -2), covariance [[1, 0.5], [0.5, 2]].
    const double det = 1.0 * 2.0 - 0.25;
    auto log_target = [det](std::span<const double> x) {
        const double a = x[0] - 1.0, b = x[1] + 2.0;
        return -0.5 * (2.0 * a * a - 2.0 * 0.5 * a * b + 1.0 * b * b) / det;
    };
    ChainConfig cfg;
    cfg.length = 200'000;
    cfg.seed = 11;
    const ChainResult r = metropolis_hastings(log_target, {0.0, 0.0}, {0.5, 0.5}, cfg);
    CHECK(r.acceptance > 0.15);
    CHECK(r.acceptance < 0.35);

    const double mean[2] = {1.0, -2.0}, var[2] = {1.0, 2.0};
    for (std::size_t k = 0; k < 2; ++k) {
        CAPTURE(k);
        const std::vector<double> x = column(r.samples, 2, k);
        const BatchEstimate m = batch_means(x);
        CHECK(std::abs(m.mean - mean[k]) <= 3.0 * m.se);
        std::vector<double> sq(x.size());
        for (std::size_t s = 0; s < x.size(); ++s) sq[s] = (x[s] - mean[k]) * (x[s] - mean[k]);
        const BatchEstimate v = batch_means(sq);
        CHECK(std::abs(v.mean - var[k]) <= 3.0 * v.se);
    }
}

TEST_CASE("zero proposals keep the chain at the seed") {
    const Instance inst = synthetic_calibration_instance();
    CalibrationSpec spec = beta_only(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 5.0, 1));
    spec.chain.length = 500;
    spec.chain.proposal_fraction = 0.0;
    const std::vector<double> seed{0.24, 0.11};
    const Posterior post = mcmc_sample(spec, seed);
    CHECK(post.n_samples() == 400);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(post.summaries[k].median == seed[k]);
        CHECK(post.summaries[k].lo95 == seed[k]);
        CHECK(post.summaries[k].hi95 == seed[k]);
    }
}

TEST_CASE("with the likelihood off the zeta factors sample their uniform prior") {
    const Instance inst = two_age_instance();
    CalibrationSpec spec = spec_from(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0, 1), 4);
    spec.chain.use_likelihood = false;
    spec.chain.length = 100'000;
    spec.chain.seed = 5;
    const Posterior post = mcmc_sample(spec, spec.nominal_parameters());
    const std::size_t dim = spec.n_parameters();
    for (std::size_t k = 5; k < dim; ++k) {
        CAPTURE(post.names[k]);
        const BatchEstimate m = batch_means(column(post.samples, dim, k));
        CHECK(std::abs(m.mean - 1.0) <= 4.0 * m.se);
        CHECK(post.summaries[k].lo95 >= 0.7);
        CHECK(post.summaries[k].hi95 <= 1.3);
    }
    // t_R follows its Gaussian prior (truncation at 1 and 60 is far in the tails).
    const BatchEstimate t = batch_means(column(post.samples, dim, 4));
    CHECK(std::abs(t.mean - 14.20) <= 4.0 * t.se);
}

TEST_CASE("posterior of the recovery instance brackets the truth") {
    const Instance inst = synthetic_calibration_instance();
    const auto clean = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 1);
    CalibrationSpec spec =
        beta_only(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.01 * clean[0].back(), 8));
    spec.chain.length = 20'000;
    const LeastSquaresResult ls = least_squares_fit(spec);
    const Posterior post = mcmc_sample(spec, ls.estimates);
    CHECK_FALSE(post.acceptance_warning);
    const double truth[2] = {0.25, 0.10};
    for (std::size_t k = 0; k < 2; ++k) {
        const ParameterSummary& s = post.summaries[k];
        CHECK(s.lo95 <= s.median);
        CHECK(s.median <= s.hi95);
        CHECK(s.median == doctest::Approx(truth[k]).epsilon(0.10));
        CHECK(s.lo95 <= truth[k]);
        CHECK(truth[k] <= s.hi95);
    }
    CHECK(post.summary("beta[1]").name == "beta[1]");
    CHECK_THROWS_AS(post.summary("gamma"), InvalidArgument);
}

TEST_CASE("posterior medians approach the truth as chains grow") {
    const Instance inst = synthetic_calibration_instance();
    CalibrationSpec spec = beta_only(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 1));
    const LeastSquaresResult ls = least_squares_fit(spec);
    double previous = 1e300;
    for (std::size_t length : {1'000u, 10'000u, 100'000u}) {
        spec.chain.length = length;
        const Posterior post = mcmc_sample(spec, ls.estimates);
        const double err = std::abs(post.summaries[0].median - 0.25) / 0.25 +
                           std::abs(post.summaries[1].median - 0.10) / 0.10;
        CAPTURE(length);
        CHECK(err < previous);
        previous = err;
    }
}

TEST_CASE("acceptance outside [0.05, 0.6] raises the warning") {
    const Instance inst = synthetic_calibration_instance();
    const auto clean = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, 1);
    CalibrationSpec spec = beta_only(inst, make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 20.0, 1));
    spec.chain.length = 2'000;
    spec.chain.burn_in = 0.0;
    spec.chain.proposal_fraction = 5.0;
    const Posterior post = mcmc_sample(spec, std::vector<double>{0.25, 0.10});
    CHECK(post.acceptance < 0.05);
    CHECK(post.acceptance_warning);
}
