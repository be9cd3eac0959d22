#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/optimizer.hpp"
#include "vaxopt/presets.hpp"

using namespace vaxopt;

namespace {

// J(u) = 0.5 |u - c|^2, optionally clamped to u >= 0.
class Quadratic final : public ControlProblem {
public:
    Quadratic(std::vector<double> centre, bool clamp) : c_(std::move(centre)), clamp_(clamp) {}
    std::size_t dimension() const override { return c_.size(); }
    Evaluation evaluate(std::span<const double> u) const override {
        double j = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) j += 0.5 * (u[k] - c_[k]) * (u[k] - c_[k]);
        return {j, {}};
    }
    std::vector<double> gradient(std::span<const double> u, const Evaluation&) const override {
        std::vector<double> g(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) g[k] = sign_ * (u[k] - c_[k]);
        return g;
    }
    std::vector<double> project(std::span<const double> u, ProjectionReport*) const override {
        std::vector<double> v(u.begin(), u.end());
        if (clamp_)
            for (double& x : v) x = std::max(x, 0.0);
        return v;
    }
    bool feasible(std::span<const double> u) const override {
        for (double x : u)
            if (clamp_ && x < 0.0) return false;
        return true;
    }
    void flip_gradient() { sign_ = -1.0; }

private:
    std::vector<double> c_;
    bool clamp_;
    double sign_ = 1.0;
};

constexpr std::array<ObjectiveKind, 3> kAll{ObjectiveKind::deceased, ObjectiveKind::infected,
                                            ObjectiveKind::hospitalized};

void check_trace(const OptimizationTrace& trace, const DosingPolicy& skeleton,
                 const std::vector<double>& final_point) {
    CHECK(trace.non_increasing());
    CHECK(trace.all_feasible());
    DosingPolicy p = skeleton;
    p.u1 = final_point;
    for (double r : budget_residuals(p)) CHECK(r <= 0.0);
    for (double v : final_point) CHECK(v >= 0.0);
    const oracle::Polytope poly = oracle::dose_polytope(skeleton);
    const Eigen::Map<const Eigen::VectorXd> x(final_point.data(), static_cast<Eigen::Index>(final_point.size()));
    CHECK(((poly.a * x - poly.b).array() <= 1e-9).all());
}

// Equal per-capita rates at half the weekly cap, so first and echoed second doses fit together.
DosingPolicy homogeneous_start(const Instance& inst) {
    DosingPolicy p = inst.policy;
    double total = 0.0;
    for (double n : inst.params.ages.populations) total += n;
    for (std::size_t a = 0; a < p.n_ages; ++a)
        for (std::size_t w = 0; w < p.n_weeks; ++w)
            p.first(a, w) = 0.5 * p.n_week[w] / 7.0 * inst.params.ages.populations[a] / total;
    return p;
}

double share_of(const std::vector<double>& u1, std::size_t n_weeks, std::size_t age) {
    double part = 0.0, total = 0.0;
    for (std::size_t k = 0; k < u1.size(); ++k) {
        total += u1[k];
        if (k / n_weeks == age) part += u1[k];
    }
    return part / total;
}

struct GridOptimum {
    double cost = 1e300;
    std::vector<double> argmin;
};

// Five levels per coordinate between zero and the daily cap, filtered by the oracle polytope.
const std::array<GridOptimum, 3>& grid_optima() {
    static const std::array<GridOptimum, 3> best = [] {
        std::array<GridOptimum, 3> out;
        const Instance inst = two_age_instance();
        const oracle::Polytope poly = oracle::dose_polytope(inst.policy);
        const std::size_t dim = inst.policy.u1.size();
        const double cap = inst.policy.n_week[0] / 7.0;
        long combos = 1;
        for (std::size_t k = 0; k < dim; ++k) combos *= 5;
        Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
        for (long code = 0; code < combos; ++code) {
            long r = code;
            for (std::size_t k = 0; k < dim; ++k, r /= 5) u[static_cast<Eigen::Index>(k)] = cap * 0.25 * double(r % 5);
            if (((poly.a * u - poly.b).array() > 1e-9 * cap).any()) continue;
            DosingPolicy p = inst.policy;
            p.u1.assign(u.data(), u.data() + dim);
            const Trajectory traj = integrate_forward(inst.x0, inst.params, p, inst.grid);
            for (std::size_t j = 0; j < kAll.size(); ++j) {
                const double c = cost_value(traj, {kAll[j]}, inst.params);
                if (c < out[j].cost) out[j] = {c, p.u1};
            }
        }
        return out;
    }();
    return best;
}

}  // namespace

TEST_CASE("Armijo accepts the first trial along a zero direction") {
    Quadratic q({1.0, 2.0}, false);
    const std::vector<double> u{1.0, 2.0};
    const Evaluation at = q.evaluate(u);
    const ArmijoResult r = armijo_search(q, u, at, std::vector<double>{0.0, 0.0}, 0.01, 1.0, {});
    CHECK(r.success);
    CHECK(r.alpha == 0.01);
    CHECK(r.backtracks == 0);
    CHECK(r.point == u);
}

TEST_CASE("Armijo backtracking on a 1-D quadratic follows the hand sequence") {
    Quadratic q({3.0}, false);
    const std::vector<double> u{10.0};
    const Evaluation at = q.evaluate(u);
    const std::vector<double> g = q.gradient(u, at);

    // Trials 10 - a for a = 32, 16, 8: costs 312.5 and 40.5 exceed 24.5, then 0.5 passes.
    ArmijoResult r = armijo_search(q, u, at, g, 32.0, 1.0, {});
    CHECK(r.success);
    CHECK(r.backtracks == 2);
    CHECK(r.alpha == 8.0);
    CHECK(r.point[0] == 2.0);
    CHECK(r.evaluation.cost == 0.5);

    // With c1 = 0.99 the test needs a/2 <= 0.07 (decrease 7a - a^2/2 vs 6.93a): first at a = 1/8.
    ArmijoConfig strict;
    strict.c1 = 0.99;
    r = armijo_search(q, u, at, g, 32.0, 1.0, strict);
    CHECK(r.success);
    CHECK(r.backtracks == 8);
    CHECK(r.alpha == 0.125);
    CHECK(r.point[0] == doctest::Approx(9.875).epsilon(1e-15));

    // The step unit rescales the move: unit 2 and a = 4 give the same trial as a = 8 above.
    r = armijo_search(q, u, at, g, 4.0, 2.0, {});
    CHECK(r.alpha == 4.0);
    CHECK(r.point[0] == 2.0);
}

TEST_CASE("Armijo reports failure on an uphill direction") {
    Quadratic q({3.0, -1.0}, false);
    q.flip_gradient();
    const std::vector<double> u{10.0, 4.0};
    const Evaluation at = q.evaluate(u);
    ArmijoConfig cfg;
    cfg.max_backtracks = 12;
    const ArmijoResult r = armijo_search(q, u, at, q.gradient(u, at), 1.0, 1.0, cfg);
    CHECK_FALSE(r.success);
    CHECK(r.backtracks == 12);
    CHECK(r.point.empty());

    cfg.rho = 1.0;
    CHECK_THROWS_AS(armijo_search(q, u, at, q.gradient(u, at), 1.0, 1.0, cfg), InvalidArgument);
}

TEST_CASE("PGD keeps the last iterate and flags an Armijo failure") {
    Quadratic q({3.0}, true);
    q.flip_gradient();
    PgdConfig cfg;
    cfg.armijo.max_backtracks = 5;
    const PgdResult r = pgd_optimize(q, std::vector<double>{10.0}, cfg);
    CHECK(r.trace.armijo_failed);
    CHECK_FALSE(r.trace.converged);
    CHECK(r.trace.stop_reason == "armijo_failed");
    CHECK(r.point[0] == 10.0);
    CHECK(r.trace.iterations.size() == 1);
}

TEST_CASE("PGD on a clamped quadratic reaches the projected minimizer") {
    Quadratic q({3.0, -2.0, 0.5}, true);
    PgdConfig cfg;
    cfg.dose_scale = 1.0;
    cfg.stop = StopRule::absolute;
    cfg.tol = 1e-14;
    const PgdResult r = pgd_optimize(q, std::vector<double>{-4.0, 7.0, 9.0}, cfg);
    CHECK(r.trace.converged);
    CHECK(r.trace.non_increasing());
    CHECK(r.trace.all_feasible());
    CHECK(r.point[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.point[1] == 0.0);
    CHECK(r.point[2] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("PGD rejects bad configuration") {
    Quadratic q({1.0}, false);
    PgdConfig cfg;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(pgd_optimize(q, std::vector<double>{0.0}, cfg), InvalidArgument);
    CHECK_THROWS_AS(pgd_optimize(q, std::vector<double>{0.0, 1.0}, PgdConfig{}), InvalidArgument);
}

TEST_CASE("zero budget leaves the policy at zero after one iteration") {
    Instance inst = two_age_instance();
    inst.policy = DosingPolicy::zeros(2, 4, std::vector<double>(4, 0.0), 7);
    DosingPolicy start = inst.policy;
    for (double& v : start.u1) v = 1'000.0;
    const PolicyOptimum r = pgd_optimize(start, {ObjectiveKind::deceased}, inst.params, inst.x0, inst.grid, {});
    CHECK(r.trace.stop_reason == "stationary");
    CHECK(r.trace.iterations.size() == 2);
    for (double v : r.policy.u1) CHECK(v == 0.0);
    check_trace(r.trace, inst.policy, r.policy.u1);
}

TEST_CASE("warm start at the grid optimum stops within two iterations") {
    const Instance inst = two_age_instance();
    for (std::size_t j = 0; j < kAll.size(); ++j) {
        CAPTURE(to_string(kAll[j]));
        DosingPolicy start = inst.policy;
        start.u1 = grid_optima()[j].argmin;
        const PolicyOptimum r = pgd_optimize(start, {kAll[j]}, inst.params, inst.x0, inst.grid, {});
        CHECK(r.trace.converged);
        CHECK(r.trace.iterations.size() <= 3);
        CHECK(r.trace.costs().back() <= r.trace.costs().front());
        check_trace(r.trace, inst.policy, r.policy.u1);
    }
}

TEST_CASE("PGD matches or beats the brute-force grid on the 2-age instance") {
    const Instance inst = two_age_instance();
    const DosingPolicy start = homogeneous_start(inst);
    for (std::size_t j = 0; j < kAll.size(); ++j) {
        CAPTURE(to_string(kAll[j]));
        const PolicyOptimum r = pgd_optimize(start, {kAll[j]}, inst.params, inst.x0, inst.grid, {});
        check_trace(r.trace, inst.policy, r.policy.u1);
        const double grid = grid_optima()[j].cost;
        // The grid vertices are reached up to rounding in the projection.
        CHECK(r.trace.costs().back() <= grid * (1.0 + 1e-12));
    }
}

TEST_CASE("deaths pull doses to the elderly, infections to the young") {
    const Instance inst = two_age_instance();
    const DosingPolicy start = homogeneous_start(inst);
    const double start_share = share_of(start.u1, 4, 0);
    CHECK(start_share == doctest::Approx(0.2));

    const auto& grid = grid_optima();
    const PolicyOptimum d = pgd_optimize(start, {ObjectiveKind::deceased}, inst.params, inst.x0, inst.grid, {});
    const PolicyOptimum i = pgd_optimize(start, {ObjectiveKind::infected}, inst.params, inst.x0, inst.grid, {});

    CHECK(share_of(d.policy.u1, 4, 0) > start_share);
    CHECK(share_of(grid[0].argmin, 4, 0) > start_share);
    CHECK(share_of(i.policy.u1, 4, 0) < start_share);
    CHECK(share_of(grid[1].argmin, 4, 0) < start_share);

    // Same weeks saturated as the grid argmin.
    const double cap = inst.policy.n_week[0] / 7.0;
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK((d.policy.u1[k] > 0.5 * cap) == (grid[0].argmin[k] > 0.5 * cap));
        CHECK((i.policy.u1[k] > 0.5 * cap) == (grid[1].argmin[k] > 0.5 * cap));
    }
}

TEST_CASE("every PGD trace is monotone and feasible from random starts") {
    const Instance inst = two_age_instance();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> raw(-2'000.0, 9'000.0);
    for (int trial = 0; trial < 12; ++trial) {
        DosingPolicy start = inst.policy;
        for (double& v : start.u1) v = raw(rng);
        const ObjectiveKind kind = kAll[static_cast<std::size_t>(trial) % kAll.size()];
        CAPTURE(trial);
        const PolicyOptimum r = pgd_optimize(start, {kind, trial % 2 == 0 ? 0.0 : 1.0}, inst.params, inst.x0,
                                             inst.grid, {});
        CHECK(r.trace.iterations.size() >= 2);
        check_trace(r.trace, inst.policy, r.policy.u1);
    }
}

TEST_CASE("PGD on the Italian instance decreases deaths and stays feasible") {
    Instance inst = italy_instance();
    DosingPolicy start = inst.policy;
    for (std::size_t a = 0; a < start.n_ages; ++a)
        for (std::size_t w = 0; w < start.n_weeks; ++w)
            start.first(a, w) = 0.3 * start.n_week[w] / 7.0 * inst.params.ages.populations[a] / 6.0e7;
    PgdConfig cfg;
    cfg.max_iters = 15;
    const PolicyOptimum r = pgd_optimize(start, {ObjectiveKind::deceased}, inst.params, inst.x0, inst.grid, cfg);
    check_trace(r.trace, inst.policy, r.policy.u1);
    CHECK(r.trace.costs().back() < r.trace.costs().front());
}
