#include <random>

#include "doctest.h"
#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/presets.hpp"

using namespace vaxopt;

namespace {

std::vector<double> rhs(const Instance& inst, const EpiState& x, const EpiState& delayed, double t) {
    std::vector<double> dx(x.values().size());
    evaluate_rhs(x.values(), delayed.values(), t, static_cast<long>(t), inst.params, inst.policy, dx);
    return dx;
}

EpiState random_state(const ModelParams& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EpiState x(p.n_ages());
    for (std::size_t i = 0; i < p.n_ages(); ++i) {
        double left = p.ages.populations[i];
        for (Compartment c : {I, R, D, V, W}) {
            x(i, c) = 0.15 * left * u(rng);
            left -= x(i, c);
        }
        x(i, S) = left;
    }
    return x;
}

}  // namespace

TEST_CASE("no infection and no doses leaves only the waning flux") {
    Instance inst = italy_instance();
    EpiState x = inst.x0;
    for (std::size_t i = 0; i < 5; ++i) x(i, I) = 0.0;
    const auto dx = rhs(inst, x, x, 30.0);
    for (std::size_t i = 0; i < 5; ++i) {
        const double waning = inst.params.mu_r * x(i, R);
        CHECK(dx[i * 6 + S] == doctest::Approx(waning).epsilon(1e-15));
        CHECK(dx[i * 6 + R] == doctest::Approx(-waning).epsilon(1e-15));
        CHECK(dx[i * 6 + I] == 0.0);
        CHECK(dx[i * 6 + D] == 0.0);
        CHECK(dx[i * 6 + V] == 0.0);
        CHECK(dx[i * 6 + W] == 0.0);
    }
}

TEST_CASE("per-age derivatives sum to zero for random states and controls") {
    Instance inst = italy_instance();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dose(0.0, 30'000.0);
    for (double& u : inst.policy.u1) u = dose(rng);
    inst.policy.u_r.assign(inst.policy.u1.size(), 500.0);
    inst.params.detection = WeeklySeries{{0.3, 0.6, 0.9}};
    for (int trial = 0; trial < 50; ++trial) {
        const EpiState x = random_state(inst.params, rng);
        const EpiState delayed = random_state(inst.params, rng);
        const double t = 1.0 + trial * 2.9;
        const auto dx = rhs(inst, x, delayed, t);
        for (std::size_t i = 0; i < 5; ++i) {
            double sum = 0.0, scale = 0.0;
            for (std::size_t c = 0; c < 6; ++c) {
                sum += dx[i * 6 + c];
                scale += std::abs(dx[i * 6 + c]);
            }
            CHECK(std::abs(sum) <= 1e-15 * scale);
            CHECK(dx[i * 6 + D] >= 0.0);
        }
    }
}

TEST_CASE("single-age degeneration gives the SIRD rates") {
    const double beta = 0.25, gamma = 0.1, ifr = 0.02, n = 1e6;
    Instance inst = single_age_sird(beta, gamma, ifr, n, 1000.0, 30.0);
    EpiState x(1);
    x(0, S) = 9e5;
    x(0, I) = 5e4;
    x(0, R) = 4e4;
    x(0, D) = 1e4;
    const auto dx = rhs(inst, x, x, 20.0);
    const double infection = beta * x(0, S) * x(0, I) / n;
    CHECK(dx[S] == doctest::Approx(-infection).epsilon(1e-14));
    CHECK(dx[I] == doctest::Approx(infection - gamma * x(0, I)).epsilon(1e-14));
    CHECK(dx[R] == doctest::Approx((1 - ifr) * gamma * x(0, I)).epsilon(1e-14));
    CHECK(dx[D] == doctest::Approx(ifr * gamma * x(0, I)).epsilon(1e-14));
}

TEST_CASE("fatality function") {
    Instance inst = italy_instance();
    const ModelParams& p = inst.params;
    EpiState x = inst.x0;
    for (std::size_t i = 0; i < 5; ++i) {
        x(i, V) = 1e5;
        x(i, W) = 5e4;
        x(i, S) -= 1.5e5;
    }

    SUBCASE("before onset returns IFR exactly") {
        for (std::size_t i = 0; i < 5; ++i) CHECK(fatality_from_delayed(i, 10.0, x.values(), p) == p.ifr[i]);
    }
    SUBCASE("no vaccinated returns IFR") {
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(fatality_from_delayed(i, 40.0, inst.x0.values(), p) == doctest::Approx(p.ifr[i]).epsilon(1e-15));
    }
    SUBCASE("theta one returns IFR") {
        ModelParams q = p;
        q.theta_v = q.theta_w = 1.0;
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(fatality_from_delayed(i, 40.0, x.values(), q) == doctest::Approx(q.ifr[i]).epsilon(1e-15));
    }
    SUBCASE("non-increasing in V and W") {
        for (std::size_t i = 0; i < 5; ++i) {
            const double base = fatality_from_delayed(i, 40.0, x.values(), p);
            EpiState more_v = x, more_w = x;
            more_v(i, V) += 1e4;
            more_w(i, W) += 1e4;
            CHECK(fatality_from_delayed(i, 40.0, more_v.values(), p) <= base);
            CHECK(fatality_from_delayed(i, 40.0, more_w.values(), p) <= base);
            CHECK(base <= p.ifr[i]);
        }
    }
    SUBCASE("empty denominator falls back to IFR") {
        EpiState empty(5);
        CHECK(fatality_from_delayed(2, 40.0, empty.values(), p) == p.ifr[2]);
    }
}

TEST_CASE("hospitalized proxy") {
    Instance inst = two_age_instance();
    ModelParams p = inst.params;
    EpiState x = inst.x0;
    CHECK(hospitalized_from(0, x.values(), x.values(), p) == doctest::Approx(p.h * p.kappa[0] * x(0, I)));

    x(1, I) = 0.0;
    CHECK(hospitalized_from(1, x.values(), x.values(), p) == 0.0);

    // Hand-evaluated instance: S=100, V=50, W=20, I=10, h=0.1, kappa=3.
    EpiState d(2);
    d(0, S) = 100;
    d(0, V) = 50;
    d(0, W) = 20;
    d(0, I) = 10;
    const double num = 100 + 0.20 * 0.21 * 50 + 0.037 * 0.21 * 20;
    const double den = 100 + 0.21 * 50 + 0.21 * 20;
    CHECK(hospitalized_from(0, d.values(), d.values(), p) == doctest::Approx(0.1 * 3.0 * 10 * num / den).epsilon(1e-14));
}

TEST_CASE("weighted contact matrix") {
    ModelParams p = italy_params();
    SUBCASE("identity contacts") {
        p.contact = SquareMatrix::identity(5);
        const SquareMatrix m = weighted_contact_matrix(p);
        for (std::size_t i = 0; i < 5; ++i) CHECK(m(i, i) == doctest::Approx(p.r[i] / 1.47).epsilon(1e-15));
        CHECK(m(0, 1) == 0.0);
    }
    SUBCASE("unit max and scale invariance") {
        const SquareMatrix m = weighted_contact_matrix(p);
        CHECK(m.max_abs() == 1.0);
        ModelParams q = p;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t k = 0; k < 5; ++k) q.contact(i, k) *= 37.5;
        const SquareMatrix m2 = weighted_contact_matrix(q);
        for (std::size_t k = 0; k < 25; ++k) CHECK(m2.data()[k] == doctest::Approx(m.data()[k]).epsilon(1e-15));
    }
    SUBCASE("unit r returns normalized C") {
        p.r.assign(5, 1.0);
        const SquareMatrix m = weighted_contact_matrix(p);
        const double top = p.contact.max_abs();
        for (std::size_t k = 0; k < 25; ++k) CHECK(m.data()[k] == doctest::Approx(p.contact.data()[k] / top));
    }
    SUBCASE("all zero rejected") {
        p.contact = SquareMatrix(5);
        CHECK_THROWS_AS(weighted_contact_matrix(p), InvalidArgument);
    }
}

TEST_CASE("detection rate") {
    const ModelParams p = italy_params();
    const double ifr = aggregate_ifr(p);
    CHECK(ifr == doctest::Approx((10.56 * 1e-4 + 12.43 * 6e-4 + 18.0 * 4.5e-3 + 13.29 * 2.3e-2 + 4.48 * 7.2e-2) /
                                 (10.56 + 12.43 + 18.0 + 13.29 + 4.48)));

    std::vector<double> same(21, ifr);
    for (double d : detection_rate(same, p).values) CHECK(d == doctest::Approx(1.0));

    std::vector<double> doubled(21, 2 * ifr);
    for (double d : detection_rate(doubled, p).values) CHECK(d == doctest::Approx(0.5));

    std::vector<double> step(21, 2 * ifr);
    for (std::size_t d = 7; d < 21; ++d) step[d] = 4 * ifr;
    const WeeklySeries s = detection_rate(step, p);
    REQUIRE(s.size() == 3);
    CHECK(s.values[0] == doctest::Approx(0.5));
    CHECK(s.values[1] == doctest::Approx(0.25));
    CHECK(s.values[2] == doctest::Approx(0.25));

    CHECK(detection_rate(std::vector<double>(7, 1e6), p).values[0] == 1e-3);
    CHECK_THROWS_AS(detection_rate(std::vector<double>{}, p), InvalidArgument);
}

TEST_CASE("rhs_eval reads the delayed state from history") {
    Instance inst = two_age_instance();
    inst.policy.first(0, 0) = 3000;
    inst.policy.first(1, 1) = 2000;
    const Trajectory traj = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    const EpiState at20 = traj.state(20);
    const EpiState dx = rhs_eval(at20, 20.0, inst.params, inst.policy, traj.history);
    std::vector<double> expect(12);
    evaluate_rhs(at20.values(), traj.state(13).values(), 20.0, 20, inst.params, inst.policy, expect);
    for (std::size_t k = 0; k < 12; ++k) CHECK(dx.values()[k] == expect[k]);
    CHECK_THROWS_AS(rhs_eval(at20, 40.0, inst.params, inst.policy, traj.history), InvalidArgument);
}
