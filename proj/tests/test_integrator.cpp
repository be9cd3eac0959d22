#include <array>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/presets.hpp"

using namespace vaxopt;

namespace {

// Plain scalar SIRD with its own RK4, written independently of the model code.
std::vector<std::array<double, 4>> sird_reference(double beta, double gamma, double ifr, double n,
                                                  std::array<double, 4> y, int days) {
    auto f = [&](const std::array<double, 4>& s) {
        const double inf = beta * s[0] * s[1] / n;
        return std::array<double, 4>{-inf, inf - gamma * s[1], (1 - ifr) * gamma * s[1], ifr * gamma * s[1]};
    };
    std::vector<std::array<double, 4>> out{y};
    for (int d = 0; d < days; ++d) {
        auto k1 = f(y);
        std::array<double, 4> t{};
        for (int c = 0; c < 4; ++c) t[c] = y[c] + 0.5 * k1[c];
        auto k2 = f(t);
        for (int c = 0; c < 4; ++c) t[c] = y[c] + 0.5 * k2[c];
        auto k3 = f(t);
        for (int c = 0; c < 4; ++c) t[c] = y[c] + k3[c];
        auto k4 = f(t);
        for (int c = 0; c < 4; ++c) y[c] += (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]) / 6.0;
        out.push_back(y);
    }
    return out;
}

Instance dosed_italy() {
    Instance inst = italy_instance();
    inst.policy.u_r.assign(inst.policy.u1.size(), 300.0);
    std::vector<double> raw(inst.policy.u1.size());
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t w = 0; w < 19; ++w) raw[i * 22 + w] = 0.004 * inst.params.ages.populations[i] * (1 + (w % 3));
    inst.policy = project_feasible(raw, inst.policy);
    inst.params.detection = WeeklySeries{{0.4, 0.5, 0.6, 0.7}};
    return inst;
}

}  // namespace

TEST_CASE("zero transmission and no doses keep the state constant") {
    Instance inst = italy_instance();
    inst.params.beta = WeeklySeries::constant(0.0);
    inst.params.mu_r = 0.0;
    inst.params.gamma = 0.0;
    const Trajectory traj = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    for (std::size_t k = 0; k < traj.n_nodes(); ++k) CHECK(traj.state(k) == inst.x0);
}

TEST_CASE("single-age model matches the scalar SIRD oracle") {
    const double beta = 0.3, gamma = 0.1, ifr = 0.01, n = 1e6;
    const Instance inst = single_age_sird(beta, gamma, ifr, n, 100.0, 30.0);
    const Trajectory traj = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    const auto ref = sird_reference(beta, gamma, ifr, n, {n - 100.0, 100.0, 0.0, 0.0}, 30);
    for (std::size_t k = 0; k <= 30; ++k)
        for (std::size_t c = 0; c < 4; ++c) {
            const double got = traj.value(k, 0, static_cast<Compartment>(c));
            CHECK(std::abs(got - ref[k][c]) <= 1e-10 * std::max(std::abs(ref[k][c]), 1.0));
        }
}

TEST_CASE("per-age sums are conserved over the full horizon") {
    const Instance inst = dosed_italy();
    REQUIRE(is_feasible(inst.policy));
    const Trajectory traj = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    for (std::size_t k = 0; k < traj.n_nodes(); ++k) {
        const EpiState x = traj.state(k);
        for (std::size_t i = 0; i < 5; ++i) {
            const double n = inst.params.ages.populations[i];
            CHECK(std::abs(x.age_total(i) - inst.x0.age_total(i)) <= 1e-9 * n);
        }
    }
}

TEST_CASE("fourth-order self-convergence") {
    Instance inst = dosed_italy();
    inst.grid.tf = 56.0;
    auto final_state = [&](double step) {
        GridSpec g = inst.grid;
        g.step = step;
        const Trajectory t = integrate_forward(inst.x0, inst.params, inst.policy, g);
        const auto v = t.history.node(t.n_nodes() - 1);
        return std::vector<double>(v.begin(), v.end());
    };
    const auto ref = final_state(0.25);
    auto err = [&](const std::vector<double>& v) {
        double e = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) e = std::max(e, std::abs(v[k] - ref[k]));
        return e;
    };
    const double e1 = err(final_state(1.0));
    const double e2 = err(final_state(0.5));
    const double order = std::log2(e1 / e2);
    MESSAGE("observed order " << order);
    CHECK(order == doctest::Approx(4.0).epsilon(0.3 / 4.0));
}

TEST_CASE("forward solve is bit-identical across repeats") {
    const Instance inst = dosed_italy();
    const Trajectory a = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    const Trajectory b = integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
    for (std::size_t k = 0; k < a.n_nodes(); ++k) CHECK(a.state(k) == b.state(k));
}

TEST_CASE("forward solve rejects overdrawn compartments and bad delays") {
    Instance inst = two_age_instance();
    inst.policy.first(0, 0) = 1e6;
    try {
        integrate_forward(inst.x0, inst.params, inst.policy, inst.grid);
        FAIL("expected a NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.step() < 7);
    }
    Instance drained = two_age_instance();
    drained.policy.first(0, 0) = 3000;
    CHECK_NOTHROW(integrate_forward(drained.x0, drained.params, drained.policy, drained.grid));
    ForwardOptions strict;
    strict.strict_first_dose_pool = true;
    CHECK_THROWS_AS(integrate_forward(drained.x0, drained.params, drained.policy, drained.grid, strict),
                    NumericalError);

    Instance late = two_age_instance();
    late.params.t_a = 0.5;
    CHECK_THROWS_AS(integrate_forward(late.x0, late.params, late.policy, late.grid), InvalidArgument);
}

TEST_CASE("adjoint with zero right-hand side stays at the terminal value") {
    const GridSpec grid = GridSpec::daily(20.0);
    const std::vector<double> terminal{1.0, -2.0, 3.5};
    const AdjointRhs zero = [](const AdjointPoint&, std::span<const double>, const DenseHistory&, std::span<double> dp) {
        std::fill(dp.begin(), dp.end(), 0.0);
    };
    const DenseHistory p = integrate_adjoint(grid, terminal, zero);
    for (std::size_t k = 0; k <= 20; ++k)
        for (std::size_t c = 0; c < 3; ++c) CHECK(p.node(k)[c] == terminal[c]);

    const DenseHistory z = integrate_adjoint(grid, std::vector<double>(3, 0.0), zero);
    for (std::size_t k = 0; k <= 20; ++k)
        for (std::size_t c = 0; c < 3; ++c) CHECK(z.node(k)[c] == 0.0);
}

TEST_CASE("linear adjoint matches the matrix exponential") {
    // x' = A x, cost x(T)^T x(T): p(T) = 2 x(T), p' = -A^T p, so p(t) = exp(A^T (T - t)) p(T).
    Eigen::Matrix2d a;
    a << -0.08, 0.03, 0.02, -0.05;
    const double tf = 10.0;
    const Eigen::Vector2d x0(1.0, 2.0);
    const Eigen::Vector2d xt = (a * tf).exp() * x0;
    const Eigen::Vector2d pt = 2.0 * xt;

    const AdjointRhs rhs = [&](const AdjointPoint&, std::span<const double> p, const DenseHistory&, std::span<double> dp) {
        dp[0] = -(a(0, 0) * p[0] + a(1, 0) * p[1]);
        dp[1] = -(a(0, 1) * p[0] + a(1, 1) * p[1]);
    };
    const GridSpec grid = GridSpec::daily(tf);
    const DenseHistory p = integrate_adjoint(grid, std::vector<double>{pt(0), pt(1)}, rhs);
    for (std::size_t k = 0; k <= 10; ++k) {
        const Eigen::Vector2d exact = (a.transpose() * (tf - static_cast<double>(k))).exp() * pt;
        for (int c = 0; c < 2; ++c) CHECK(std::abs(p.node(k)[c] - exact(c)) <= 1e-6 * std::abs(exact(c)));
    }

    SUBCASE("linear in the terminal value") {
        const DenseHistory q = integrate_adjoint(grid, std::vector<double>{3 * pt(0), 3 * pt(1)}, rhs);
        for (std::size_t k = 0; k <= 10; ++k)
            for (int c = 0; c < 2; ++c) CHECK(q.node(k)[c] == doctest::Approx(3 * p.node(k)[c]).epsilon(1e-14));
    }
}

TEST_CASE("adjoint impulses jump the solution when crossing a node") {
    const GridSpec grid = GridSpec::daily(10.0);
    const AdjointRhs zero = [](const AdjointPoint&, std::span<const double>, const DenseHistory&, std::span<double> dp) {
        std::fill(dp.begin(), dp.end(), 0.0);
    };
    const std::vector<AdjointImpulse> jumps{{4, {2.0}}};
    const DenseHistory p = integrate_adjoint(grid, std::vector<double>{1.0}, zero, jumps);
    CHECK(p.node(5)[0] == 1.0);
    CHECK(p.node(4)[0] == 1.0);  // right limit
    CHECK(p.step_end(3)[0] == 3.0);
    CHECK(p.node(0)[0] == 3.0);
}
