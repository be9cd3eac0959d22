#include "vaxopt/presets.hpp"

#include <Eigen/Eigenvalues>

#include "vaxopt/errors.hpp"

namespace vaxopt {

namespace {

double spectral_radius_scaled(const SquareMatrix& c, const std::vector<double>& r) {
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k)
            m(i, k) = r[static_cast<std::size_t>(i)] * c(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    return Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SquareMatrix scaled_to_unit_radius(SquareMatrix c, const std::vector<double>& r) {
    const double rho = spectral_radius_scaled(c, r);
    if (!(rho > 0.0)) throw InvalidArgument("contact structure has zero spectral radius");
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t k = 0; k < c.size(); ++k) c(i, k) /= rho;
    return c;
}

const std::vector<double>& italy_beta_medians() {
    static const std::vector<double> beta{
        0.02866168, 0.08487043, 0.05793916, 0.03441935, 0.04757512, 0.07276475, 0.08298755,
        0.07913101, 0.07514123, 0.07197278, 0.07040295, 0.06946485, 0.06860226, 0.06789474,
        0.06733712, 0.06685438, 0.06643925, 0.0661041,  0.03511503, 0.02103584, 0.01821423};
    return beta;
}

SquareMatrix italy_contact(const std::vector<double>& r) {
    // Daily contacts by age of contact (columns), assortative with a school/work block.
    SquareMatrix c(5, {7.0, 2.5, 2.3, 0.9, 0.3,
                       2.2, 5.0, 3.0, 1.0, 0.3,
                       1.9, 2.8, 4.0, 1.4, 0.4,
                       1.0, 1.3, 1.9, 2.4, 0.6,
                       0.7, 0.8, 1.1, 1.3, 1.2});
    return scaled_to_unit_radius(std::move(c), r);
}

ModelParams italy_params() {
    ModelParams p;
    p.ages = AgeAxis::italy();
    p.beta = WeeklySeries{italy_beta_medians()};
    p.r = {0.33, 1.0, 1.0, 1.0, 1.47};
    p.ifr = {1e-4, 6e-4, 4.5e-3, 2.3e-2, 7.2e-2};
    p.contact = italy_contact(p.r);
    p.h = 0.05;
    p.kappa = {0.05, 0.2, 0.6, 1.6, 3.2};
    p.validate();
    return p;
}

EpiState italy_initial_state(const ModelParams& params) {
    const double infected[5] = {60'000, 90'000, 120'000, 80'000, 40'000};
    const double recovered[5] = {300'000, 550'000, 700'000, 450'000, 200'000};
    const double deceased[5] = {30, 500, 5'000, 30'000, 58'000};
    EpiState x(5);
    for (std::size_t i = 0; i < 5; ++i) {
        x(i, I) = infected[i];
        x(i, R) = recovered[i];
        x(i, D) = deceased[i];
        x(i, S) = params.ages.populations[i] - infected[i] - recovered[i] - deceased[i];
    }
    return x;
}

Instance italy_instance(double n_week, int delta_w) {
    Instance inst;
    inst.params = italy_params();
    inst.x0 = italy_initial_state(inst.params);
    inst.grid = GridSpec::daily(151.0);
    inst.policy = DosingPolicy::zeros(5, 22, std::vector<double>(22, n_week), delta_w);
    inst.policy.horizon_days = 151.0;
    return inst;
}

Instance single_age_sird(double beta, double gamma, double ifr, double population, double infected,
                         double tf) {
    Instance inst;
    ModelParams& p = inst.params;
    p.ages = AgeAxis{{"all"}, {population}};
    p.beta = WeeklySeries::constant(beta);
    p.gamma = gamma;
    p.r = {1.0};
    p.ifr = {ifr};
    p.sigma_v = p.sigma_w = 1.0;
    p.theta_v = p.theta_w = 1.0;
    p.mu_r = 0.0;
    p.contact = SquareMatrix::identity(1);
    p.validate();
    inst.x0 = EpiState(1);
    inst.x0(0, S) = population - infected;
    inst.x0(0, I) = infected;
    inst.grid = GridSpec::daily(tf);
    const auto weeks = static_cast<std::size_t>(std::ceil(tf / 7.0));
    inst.policy = DosingPolicy::zeros(1, weeks, std::vector<double>(weeks, 0.0));
    inst.policy.horizon_days = tf;
    return inst;
}

Instance two_age_instance() {
    Instance inst;
    ModelParams& p = inst.params;
    p.ages = AgeAxis{{"old", "young"}, {2.0e5, 8.0e5}};
    p.gamma = 0.07;
    p.beta = WeeklySeries::constant(1.3 * p.gamma);
    p.r = {1.0, 1.0};
    p.ifr = {5e-2, 2e-4};
    // Contacts C_ik / N_i per person of class i: the elderly meet few people, the young many.
    p.contact = scaled_to_unit_radius(SquareMatrix(2, {2.0, 0.5, 2.0, 10.0}), p.r);
    p.t_a = 7.0;
    p.h = 0.1;
    p.kappa = {3.0, 0.5};
    p.validate();

    inst.x0 = EpiState(2);
    const double infected[2] = {2'000, 12'000};
    const double recovered[2] = {5'000, 40'000};
    const double deceased[2] = {100, 10};
    for (std::size_t i = 0; i < 2; ++i) {
        inst.x0(i, I) = infected[i];
        inst.x0(i, R) = recovered[i];
        inst.x0(i, D) = deceased[i];
        inst.x0(i, S) = p.ages.populations[i] - infected[i] - recovered[i] - deceased[i];
    }
    inst.grid = GridSpec::daily(28.0);
    inst.policy = DosingPolicy::zeros(2, 4, std::vector<double>(4, 40'000.0), 7);
    return inst;
}

Instance synthetic_calibration_instance() {
    Instance inst;
    ModelParams& p = inst.params;
    p.ages = AgeAxis{{"all"}, {1.0e6}};
    p.beta = WeeklySeries{{0.25, 0.10}};
    p.gamma = 1.0 / 14.2;
    p.r = {1.0};
    p.ifr = {0.01};
    p.contact = SquareMatrix::identity(1);
    p.t_a = 15.0;
    p.kappa = {1.0};
    p.validate();

    inst.x0 = EpiState(1);
    inst.x0(0, I) = 20'000;
    inst.x0(0, S) = 1.0e6 - 20'000;
    inst.grid = GridSpec::daily(42.0);
    inst.policy = DosingPolicy::zeros(1, 6, std::vector<double>(6, 0.0), 21);
    return inst;
}

}  // namespace vaxopt
