#include "vaxopt/epi_core.hpp"

#include <algorithm>
#include <array>

#include "vaxopt/errors.hpp"

namespace vaxopt {

SeverityRatio severity_ratio(std::span<const double> b, const ModelParams& p) {
    const double s = b[S], v = b[V], w = b[W];
    const double num = s + p.theta_v * p.sigma_v * v + p.theta_w * p.sigma_w * w;
    const double den = s + p.sigma_v * v + p.sigma_w * w;
    SeverityRatio out;
    if (den <= kDenominatorGuard) return out;
    const double den2 = den * den;
    out.value = num / den;
    out.d_s = (den - num) / den2;
    out.d_v = (p.theta_v * p.sigma_v * den - p.sigma_v * num) / den2;
    out.d_w = (p.theta_w * p.sigma_w * den - p.sigma_w * num) / den2;
    return out;
}

DoseSplit dose_split(double s, double i, double detection) {
    const double undetected = (1.0 - detection) * i;
    const double den = s + undetected;
    DoseSplit out;
    if (den <= kDenominatorGuard) return out;
    out.value = s / den;
    out.d_s = undetected / (den * den);
    out.d_i = -s * (1.0 - detection) / (den * den);
    return out;
}

void evaluate_rhs(std::span<const double> x, std::span<const double> delayed, double t, long day,
                  const ModelParams& p, const DosingPolicy& policy, std::span<double> dx) {
    const std::size_t n = p.n_ages();
    const double beta = p.beta.at_day(day);
    const double detection = p.detection.at_day(day);
    const bool delayed_active = t > p.t_a;

    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &x[i * kCompartments];
        double contacts = 0.0;
        for (std::size_t k = 0; k < n; ++k) contacts += p.contact(i, k) * x[k * kCompartments + I];
        const double lambda = beta * p.r[i] * contacts / p.ages.populations[i];

        const double inf_s = lambda * xi[S];
        const double inf_v = lambda * p.sigma_v * xi[V];
        const double inf_w = lambda * p.sigma_w * xi[W];
        const double recovering = p.gamma * xi[I];
        const double f = delayed_active
                             ? p.ifr[i] * severity_ratio(delayed.subspan(i * kCompartments, kCompartments), p).value
                             : p.ifr[i];
        const double dying = f * recovering;
        const double waning = p.mu_r * xi[R];

        const ControlValues u = control_on_day(policy, i, day);
        const double first = u.u1 * dose_split(xi[S], xi[I], detection).value;

        double* d = &dx[i * kCompartments];
        d[S] = -inf_s - first + waning;
        d[I] = inf_s + inf_v + inf_w - recovering;
        d[R] = recovering - dying - u.u_r - waning;
        d[D] = dying;
        d[V] = -inf_v + first - u.u2;
        d[W] = -inf_w + u.u2 + u.u_r;
    }
}

EpiState rhs_eval(const EpiState& state, double t, const ModelParams& params,
                  const DosingPolicy& policy, const DenseHistory& history) {
    if (state.n_ages() != params.n_ages()) throw InvalidArgument("state and params disagree on ages");
    if (t < 0.0 || t >= policy.horizon() + 1e-9) throw InvalidArgument("rhs evaluated outside horizon");
    if (history.dim() != state.values().size()) throw InvalidArgument("history has wrong dimension");
    std::vector<double> delayed(state.values().size());
    history.interpolate(t - params.t_a, delayed);
    EpiState out(state.n_ages());
    evaluate_rhs(state.values(), delayed, t, static_cast<long>(std::floor(t)), params, policy,
                 out.values());
    return out;
}

double fatality_from_delayed(std::size_t age, double t, std::span<const double> delayed,
                             const ModelParams& p) {
    if (t <= p.t_a) return p.ifr[age];
    return p.ifr[age] * severity_ratio(delayed.subspan(age * kCompartments, kCompartments), p).value;
}

double fatality_fraction(std::size_t age, double t, const DenseHistory& history, const ModelParams& p) {
    if (t <= p.t_a) return p.ifr[age];
    std::vector<double> delayed(history.dim());
    history.interpolate(t - p.t_a, delayed);
    return fatality_from_delayed(age, t, delayed, p);
}

double hospitalized_from(std::size_t age, std::span<const double> x, std::span<const double> delayed,
                         const ModelParams& p) {
    const double kappa = p.kappa.empty() ? 1.0 : p.kappa[age];
    const double ratio = severity_ratio(delayed.subspan(age * kCompartments, kCompartments), p).value;
    return std::max(p.h * kappa * x[age * kCompartments + I] * ratio, 0.0);
}

double hospitalized(std::size_t age, double t, const DenseHistory& history, const ModelParams& p) {
    std::vector<double> x(history.dim()), delayed(history.dim());
    history.interpolate(t, x);
    history.interpolate(t - p.t_a, delayed);
    return hospitalized_from(age, x, delayed, p);
}

SquareMatrix weighted_contact_matrix(const ModelParams& p) {
    const std::size_t n = p.contact.size();
    if (p.r.size() != n) throw InvalidArgument("r must match the contact matrix");
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) m(i, k) = p.contact(i, k) * p.r[k];
    const double top = m.max_abs();
    if (!(top > 0.0)) throw InvalidArgument("weighted contact matrix is identically zero");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) m(i, k) /= top;
    return m;
}

double aggregate_ifr(const ModelParams& p) {
    double num = 0.0;
    for (std::size_t i = 0; i < p.n_ages(); ++i) num += p.ages.populations[i] * p.ifr[i];
    return num / p.ages.total();
}

WeeklySeries detection_rate(std::span<const double> cfr_daily, const ModelParams& p, double floor) {
    if (cfr_daily.empty()) throw InvalidArgument("CFR series is empty");
    const double ifr = aggregate_ifr(p);
    WeeklySeries out;
    for (std::size_t start = 0; start < cfr_daily.size(); start += 7) {
        const std::size_t end = std::min(start + 7, cfr_daily.size());
        double mean = 0.0;
        for (std::size_t d = start; d < end; ++d) {
            if (!(cfr_daily[d] > 0.0)) throw InvalidArgument("CFR must be positive");
            mean += cfr_daily[d];
        }
        mean /= static_cast<double>(end - start);
        out.values.push_back(std::clamp(ifr / mean, floor, 1.0));
    }
    return out;
}

}  // namespace vaxopt
