#include "vaxopt/model.hpp"

#include <algorithm>
#include <numeric>

#include "vaxopt/errors.hpp"

namespace vaxopt {

const std::vector<std::string>& standard_age_labels() {
    static const std::vector<std::string> labels{"0-19", "20-39", "40-59", "60-79", "80+"};
    return labels;
}

double AgeAxis::total() const {
    return std::accumulate(populations.begin(), populations.end(), 0.0);
}

void AgeAxis::validate() const {
    if (populations.empty()) throw InvalidArgument("age axis has no classes");
    if (populations.size() > kMaxAges) throw InvalidArgument("too many age classes");
    if (labels.size() != populations.size())
        throw InvalidArgument("age labels and populations differ in length");
    for (double n : populations)
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("age population must be positive");
}

AgeAxis AgeAxis::standard(std::vector<double> populations) {
    if (populations.size() != 5) throw InvalidArgument("standard axis needs exactly 5 populations");
    AgeAxis axis{standard_age_labels(), std::move(populations)};
    axis.validate();
    return axis;
}

AgeAxis AgeAxis::italy() {
    // Resident population, 1 January 2021, rounded to thousands.
    return standard({10'560'000.0, 12'430'000.0, 18'000'000.0, 13'290'000.0, 4'480'000.0});
}

bool AgeAxis::is_standard_label_set(const std::vector<std::string>& labels) {
    return labels == standard_age_labels();
}

EpiState::EpiState(std::size_t n_ages, std::vector<double> values)
    : n_ages_(n_ages), data_(std::move(values)) {
    if (data_.size() != n_ages_ * kCompartments)
        throw InvalidArgument("state vector length must be 6 * n_ages");
}

double EpiState::age_total(std::size_t age) const {
    double s = 0.0;
    for (std::size_t c = 0; c < kCompartments; ++c) s += data_[age * kCompartments + c];
    return s;
}

void EpiState::check_valid(double tol) const {
    for (std::size_t k = 0; k < data_.size(); ++k) {
        if (!std::isfinite(data_[k]))
            throw NumericalError(std::string("non-finite compartment ") +
                                     kCompartmentNames[k % kCompartments],
                                 0);
        if (data_[k] < -tol)
            throw NumericalError(std::string("negative compartment ") +
                                     kCompartmentNames[k % kCompartments],
                                 0);
    }
}

EpiState EpiState::clamped() const {
    EpiState out = *this;
    for (double& v : out.data_) v = std::max(v, 0.0);
    return out;
}

double WeeklySeries::at_day(long day) const {
    if (values.empty()) throw InvalidArgument("weekly series is empty");
    if (day < 0) day = 0;
    const auto phase = static_cast<std::size_t>(day / 7);
    return values[std::min(phase, values.size() - 1)];
}

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
    if (data_.size() != n * n) throw InvalidArgument("matrix data does not match n*n");
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double SquareMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

void require_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0,1]");
}

void require_rate(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be >= 0");
}

}  // namespace

void ModelParams::validate() const {
    ages.validate();
    const std::size_t n = ages.size();
    if (r.size() != n || ifr.size() != n) throw InvalidArgument("r and ifr must have one entry per age");
    if (contact.size() != n) throw InvalidArgument("contact matrix must be n_ages x n_ages");
    if (!kappa.empty() && kappa.size() != n) throw InvalidArgument("kappa must have one entry per age");
    if (beta.values.empty()) throw InvalidArgument("beta needs at least one phase");
    for (double b : beta.values) require_rate(b, "beta");
    require_rate(gamma, "gamma");
    require_rate(mu_r, "mu_r");
    require_rate(h, "h");
    for (double v : r) require_rate(v, "r");
    for (double v : ifr) require_unit(v, "ifr");
    for (double v : kappa) require_rate(v, "kappa");
    for (double v : contact.data()) require_rate(v, "contact");
    require_unit(sigma_v, "sigma_v");
    require_unit(sigma_w, "sigma_w");
    require_unit(theta_v, "theta_v");
    require_unit(theta_w, "theta_w");
    if (!(t_a >= 0.0)) throw InvalidArgument("t_a must be >= 0");
    if (detection.values.empty()) throw InvalidArgument("detection rate needs at least one phase");
    for (double d : detection.values)
        if (!(d > 0.0 && d <= 1.0)) throw InvalidArgument("detection rate must lie in (0,1]");
}

}  // namespace vaxopt
