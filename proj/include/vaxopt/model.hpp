#pragma once

// Domain types of the age-stratified SIRDVW model.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vaxopt {

enum Compartment : std::size_t { S = 0, I = 1, R = 2, D = 3, V = 4, W = 5 };

inline constexpr std::size_t kCompartments = 6;
inline constexpr std::size_t kMaxAges = 16;
inline constexpr const char* kCompartmentNames[kCompartments] = {"S", "I", "R", "D", "V", "W"};

/// Below this many persons the delayed vaccine ratio is taken as 1.
inline constexpr double kDenominatorGuard = 1e-12;
/// Compartments more negative than this (persons) abort an integration.
inline constexpr double kNegativeTolerance = 1e-6;

struct AgeAxis {
    std::vector<std::string> labels;
    std::vector<double> populations;

    std::size_t size() const { return populations.size(); }
    double total() const;
    void validate() const;

    /// The five classes (0-19), (20-39), (40-59), (60-79), (80+).
    static AgeAxis standard(std::vector<double> populations);
    static AgeAxis italy();
    static bool is_standard_label_set(const std::vector<std::string>& labels);
};

const std::vector<std::string>& standard_age_labels();

/// Per-age S, I, R, D, V, W stored age-major: value(age, c) = data[6*age + c].
class EpiState {
public:
    EpiState() = default;
    explicit EpiState(std::size_t n_ages) : n_ages_(n_ages), data_(n_ages * kCompartments, 0.0) {}
    EpiState(std::size_t n_ages, std::vector<double> values);

    std::size_t n_ages() const { return n_ages_; }
    double& operator()(std::size_t age, Compartment c) { return data_[age * kCompartments + c]; }
    double operator()(std::size_t age, Compartment c) const { return data_[age * kCompartments + c]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double age_total(std::size_t age) const;
    /// Throws NumericalError if any entry is below -tol or non-finite.
    void check_valid(double tol = kNegativeTolerance) const;
    /// Copy with tiny negatives clamped to zero (for output only).
    EpiState clamped() const;

    bool operator==(const EpiState&) const = default;

private:
    std::size_t n_ages_ = 0;
    std::vector<double> data_;
};

/// Piecewise-constant series over 7-day phases. Days past the last phase keep the last value.
struct WeeklySeries {
    std::vector<double> values;

    static WeeklySeries constant(double v, std::size_t n_phases = 1) {
        return WeeklySeries{std::vector<double>(n_phases, v)};
    }
    double at_day(long day) const;
    double at(double t) const { return at_day(static_cast<long>(std::floor(t))); }
    std::size_t size() const { return values.size(); }
};

class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
    SquareMatrix(std::size_t n, std::vector<double> row_major);

    static SquareMatrix identity(std::size_t n);

    std::size_t size() const { return n_; }
    double& operator()(std::size_t i, std::size_t k) { return data_[i * n_ + k]; }
    double operator()(std::size_t i, std::size_t k) const { return data_[i * n_ + k]; }
    const std::vector<double>& data() const { return data_; }
    double max_abs() const;

    bool operator==(const SquareMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Epidemiological and vaccine parameters. Rates are per day.
struct ModelParams {
    AgeAxis ages;
    WeeklySeries beta;        // transmission rate per weekly phase
    double gamma = 0.07;      // recovery rate
    std::vector<double> r;    // age susceptibility
    std::vector<double> ifr;  // infection fatality rate
    double sigma_v = 0.21;    // transmissibility ratio after first dose
    double sigma_w = 0.21;    // ... after full cycle
    double theta_v = 0.20;    // severity ratio after first dose
    double theta_w = 0.037;   // ... after full cycle
    double mu_r = 0.006;      // waning rate of natural immunity
    SquareMatrix contact;
    double t_a = 15.0;        // days to reach vaccine effectiveness
    WeeklySeries detection = WeeklySeries::constant(1.0);
    double h = 0.0;                // hospitalized fraction of infected
    std::vector<double> kappa;     // age propensity for severe symptoms

    std::size_t n_ages() const { return ages.size(); }
    void validate() const;
};

}  // namespace vaxopt
