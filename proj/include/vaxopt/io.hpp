#pragma once

// CSV ingestion of epidemiological and vaccination records, and CSV output tables.
//
// epi:         date,age_class,deceased_cum,infected_detected,recovered_cum
// vaccination: date,age_class,dose1,dose2,dose_recovered
// Dates are ISO-8601 (YYYY-MM-DD); age_class is one of the five standard labels.

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vaxopt/analysis.hpp"
#include "vaxopt/optimizer.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

/// Shortest decimal text that parses back to the same double. Non-finite values print as
/// "inf", "-inf" and "nan".
std::string format_double(double x);
/// Inverse of format_double. Throws InvalidArgument on trailing garbage.
double parse_double(std::string_view text);

std::chrono::sys_days parse_date(std::string_view text);
std::string format_date(std::chrono::sys_days day);

struct EpiRecordFlag {
    std::string date;
    std::string age_class;

    bool operator==(const EpiRecordFlag&) const = default;
};

/// Daily per-age series on consecutive days from first_day, ages in standard order.
struct EpiData {
    std::chrono::sys_days first_day{};
    std::size_t n_days = 0;
    std::vector<std::vector<double>> deceased_cum;       // [age][day]
    std::vector<std::vector<double>> infected_detected;  // [age][day]
    std::vector<std::vector<double>> recovered_cum;      // [age][day]
    std::size_t filled_days = 0;                         // dates forward-filled for at least one age
    std::vector<EpiRecordFlag> decreasing_deceased;      // rows where deceased_cum went down
    std::vector<std::string> warnings;

    bool operator==(const EpiData&) const = default;
};

EpiData parse_epi_csv(std::istream& in);
EpiData ingest_epi_data(const std::filesystem::path& path);

/// Weekly averages of daily doses per ISO week (Monday start), ages in standard order.
struct VaccinationData {
    std::chrono::sys_days first_monday{};
    std::size_t n_weeks = 0;
    std::vector<std::vector<double>> dose1;           // [age][week], doses/day
    std::vector<std::vector<double>> dose2;           // [age][week], doses/day
    std::vector<std::vector<double>> dose_recovered;  // [age][week], doses/day
    std::vector<std::string> warnings;

    /// Flattened [age * n_weeks + week] first-dose table of `weeks` weeks starting at `first`.
    std::vector<double> first_dose_table(std::size_t first, std::size_t weeks) const;
    bool operator==(const VaccinationData&) const = default;
};

VaccinationData parse_vaccination_csv(std::istream& in);
VaccinationData ingest_vaccination_data(const std::filesystem::path& path);

/// day,age,S,I,R,D,V,W,H on every integer day.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ModelParams& params);
/// age,week,u1,u2,u_r,n_week with rates in doses/day.
void write_policy_csv(std::ostream& out, const DosingPolicy& policy, const std::vector<std::string>& labels);
/// iteration,cost,alpha,backtracks,projection_sweeps,projection_change,feasible
void write_trace_csv(std::ostream& out, const OptimizationTrace& trace);
/// day,lambda_infected,lambda_hospitalized,lambda_deceased for d = 1 .. N_days.
void write_variation_csv(std::ostream& out, const VariationReport& report);
/// week,a,b,level_a,level_b,r_t,increment
void write_scan_csv(std::ostream& out, const SensitivityScan& scan);

}  // namespace vaxopt
