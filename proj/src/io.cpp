#include "vaxopt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"

namespace vaxopt {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view text) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double x = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || text.empty())
        throw InvalidArgument("not a number: '" + std::string(text) + "'");
    return x;
}

std::chrono::sys_days parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
        throw InvalidArgument("not an ISO-8601 date: '" + s + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw InvalidArgument("no such date: '" + s + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

// One table with a fixed header. Rows are numbered from 1 after the header.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in, const std::vector<std::string>& expected) {
    CsvTable t;
    std::string line;
    while (std::getline(in, line) && trim(line).empty()) {
    }
    if (trim(line).empty()) throw ParseError("missing header", 0, expected.front());
    for (auto c : split(line)) t.columns.emplace_back(c);
    for (const auto& name : expected)
        if (std::find(t.columns.begin(), t.columns.end(), name) == t.columns.end())
            throw ParseError("required column is missing from the header", 0, name);
    for (const auto& name : t.columns)
        if (std::find(expected.begin(), expected.end(), name) == expected.end())
            throw ParseError("unexpected column", 0, name);
    std::vector<std::size_t> order;
    for (const auto& name : expected)
        order.push_back(static_cast<std::size_t>(std::find(t.columns.begin(), t.columns.end(), name) - t.columns.begin()));

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split(line);
        if (cells.size() != t.columns.size())
            throw ParseError("expected " + std::to_string(t.columns.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             row, expected.front());
        std::vector<std::string> r;
        for (std::size_t k : order) r.emplace_back(cells[k]);
        t.rows.push_back(std::move(r));
    }
    t.columns = expected;
    return t;
}

std::size_t age_index(const std::string& label, std::size_t row) {
    const auto& labels = standard_age_labels();
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ParseError("unknown age class '" + label + "'", row, "age_class");
    return static_cast<std::size_t>(it - labels.begin());
}

std::chrono::sys_days date_cell(const std::string& text, std::size_t row) {
    try {
        return parse_date(text);
    } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), row, "date");
    }
}

double count_cell(const std::string& text, std::size_t row, const std::string& column) {
    if (text.empty()) throw ParseError("empty value", row, column);
    double v = 0.0;
    try {
        v = parse_double(text);
    } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), row, column);
    }
    if (!std::isfinite(v) || v < 0.0) throw ParseError("counts must be finite and non-negative", row, column);
    return v;
}

std::chrono::sys_days monday_of(std::chrono::sys_days d) {
    return d - std::chrono::days{std::chrono::weekday{d}.iso_encoding() - 1};
}

}  // namespace

EpiData parse_epi_csv(std::istream& in) {
    const std::vector<std::string> cols{"date", "age_class", "deceased_cum", "infected_detected", "recovered_cum"};
    const CsvTable t = read_csv(in, cols);
    if (t.rows.empty()) throw ParseError("no data rows", 1, "date");

    struct Values {
        double v[3];
        std::size_t row;
    };
    const std::size_t n_ages = standard_age_labels().size();
    std::vector<std::map<std::chrono::sys_days, Values>> by_age(n_ages);
    std::chrono::sys_days lo = std::chrono::sys_days::max(), hi = std::chrono::sys_days::min();
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        const std::size_t row = k + 1;
        const auto day = date_cell(r[0], row);
        const std::size_t a = age_index(r[1], row);
        Values v{{count_cell(r[2], row, cols[2]), count_cell(r[3], row, cols[3]), count_cell(r[4], row, cols[4])}, row};
        if (!by_age[a].emplace(day, v).second) throw ParseError("duplicate date for this age class", row, "date");
        lo = std::min(lo, day);
        hi = std::max(hi, day);
    }

    EpiData out;
    out.first_day = lo;
    out.n_days = static_cast<std::size_t>((hi - lo).count()) + 1;
    out.deceased_cum.assign(n_ages, std::vector<double>(out.n_days));
    out.infected_detected = out.recovered_cum = out.deceased_cum;
    std::vector<bool> filled(out.n_days, false);
    for (std::size_t a = 0; a < n_ages; ++a) {
        const std::string& label = standard_age_labels()[a];
        if (by_age[a].empty()) throw ParseError("no records for age class '" + label + "'", 0, "age_class");
        if (by_age[a].begin()->first != lo)
            throw ParseError("age class '" + label + "' has no record on the first date", 0, "date");
        std::optional<double> last_recorded;
        for (std::size_t d = 0; d < out.n_days; ++d) {
            const auto day = lo + std::chrono::days{d};
            const auto it = by_age[a].find(day);
            if (it == by_age[a].end()) {
                out.deceased_cum[a][d] = out.deceased_cum[a][d - 1];
                out.infected_detected[a][d] = out.infected_detected[a][d - 1];
                out.recovered_cum[a][d] = out.recovered_cum[a][d - 1];
                filled[d] = true;
                continue;
            }
            out.deceased_cum[a][d] = it->second.v[0];
            out.infected_detected[a][d] = it->second.v[1];
            out.recovered_cum[a][d] = it->second.v[2];
            if (last_recorded && it->second.v[0] < *last_recorded) {
                out.decreasing_deceased.push_back({format_date(day), label});
                out.warnings.push_back("row " + std::to_string(it->second.row) + ": cumulative deceased decreases for " +
                                       label + " on " + format_date(day));
            }
            last_recorded = it->second.v[0];
        }
    }
    for (std::size_t d = 0; d < out.n_days; ++d)
        if (filled[d]) {
            ++out.filled_days;
            out.warnings.push_back("missing records on " + format_date(lo + std::chrono::days{d}) +
                                   " forward-filled");
        }
    return out;
}

EpiData ingest_epi_data(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return parse_epi_csv(in);
}

std::vector<double> VaccinationData::first_dose_table(std::size_t first, std::size_t weeks) const {
    std::vector<double> out(dose1.size() * weeks, 0.0);
    for (std::size_t a = 0; a < dose1.size(); ++a)
        for (std::size_t w = 0; w < weeks && first + w < n_weeks; ++w) out[a * weeks + w] = dose1[a][first + w];
    return out;
}

VaccinationData parse_vaccination_csv(std::istream& in) {
    const std::vector<std::string> cols{"date", "age_class", "dose1", "dose2", "dose_recovered"};
    const CsvTable t = read_csv(in, cols);
    if (t.rows.empty()) throw ParseError("no data rows", 1, "date");

    const std::size_t n_ages = standard_age_labels().size();
    std::vector<std::map<std::chrono::sys_days, std::size_t>> seen(n_ages);
    std::chrono::sys_days lo = std::chrono::sys_days::max(), hi = std::chrono::sys_days::min();
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto day = date_cell(t.rows[k][0], k + 1);
        lo = std::min(lo, day);
        hi = std::max(hi, day);
    }

    VaccinationData out;
    out.first_monday = monday_of(lo);
    out.n_weeks = static_cast<std::size_t>((monday_of(hi) - out.first_monday).count() / 7) + 1;
    out.dose1.assign(n_ages, std::vector<double>(out.n_weeks, 0.0));
    out.dose2 = out.dose_recovered = out.dose1;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        const std::size_t row = k + 1;
        const auto day = date_cell(r[0], row);
        const std::size_t a = age_index(r[1], row);
        if (!seen[a].emplace(day, row).second) throw ParseError("duplicate date for this age class", row, "date");
        const auto w = static_cast<std::size_t>((monday_of(day) - out.first_monday).count() / 7);
        out.dose1[a][w] += count_cell(r[2], row, cols[2]) / 7.0;
        out.dose2[a][w] += count_cell(r[3], row, cols[3]) / 7.0;
        out.dose_recovered[a][w] += count_cell(r[4], row, cols[4]) / 7.0;
    }
    for (std::size_t a = 0; a < n_ages; ++a)
        if (seen[a].empty())
            out.warnings.push_back("no records for age class '" + standard_age_labels()[a] + "', using zeros");
    return out;
}

VaccinationData ingest_vaccination_data(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return parse_vaccination_csv(in);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ModelParams& params) {
    out << "day,age,S,I,R,D,V,W,H\n";
    for (std::size_t node : traj.daily_nodes()) {
        const double t = traj.grid().time(node);
        for (std::size_t i = 0; i < traj.n_ages; ++i) {
            out << format_double(t) << ',' << params.ages.labels.at(i);
            for (std::size_t c = 0; c < kCompartments; ++c)
                out << ',' << format_double(traj.value(node, i, static_cast<Compartment>(c)));
            out << ',' << format_double(hospitalized(i, t, traj.history, params)) << '\n';
        }
    }
}

void write_policy_csv(std::ostream& out, const DosingPolicy& policy, const std::vector<std::string>& labels) {
    out << "age,week,u1,u2,u_r,n_week\n";
    for (std::size_t i = 0; i < policy.n_ages; ++i)
        for (std::size_t w = 0; w < policy.n_weeks; ++w)
            out << labels.at(i) << ',' << w << ',' << format_double(policy.first(i, w)) << ','
                << format_double(policy.second(i, w)) << ',' << format_double(policy.recovered(i, w)) << ','
                << format_double(policy.n_week[w]) << '\n';
}

void write_trace_csv(std::ostream& out, const OptimizationTrace& trace) {
    out << "iteration,cost,alpha,backtracks,projection_sweeps,projection_change,feasible\n";
    for (const IterationRecord& r : trace.iterations)
        out << r.iteration << ',' << format_double(r.cost) << ',' << format_double(r.alpha) << ',' << r.backtracks
            << ',' << r.projection_sweeps << ',' << format_double(r.projection_change) << ',' << (r.feasible ? 1 : 0)
            << '\n';
}

void write_variation_csv(std::ostream& out, const VariationReport& report) {
    out << "day,lambda_infected,lambda_hospitalized,lambda_deceased\n";
    for (std::size_t d = 0; d < report.infected.size(); ++d)
        out << d + 1 << ',' << format_double(report.infected[d]) << ',' << format_double(report.hospitalized[d])
            << ',' << format_double(report.deceased[d]) << '\n';
}

void write_scan_csv(std::ostream& out, const SensitivityScan& scan) {
    out << "week,a,b,level_a,level_b,r_t,increment\n";
    for (const SensitivitySurface& s : scan.surfaces) {
        const std::size_t n = s.axis_points();
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                out << s.week << ',' << a << ',' << b << ',' << format_double(scan.levels[a]) << ','
                    << format_double(scan.levels[b]) << ',' << format_double(s.at(a, b)) << ','
                    << format_double(s.increments[a * n + b]) << '\n';
    }
}

}  // namespace vaxopt
