#include "vaxopt/serialize.hpp"

#include <cmath>

#include "vaxopt/epi_core.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/io.hpp"

namespace vaxopt {

Json number_to_json(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_double(j.get<std::string>());
    throw InvalidArgument("expected a number, got " + j.dump());
}

void to_json(Json& j, const GridSpec& g) { j = Json{{"t0", g.t0}, {"tf", g.tf}, {"step", g.step}}; }
void from_json(const Json& j, GridSpec& g) {
    g.t0 = j.value("t0", 0.0);
    g.tf = j.at("tf").get<double>();
    g.step = j.value("step", 1.0);
}

void to_json(Json& j, const WeeklySeries& s) { j = s.values; }
void from_json(const Json& j, WeeklySeries& s) {
    s.values = j.is_array() ? j.get<std::vector<double>>() : std::vector<double>{j.get<double>()};
}

void to_json(Json& j, const SquareMatrix& m) {
    j = Json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < m.size(); ++k) row.push_back(m(i, k));
        j.push_back(row);
    }
}
void from_json(const Json& j, SquareMatrix& m) {
    const std::size_t n = j.size();
    std::vector<double> flat;
    for (const auto& row : j) {
        if (row.size() != n) throw InvalidArgument("contact matrix must be square");
        for (const auto& x : row) flat.push_back(x.get<double>());
    }
    m = SquareMatrix(n, std::move(flat));
}

void to_json(Json& j, const AgeAxis& a) { j = Json{{"labels", a.labels}, {"populations", a.populations}}; }
void from_json(const Json& j, AgeAxis& a) {
    a.labels = j.at("labels").get<std::vector<std::string>>();
    a.populations = j.at("populations").get<std::vector<double>>();
}

void to_json(Json& j, const ModelParams& p) {
    j = Json{{"ages", p.ages},       {"beta", p.beta},     {"gamma", p.gamma},     {"r", p.r},
             {"ifr", p.ifr},         {"sigma_v", p.sigma_v}, {"sigma_w", p.sigma_w}, {"theta_v", p.theta_v},
             {"theta_w", p.theta_w}, {"mu_r", p.mu_r},     {"contact", p.contact}, {"t_a", p.t_a},
             {"detection", p.detection}, {"h", p.h},       {"kappa", p.kappa}};
}
void from_json(const Json& j, ModelParams& p) {
    p.ages = j.at("ages").get<AgeAxis>();
    p.beta = j.at("beta").get<WeeklySeries>();
    p.gamma = j.at("gamma").get<double>();
    p.r = j.at("r").get<std::vector<double>>();
    p.ifr = j.at("ifr").get<std::vector<double>>();
    p.sigma_v = j.at("sigma_v").get<double>();
    p.sigma_w = j.at("sigma_w").get<double>();
    p.theta_v = j.at("theta_v").get<double>();
    p.theta_w = j.at("theta_w").get<double>();
    p.mu_r = j.at("mu_r").get<double>();
    p.contact = j.at("contact").get<SquareMatrix>();
    p.t_a = j.at("t_a").get<double>();
    p.detection = j.contains("detection") ? j.at("detection").get<WeeklySeries>() : WeeklySeries::constant(1.0);
    p.h = j.value("h", 0.0);
    p.kappa = j.value("kappa", std::vector<double>{});
}

void to_json(Json& j, const EpiState& x) {
    j = Json::object();
    for (std::size_t c = 0; c < kCompartments; ++c) {
        std::vector<double> v(x.n_ages());
        for (std::size_t i = 0; i < x.n_ages(); ++i) v[i] = x(i, static_cast<Compartment>(c));
        j[kCompartmentNames[c]] = v;
    }
}
void from_json(const Json& j, EpiState& x) {
    const std::size_t n = j.at("S").size();
    x = EpiState(n);
    for (std::size_t c = 0; c < kCompartments; ++c) {
        const auto v = j.at(kCompartmentNames[c]).get<std::vector<double>>();
        if (v.size() != n) throw InvalidArgument(std::string("state column ") + kCompartmentNames[c] + " has the wrong length");
        for (std::size_t i = 0; i < n; ++i) x(i, static_cast<Compartment>(c)) = v[i];
    }
}

void to_json(Json& j, const DosingPolicy& p) {
    j = Json{{"n_ages", p.n_ages},
             {"n_weeks", p.n_weeks},
             {"u1", p.u1},
             {"u_r", p.u_r},
             {"n_week", p.n_week},
             {"n_s", number_to_json(p.n_s)},
             {"delta_w", p.delta_w},
             {"horizon_days", p.horizon_days}};
}
void from_json(const Json& j, DosingPolicy& p) {
    p.n_ages = j.at("n_ages").get<std::size_t>();
    p.n_weeks = j.at("n_weeks").get<std::size_t>();
    p.u1 = j.at("u1").get<std::vector<double>>();
    p.u_r = j.contains("u_r") ? j.at("u_r").get<std::vector<double>>() : std::vector<double>(p.u1.size(), 0.0);
    p.n_week = j.at("n_week").get<std::vector<double>>();
    p.n_s = j.contains("n_s") ? number_from_json(j.at("n_s")) : std::numeric_limits<double>::infinity();
    p.delta_w = j.value("delta_w", 21);
    p.horizon_days = j.value("horizon_days", 0.0);
    p.validate();
}

void to_json(Json& j, const IterationRecord& r) {
    j = Json{{"iteration", r.iteration},
             {"cost", number_to_json(r.cost)},
             {"alpha", r.alpha},
             {"backtracks", r.backtracks},
             {"projection_sweeps", r.projection_sweeps},
             {"projection_change", number_to_json(r.projection_change)},
             {"feasible", r.feasible}};
}
void from_json(const Json& j, IterationRecord& r) {
    r.iteration = j.at("iteration").get<int>();
    r.cost = number_from_json(j.at("cost"));
    r.alpha = j.at("alpha").get<double>();
    r.backtracks = j.at("backtracks").get<int>();
    r.projection_sweeps = j.at("projection_sweeps").get<int>();
    r.projection_change = number_from_json(j.at("projection_change"));
    r.feasible = j.at("feasible").get<bool>();
}

void to_json(Json& j, const OptimizationTrace& t) {
    j = Json{{"iterations", t.iterations},
             {"converged", t.converged},
             {"armijo_failed", t.armijo_failed},
             {"stop_reason", t.stop_reason}};
}
void from_json(const Json& j, OptimizationTrace& t) {
    t.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
    t.converged = j.at("converged").get<bool>();
    t.armijo_failed = j.at("armijo_failed").get<bool>();
    t.stop_reason = j.at("stop_reason").get<std::string>();
}

void to_json(Json& j, const VariationReport& r) {
    j = Json{{"base_id", r.base_id},
             {"opt_id", r.opt_id},
             {"infected", r.infected},
             {"hospitalized", r.hospitalized},
             {"deceased", r.deceased}};
}
void from_json(const Json& j, VariationReport& r) {
    r.base_id = j.at("base_id").get<std::string>();
    r.opt_id = j.at("opt_id").get<std::string>();
    r.infected = j.at("infected").get<std::vector<double>>();
    r.hospitalized = j.at("hospitalized").get<std::vector<double>>();
    r.deceased = j.at("deceased").get<std::vector<double>>();
}

void to_json(Json& j, const SensitivityScan& s) {
    Json surfaces = Json::array();
    for (const SensitivitySurface& f : s.surfaces)
        surfaces.push_back(Json{{"week", f.week}, {"reference", f.reference}, {"values", f.values},
                                {"increments", f.increments}});
    j = Json{{"axis", s.axis == ScanAxis::sigma ? "sigma" : "theta"}, {"levels", s.levels}, {"surfaces", surfaces}};
}
void from_json(const Json& j, SensitivityScan& s) {
    const std::string axis = j.at("axis").get<std::string>();
    if (axis != "sigma" && axis != "theta") throw InvalidArgument("scan axis must be sigma or theta");
    s.axis = axis == "sigma" ? ScanAxis::sigma : ScanAxis::theta;
    s.levels = j.at("levels").get<std::vector<double>>();
    s.surfaces.clear();
    for (const auto& f : j.at("surfaces"))
        s.surfaces.push_back({f.at("week").get<int>(), f.at("values").get<std::vector<double>>(),
                              f.at("increments").get<std::vector<double>>(), f.at("reference").get<double>()});
}

void to_json(Json& j, const ParameterSummary& s) {
    j = Json{{"name", s.name}, {"mean", s.mean}, {"median", s.median}, {"lo95", s.lo95}, {"hi95", s.hi95}};
}
void from_json(const Json& j, ParameterSummary& s) {
    s.name = j.at("name").get<std::string>();
    s.mean = j.at("mean").get<double>();
    s.median = j.at("median").get<double>();
    s.lo95 = j.at("lo95").get<double>();
    s.hi95 = j.at("hi95").get<double>();
}

Json trajectory_json(const Trajectory& traj, const ModelParams& params) {
    const std::vector<std::size_t> nodes = traj.daily_nodes();
    Json out;
    std::vector<double> days;
    for (std::size_t n : nodes) days.push_back(traj.grid().time(n));
    out["days"] = days;
    out["ages"] = params.ages.labels;
    for (std::size_t c = 0; c < kCompartments; ++c) {
        Json per_age = Json::array();
        for (std::size_t i = 0; i < traj.n_ages; ++i) {
            std::vector<double> v;
            for (std::size_t n : nodes) v.push_back(traj.value(n, i, static_cast<Compartment>(c)));
            per_age.push_back(v);
        }
        out[kCompartmentNames[c]] = per_age;
    }
    Json h = Json::array();
    for (std::size_t i = 0; i < traj.n_ages; ++i) {
        std::vector<double> v;
        for (double t : days) v.push_back(hospitalized(i, t, traj.history, params));
        h.push_back(v);
    }
    out["H"] = h;
    return out;
}

}  // namespace vaxopt
