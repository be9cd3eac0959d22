#include "vaxopt/config.hpp"

#include <fstream>
#include <set>

#include "vaxopt/artifact.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/io.hpp"

namespace vaxopt {

std::string to_string(ModelPreset preset) {
    switch (preset) {
        case ModelPreset::italy: return "italy";
        case ModelPreset::two_age: return "two_age";
        case ModelPreset::synthetic_calibration: return "synthetic_calibration";
    }
    return "?";
}

ModelPreset parse_preset(std::string_view name) {
    for (auto p : {ModelPreset::italy, ModelPreset::two_age, ModelPreset::synthetic_calibration})
        if (name == to_string(p)) return p;
    throw InvalidArgument("unknown model preset '" + std::string(name) + "'");
}

void RunConfig::validate() const {
    if (name.empty()) throw InvalidArgument("run name must not be empty");
    parse_date(start_date);
    if (params) params->validate();
    if (params && initial_state && initial_state->n_ages() != params->n_ages())
        throw InvalidArgument("initial state and params disagree on the number of ages");
    if (!(warmup_days >= 0.0)) throw InvalidArgument("warmup_days must be non-negative");
    if (calibration.enabled) {
        if (calibration.data == CalibrationData::epi_csv && epi_csv.empty())
            throw InvalidArgument("calibration on epi data needs epi_csv");
        if (!(calibration.noise_fraction >= 0.0)) throw InvalidArgument("noise_fraction must be non-negative");
        if (calibration.chain_length == 0) throw InvalidArgument("chain_length must be positive");
        if (calibration.restarts < 0) throw InvalidArgument("restarts must be non-negative");
    }
    ScenarioSpec s = scenario;
    if (s.horizon_days == 0.0) s.horizon_days = 1.0;
    s.validate();
    if (scenario.ig_kind == InitialGuessKind::dpc && vaccination_csv.empty())
        throw InvalidArgument("the dpc initial guess needs vaccination_csv");
    if (!(pgd.tol >= 0.0) || pgd.max_iters < 0 || !(pgd.dose_scale > 0.0))
        throw InvalidArgument("bad optimizer settings");
    if (scan.resolution < 2) throw InvalidArgument("scan resolution must be at least 2");
    for (int w : scan.weeks)
        if (w < 0) throw InvalidArgument("scan weeks must be non-negative");
}

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument(where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

StopRule parse_stop(const std::string& s) {
    if (s == "relative") return StopRule::relative;
    if (s == "absolute") return StopRule::absolute;
    throw InvalidArgument("stop rule must be relative or absolute");
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    try {
        check_keys(j,
                   {"name", "preset", "params", "initial_state", "start_date", "epi_csv", "vaccination_csv",
                    "warmup_days", "calibration", "objective", "terminal_weight", "scenario", "optimize", "pgd",
                    "scan", "seed", "output_dir"},
                   "config");
        read(j, "name", c.name);
        if (j.contains("preset")) c.preset = parse_preset(j.at("preset").get<std::string>());
        if (j.contains("params") && !j.at("params").is_null()) c.params = j.at("params").get<ModelParams>();
        if (j.contains("initial_state") && !j.at("initial_state").is_null())
            c.initial_state = j.at("initial_state").get<EpiState>();
        read(j, "start_date", c.start_date);
        if (j.contains("epi_csv")) c.epi_csv = j.at("epi_csv").get<std::string>();
        if (j.contains("vaccination_csv")) c.vaccination_csv = j.at("vaccination_csv").get<std::string>();
        read(j, "warmup_days", c.warmup_days);
        if (j.contains("calibration")) {
            const Json& k = j.at("calibration");
            check_keys(k,
                       {"enabled", "data", "noise_fraction", "n_phases", "fit_recovery_time", "fit_initial",
                        "chain_length", "restarts"},
                       "calibration");
            read(k, "enabled", c.calibration.enabled);
            if (k.contains("data")) {
                const auto d = k.at("data").get<std::string>();
                if (d != "synthetic" && d != "epi_csv") throw InvalidArgument("calibration data must be synthetic or epi_csv");
                c.calibration.data = d == "synthetic" ? CalibrationData::synthetic : CalibrationData::epi_csv;
            }
            read(k, "noise_fraction", c.calibration.noise_fraction);
            read(k, "n_phases", c.calibration.n_phases);
            read(k, "fit_recovery_time", c.calibration.fit_recovery_time);
            read(k, "fit_initial", c.calibration.fit_initial);
            read(k, "chain_length", c.calibration.chain_length);
            read(k, "restarts", c.calibration.restarts);
        }
        if (j.contains("objective")) c.objective.kind = parse_objective(j.at("objective").get<std::string>());
        read(j, "terminal_weight", c.objective.terminal_weight);
        if (j.contains("scenario")) {
            const Json& s = j.at("scenario");
            check_keys(s,
                       {"initial_guess", "r0", "budget_mode", "constant_budget", "horizon_days", "extension_days"},
                       "scenario");
            if (s.contains("initial_guess"))
                c.scenario.ig_kind = parse_initial_guess(s.at("initial_guess").get<std::string>());
            if (s.contains("r0") && !s.at("r0").is_null()) c.scenario.r0_target = s.at("r0").get<double>();
            if (s.contains("budget_mode")) {
                const auto m = s.at("budget_mode").get<std::string>();
                if (m != "data" && m != "constant") throw InvalidArgument("budget_mode must be data or constant");
                c.scenario.budget_mode = m == "data" ? BudgetMode::data : BudgetMode::constant;
            }
            read(s, "constant_budget", c.scenario.constant_budget);
            read(s, "horizon_days", c.scenario.horizon_days);
            read(s, "extension_days", c.scenario.extension_days);
        }
        read(j, "optimize", c.optimize);
        if (j.contains("pgd")) {
            const Json& p = j.at("pgd");
            check_keys(p, {"tol", "stop", "max_iters", "dose_scale", "armijo"}, "pgd");
            read(p, "tol", c.pgd.tol);
            if (p.contains("stop")) c.pgd.stop = parse_stop(p.at("stop").get<std::string>());
            read(p, "max_iters", c.pgd.max_iters);
            read(p, "dose_scale", c.pgd.dose_scale);
            if (p.contains("armijo")) {
                const Json& a = p.at("armijo");
                check_keys(a, {"alpha0", "rho", "c1", "max_backtracks", "growth"}, "pgd.armijo");
                read(a, "alpha0", c.pgd.armijo.alpha0);
                read(a, "rho", c.pgd.armijo.rho);
                read(a, "c1", c.pgd.armijo.c1);
                read(a, "max_backtracks", c.pgd.armijo.max_backtracks);
                read(a, "growth", c.pgd.armijo.growth);
            }
        }
        if (j.contains("scan")) {
            const Json& s = j.at("scan");
            check_keys(s, {"enabled", "resolution", "weeks"}, "scan");
            read(s, "enabled", c.scan.enabled);
            read(s, "resolution", c.scan.resolution);
            read(s, "weeks", c.scan.weeks);
        }
        read(j, "seed", c.seed);
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

Json run_config_to_json(const RunConfig& c) {
    Json j;
    j["name"] = c.name;
    j["preset"] = to_string(c.preset);
    j["params"] = c.params ? Json(*c.params) : Json(nullptr);
    j["initial_state"] = c.initial_state ? Json(*c.initial_state) : Json(nullptr);
    j["start_date"] = c.start_date;
    j["epi_csv"] = c.epi_csv.string();
    j["vaccination_csv"] = c.vaccination_csv.string();
    j["warmup_days"] = c.warmup_days;
    j["calibration"] = Json{{"enabled", c.calibration.enabled},
                            {"data", c.calibration.data == CalibrationData::synthetic ? "synthetic" : "epi_csv"},
                            {"noise_fraction", c.calibration.noise_fraction},
                            {"n_phases", c.calibration.n_phases},
                            {"fit_recovery_time", c.calibration.fit_recovery_time},
                            {"fit_initial", c.calibration.fit_initial},
                            {"chain_length", c.calibration.chain_length},
                            {"restarts", c.calibration.restarts}};
    j["objective"] = to_string(c.objective.kind);
    j["terminal_weight"] = c.objective.terminal_weight;
    j["scenario"] = Json{{"initial_guess", to_string(c.scenario.ig_kind)},
                         {"r0", c.scenario.r0_target ? Json(*c.scenario.r0_target) : Json(nullptr)},
                         {"budget_mode", c.scenario.budget_mode == BudgetMode::data ? "data" : "constant"},
                         {"constant_budget", c.scenario.constant_budget},
                         {"horizon_days", c.scenario.horizon_days},
                         {"extension_days", c.scenario.extension_days}};
    j["optimize"] = c.optimize;
    j["pgd"] = Json{{"tol", c.pgd.tol},
                    {"stop", c.pgd.stop == StopRule::relative ? "relative" : "absolute"},
                    {"max_iters", c.pgd.max_iters},
                    {"dose_scale", c.pgd.dose_scale},
                    {"armijo",
                     {{"alpha0", c.pgd.armijo.alpha0},
                      {"rho", c.pgd.armijo.rho},
                      {"c1", c.pgd.armijo.c1},
                      {"max_backtracks", c.pgd.armijo.max_backtracks},
                      {"growth", c.pgd.armijo.growth}}}};
    j["scan"] = Json{{"enabled", c.scan.enabled}, {"resolution", c.scan.resolution}, {"weeks", c.scan.weeks}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
    Json j = run_config_to_json(cfg);
    j.erase("output_dir");
    return sha256_hex(j.dump());
}

}  // namespace vaxopt
