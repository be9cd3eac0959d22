#include "vaxopt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/io.hpp"
#include "vaxopt/serialize.hpp"

namespace vaxopt {

namespace {

Instance preset_instance(ModelPreset preset) {
    switch (preset) {
        case ModelPreset::italy: return italy_instance();
        case ModelPreset::two_age: return two_age_instance();
        case ModelPreset::synthetic_calibration: return synthetic_calibration_instance();
    }
    throw InvalidArgument("unknown preset");
}

std::chrono::sys_days monday_of(std::chrono::sys_days d) {
    return d - std::chrono::days{std::chrono::weekday{d}.iso_encoding() - 1};
}

// Copies the weekly data that overlaps the policy weeks. Policy week 0 is the ISO week that
// contains the start date.
void apply_vaccination_data(const VaccinationData& vac, std::chrono::sys_days start, bool budget_from_data,
                            DosingPolicy& policy, std::vector<double>& observed) {
    if (policy.n_ages != vac.dose1.size())
        throw InvalidArgument("vaccination data has five age classes, the model has " + std::to_string(policy.n_ages));
    const long offset = (monday_of(start) - vac.first_monday).count() / 7;
    observed.assign(policy.u1.size(), 0.0);
    for (std::size_t w = 0; w < policy.n_weeks; ++w) {
        const long src = offset + static_cast<long>(w);
        if (src < 0 || src >= static_cast<long>(vac.n_weeks)) continue;
        const auto s = static_cast<std::size_t>(src);
        double total = 0.0;
        for (std::size_t i = 0; i < policy.n_ages; ++i) {
            policy.u_r[i * policy.n_weeks + w] = vac.dose_recovered[i][s];
            observed[i * policy.n_weeks + w] = vac.dose1[i][s];
            total += vac.dose1[i][s] + vac.dose2[i][s] + vac.dose_recovered[i][s];
        }
        if (budget_from_data) policy.n_week[w] = 7.0 * total;
    }
}

std::vector<std::vector<double>> observed_deceased(const EpiData& epi, std::chrono::sys_days start, const GridSpec& grid,
                                                   std::size_t n_ages) {
    if (n_ages != epi.deceased_cum.size())
        throw InvalidArgument("epi data has five age classes, the model has " + std::to_string(n_ages));
    const long offset = (start - epi.first_day).count();
    const auto days = static_cast<long>(std::floor(grid.tf - grid.t0 + 1e-9)) + 1;
    if (offset < 0 || offset + days > static_cast<long>(epi.n_days))
        throw InvalidArgument("epi data does not cover the calibration window");
    std::vector<std::vector<double>> out(n_ages);
    for (std::size_t i = 0; i < n_ages; ++i)
        out[i].assign(epi.deceased_cum[i].begin() + offset, epi.deceased_cum[i].begin() + offset + days);
    return out;
}

CalibrationOutcome calibrate(const RunConfig& cfg, const EpiData* epi, std::chrono::sys_days start, Instance& inst) {
    const CalibrationConfig& c = cfg.calibration;
    CalibrationSpec spec;
    spec.params = inst.params;
    spec.nominal = inst.x0;
    spec.policy = inst.policy;
    spec.grid = inst.grid;
    spec.n_phases = c.n_phases > 0 ? c.n_phases : inst.params.beta.size();
    spec.fit_recovery_time = c.fit_recovery_time;
    spec.fit_initial = c.fit_initial;
    spec.ls.seed = cfg.seed;
    spec.ls.restarts = c.restarts;
    spec.chain.seed = cfg.seed;
    spec.chain.length = c.chain_length;

    CalibrationOutcome out;
    if (c.data == CalibrationData::synthetic) {
        const auto clean = make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, 0.0, cfg.seed);
        double scale = 0.0;
        for (const auto& s : clean) scale = std::max(scale, s.back());
        spec.deceased =
            make_synthetic_truth(inst.params, inst.x0, inst.policy, inst.grid, c.noise_fraction * scale, cfg.seed);
        out.truth = spec.nominal_parameters();
        // Start the fit from R0 = 1 rather than from the truth.
        spec.params.beta = WeeklySeries::constant(inst.params.gamma, spec.n_phases);
    } else {
        spec.deceased = observed_deceased(*epi, start, inst.grid, inst.params.n_ages());
    }
    spec.validate();

    out.names = spec.parameter_names();
    out.least_squares = least_squares_fit(spec);
    const Posterior post = mcmc_sample(spec, out.least_squares.estimates);
    out.posterior = post.summaries;
    out.acceptance = post.acceptance;
    out.noise_scale = post.noise_scale;
    out.acceptance_warning = post.acceptance_warning;

    std::vector<double> medians;
    for (const auto& s : post.summaries) medians.push_back(s.median);
    inst.params = spec.model_params(medians);
    inst.x0 = spec.initial_state(medians);
    return out;
}

template <class F>
std::string render(F&& write) {
    std::ostringstream s;
    write(s);
    return s.str();
}

std::string safe_name(const std::string& name) {
    std::string out;
    for (char ch : name) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
    return out;
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg, const std::function<void(const std::string&)>& progress) {
    RunResult r;
    r.config = cfg;
    std::string stage;
    auto enter = [&](const char* name) {
        stage = name;
        if (progress) progress(stage);
    };
    try {
        enter("config");
        cfg.validate();
        r.config_hash = config_hash(cfg);
        Instance inst = preset_instance(cfg.preset);
        if (cfg.params) {
            if (cfg.params->n_ages() != inst.params.n_ages()) {
                if (!cfg.initial_state)
                    throw InvalidArgument("params with a different number of ages need an initial_state");
                inst.policy = DosingPolicy::zeros(cfg.params->n_ages(), inst.policy.n_weeks, inst.policy.n_week,
                                                  inst.policy.delta_w);
            }
            inst.params = *cfg.params;
        }
        if (cfg.initial_state) inst.x0 = *cfg.initial_state;
        if (inst.x0.n_ages() != inst.params.n_ages())
            throw InvalidArgument("initial state and params disagree on the number of ages");
        inst.x0.check_valid();

        enter("data");
        const auto start = parse_date(cfg.start_date);
        std::optional<EpiData> epi;
        std::vector<double> observed;
        if (!cfg.epi_csv.empty()) {
            epi = ingest_epi_data(cfg.epi_csv);
            r.warnings.insert(r.warnings.end(), epi->warnings.begin(), epi->warnings.end());
        }
        if (!cfg.vaccination_csv.empty()) {
            const VaccinationData vac = ingest_vaccination_data(cfg.vaccination_csv);
            r.warnings.insert(r.warnings.end(), vac.warnings.begin(), vac.warnings.end());
            apply_vaccination_data(vac, start, cfg.scenario.budget_mode == BudgetMode::data, inst.policy, observed);
        }

        if (cfg.warmup_days > 0.0) {
            enter("warmup");
            const auto weeks = static_cast<std::size_t>(std::ceil(cfg.warmup_days / 7.0 - 1e-12));
            DosingPolicy none = DosingPolicy::zeros(inst.params.n_ages(), weeks, std::vector<double>(weeks, 0.0),
                                                    inst.policy.delta_w);
            none.horizon_days = cfg.warmup_days;
            const Trajectory warm = integrate_forward(inst.x0, inst.params, none, GridSpec::daily(cfg.warmup_days));
            inst.x0 = warm.state(warm.n_nodes() - 1).clamped();
        }

        if (cfg.calibration.enabled) {
            enter("calibration");
            r.calibration = calibrate(cfg, epi ? &*epi : nullptr, start, inst);
        }

        enter("scenario");
        ScenarioSpec spec = cfg.scenario;
        if (spec.horizon_days == 0.0) spec.horizon_days = inst.grid.tf - inst.grid.t0;
        r.scenario = build_scenario(spec, inst, observed.empty() ? nullptr : &observed);
        const Instance& sc = r.scenario;

        enter("baseline");
        r.baseline = integrate_forward(sc.x0, sc.params, sc.policy, sc.grid);
        r.cost_baseline = cost_value(r.baseline, cfg.objective, sc.params);
        r.cost_optimal = r.cost_baseline;

        if (cfg.optimize) {
            enter("optimization");
            r.optimum = pgd_optimize(sc.policy, cfg.objective, sc.params, sc.x0, sc.grid, cfg.pgd);
            r.optimal = integrate_forward(sc.x0, sc.params, r.optimum->policy, sc.grid);
            r.cost_optimal = cost_value(*r.optimal, cfg.objective, sc.params);
            if (r.optimum->trace.armijo_failed) r.warnings.emplace_back("line search failed; kept the last iterate");
        }

        enter("diagnostics");
        if (r.optimal) r.variation = variation_report(r.baseline, *r.optimal, sc.params, "baseline", "optimal");
        if (cfg.scan.enabled) {
            const auto checkpoints = weekly_checkpoints(r.optimal ? *r.optimal : r.baseline, cfg.scan.weeks);
            r.sigma_scan = sensitivity_scan(sc.params, checkpoints, ScanAxis::sigma, cfg.scan.resolution);
            r.theta_scan = sensitivity_scan(sc.params, checkpoints, ScanAxis::theta, cfg.scan.resolution);
        }
    } catch (const std::exception& e) {
        r.failed_stage = stage;
        r.error = e.what();
    }
    if (r.config_hash.empty()) r.config_hash = config_hash(cfg);
    return r;
}

ArtifactFiles render_artifact(const RunResult& run) {
    ArtifactFiles a;
    auto put_json = [&](const std::string& name, const Json& j) { a.files[name] = j.dump(1) + '\n'; };
    // Where the artifact lives is not part of its content.
    Json config = run_config_to_json(run.config);
    config.erase("output_dir");
    put_json("config.json", config);

    Json summary;
    summary["name"] = run.config.name;
    summary["config_hash"] = run.config_hash;
    summary["status"] = run.ok() ? "done" : "failed";
    summary["failed_stage"] = run.failed_stage;
    summary["error"] = run.error;
    summary["warnings"] = run.warnings;
    summary["objective"] = to_string(run.config.objective.kind);

    if (run.ok()) {
        const Instance& sc = run.scenario;
        const std::vector<std::string>& labels = sc.params.ages.labels;
        summary["cost_baseline"] = number_to_json(run.cost_baseline);
        summary["cost_optimal"] = number_to_json(run.cost_optimal);
        put_json("scenario.json", Json{{"params", sc.params}, {"initial_state", sc.x0}, {"grid", sc.grid}});
        put_json("baseline_policy.json", Json(sc.policy));
        a.files["baseline_policy.csv"] = render([&](std::ostream& o) { write_policy_csv(o, sc.policy, labels); });
        put_json("baseline_trajectory.json", trajectory_json(run.baseline, sc.params));
        a.files["baseline_trajectory.csv"] =
            render([&](std::ostream& o) { write_trajectory_csv(o, run.baseline, sc.params); });
        if (run.optimum) {
            const OptimizationTrace& t = run.optimum->trace;
            summary["iterations"] = t.iterations.empty() ? 0 : t.iterations.back().iteration;
            summary["stop_reason"] = t.stop_reason;
            summary["converged"] = t.converged;
            summary["armijo_failed"] = t.armijo_failed;
            put_json("optimal_policy.json", Json(run.optimum->policy));
            a.files["optimal_policy.csv"] =
                render([&](std::ostream& o) { write_policy_csv(o, run.optimum->policy, labels); });
            put_json("optimal_trajectory.json", trajectory_json(*run.optimal, sc.params));
            a.files["optimal_trajectory.csv"] =
                render([&](std::ostream& o) { write_trajectory_csv(o, *run.optimal, sc.params); });
            put_json("trace.json", Json(t));
            a.files["trace.csv"] = render([&](std::ostream& o) { write_trace_csv(o, t); });
        }
        if (run.variation) {
            put_json("variation.json", Json(*run.variation));
            a.files["variation.csv"] = render([&](std::ostream& o) { write_variation_csv(o, *run.variation); });
            double saved = 0.0;
            for (double d : run.variation->deceased) saved = d;
            summary["deceased_saved_at_horizon"] = saved;
        }
        const std::pair<std::string, const std::optional<SensitivityScan>*> scans[] = {
            {"scan_sigma", &run.sigma_scan}, {"scan_theta", &run.theta_scan}};
        for (const auto& [name, scan] : scans)
            if (*scan) {
                put_json(name + ".json", Json(**scan));
                a.files[name + ".csv"] = render([&](std::ostream& o) { write_scan_csv(o, **scan); });
            }
    }
    if (run.calibration) {
        const CalibrationOutcome& c = *run.calibration;
        put_json("calibration.json", Json{{"names", c.names},
                                          {"truth", c.truth},
                                          {"ls_estimates", c.least_squares.estimates},
                                          {"ls_error", number_to_json(c.least_squares.error)},
                                          {"ls_converged", c.least_squares.converged},
                                          {"at_bound", c.least_squares.at_bound},
                                          {"posterior", c.posterior},
                                          {"acceptance", c.acceptance},
                                          {"noise_scale", c.noise_scale},
                                          {"acceptance_warning", c.acceptance_warning}});
    }
    put_json("summary.json", summary);
    return a;
}

std::filesystem::path artifact_dir(const RunConfig& cfg) {
    return cfg.output_dir / (safe_name(cfg.name) + "-" + config_hash(cfg).substr(0, 12));
}

std::filesystem::path run_and_persist(const RunConfig& cfg, bool reuse_existing) {
    const std::filesystem::path dir = artifact_dir(cfg);
    if (reuse_existing && std::filesystem::exists(dir / "manifest.json")) return dir;
    write_artifact(dir, render_artifact(run_pipeline(cfg)));
    return dir;
}

}  // namespace vaxopt
