// vaxopt: run the vaccination-policy pipeline from a config file, inspect artifacts, or serve
// the HTTP API.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "vaxopt/artifact.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/pipeline.hpp"
#include "vaxopt/service.hpp"

using namespace vaxopt;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string objective;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    auto* opt = cmd->add_option("config", c.config, "run config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
    cmd->add_option("--out", c.out, "output directory (overrides the config)");
    cmd->add_option("--objective", c.objective, "cost to minimize")
        ->check(CLI::IsMember({"deceased", "infected", "hospitalized"}));
}

RunConfig load(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (!c.objective.empty()) cfg.objective.kind = parse_objective(c.objective);
    cfg.validate();
    return cfg;
}

int run_and_report(const RunConfig& cfg) {
    const RunResult r = run_pipeline(cfg, [](const std::string& stage) { std::cerr << "stage: " << stage << '\n'; });
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    const fs::path dir = artifact_dir(cfg);
    write_artifact(dir, render_artifact(r));
    std::cout << "artifact: " << dir.string() << '\n' << "content hash: " << artifact_hash(dir) << '\n';
    if (!r.ok()) {
        std::cerr << "failed at stage '" << r.failed_stage << "': " << r.error << '\n';
        return 1;
    }
    std::cout << std::setprecision(10) << "cost (" << to_string(cfg.objective.kind) << "): baseline "
              << r.cost_baseline;
    if (r.optimum)
        std::cout << ", optimal " << r.cost_optimal << " after " << r.optimum->trace.iterations.size() - 1
                  << " iterations (" << r.optimum->trace.stop_reason << ")";
    std::cout << '\n';
    if (r.calibration)
        for (std::size_t k = 0; k < r.calibration->names.size(); ++k) {
            const ParameterSummary& p = r.calibration->posterior[k];
            std::cout << r.calibration->names[k] << ": median " << p.median << " [" << p.lo95 << ", " << p.hi95
                      << "]\n";
        }
    return 0;
}

void print_policy(const std::string& title, const DosingPolicy& p) {
    const std::vector<double> residual = budget_residuals(p);
    std::cout << title << '\n' << "week       doses/week            cap   residual\n";
    bool ok = true;
    for (std::size_t w = 0; w < p.n_weeks; ++w) {
        const double cap = p.weekly_cap(w);
        std::cout << std::setw(4) << w << std::setw(17) << std::fixed << std::setprecision(1) << residual[w] + cap
                  << std::setw(15) << cap << std::setw(11) << residual[w] + 0.0 << (residual[w] > 1e-9 * cap ? "  OVER" : "")
                  << '\n';
        ok = ok && residual[w] <= 1e-9 * cap;
    }
    std::cout << (ok ? "within budget" : "BUDGET EXCEEDED") << "\n\n" << std::defaultfloat << std::setprecision(6);
}

int report(const fs::path& dir, bool verify) {
    if (!fs::exists(dir / "manifest.json")) {
        std::cerr << "no artifact at " << dir.string() << '\n';
        return 1;
    }
    if (verify) {
        read_artifact(dir);
        std::cout << "manifest verified: " << artifact_hash(dir) << "\n\n";
    }
    auto read = [&](const std::string& name) {
        std::ifstream in(dir / name);
        return Json::parse(in);
    };
    const Json summary = read("summary.json");
    std::cout << "run " << summary.at("name").get<std::string>() << ": " << summary.at("status").get<std::string>()
              << '\n';
    if (summary.at("status") != "done") {
        std::cout << "failed at stage '" << summary.at("failed_stage").get<std::string>()
                  << "': " << summary.at("error").get<std::string>() << '\n';
        return 1;
    }
    std::cout << "objective " << summary.at("objective").get<std::string>() << ": baseline "
              << summary.at("cost_baseline").dump() << ", optimal " << summary.at("cost_optimal").dump() << "\n\n";
    print_policy("baseline policy", read("baseline_policy.json").get<DosingPolicy>());
    if (fs::exists(dir / "optimal_policy.json"))
        print_policy("optimal policy", read("optimal_policy.json").get<DosingPolicy>());
    if (fs::exists(dir / "variation.json")) {
        const VariationReport v = read("variation.json").get<VariationReport>();
        std::cout << "Lambda at day " << v.deceased.size() << " (baseline minus optimal): infected "
                  << v.infected.back() << ", hospitalized " << v.hospitalized.back() << ", deceased "
                  << v.deceased.back() << '\n';
    }
    return 0;
}

Service* active_service = nullptr;

void on_signal(int) {
    if (active_service) active_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal age-structured vaccination policies"};
    app.require_subcommand(1);

    Common simulate_opts, calibrate_opts, optimize_opts, scan_opts, report_opts, serve_opts;
    auto* simulate = app.add_subcommand("simulate", "forward solve of the scenario's initial-guess policy");
    add_common(simulate, simulate_opts);
    auto* calibrate = app.add_subcommand("calibrate", "fit transmission rates, then simulate");
    add_common(calibrate, calibrate_opts);
    auto* optimize = app.add_subcommand("optimize", "projected-gradient policy optimization");
    add_common(optimize, optimize_opts);
    auto* scan = app.add_subcommand("scan", "R_t sensitivity to vaccine efficacy");
    add_common(scan, scan_opts);

    auto* rep = app.add_subcommand("report", "weekly doses against the budget and Lambda totals of an artifact");
    add_common(rep, report_opts);
    std::string artifact;
    bool verify = false;
    rep->add_option("--artifact", artifact, "artifact directory (default: the config's artifact)");
    rep->add_flag("--verify", verify, "check every file against the manifest");

    auto* serve = app.add_subcommand("serve", "HTTP/JSON API under /api/v1");
    add_common(serve, serve_opts, false);
    std::string bind = "127.0.0.1";
    int port = 8080;
    std::size_t workers = 1;
    std::string root = "vaxopt-service";
    serve->add_option("--bind", bind, "listen address");
    serve->add_option("--port", port, "listen port (0 picks one)");
    serve->add_option("--workers", workers, "concurrent jobs")->check(CLI::PositiveNumber);
    serve->add_option("--root", root, "job and artifact directory (--out is a synonym)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            RunConfig cfg = load(simulate_opts);
            cfg.optimize = false;
            cfg.scan.enabled = false;
            cfg.calibration.enabled = false;
            return run_and_report(cfg);
        }
        if (calibrate->parsed()) {
            RunConfig cfg = load(calibrate_opts);
            cfg.calibration.enabled = true;
            cfg.optimize = false;
            cfg.scan.enabled = false;
            return run_and_report(cfg);
        }
        if (optimize->parsed()) {
            RunConfig cfg = load(optimize_opts);
            cfg.optimize = true;
            return run_and_report(cfg);
        }
        if (scan->parsed()) {
            RunConfig cfg = load(scan_opts);
            cfg.scan.enabled = true;
            return run_and_report(cfg);
        }
        if (rep->parsed()) return report(artifact.empty() ? artifact_dir(load(report_opts)) : fs::path(artifact), verify);
        if (serve->parsed()) {
            Service service(ServiceOptions{serve_opts.out.empty() ? root : serve_opts.out, workers});
            const int bound = service.bind(bind, port);
            if (bound < 0) {
                std::cerr << "cannot bind " << bind << ':' << port << '\n';
                return 1;
            }
            active_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on http://" << bind << ':' << bound << "/api/v1" << std::endl;
            service.run();
            active_service = nullptr;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
