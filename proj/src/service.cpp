#include "vaxopt/service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "vaxopt/artifact.hpp"
#include "vaxopt/errors.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/pipeline.hpp"
// After the model headers: <resolv.h> defines a _res macro that clashes with Eigen.
#include "httplib.h"

namespace vaxopt {

namespace fs = std::filesystem;

std::string to_string(JobStatus status) {
    switch (status) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "?";
}

JobStatus parse_job_status(std::string_view name) {
    for (JobStatus s : {JobStatus::queued, JobStatus::running, JobStatus::done, JobStatus::failed})
        if (to_string(s) == name) return s;
    throw InvalidArgument("unknown job status '" + std::string(name) + "'");
}

void to_json(Json& j, const JobInfo& job) {
    j = Json{{"id", job.id},
             {"config_id", job.config_id},
             {"name", job.name},
             {"status", to_string(job.status)},
             {"stage", job.stage},
             {"error", job.error},
             {"history", job.history},
             {"content_hash", job.content_hash},
             {"sequence", job.sequence}};
}

void from_json(const Json& j, JobInfo& job) {
    job.id = j.at("id").get<std::string>();
    job.config_id = j.at("config_id").get<std::string>();
    job.name = j.at("name").get<std::string>();
    job.status = parse_job_status(j.at("status").get<std::string>());
    job.stage = j.at("stage").get<std::string>();
    job.error = j.at("error").get<std::string>();
    job.history = j.at("history").get<std::vector<std::string>>();
    job.content_hash = j.at("content_hash").get<std::string>();
    job.sequence = j.at("sequence").get<std::uint64_t>();
}

std::string config_id(const RunConfig& cfg) { return config_hash(cfg).substr(0, 16); }

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Write to a sibling file, then rename over the target.
void write_atomically(const fs::path& p, const std::string& bytes) {
    fs::create_directories(p.parent_path());
    std::random_device rd;
    const fs::path tmp = p.string() + ".tmp-" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary);
        out << bytes;
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

Json stored_config_json(const RunConfig& cfg) {
    Json j = run_config_to_json(cfg);
    j.erase("output_dir");
    return j;
}

}  // namespace

JobQueue::JobQueue(fs::path root, std::size_t workers) : root_(std::move(root)) {
    fs::create_directories(root_ / "jobs");
    fs::create_directories(root_ / "configs");
    fs::create_directories(root_ / "artifacts");
    std::vector<JobInfo> requeue;
    for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
        if (entry.path().extension() != ".json") continue;
        const Json j = Json::parse(slurp(entry.path()));
        JobInfo job = j.get<JobInfo>();
        RunConfig cfg = run_config_from_json(j.at("config"));
        cfg.output_dir = root_ / "artifacts";
        next_sequence_ = std::max(next_sequence_, job.sequence + 1);
        job_configs_[job.id] = std::move(cfg);
        if (job.status == JobStatus::queued || job.status == JobStatus::running) requeue.push_back(job);
        jobs_[job.id] = std::move(job);
    }
    std::sort(requeue.begin(), requeue.end(),
              [](const JobInfo& a, const JobInfo& b) { return a.sequence < b.sequence; });
    for (JobInfo& job : requeue) {
        JobInfo& live = jobs_[job.id];
        if (live.status == JobStatus::running) set_status(live, JobStatus::queued);
        pending_.push_back(job.id);
    }
    for (std::size_t k = 0; k < std::max<std::size_t>(workers, 1); ++k) threads_.emplace_back([this] { worker(); });
}

JobQueue::~JobQueue() { shutdown(); }

void JobQueue::shutdown() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_)
        if (t.joinable()) t.join();
    threads_.clear();
}

void JobQueue::persist(const JobInfo& job) const {
    Json j = job;
    j["config"] = stored_config_json(job_configs_.at(job.id));
    write_atomically(root_ / "jobs" / (job.id + ".json"), j.dump(1) + '\n');
}

void JobQueue::set_status(JobInfo& job, JobStatus status) {
    job.status = status;
    job.history.push_back(to_string(status));
    persist(job);
}

std::string JobQueue::store_config(RunConfig cfg) {
    cfg.validate();
    cfg.output_dir = root_ / "artifacts";
    const std::string id = config_id(cfg);
    const fs::path p = root_ / "configs" / (id + ".json");
    std::lock_guard lock(mutex_);
    if (!fs::exists(p)) write_atomically(p, stored_config_json(cfg).dump(1) + '\n');
    return id;
}

std::optional<RunConfig> JobQueue::config(const std::string& id) const {
    const fs::path p = root_ / "configs" / (id + ".json");
    if (id.size() != 16 || id.find_first_not_of("0123456789abcdef") != std::string::npos || !fs::exists(p))
        return std::nullopt;
    RunConfig cfg = run_config_from_json(Json::parse(slurp(p)));
    cfg.output_dir = root_ / "artifacts";
    return cfg;
}

std::vector<std::pair<std::string, std::string>> JobQueue::configs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& entry : fs::directory_iterator(root_ / "configs")) {
        if (entry.path().extension() != ".json") continue;
        const Json j = Json::parse(slurp(entry.path()));
        out.emplace_back(entry.path().stem().string(), j.value("name", ""));
    }
    std::sort(out.begin(), out.end());
    return out;
}

JobInfo JobQueue::submit(RunConfig cfg) {
    const std::string cid = store_config(cfg);
    cfg.output_dir = root_ / "artifacts";
    const std::string id = artifact_dir(cfg).filename().string();
    std::unique_lock lock(mutex_);
    if (auto it = jobs_.find(id); it != jobs_.end()) return it->second;
    JobInfo job;
    job.id = id;
    job.config_id = cid;
    job.name = cfg.name;
    job.sequence = next_sequence_++;
    job_configs_[id] = std::move(cfg);
    JobInfo& live = jobs_[id] = job;
    set_status(live, JobStatus::queued);
    pending_.push_back(id);
    const JobInfo out = live;
    lock.unlock();
    wake_.notify_one();
    return out;
}

std::optional<JobInfo> JobQueue::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    if (auto it = jobs_.find(id); it != jobs_.end()) return it->second;
    return std::nullopt;
}

std::vector<JobInfo> JobQueue::list() const {
    std::lock_guard lock(mutex_);
    std::vector<JobInfo> out;
    for (const auto& [id, job] : jobs_) out.push_back(job);
    std::sort(out.begin(), out.end(), [](const JobInfo& a, const JobInfo& b) { return a.sequence < b.sequence; });
    return out;
}

fs::path JobQueue::artifact_path(const std::string& job_id) const { return root_ / "artifacts" / job_id; }

void JobQueue::worker() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [this] { return stopping_ || !pending_.empty(); });
            if (stopping_) return;
            id = pending_.front();
            pending_.pop_front();
        }
        run_job(id);
    }
}

void JobQueue::run_job(const std::string& id) {
    RunConfig cfg;
    {
        std::lock_guard lock(mutex_);
        set_status(jobs_.at(id), JobStatus::running);
        cfg = job_configs_.at(id);
    }
    auto progress = [&](const std::string& stage) {
        std::lock_guard lock(mutex_);
        JobInfo& job = jobs_.at(id);
        job.stage = stage;
        persist(job);
    };
    JobStatus status = JobStatus::failed;
    std::string stage, error, hash;
    try {
        const fs::path dir = artifact_path(id);
        if (!fs::exists(dir / "manifest.json")) write_artifact(dir, render_artifact(run_pipeline(cfg, progress)));
        const Json summary = Json::parse(slurp(dir / "summary.json"));
        status = summary.at("status") == "done" ? JobStatus::done : JobStatus::failed;
        stage = summary.value("failed_stage", "");
        error = summary.value("error", "");
        hash = artifact_hash(dir);
    } catch (const std::exception& e) {
        stage = "artifact";
        error = e.what();
    }
    std::lock_guard lock(mutex_);
    JobInfo& job = jobs_.at(id);
    job.stage = stage;
    job.error = error;
    job.content_hash = hash;
    set_status(job, status);
}

// HTTP layer --------------------------------------------------------------------------------

namespace {

class HttpError : public Error {
public:
    HttpError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

void send_json(httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump() + '\n', "application/json");
}

Json parse_body(const httplib::Request& req) {
    try {
        return Json::parse(req.body.empty() ? std::string("{}") : req.body);
    } catch (const Json::parse_error& e) {
        throw InvalidArgument(std::string("request body is not JSON: ") + e.what());
    }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler f) {
    return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const HttpError& e) {
            send_json(res, {{"error", e.what()}}, e.status());
        } catch (const InfeasibleError& e) {
            send_json(res, {{"error", e.what()}}, 422);
        } catch (const InvalidArgument& e) {
            send_json(res, {{"error", e.what()}}, 400);
        } catch (const Json::exception& e) {
            send_json(res, {{"error", e.what()}}, 400);
        } catch (const std::exception& e) {
            send_json(res, {{"error", e.what()}}, 500);
        }
    };
}

bool etag_matches(const std::string& header, const std::string& etag) {
    std::stringstream s(header);
    std::string item;
    while (std::getline(s, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        std::string tag = item.substr(b, e - b + 1);
        if (tag.rfind("W/", 0) == 0) tag = tag.substr(2);
        if (tag == "*" || tag == etag) return true;
    }
    return false;
}

// The run's scenario and policies, read back from its artifact.
struct RunContext {
    ModelParams params;
    EpiState x0;
    GridSpec grid;
    DosingPolicy baseline;
    std::optional<DosingPolicy> optimal;
    Objective objective;
};

RunContext load_context(const fs::path& dir) {
    RunContext c;
    const Json scenario = Json::parse(slurp(dir / "scenario.json"));
    c.params = scenario.at("params").get<ModelParams>();
    c.x0 = scenario.at("initial_state").get<EpiState>();
    c.grid = scenario.at("grid").get<GridSpec>();
    c.baseline = Json::parse(slurp(dir / "baseline_policy.json")).get<DosingPolicy>();
    if (fs::exists(dir / "optimal_policy.json"))
        c.optimal = Json::parse(slurp(dir / "optimal_policy.json")).get<DosingPolicy>();
    c.objective = run_config_from_json(Json::parse(slurp(dir / "config.json"))).objective;
    return c;
}

// A first-dose table as [age][week] rows or as a flat [age * n_weeks + week] array.
std::vector<double> parse_table(const Json& j, const DosingPolicy& skel) {
    if (!j.is_array()) throw InvalidArgument("dose table must be an array");
    std::vector<double> out;
    if (!j.empty() && j.front().is_array()) {
        if (j.size() != skel.n_ages)
            throw InvalidArgument("dose table has " + std::to_string(j.size()) + " rows, expected " +
                                  std::to_string(skel.n_ages));
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_array() || j[i].size() != skel.n_weeks)
                throw InvalidArgument("dose table row " + std::to_string(i) + " must have " +
                                      std::to_string(skel.n_weeks) + " weeks");
            for (const Json& v : j[i]) out.push_back(number_from_json(v));
        }
    } else {
        if (j.size() != skel.u1.size())
            throw InvalidArgument("dose table has " + std::to_string(j.size()) + " entries, expected " +
                                  std::to_string(skel.u1.size()));
        for (const Json& v : j) out.push_back(number_from_json(v));
    }
    for (double v : out)
        if (!std::isfinite(v)) throw InvalidArgument("dose table entries must be finite");
    return out;
}

Json projection_json(const ProjectionReport& r) {
    return Json{{"sweeps", r.sweeps}, {"last_change", number_to_json(r.last_change)}, {"converged", r.converged}};
}

const std::map<std::string, std::string>& resource_files() {
    static const std::map<std::string, std::string> files{
        {"summary", "summary.json"},
        {"config", "config.json"},
        {"scenario", "scenario.json"},
        {"trajectories/baseline", "baseline_trajectory.json"},
        {"trajectories/optimal", "optimal_trajectory.json"},
        {"policies/baseline", "baseline_policy.json"},
        {"policies/optimal", "optimal_policy.json"},
        {"trace", "trace.json"},
        {"variation", "variation.json"},
        {"scans/sigma", "scan_sigma.json"},
        {"scans/theta", "scan_theta.json"},
        {"posterior", "calibration.json"},
    };
    return files;
}

}  // namespace

Service::Service(const ServiceOptions& options)
    : jobs_(std::make_unique<JobQueue>(options.root, options.workers)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

Service::~Service() {
    stop();
    jobs_->shutdown();
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void Service::run() { server_->listen_after_bind(); }

void Service::stop() { server_->stop(); }

void Service::routes() {
    httplib::Server& s = *server_;
    JobQueue& q = *jobs_;

    auto job_or_404 = [&q](const std::string& id) {
        auto job = q.find(id);
        if (!job) throw HttpError(404, "job not found: " + id);
        return *job;
    };
    auto finished_dir = [&q, job_or_404](const std::string& id) {
        const JobInfo job = job_or_404(id);
        if (job.status == JobStatus::queued || job.status == JobStatus::running)
            throw HttpError(409, "job " + id + " is " + to_string(job.status));
        return q.artifact_path(id);
    };
    auto done_context = [finished_dir, job_or_404](const std::string& id) {
        const fs::path dir = finished_dir(id);
        const JobInfo job = job_or_404(id);
        if (job.status != JobStatus::done)
            throw HttpError(409, "job " + id + " failed at stage '" + job.stage + "': " + job.error);
        return load_context(dir);
    };

    s.Get("/api/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
              send_json(res, {{"status", "ok"}});
          }));

    s.Get("/api/v1/configs", guarded([&q](const httplib::Request&, httplib::Response& res) {
              Json out = Json::array();
              for (const auto& [id, name] : q.configs()) out.push_back({{"id", id}, {"name", name}});
              send_json(res, out);
          }));
    s.Post("/api/v1/configs", guarded([&q](const httplib::Request& req, httplib::Response& res) {
               const RunConfig cfg = run_config_from_json(parse_body(req));
               const std::string id = q.store_config(cfg);
               send_json(res, {{"id", id}, {"config", stored_config_json(*q.config(id))}}, 201);
           }));
    s.Get(R"(/api/v1/configs/([^/]+))", guarded([&q](const httplib::Request& req, httplib::Response& res) {
              const auto cfg = q.config(req.matches[1]);
              if (!cfg) throw HttpError(404, "config not found: " + std::string(req.matches[1]));
              send_json(res, stored_config_json(*cfg));
          }));

    s.Get("/api/v1/runs", guarded([&q](const httplib::Request&, httplib::Response& res) {
              send_json(res, Json(q.list()));
          }));
    s.Post("/api/v1/runs", guarded([&q](const httplib::Request& req, httplib::Response& res) {
               const Json body = parse_body(req);
               RunConfig cfg;
               if (body.contains("config_id") == body.contains("config"))
                   throw InvalidArgument("give exactly one of 'config_id' and 'config'");
               if (body.contains("config_id")) {
                   const auto stored = q.config(body.at("config_id").get<std::string>());
                   if (!stored) throw HttpError(404, "config not found: " + body.at("config_id").get<std::string>());
                   cfg = *stored;
               } else {
                   cfg = run_config_from_json(body.at("config"));
               }
               if (body.contains("seed")) cfg.seed = body.at("seed").get<std::uint64_t>();
               send_json(res, Json(q.submit(cfg)), 202);
           }));
    s.Get(R"(/api/v1/runs/([^/]+))", guarded([job_or_404](const httplib::Request& req, httplib::Response& res) {
              send_json(res, Json(job_or_404(req.matches[1])));
          }));

    s.Get(R"(/api/v1/runs/([^/]+)/(manifest|summary|config|scenario|trace|variation|posterior|trajectories/\w+|policies/\w+|scans/\w+))",
          guarded([finished_dir](const httplib::Request& req, httplib::Response& res) {
              const fs::path dir = finished_dir(req.matches[1]);
              const std::string resource = req.matches[2];
              const Json manifest = Json::parse(slurp(dir / "manifest.json"));
              std::string body, digest;
              if (resource == "manifest") {
                  body = manifest.dump() + '\n';
                  digest = manifest.at("content_hash").get<std::string>();
              } else {
                  const auto it = resource_files().find(resource);
                  if (it == resource_files().end()) throw HttpError(404, "unknown resource: " + resource);
                  const auto& files = manifest.at("files");
                  if (!files.contains(it->second))
                      throw HttpError(404, "run " + std::string(req.matches[1]) + " has no " + resource);
                  body = slurp(dir / it->second);
                  digest = files.at(it->second).get<std::string>();
                  if (sha256_hex(body) != digest) throw Error("artifact file " + it->second + " does not match its digest");
              }
              const std::string etag = '"' + digest + '"';
              res.set_header("ETag", etag);
              res.set_header("Cache-Control", "public, max-age=31536000, immutable");
              if (req.has_header("If-None-Match") && etag_matches(req.get_header_value("If-None-Match"), etag)) {
                  res.status = 304;
                  return;
              }
              res.status = 200;
              res.set_content(body, "application/json");
          }));

    // Re-simulates a run's scenario under an edited first-dose table. The table is projected
    // onto the run's budget polytope first; the response carries the projected policy.
    s.Post(R"(/api/v1/runs/([^/]+)/simulate)",
           guarded([done_context](const httplib::Request& req, httplib::Response& res) {
               const RunContext c = done_context(req.matches[1]);
               const Json body = parse_body(req);
               Objective objective = c.objective;
               if (body.contains("objective"))
                   objective.kind = parse_objective(body.at("objective").get<std::string>());
               ProjectionReport report;
               const DosingPolicy policy = project_feasible(parse_table(body.at("u1"), c.baseline), c.baseline, {}, &report);
               const Trajectory traj = integrate_forward(c.x0, c.params, policy, c.grid);
               send_json(res, {{"policy", policy},
                               {"projection", projection_json(report)},
                               {"feasible", is_feasible(policy)},
                               {"objective", to_string(objective.kind)},
                               {"cost", number_to_json(cost_value(traj, objective, c.params))},
                               {"trajectory", trajectory_json(traj, c.params)}});
           }));

    // Lambda report between two tables. A missing "base" is the run's baseline policy and a
    // missing "optimal" its optimal policy.
    s.Post(R"(/api/v1/runs/([^/]+)/variation)",
           guarded([done_context](const httplib::Request& req, httplib::Response& res) {
               const RunContext c = done_context(req.matches[1]);
               const Json body = parse_body(req);
               auto policy_from = [&](const char* key, const std::optional<DosingPolicy>& stored) {
                   if (body.contains(key)) return project_feasible(parse_table(body.at(key), c.baseline), c.baseline);
                   if (!stored) throw InvalidArgument(std::string("run has no stored policy for '") + key + "'");
                   return *stored;
               };
               const DosingPolicy base = policy_from("base", c.baseline);
               const DosingPolicy opt = policy_from("optimal", c.optimal);
               const Trajectory tb = integrate_forward(c.x0, c.params, base, c.grid);
               const Trajectory to = integrate_forward(c.x0, c.params, opt, c.grid);
               Json out = Json(variation_report(tb, to, c.params, "base", "optimal"));
               out["base_policy"] = base;
               out["optimal_policy"] = opt;
               send_json(res, out);
           }));
}

}  // namespace vaxopt
