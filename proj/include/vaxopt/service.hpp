#pragma once

// HTTP/JSON service under /api/v1 and the job queue behind it.
//
// Layout under the root directory:
//   configs/<id>.json    stored run configs, id = first 16 hex of the config hash
//   jobs/<id>.json       job state, id = artifact directory name
//   artifacts/<id>/      run artifacts, write-once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vaxopt/config.hpp"

namespace httplib {
class Server;
}

namespace vaxopt {

enum class JobStatus { queued, running, done, failed };

std::string to_string(JobStatus status);
JobStatus parse_job_status(std::string_view name);

struct JobInfo {
    std::string id;
    std::string config_id;
    std::string name;
    JobStatus status = JobStatus::queued;
    std::string stage;                 // stage being run, or the stage that failed
    std::string error;
    std::vector<std::string> history;  // every status the job has been in, in order
    std::string content_hash;          // artifact hash once finished
    std::uint64_t sequence = 0;        // submission order
};

void to_json(Json& j, const JobInfo& job);
void from_json(const Json& j, JobInfo& job);

std::string config_id(const RunConfig& cfg);

/// Single in-process queue served by a fixed number of worker threads. Job state is written to
/// disk on every change; jobs found queued or running at start-up are queued again.
class JobQueue {
public:
    JobQueue(std::filesystem::path root, std::size_t workers);
    ~JobQueue();
    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    /// Stores the config and queues its run. A config that already has a job returns that job.
    JobInfo submit(RunConfig cfg);
    std::optional<JobInfo> find(const std::string& id) const;
    std::vector<JobInfo> list() const;

    /// Stored config by id, or nullopt.
    std::optional<RunConfig> config(const std::string& id) const;
    /// Validates and stores a config without running it. Returns its id.
    std::string store_config(RunConfig cfg);
    std::vector<std::pair<std::string, std::string>> configs() const;  // (id, name)

    std::filesystem::path artifact_path(const std::string& job_id) const;
    const std::filesystem::path& root() const { return root_; }

    void shutdown();

private:
    void worker();
    void run_job(const std::string& id);
    void persist(const JobInfo& job) const;
    void set_status(JobInfo& job, JobStatus status);

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::deque<std::string> pending_;
    std::map<std::string, JobInfo> jobs_;
    std::map<std::string, RunConfig> job_configs_;
    std::uint64_t next_sequence_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

struct ServiceOptions {
    std::filesystem::path root = "vaxopt-service";
    std::size_t workers = 1;
};

class Service {
public:
    explicit Service(const ServiceOptions& options);
    ~Service();

    /// Binds to host:port; port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call bind() first.
    void run();
    void stop();

    JobQueue& jobs() { return *jobs_; }

private:
    void routes();

    std::unique_ptr<JobQueue> jobs_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace vaxopt
