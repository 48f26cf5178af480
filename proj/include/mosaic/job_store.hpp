#pragma once

#include <nlohmann/json.hpp>

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mosaic {

enum class JobKind { Annotate, Verify, UpdateCodebook };
enum class JobState { Queued, Running, Done, Failed };
const char* job_kind_name(JobKind k);
const char* job_state_name(JobState s);

struct JobRecord {
    std::string job_id;
    JobKind kind = JobKind::Annotate;
    JobState state = JobState::Queued;
    std::string created;
    std::vector<std::string> artifacts;  // file names inside the job directory
    std::optional<std::string> error;
    std::vector<std::string> warnings;
    nlohmann::json summary = nlohmann::json::object();
    nlohmann::json timings_ms = nlohmann::json::object();

    // Terminal jobs keep artifacts or an error, never neither.
    bool consistent() const;
    nlohmann::json to_json() const;
    static JobRecord from_json(const nlohmann::json& j);
};

// One directory per job under <root>/jobs, with job.json beside the artifacts.
class JobStore {
public:
    explicit JobStore(std::string root);

    JobRecord create(JobKind kind);
    void save(const JobRecord& job);
    std::optional<JobRecord> find(const std::string& job_id) const;
    std::string job_dir(const std::string& job_id) const;
    const std::string& root() const { return root_; }

    void write_artifact(JobRecord& job, const std::string& name, const std::string& contents);
    std::optional<std::string> read_artifact(const std::string& job_id, const std::string& name) const;

private:
    std::string root_;
    mutable std::mutex mu_;
    long next_ = 1;
};

} // namespace mosaic
