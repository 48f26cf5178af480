#include "mosaic/job_store.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace mosaic {

namespace fs = std::filesystem;

const char* job_kind_name(JobKind k) {
    switch (k) {
    case JobKind::Annotate: return "annotate";
    case JobKind::Verify: return "verify";
    case JobKind::UpdateCodebook: return "update_codebook";
    }
    return "?";
}

const char* job_state_name(JobState s) {
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    }
    return "?";
}

bool JobRecord::consistent() const {
    if (state != JobState::Done && state != JobState::Failed) return true;
    return !artifacts.empty() || error.has_value();
}

nlohmann::json JobRecord::to_json() const {
    nlohmann::json j = {{"job_id", job_id},       {"kind", job_kind_name(kind)}, {"state", job_state_name(state)},
                        {"created", created},     {"artifacts", artifacts},      {"warnings", warnings},
                        {"summary", summary},     {"timings_ms", timings_ms}};
    j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
    return j;
}

JobRecord JobRecord::from_json(const nlohmann::json& j) {
    JobRecord r;
    r.job_id = j.at("job_id").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    r.kind = kind == "verify" ? JobKind::Verify : kind == "update_codebook" ? JobKind::UpdateCodebook : JobKind::Annotate;
    const std::string state = j.at("state").get<std::string>();
    r.state = state == "done"      ? JobState::Done
              : state == "failed"  ? JobState::Failed
              : state == "running" ? JobState::Running
                                   : JobState::Queued;
    r.created = j.value("created", "");
    r.artifacts = j.value("artifacts", std::vector<std::string>{});
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.summary = j.value("summary", nlohmann::json::object());
    r.timings_ms = j.value("timings_ms", nlohmann::json::object());
    return r;
}

JobStore::JobStore(std::string root) : root_(std::move(root)) {
    fs::path jobs = fs::path(root_) / "jobs";
    fs::create_directories(jobs);
    for (const auto& e : fs::directory_iterator(jobs)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("job-", 0) != 0) continue;
        try {
            next_ = std::max(next_, std::stol(name.substr(4)) + 1);
        } catch (const std::exception&) {
        }
    }
}

std::string JobStore::job_dir(const std::string& job_id) const { return (fs::path(root_) / "jobs" / job_id).string(); }

JobRecord JobStore::create(JobKind kind) {
    JobRecord r;
    {
        std::lock_guard lock(mu_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "job-%06ld", next_++);
        r.job_id = buf;
    }
    r.kind = kind;
    r.created = utc_timestamp();
    fs::create_directories(job_dir(r.job_id));
    save(r);
    return r;
}

void JobStore::save(const JobRecord& job) {
    write_file((fs::path(job_dir(job.job_id)) / "job.json").string(), job.to_json().dump(2));
}

std::optional<JobRecord> JobStore::find(const std::string& job_id) const {
    if (job_id.find('/') != std::string::npos || job_id.find("..") != std::string::npos) return std::nullopt;
    fs::path p = fs::path(job_dir(job_id)) / "job.json";
    if (!fs::exists(p)) return std::nullopt;
    try {
        return JobRecord::from_json(nlohmann::json::parse(read_file(p.string())));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::IoError, "corrupt job record " + job_id + ": " + e.what());
    }
}

void JobStore::write_artifact(JobRecord& job, const std::string& name, const std::string& contents) {
    write_file((fs::path(job_dir(job.job_id)) / name).string(), contents);
    if (std::find(job.artifacts.begin(), job.artifacts.end(), name) == job.artifacts.end()) job.artifacts.push_back(name);
}

std::optional<std::string> JobStore::read_artifact(const std::string& job_id, const std::string& name) const {
    if (name.find('/') != std::string::npos || name.find("..") != std::string::npos) return std::nullopt;
    if (job_id.find('/') != std::string::npos || job_id.find("..") != std::string::npos) return std::nullopt;
    fs::path p = fs::path(job_dir(job_id)) / name;
    if (!fs::exists(p)) return std::nullopt;
    return read_file(p.string());
}

} // namespace mosaic
