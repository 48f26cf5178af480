#pragma once

#include "mosaic/chat_backend.hpp"
#include "mosaic/codebook_store.hpp"
#include "mosaic/config.hpp"
#include "mosaic/embedding.hpp"
#include "mosaic/example_library.hpp"
#include "mosaic/job_store.hpp"
#include "mosaic/retrieval.hpp"
#include "mosaic/workflow.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mosaic {

// Everything a run needs, built once from a ServiceConfig. Pieces passed in
// explicitly replace the ones the config would create.
struct Runtime {
    ServiceConfig config;
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<ChatBackend> chat;
    std::unique_ptr<Reranker> reranker;
    std::unique_ptr<RetrievalCache> cache;
    std::unique_ptr<CodebookStore> store;
    std::unique_ptr<ExampleLibrary> library;

    static std::unique_ptr<Runtime> create(ServiceConfig config, std::unique_ptr<ChatBackend> chat = nullptr,
                                           std::unique_ptr<Embedder> embedder = nullptr,
                                           std::unique_ptr<Reranker> reranker = nullptr);
    bool chat_configured() const;
    WorkflowDeps deps() const;
};

// Builds the chat backend named by the config: the scripted fixture when
// set, else the HTTP endpoint, else an always-unavailable backend.
std::unique_ptr<ChatBackend> chat_backend_from_config(const ServiceConfig& config);

struct ServiceResponse {
    int status = 200;
    nlohmann::json body = nlohmann::json::object();
    std::string content_type = "application/json";
    std::optional<std::string> raw;  // non-JSON payloads (artifacts)
};

struct AnnotateRequest {
    std::string transcript;
    std::string transcript_name = "transcript";
    std::string prompt;
    std::vector<UploadedCodebook> codebooks;
    nlohmann::json config = nlohmann::json::object();
    std::optional<std::vector<std::string>> agents;
    std::optional<std::string> gold;
    bool verify = false;
    bool training = false;
};

struct VerifyRequest {
    std::string gold;
    std::optional<std::string> job_id;
    std::optional<std::string> predictions;  // annotations JSON
};

struct CorrectionRequest {
    std::string job_id;
    int turn_index = 0;
    int sent_index = 0;
    std::string codebook;
    std::string old_label;
    std::string new_label;
    std::string editor;
};

CorrectionRequest correction_from_json(const nlohmann::json& j);

// Transport-independent handlers; the HTTP server and tests call these.
class Service {
public:
    explicit Service(std::unique_ptr<Runtime> runtime);

    ServiceResponse annotate(const AnnotateRequest& req);
    ServiceResponse verify(const VerifyRequest& req);
    ServiceResponse upload_codebook(const std::string& name, const std::string& document);
    ServiceResponse correction(const CorrectionRequest& req);
    ServiceResponse job(const std::string& job_id) const;
    ServiceResponse artifact(const std::string& job_id, const std::string& name) const;
    ServiceResponse codebooks() const;
    ServiceResponse library(const std::string& codebook) const;
    ServiceResponse health() const;

    Runtime& runtime() { return *rt_; }
    JobStore& jobs() { return jobs_; }
    std::string corrections_log_path() const;

private:
    std::unique_ptr<Runtime> rt_;
    JobStore jobs_;
    std::mutex corrections_mu_;
    std::mutex update_mu_;  // codebook updates vs. job starts
};

// NotFound 404, TranscriptMismatch and StaleIndex 409, ProvenanceViolation 403,
// BackendUnavailable 503, IoError 500, everything else 400.
int http_status_for(ErrorKind kind);
ServiceResponse error_response(const Error& e);

} // namespace mosaic
