#pragma once

#include "mosaic/annotation.hpp"
#include "mosaic/codebook_store.hpp"
#include "mosaic/config.hpp"
#include "mosaic/example_library.hpp"
#include "mosaic/routing.hpp"
#include "mosaic/state_graph.hpp"
#include "mosaic/verification.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mosaic {

struct UploadedCodebook {
    std::string name;
    std::string document;
};

struct WorkflowState {
    std::optional<Transcript> transcript;
    std::string user_prompt;
    // Explicit agent list; when set the router is bypassed.
    std::optional<std::vector<std::string>> requested_override;
    std::vector<std::string> requested_annotations;
    std::vector<UploadedCodebook> uploaded_codebooks;
    bool codebook_update_flag = false;
    bool run_verification_flag = false;
    bool verify_requested = false;  // inference-mode flags without gold
    bool training = false;          // feed verification into the example library
    std::optional<std::string> gold_text;  // inline-tagged transcript

    std::map<std::string, CodebookResult> results;
    std::optional<std::string> error;
    std::vector<std::string> warnings;
    RunConfig config;

    std::vector<std::string> trace;
    std::vector<std::pair<std::string, double>> timings_ms;
    std::vector<UpdateReceipt> updates;
    std::map<std::string, std::string> codebook_versions;
    std::shared_ptr<const VerificationResult> verification;
    std::vector<Flag> flags;
    std::optional<LearningOutcome> learning;
    std::optional<std::string> feedback;  // alert text produced by the Feedback node
    std::vector<Codebook> parsed_uploads;
};

struct WorkflowDeps {
    CodebookStore* store = nullptr;
    ChatBackend* chat = nullptr;
    Reranker* reranker = nullptr;
    ExampleLibrary* library = nullptr;
    Router* router = nullptr;  // keyword router when null
    ChatAudit audit;
    // Test hook run before every node; throwing from it fails that node.
    std::function<void(const std::string& node, WorkflowState&)> before_node;
};

// Plan validation: missing transcript and malformed uploads become
// state.error; unknown speakers become warnings.
void validate_inputs(WorkflowState& state);

// Plan -> (Update) -> Annotate -> (Verify) -> End, with every failure routed
// through Feedback. Never throws.
WorkflowState run_workflow(WorkflowState state, const WorkflowDeps& deps);

// Deterministic audit record of a finished run (no wall-clock fields).
nlohmann::json run_manifest(const WorkflowState& state, const WorkflowDeps& deps);

// Annotation JSON: {transcript_id, sentence_count, codebooks, annotations, manifest}.
nlohmann::json annotations_json(const WorkflowState& state, const WorkflowDeps& deps,
                                const std::optional<std::string>& only_codebook = std::nullopt);

// Transcript text with each sentence followed by its non-None labels as
// `[Codebook::CODE]` tags.
std::string annotated_text(const WorkflowState& state);

} // namespace mosaic
