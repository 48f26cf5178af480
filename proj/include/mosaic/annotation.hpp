#pragma once

#include "mosaic/annotation_record.hpp"
#include "mosaic/chat_backend.hpp"
#include "mosaic/codebook_store.hpp"
#include "mosaic/example_library.hpp"
#include "mosaic/retrieval.hpp"
#include "mosaic/transcript.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mosaic {

// How often a scale dimension may be rated: once per sentence that evidences
// it, once per batch, or once per transcript.
enum class ScaleMode { Sentence, Segment, Encounter };
const char* scale_mode_name(ScaleMode m);
ScaleMode parse_scale_mode(const std::string& s);

struct Prompt {
    std::string codebook;
    std::string system_instructions;
    std::vector<std::string> valid_labels;  // codes in declaration order, then "None"
    std::string label_section;
    std::vector<RuleChunk> retrieved_rules;
    std::vector<ExampleEntry> fewshot;
    std::string payload;

    // Sections (1) instructions, (2) labels, (3) rules, (4) examples when any.
    std::string system_text() const;
    std::vector<ChatMessage> messages() const;
    // Rough size: characters / 4.
    size_t token_estimate() const;
};

// Context turns as "(context) T<i> Speaker: text"; annotatable sentences as
// "T<i>.S<j> Speaker: sentence".
std::string render_payload(const Transcript& t, const Batch& batch);

// Throws PromptTooLarge when max_prompt_tokens > 0 and the estimate exceeds it.
Prompt assemble_prompt(const Transcript& t, const Batch& batch, const Codebook& cb,
                       const std::vector<RuleChunk>& retrieved, const std::vector<ExampleEntry>& fewshot,
                       size_t max_prompt_tokens = 0, ScaleMode scale_mode = ScaleMode::Encounter);

struct ParsedOutput {
    std::vector<Annotation> annotations;  // labeled sentences only
    std::vector<std::string> warnings;
    size_t tuples = 0;  // grammar matches, valid or not
};

// Reads lines of the form `T<turn>.S<sent>: [CODE]` or `[CODE: k]`. Only the
// first tag of a line counts. Bad indices, context turns, unknown codes and
// repeats of a slot become warnings. An event label and each scale
// dimension occupy separate slots of a sentence. Blank output yields nothing;
// other output with no matching line throws UnparseableOutput.
ParsedOutput parse_model_output(const std::string& text, const LabelRegistry& registry, const Transcript& t,
                                const Batch& batch);

// Adds a "None" annotation for each annotatable sentence with no label.
std::vector<Annotation> none_fill(std::vector<Annotation> labeled, const Transcript& t, const Batch& batch,
                                  const std::string& codebook);

struct ChatSettings {
    double temperature = 0.3;
    int max_tokens = 2048;
    std::string model;
};

struct BatchOutcome {
    std::vector<Annotation> annotations;  // None-filled over the batch
    std::vector<std::string> warnings;
    bool parse_recovered = false;
};

using ChatAudit = std::function<void(const ChatRequest&, const ChatResponse&)>;

// One model call, plus one format-reminder re-ask when the reply is unparseable.
BatchOutcome annotate_batch(const Prompt& prompt, ChatBackend& backend, const Transcript& t, const Batch& batch,
                            const LabelRegistry& registry, const ChatSettings& chat, const ChatAudit& audit = {});

struct AnnotateOptions {
    ChatSettings chat;
    int max_turns = 120;
    int context_overlap = 8;
    RetrievalParams retrieval;
    int parallelism = 4;
    size_t max_prompt_tokens = 0;
    ScaleMode scale_mode = ScaleMode::Encounter;
    bool use_fewshot = true;
};

struct AnnotatorDeps {
    ChatBackend* chat = nullptr;
    Reranker* reranker = nullptr;
    ExampleLibrary* library = nullptr;  // optional
    ChatAudit audit;
};

struct CodebookResult {
    std::string codebook;
    std::set<std::string> versions;  // codebook versions the batches ran on
    std::string status = "done";     // done | failed
    std::optional<std::string> error;
    std::vector<Annotation> annotations;
    std::vector<std::string> warnings;
    int batches = 0;
    bool parse_recovered = false;
};

// Fans (codebook x batch) tasks out over at most `parallelism` workers. Each
// task takes the codebook's current snapshot, so an update lands between
// batches. A failing codebook is marked failed without touching the others.
std::map<std::string, CodebookResult> annotate_transcript(const Transcript& t,
                                                          const std::vector<std::string>& codebooks,
                                                          CodebookStore& store, const AnnotatorDeps& deps,
                                                          const AnnotateOptions& options);

} // namespace mosaic
