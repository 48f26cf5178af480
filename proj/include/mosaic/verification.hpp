#pragma once

#include "mosaic/annotation.hpp"
#include "mosaic/example_library.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/reports.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mosaic {

struct VerificationResult {
    Alignment alignment;
    MetricsReport overall;
    std::vector<MetricsReport> by_codebook;  // in codebook order
    std::vector<MismatchRow> mismatches;
    CsvTable comparison;
    CsvTable mismatch_csv;
    CsvTable overall_csv;
    CsvTable per_label_csv;

    std::vector<const CsvTable*> tables() const { return {&comparison, &mismatch_csv, &overall_csv, &per_label_csv}; }
    nlohmann::json to_json(size_t preview_rows = kPreviewRows) const;
};

// Training mode: align, count, weight and render the four reports. Codebooks
// whose slice has no gold support at all are still reported through the
// pooled overall report.
VerificationResult verify_predictions(const GoldAnnotationSet& gold, const std::vector<Annotation>& pred,
                                      const std::vector<std::string>& codebooks,
                                      const std::map<std::string, LabelRegistry>& registries,
                                      std::optional<size_t> pred_sentence_count = std::nullopt, int k_context = 8);

// Writes the four CSVs plus metrics.json into `dir`; returns the paths.
std::vector<std::string> write_reports(const VerificationResult& v, const std::string& dir);

struct LearningOutcome {
    size_t recorded = 0;
    std::vector<LibraryDelta> deltas;
    std::vector<std::string> warnings;
};

// Feeds a training-mode verification into the example library: every
// sentence with a real label on either side becomes an example, then each
// codebook's report drives apply_feedback. Transcripts outside the training
// manifest contribute nothing (with a warning).
LearningOutcome learn_from_verification(const VerificationResult& v, const Transcript& t, ExampleLibrary& library,
                                        const FeedbackParams& params = {}, int k_context = 8);

enum class FlagReason { VerifierDisagreement, InvalidParseRecovered, RareLabel };
const char* flag_reason_name(FlagReason r);

struct Flag {
    std::string transcript_id;
    int turn_index = 0;
    int sent_index = 0;
    std::string codebook;
    std::string label;  // key of the flagged annotation
    FlagReason reason = FlagReason::VerifierDisagreement;
    std::string detail;
};

nlohmann::json to_json(const Flag& f);

struct FlagOptions {
    int rare_threshold = 3;  // training-pool examples below this flag the label
    ChatSettings chat;
};

// Inference mode. A verifier pass re-labels the non-None predictions of each
// codebook; disagreements are flagged. Rare labels and re-asked parses are
// flagged by rule. A verifier outage leaves only the rule-based flags and a
// warning.
std::vector<Flag> flag_inference(const Transcript& t, const std::map<std::string, std::vector<Annotation>>& pred,
                                 const std::map<std::string, LabelRegistry>& registries, ChatBackend* verifier,
                                 const ExampleLibrary* library, const FlagOptions& options,
                                 std::vector<std::string>* warnings = nullptr);

} // namespace mosaic
