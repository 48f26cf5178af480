#pragma once

#include "mosaic/annotation_record.hpp"
#include "mosaic/codebook.hpp"
#include "mosaic/transcript.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mosaic {

// 0/0 is defined as 0 throughout.
double safe_ratio(double num, double den);

struct LabelConfusion {
    std::string codebook;
    std::string label;
    long tp = 0, fp = 0, fn = 0, tn = 0;

    long total() const { return tp + fp + fn + tn; }
    long support() const { return tp + fn; }
    double accuracy() const { return safe_ratio(double(tp + tn), double(total())); }
    double precision() const { return safe_ratio(double(tp), double(tp + fp)); }
    double recall() const { return safe_ratio(double(tp), double(tp + fn)); }
    double f1() const;
    bool operator==(const LabelConfusion&) const = default;
};

enum class ReportLevel { Transcript, Category, Codebook, Overall };
const char* report_level_name(ReportLevel level);

struct MetricsReport {
    ReportLevel level = ReportLevel::Transcript;
    std::string name;
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    long instances = 0;
    long correct = 0;
    std::vector<LabelConfusion> per_label;

    const LabelConfusion* find(const std::string& codebook, const std::string& label) const;
    std::set<std::string> codebooks() const;
};

// Support-weighted precision/recall/F1 over `per_label`; accuracy is
// correct / total. Throws EmptyGold when the summed support is 0.
MetricsReport weighted_metrics(const std::vector<LabelConfusion>& per_label, long correct, long total,
                               ReportLevel level = ReportLevel::Transcript, std::string name = {});

using SlotKey = std::pair<int, int>;  // (turn_index, sent_index)

// Human labels: per sentence, per codebook, a set of label keys.
struct GoldAnnotationSet {
    std::string transcript_id;
    Transcript transcript;
    std::map<SlotKey, std::map<std::string, std::set<std::string>>> labels;

    std::set<std::string> codebooks() const;
};

// Resolves each inline tag to a codebook: a `Qual::` prefix names it, an
// unqualified code must belong to exactly one active codebook (AmbiguousTag
// otherwise); unknown codes or out-of-range scales are InvalidLabel. Tags that
// belong only to an `ignored` codebook are skipped.
GoldAnnotationSet gold_from_annotated(const AnnotatedTranscript& annotated,
                                      const std::map<std::string, LabelRegistry>& active,
                                      const std::map<std::string, LabelRegistry>& ignored = {});

struct AlignedSentence {
    int turn_index = 0;
    int sent_index = 0;
    std::string codebook;
    std::set<std::string> gold;
    std::set<std::string> pred;
    bool match() const { return gold == pred; }
};

struct Alignment {
    std::string transcript_id;
    std::vector<std::string> codebooks;
    std::vector<AlignedSentence> rows;  // sentence-major, then codebook order
};

// Every sentence appears once per codebook. Empty sets become {"None"} and
// "None" is dropped from a set holding real labels. Predictions whose
// transcript id or coordinates fall outside the gold transcript raise
// TranscriptMismatch, as does a differing `pred_sentence_count`.
Alignment align(const GoldAnnotationSet& gold, const std::vector<Annotation>& pred,
                const std::vector<std::string>& codebooks, std::optional<size_t> pred_sentence_count = std::nullopt);

// One-vs-rest counts for one codebook over all of its aligned rows. The label
// universe is the registry's keys plus "None" plus anything observed.
std::vector<LabelConfusion> per_label_counts(const Alignment& aligned, const LabelRegistry& registry);

// Transcript-level report over the listed codebooks (pooled when several).
MetricsReport evaluate(const Alignment& aligned, const std::map<std::string, LabelRegistry>& registries,
                       const std::vector<std::string>& codebooks, std::string name = {});

// Category: unweighted mean of the inputs' metrics. Codebook and overall:
// counts pooled per (codebook, label) and metrics recomputed.
MetricsReport aggregate(const std::vector<MetricsReport>& reports, ReportLevel level, std::string name = {});

struct MismatchRow {
    std::string transcript_id;
    int turn_index = 0;
    int sent_index = 0;
    std::string codebook;
    std::string kind;  // missed, extra, substituted, missed scale label
    std::set<std::string> gold;
    std::set<std::string> pred;
    std::string sentence;
    std::string context;  // up to k preceding turns plus the sentence's own turn
};

std::vector<MismatchRow> mismatch_report(const Alignment& aligned, const Transcript& transcript, int k_context = 8);

} // namespace mosaic
