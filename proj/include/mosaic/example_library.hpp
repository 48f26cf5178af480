#pragma once

#include "mosaic/codebook.hpp"
#include "mosaic/embedding.hpp"
#include "mosaic/metrics.hpp"

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mosaic {

enum class Outcome { CorrectMatch, ContrastiveError };
const char* outcome_name(Outcome o);

struct ExampleEntry {
    std::string id;
    std::string codebook;
    std::string sentence;
    std::string context;  // rendered surrounding turns
    std::string human_label;
    std::string agent_label;
    Outcome outcome = Outcome::CorrectMatch;
    double utility = 1.0;
    EmbeddingVector embedding;
    std::string origin;  // transcript id
    int turn_index = -1;
    int sent_index = -1;

    std::string dedupe_key() const;
};

struct ExampleInput {
    std::string codebook;
    std::string sentence;
    std::string context;
    std::string human_label;
    std::string agent_label;
    std::string origin;
    int turn_index = -1;
    int sent_index = -1;
};

struct SelectionPolicy {
    int max_examples = 6;
    double precision_weight = 1.0;
    double mix = 0.25;  // minimum fraction of contrastive errors
};

struct FeedbackParams {
    double alpha = 0.5;       // promotion strength
    double tau = 0.5;         // precision threshold for the anti-overannotation lever
    double epsilon = 1e-3;    // prune below this utility
    double cap = 10.0;        // utility ceiling
    double min_factor = 0.05; // floor on a single demotion multiplier
    double mix_step = 0.05;
    double mix_min = 0.1;
    double mix_max = 0.75;
};

// Multiplier for one entry given its codebook's per-label confusion:
//   (1 + alpha * P(human_label))                          promotion
//   * max(min_factor, 1 - w (tau - P(l)))   correct match of l, l predicted, P(l) < tau
//   * (1 + w (tau - P(l)))                  contrastive with agent_label l, l predicted, P(l) < tau
// where w is the policy's precision_weight. Labels absent from the report
// contribute a factor of 1.
double feedback_multiplier(const ExampleEntry& entry, const std::vector<LabelConfusion>& per_label,
                           double precision_weight, const FeedbackParams& params);

struct LibraryDelta {
    std::string codebook;
    std::map<std::string, double> multipliers;  // entry id -> applied factor
    std::vector<std::string> pruned;
    long old_version = 0;
    long new_version = 0;
    double old_mix = 0.0;
    double new_mix = 0.0;
};

// Few-shot store with an append-only log and a compacted snapshot. When a
// training manifest is set, entries whose origin is outside it are refused.
class ExampleLibrary {
public:
    explicit ExampleLibrary(Embedder& embedder, std::string dir = {});

    void set_registry(const LabelRegistry& registry);
    void set_training_manifest(std::set<std::string> transcript_ids);
    const std::optional<std::set<std::string>>& training_manifest() const { return manifest_; }

    // Idempotent on the dedupe key: recording the same example twice returns
    // the stored entry.
    ExampleEntry record_example(const ExampleInput& input);

    // Embedding similarity is mapped to [0, 1] as (1 + cos) / 2 and scored
    // against utility as a product. The top max_examples are taken, then the
    // lowest-scored correct matches are swapped for the best remaining
    // contrastive errors until ceil(mix * n) contrastive entries are present
    // (or none are left). Output is ordered by score, ties by id.
    std::vector<ExampleEntry> select_fewshot(const std::string& query, const std::string& codebook,
                                             const SelectionPolicy& policy,
                                             const std::set<std::string>& exclude_origins = {}) const;
    std::vector<ExampleEntry> select_fewshot(const std::string& query, const std::string& codebook) const {
        return select_fewshot(query, codebook, policy(codebook));
    }

    // Applies the multipliers of every entry of `codebook` at once, then caps,
    // prunes, adapts the codebook's mix and bumps the version.
    LibraryDelta apply_feedback(const std::string& codebook, const MetricsReport& report,
                                const FeedbackParams& params = {});

    SelectionPolicy policy(const std::string& codebook) const;
    void set_policy(const std::string& codebook, SelectionPolicy policy);

    std::vector<ExampleEntry> entries(const std::string& codebook = {}) const;
    std::optional<ExampleEntry> find(const std::string& id) const;
    size_t size() const;
    long version() const;
    // Number of entries per human label.
    std::map<std::string, int> support(const std::string& codebook) const;

    void set_utility(const std::string& id, double utility);

    // Rewrites the snapshot and truncates the log.
    void compact();
    const std::string& dir() const { return dir_; }

private:
    void load();
    void append_log(const nlohmann::json& event);
    ExampleEntry entry_from_json(const nlohmann::json& j) const;

    Embedder& embedder_;
    std::string dir_;
    mutable std::shared_mutex mu_;
    std::vector<ExampleEntry> entries_;
    std::map<std::string, LabelRegistry> registries_;
    std::map<std::string, SelectionPolicy> policies_;
    std::optional<std::set<std::string>> manifest_;
    long version_ = 0;
    long next_id_ = 1;
};

nlohmann::json to_json(const ExampleEntry& e, bool with_embedding = true);

} // namespace mosaic
