#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

inline constexpr std::string_view kNoneLabel = "None";

enum class LabelKind { Event, Scale };

struct LabelDef {
    std::string code;
    LabelKind kind = LabelKind::Event;
    int scale_min = 0;  // 1..5 for scale labels, 0 for events
    int scale_max = 0;
    std::string description;

    bool operator==(const LabelDef&) const = default;
};

struct RuleSection {
    std::string heading;
    std::string body;
    std::vector<std::string> examples;  // body lines carrying a bracket tag

    bool operator==(const RuleSection&) const = default;
};

struct Codebook {
    std::string name;
    std::string version;  // content hash of the source document
    std::vector<RuleSection> rules;
    std::vector<LabelDef> labels;
    std::string source;

    const LabelDef* find_label(std::string_view code) const;
};

// The closed set of labels an annotator may emit for one codebook. Scale
// labels expand to one key per value ("Flow: 1" .. "Flow: 5").
class LabelRegistry {
public:
    LabelRegistry() = default;
    LabelRegistry(std::string codebook, std::vector<LabelDef> labels);

    const std::string& codebook() const { return codebook_; }
    const std::vector<LabelDef>& labels() const { return labels_; }

    const LabelDef* find(std::string_view code) const;
    bool has_code(std::string_view code) const { return find(code) != nullptr; }

    // True when `code` (with `scale` for scale labels) can be emitted. "None" is always accepted.
    bool accepts(std::string_view code, std::optional<int> scale) const;
    bool accepts_key(std::string_view key) const { return keys_.count(std::string(key)) > 0; }

    // All emit-able keys in declaration order followed by "None".
    const std::vector<std::string>& ordered_keys() const { return ordered_; }
    const std::set<std::string>& keys() const { return keys_; }
    std::set<std::string> codes() const;

private:
    std::string codebook_;
    std::vector<LabelDef> labels_;
    std::vector<std::string> ordered_;
    std::set<std::string> keys_;
};

struct RuleChunk {
    std::string codebook;
    std::string version;
    int chunk_id = 0;
    int section = 0;
    std::string text;
    std::set<std::string> tags;  // label codes appearing in the text

    bool operator==(const RuleChunk&) const = default;
};

std::string codebook_version(std::string_view doc);

Codebook parse_codebook(std::string_view doc, const std::string& name);

// Sliding windows of whitespace tokens over each rule section.
std::vector<RuleChunk> chunk_codebook(const Codebook& cb, int window, int stride);

LabelRegistry label_registry(const Codebook& cb);

} // namespace mosaic
