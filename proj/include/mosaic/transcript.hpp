#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

enum class Speaker { Clinician, Patient, Other };

const char* speaker_name(Speaker s);

struct Sentence {
    int turn_index = 0;
    int sent_index = 0;
    std::string text;

    bool operator==(const Sentence&) const = default;
};

struct Turn {
    int index = 0;
    Speaker speaker = Speaker::Other;
    std::string speaker_label;  // as written in the source, kept for rendering
    std::vector<Sentence> sentences;
    int block_ref = 0;           // seconds offset of the enclosing block
    bool is_silence = false;
    int silence_seconds = 0;

    bool operator==(const Turn&) const = default;
};

struct TimeBlock {
    int timestamp = 0;  // seconds from start
    int first_turn = 0;
    int turn_count = 0;

    bool operator==(const TimeBlock&) const = default;
};

struct Transcript {
    std::string id;
    std::vector<TimeBlock> blocks;
    std::vector<Turn> turns;
    std::map<std::string, std::string> source_meta;
    std::vector<std::string> warnings;

    size_t sentence_count() const;
    const Sentence& sentence(int turn_index, int sent_index) const;
    bool has_sentence(int turn_index, int sent_index) const;

    bool operator==(const Transcript&) const = default;
};

// A contiguous run of annotatable turns [first_turn, end_turn). Context
// turns [context_begin, first_turn) are shown to the model but never labeled.
struct Batch {
    int batch_id = 0;
    int first_turn = 0;
    int end_turn = 0;
    int context_begin = 0;
    int start_timestamp = 0;
    int end_timestamp = 0;

    int size() const { return end_turn - first_turn; }
    int context_size() const { return first_turn - context_begin; }
    bool contains(int turn) const { return turn >= first_turn && turn < end_turn; }

    bool operator==(const Batch&) const = default;
};

std::vector<std::string> split_sentences(std::string_view text);

// Byte spans [begin, end) of each sentence in `text`, trimmed.
std::vector<std::pair<size_t, size_t>> sentence_spans(std::string_view text);

// Inline `[Codebook::CODE]` tags are dropped from sentence text.
Transcript parse_transcript(std::string_view raw, const std::string& id);

// Inline tag attached to a sentence in an annotated transcript.
struct SentenceTag {
    int turn_index = 0;
    int sent_index = 0;
    std::string qualifier;
    std::string code;
    std::optional<int> scale;
    int line = 0;
};

struct AnnotatedTranscript {
    Transcript transcript;
    std::vector<SentenceTag> tags;
};

// Parses a transcript whose speaker lines may carry bracket tags after
// sentences (`Clinician: A girl. [RS]`). Tags attach to the sentence that
// ends immediately before them.
AnnotatedTranscript parse_annotated_transcript(std::string_view raw, const std::string& id);

std::string format_block_timestamp(int seconds);
std::string format_silence_duration(int seconds);

std::string render_turn(const Turn& turn);
std::string render_transcript(const Transcript& t);

using SentenceTagRenderer = std::function<std::vector<std::string>(int turn_index, int sent_index)>;
std::string render_annotated(const Transcript& t, const SentenceTagRenderer& tags_for);

std::vector<Batch> batch_transcript(const Transcript& t, int max_turns, int context_overlap);

// Up to k turns preceding turn_index plus the turn itself.
std::span<const Turn> context_window(const Transcript& t, int turn_index, int k = 8);

std::string render_turns(std::span<const Turn> turns);

} // namespace mosaic
