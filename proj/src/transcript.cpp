#include "mosaic/transcript.hpp"

#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>

namespace mosaic {

const char* speaker_name(Speaker s) {
    switch (s) {
    case Speaker::Clinician: return "Clinician";
    case Speaker::Patient: return "Patient";
    case Speaker::Other: return "Other";
    }
    return "Other";
}

size_t Transcript::sentence_count() const {
    size_t n = 0;
    for (const auto& t : turns) n += t.sentences.size();
    return n;
}

bool Transcript::has_sentence(int turn_index, int sent_index) const {
    if (turn_index < 0 || turn_index >= static_cast<int>(turns.size())) return false;
    return sent_index >= 0 && sent_index < static_cast<int>(turns[turn_index].sentences.size());
}

const Sentence& Transcript::sentence(int turn_index, int sent_index) const {
    if (!has_sentence(turn_index, sent_index))
        throw Error(ErrorKind::IndexOutOfRange,
                    "T" + std::to_string(turn_index) + ".S" + std::to_string(sent_index));
    return turns[turn_index].sentences[sent_index];
}

std::vector<std::pair<size_t, size_t>> sentence_spans(std::string_view text) {
    std::vector<std::pair<size_t, size_t>> spans;
    auto push = [&](size_t b, size_t e) {
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (e > b) spans.emplace_back(b, e);
    };
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '?' || c == '!') && i + 1 < text.size() &&
            std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            push(start, i + 1);
            start = i + 1;
        }
    }
    push(start, text.size());
    return spans;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    for (auto [b, e] : sentence_spans(text)) out.emplace_back(text.substr(b, e - b));
    return out;
}

namespace {

const std::regex kBlockHeader(R"(^\[(\d+):([0-5]\d)\]$)");
const std::regex kSilence(R"(^\[silence (\d+):([0-5]\d):([0-5]\d)\]$)", std::regex::icase);

Speaker classify_speaker(const std::string& label) {
    std::string l = to_lower(label);
    if (l == "clinician" || l == "doctor" || l == "provider" || l == "physician") return Speaker::Clinician;
    if (l == "patient") return Speaker::Patient;
    return Speaker::Other;
}

bool valid_speaker_label(std::string_view s) {
    if (s.empty() || s.size() > 40 || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == ' ' || c == '_' || c == '-' || c == '\'' || c == '.') continue;
        return false;
    }
    return true;
}

struct StrippedText {
    std::string text;
    std::vector<std::pair<size_t, TagToken>> anchors;  // position in stripped text
};

StrippedText strip_tags(const std::string& text) {
    StrippedText out;
    size_t cursor = 0;
    for (auto& tok : find_tags(text)) {
        out.text.append(text, cursor, tok.begin - cursor);
        while (!out.text.empty() && out.text.back() == ' ') out.text.pop_back();
        out.anchors.emplace_back(out.text.size(), tok);
        cursor = tok.end;
        if (cursor < text.size() && text[cursor] == ' ' && !out.text.empty()) {
            out.text.push_back(' ');
            ++cursor;
        }
    }
    out.text.append(text, cursor, std::string::npos);
    return out;
}

Transcript parse_impl(std::string_view raw, const std::string& id, std::vector<SentenceTag>* tags) {
    Transcript t;
    t.id = id;
    auto lines = split_lines(raw);
    bool have_block = false;
    for (size_t li = 0; li < lines.size(); ++li) {
        const int line_no = static_cast<int>(li) + 1;
        std::string line = trim(lines[li]);
        if (line.empty()) continue;

        if (line.front() == '#') {
            std::string body = trim(std::string_view(line).substr(1));
            auto colon = body.find(':');
            if (colon == std::string::npos)
                throw Error(ErrorKind::MalformedLine, "metadata line needs `# key: value`", line_no);
            t.source_meta[trim(body.substr(0, colon))] = trim(body.substr(colon + 1));
            continue;
        }

        std::smatch m;
        if (line.front() == '[') {
            if (std::regex_match(line, m, kBlockHeader)) {
                int ts = std::stoi(m[1]) * 60 + std::stoi(m[2]);
                if (have_block && ts <= t.blocks.back().timestamp)
                    throw Error(ErrorKind::NonMonotoneTimestamp,
                                "block " + line + " does not follow " +
                                    format_block_timestamp(t.blocks.back().timestamp),
                                line_no);
                t.blocks.push_back({ts, static_cast<int>(t.turns.size()), 0});
                have_block = true;
                continue;
            }
            if (std::regex_match(line, m, kSilence)) {
                if (!have_block) throw Error(ErrorKind::MalformedLine, "silence before first block header", line_no);
                Turn turn;
                turn.index = static_cast<int>(t.turns.size());
                turn.is_silence = true;
                turn.silence_seconds = std::stoi(m[1]) * 3600 + std::stoi(m[2]) * 60 + std::stoi(m[3]);
                turn.block_ref = t.blocks.back().timestamp;
                t.turns.push_back(std::move(turn));
                ++t.blocks.back().turn_count;
                continue;
            }
            throw Error(ErrorKind::MalformedLine, "unrecognized bracket line", line_no);
        }

        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw Error(ErrorKind::MalformedLine, "expected `Speaker: text`", line_no);
        std::string label = trim(std::string_view(line).substr(0, colon));
        if (!valid_speaker_label(label))
            throw Error(ErrorKind::MalformedLine, "invalid speaker prefix", line_no);
        if (!have_block) throw Error(ErrorKind::MalformedLine, "turn before first block header", line_no);

        std::string text = trim(std::string_view(line).substr(colon + 1));
        StrippedText stripped = strip_tags(text);

        Turn turn;
        turn.index = static_cast<int>(t.turns.size());
        turn.speaker_label = label;
        turn.speaker = classify_speaker(label);
        turn.block_ref = t.blocks.back().timestamp;
        auto spans = sentence_spans(stripped.text);
        for (size_t si = 0; si < spans.size(); ++si) {
            auto [b, e] = spans[si];
            turn.sentences.push_back({turn.index, static_cast<int>(si), stripped.text.substr(b, e - b)});
        }
        if (turn.sentences.empty()) throw Error(ErrorKind::MalformedLine, "speaker line has no text", line_no);
        if (turn.speaker == Speaker::Other)
            t.warnings.push_back("line " + std::to_string(line_no) + ": unknown speaker '" + label +
                                 "' mapped to Other");

        if (tags) {
            for (auto& [anchor, tok] : stripped.anchors) {
                int target = 0;
                for (size_t si = 0; si < spans.size(); ++si)
                    if (spans[si].first < anchor) target = static_cast<int>(si);
                tags->push_back({turn.index, target, tok.qualifier, tok.code, tok.scale, line_no});
            }
        }
        t.turns.push_back(std::move(turn));
        ++t.blocks.back().turn_count;
    }
    if (t.turns.empty()) throw Error(ErrorKind::EmptyTranscript, "no turns in transcript '" + id + "'");
    return t;
}

} // namespace

Transcript parse_transcript(std::string_view raw, const std::string& id) { return parse_impl(raw, id, nullptr); }

AnnotatedTranscript parse_annotated_transcript(std::string_view raw, const std::string& id) {
    AnnotatedTranscript out;
    out.transcript = parse_impl(raw, id, &out.tags);
    return out;
}

std::string format_block_timestamp(int seconds) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "[%02d:%02d]", seconds / 60, seconds % 60);
    return buf;
}

std::string format_silence_duration(int seconds) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "[silence %02d:%02d:%02d]", seconds / 3600, (seconds / 60) % 60, seconds % 60);
    return buf;
}

std::string render_turn(const Turn& turn) {
    if (turn.is_silence) return format_silence_duration(turn.silence_seconds);
    std::string out = turn.speaker_label + ":";
    for (const auto& s : turn.sentences) out += " " + s.text;
    return out;
}

namespace {
std::string render_with(const Transcript& t, const SentenceTagRenderer* tags_for) {
    std::string out;
    for (const auto& [k, v] : t.source_meta) out += "# " + k + ": " + v + "\n";
    for (const auto& block : t.blocks) {
        out += format_block_timestamp(block.timestamp) + "\n";
        for (int i = block.first_turn; i < block.first_turn + block.turn_count; ++i) {
            const Turn& turn = t.turns[i];
            if (turn.is_silence || !tags_for) {
                out += render_turn(turn) + "\n";
                continue;
            }
            std::string line = turn.speaker_label + ":";
            for (const auto& s : turn.sentences) {
                line += " " + s.text;
                for (const auto& tag : (*tags_for)(s.turn_index, s.sent_index)) line += " " + tag;
            }
            out += line + "\n";
        }
    }
    return out;
}
} // namespace

std::string render_transcript(const Transcript& t) { return render_with(t, nullptr); }

std::string render_annotated(const Transcript& t, const SentenceTagRenderer& tags_for) {
    return render_with(t, &tags_for);
}

std::vector<Batch> batch_transcript(const Transcript& t, int max_turns, int context_overlap) {
    if (max_turns < 1) throw Error(ErrorKind::InvalidArgument, "max_turns must be >= 1");
    if (context_overlap < 0 || context_overlap >= max_turns)
        throw Error(ErrorKind::InvalidArgument, "context_overlap must be in [0, max_turns)");
    std::vector<Batch> out;
    const int n = static_cast<int>(t.turns.size());
    for (int first = 0, id = 0; first < n; first += max_turns, ++id) {
        Batch b;
        b.batch_id = id;
        b.first_turn = first;
        b.end_turn = std::min(n, first + max_turns);
        b.context_begin = id == 0 ? first : std::max(0, first - context_overlap);
        b.start_timestamp = t.turns[b.first_turn].block_ref;
        b.end_timestamp = t.turns[b.end_turn - 1].block_ref;
        out.push_back(b);
    }
    return out;
}

std::span<const Turn> context_window(const Transcript& t, int turn_index, int k) {
    if (turn_index < 0 || turn_index >= static_cast<int>(t.turns.size()))
        throw Error(ErrorKind::IndexOutOfRange, "turn " + std::to_string(turn_index));
    if (k < 0) throw Error(ErrorKind::InvalidArgument, "context size must be >= 0");
    int begin = std::max(0, turn_index - k);
    return std::span<const Turn>(t.turns).subspan(begin, turn_index - begin + 1);
}

std::string render_turns(std::span<const Turn> turns) {
    std::string out;
    for (const auto& turn : turns) out += render_turn(turn) + "\n";
    return out;
}

} // namespace mosaic
