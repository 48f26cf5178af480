#include "mosaic/annotation.hpp"

#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <atomic>
#include <regex>
#include <sstream>
#include <thread>

namespace mosaic {

const char* scale_mode_name(ScaleMode m) {
    switch (m) {
    case ScaleMode::Sentence: return "sentence";
    case ScaleMode::Segment: return "segment";
    case ScaleMode::Encounter: return "encounter";
    }
    return "?";
}

ScaleMode parse_scale_mode(const std::string& s) {
    std::string v = to_lower(trim(s));
    if (v == "sentence") return ScaleMode::Sentence;
    if (v == "segment") return ScaleMode::Segment;
    if (v == "encounter") return ScaleMode::Encounter;
    throw Error(ErrorKind::InvalidArgument, "scale_mode must be sentence, segment or encounter, got '" + s + "'");
}

namespace {

constexpr const char* kFormatRule =
    "Reply with one line per labeled sentence, exactly `T<turn>.S<sentence>: [CODE]`, or `[CODE: k]` for scale "
    "labels. Omit sentences that carry no label. Write nothing else.";

std::string speaker_text(const Turn& turn) {
    return turn.speaker_label.empty() ? speaker_name(turn.speaker) : turn.speaker_label;
}

std::string render_fewshot(const std::vector<ExampleEntry>& fewshot) {
    std::ostringstream out;
    for (size_t i = 0; i < fewshot.size(); ++i) {
        const auto& e = fewshot[i];
        const auto split = [](const std::string& key) {
            auto pos = key.find(": ");
            if (pos == std::string::npos) return render_tag(key, std::nullopt);
            return render_tag(key.substr(0, pos), std::stoi(key.substr(pos + 2)));
        };
        out << "Example " << i + 1 << ":\n";
        if (!e.context.empty()) out << "Context:\n" << e.context << "\n";
        out << "Sentence: " << e.sentence << "\n";
        if (e.outcome == Outcome::ContrastiveError)
            out << "Wrong label: " << split(e.agent_label) << "\n";
        out << "Correct label: " << split(e.human_label) << "\n";
    }
    return out.str();
}

} // namespace

std::string Prompt::system_text() const {
    std::string s = "## Instructions\n" + system_instructions + "\n\n## Valid labels\n" + label_section + "\n";
    s += "## Coding rules\n";
    if (retrieved_rules.empty()) s += "(no rule excerpts retrieved)\n";
    for (const auto& r : retrieved_rules) s += "[rule " + std::to_string(r.chunk_id) + "] " + r.text + "\n";
    if (!fewshot.empty()) s += "\n## Examples\n" + render_fewshot(fewshot);
    return s;
}

std::vector<ChatMessage> Prompt::messages() const { return {{"system", system_text()}, {"user", payload}}; }

size_t Prompt::token_estimate() const { return (system_text().size() + payload.size() + 3) / 4; }

std::string render_payload(const Transcript& t, const Batch& batch) {
    std::ostringstream out;
    out << "Transcript " << t.id << ", batch " << batch.batch_id << " (turns " << batch.first_turn << "-"
        << batch.end_turn - 1 << ", " << format_block_timestamp(batch.start_timestamp) << " to "
        << format_block_timestamp(batch.end_timestamp) << ")\n";
    for (int i = batch.context_begin; i < batch.end_turn; ++i) {
        const Turn& turn = t.turns.at(static_cast<size_t>(i));
        const bool context = i < batch.first_turn;
        if (turn.is_silence) {
            out << (context ? "(context) " : "") << "T" << i << " " << format_silence_duration(turn.silence_seconds)
                << "\n";
            continue;
        }
        if (context) {
            std::vector<std::string> parts;
            for (const auto& s : turn.sentences) parts.push_back(s.text);
            out << "(context) T" << i << " " << speaker_text(turn) << ": " << join(parts, " ") << "\n";
            continue;
        }
        for (const auto& s : turn.sentences)
            out << "T" << i << ".S" << s.sent_index << " " << speaker_text(turn) << ": " << s.text << "\n";
    }
    return out.str();
}

Prompt assemble_prompt(const Transcript& t, const Batch& batch, const Codebook& cb,
                       const std::vector<RuleChunk>& retrieved, const std::vector<ExampleEntry>& fewshot,
                       size_t max_prompt_tokens, ScaleMode scale_mode) {
    Prompt p;
    p.codebook = cb.name;
    bool has_scale = false;
    std::ostringstream labels;
    for (const auto& l : cb.labels) {
        p.valid_labels.push_back(l.code);
        if (l.kind == LabelKind::Scale) {
            has_scale = true;
            labels << "- [" << l.code << ": k] scale " << l.scale_min << "-" << l.scale_max;
        } else {
            labels << "- [" << l.code << "]";
        }
        if (!l.description.empty()) labels << " " << l.description;
        labels << "\n";
    }
    p.valid_labels.emplace_back(kNoneLabel);
    labels << "- [None] no label applies (may be omitted)\n";
    p.label_section = labels.str();

    std::string instr = "You annotate clinical dialogue with the " + cb.name + " codebook (version " + cb.version +
                        "). Label each numbered sentence with at most one event label from the valid list. "
                        "Lines marked (context) are for reference only; never label them. ";
    if (has_scale) {
        switch (scale_mode) {
        case ScaleMode::Sentence: instr += "Rate scale dimensions on each sentence that evidences them. "; break;
        case ScaleMode::Segment: instr += "Rate each scale dimension once for this segment, on the sentence that best evidences it. "; break;
        case ScaleMode::Encounter: instr += "Rate each scale dimension once for the whole encounter, on the sentence that best evidences it. "; break;
        }
    }
    p.system_instructions = instr + kFormatRule;
    p.retrieved_rules = retrieved;
    for (const auto& e : fewshot) {
        if (e.codebook != cb.name)
            throw Error(ErrorKind::InvalidArgument, "few-shot example " + e.id + " belongs to " + e.codebook);
        p.fewshot.push_back(e);
    }
    p.payload = render_payload(t, batch);
    if (max_prompt_tokens > 0 && p.token_estimate() > max_prompt_tokens)
        throw Error(ErrorKind::PromptTooLarge, "prompt needs ~" + std::to_string(p.token_estimate()) +
                                                   " tokens, limit " + std::to_string(max_prompt_tokens));
    return p;
}

ParsedOutput parse_model_output(const std::string& text, const LabelRegistry& registry, const Transcript& t,
                                const Batch& batch) {
    static const std::regex line_re(R"(^\s*[-*]?\s*T(\d+)\s*\.\s*S(\d+)\b\s*[:=\-]?\s*(.*)$)", std::regex::icase);
    ParsedOutput out;
    std::set<std::tuple<int, int, std::string>> taken;  // (turn, sent, slot)
    int line_no = 0;
    for (const auto& raw : split_lines(text)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) {
            out.warnings.push_back("output line " + std::to_string(line_no) + " ignored: not T<turn>.S<sent>: [CODE]");
            continue;
        }
        auto tags = find_tags(m[3].str());
        if (tags.empty()) {
            out.warnings.push_back("output line " + std::to_string(line_no) + " has no bracket tag");
            continue;
        }
        ++out.tuples;
        if (tags.size() > 1)
            out.warnings.push_back("output line " + std::to_string(line_no) + ": only the first tag is kept");
        const TagToken& tag = tags.front();
        const int turn = std::stoi(m[1].str()), sent = std::stoi(m[2].str());
        const std::string where = "T" + std::to_string(turn) + ".S" + std::to_string(sent);
        if (turn >= batch.context_begin && turn < batch.first_turn) {
            out.warnings.push_back(where + " is a context turn; label dropped");
            continue;
        }
        if (!batch.contains(turn) || !t.has_sentence(turn, sent)) {
            out.warnings.push_back(where + ": index out of range");
            continue;
        }
        if (tag.code == kNoneLabel) continue;
        if (!registry.accepts(tag.code, tag.scale)) {
            out.warnings.push_back(where + ": invalid label " + render_tag(tag.code, tag.scale) + " for " +
                                   registry.codebook());
            continue;
        }
        const LabelDef* def = registry.find(tag.code);
        const std::string slot = def->kind == LabelKind::Scale ? def->code : std::string();
        if (!taken.insert({turn, sent, slot}).second) {
            out.warnings.push_back(where + ": duplicate " + (slot.empty() ? "label" : slot + " rating") +
                                   " dropped");
            continue;
        }
        Annotation a;
        a.transcript_id = t.id;
        a.turn_index = turn;
        a.sent_index = sent;
        a.codebook = registry.codebook();
        a.label = def->code;
        a.scale_value = tag.scale;
        a.raw_span = line;
        out.annotations.push_back(std::move(a));
    }
    if (out.tuples == 0 && !trim(text).empty())
        throw Error(ErrorKind::UnparseableOutput,
                    "no T<turn>.S<sent>: [CODE] lines in " + std::to_string(line_no) + " lines of model output");
    return out;
}

std::vector<Annotation> none_fill(std::vector<Annotation> labeled, const Transcript& t, const Batch& batch,
                                  const std::string& codebook) {
    std::map<std::pair<int, int>, std::vector<Annotation>> by_slot;
    for (auto& a : labeled) by_slot[{a.turn_index, a.sent_index}].push_back(std::move(a));
    std::vector<Annotation> out;
    for (int i = batch.first_turn; i < batch.end_turn; ++i) {
        for (const auto& s : t.turns.at(static_cast<size_t>(i)).sentences) {
            auto it = by_slot.find({s.turn_index, s.sent_index});
            if (it != by_slot.end()) {
                for (auto& a : it->second) out.push_back(std::move(a));
                continue;
            }
            Annotation a;
            a.transcript_id = t.id;
            a.turn_index = s.turn_index;
            a.sent_index = s.sent_index;
            a.codebook = codebook;
            out.push_back(std::move(a));
        }
    }
    return out;
}

BatchOutcome annotate_batch(const Prompt& prompt, ChatBackend& backend, const Transcript& t, const Batch& batch,
                            const LabelRegistry& registry, const ChatSettings& chat, const ChatAudit& audit) {
    ChatRequest req;
    req.messages = prompt.messages();
    req.temperature = chat.temperature;
    req.max_tokens = chat.max_tokens;
    req.model = chat.model;
    req.meta = {{"codebook", prompt.codebook},
                {"batch_id", std::to_string(batch.batch_id)},
                {"transcript_id", t.id},
                {"purpose", "annotate"}};
    ChatResponse res = backend.complete(req);
    if (audit) audit(req, res);

    BatchOutcome outcome;
    ParsedOutput parsed;
    try {
        parsed = parse_model_output(res.text, registry, t, batch);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UnparseableOutput) throw;
        outcome.warnings.push_back(std::string("re-asking after unparseable output: ") + e.detail());
        ChatRequest again = req;
        again.messages.push_back({"assistant", res.text});
        again.messages.push_back({"user", std::string("Your reply could not be parsed. ") + kFormatRule});
        again.meta["purpose"] = "reask";
        ChatResponse res2 = backend.complete(again);
        if (audit) audit(again, res2);
        parsed = parse_model_output(res2.text, registry, t, batch);
        outcome.parse_recovered = true;
        for (auto& a : parsed.annotations) a.parse_recovered = true;
    }
    outcome.warnings.insert(outcome.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
    outcome.annotations = none_fill(std::move(parsed.annotations), t, batch, prompt.codebook);
    if (outcome.parse_recovered)
        for (auto& a : outcome.annotations) a.parse_recovered = true;
    return outcome;
}

namespace {

struct TaskResult {
    std::vector<Annotation> annotations;
    std::vector<std::string> warnings;
    std::string version;
    std::optional<std::string> error;
    bool parse_recovered = false;
};

// Splits a batch in halves until each prompt fits.
void run_piece(const Transcript& t, const Batch& piece, const CodebookSnapshot& snap,
               const std::vector<RuleChunk>& rules, const std::vector<ExampleEntry>& shots, const AnnotatorDeps& deps,
               const AnnotateOptions& opt, TaskResult& out) {
    Prompt prompt;
    try {
        prompt = assemble_prompt(t, piece, snap.codebook, rules, shots, opt.max_prompt_tokens, opt.scale_mode);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::PromptTooLarge || piece.size() <= 1) throw;
        const int mid = piece.first_turn + piece.size() / 2;
        Batch left = piece, right = piece;
        left.end_turn = mid;
        right.first_turn = mid;
        right.context_begin = std::max(0, mid - opt.context_overlap);
        out.warnings.push_back("batch " + std::to_string(piece.batch_id) + " split at turn " + std::to_string(mid) +
                               ": " + e.detail());
        run_piece(t, left, snap, rules, shots, deps, opt, out);
        run_piece(t, right, snap, rules, shots, deps, opt, out);
        return;
    }
    auto res = annotate_batch(prompt, *deps.chat, t, piece, snap.registry, opt.chat, deps.audit);
    out.annotations.insert(out.annotations.end(), res.annotations.begin(), res.annotations.end());
    out.warnings.insert(out.warnings.end(), res.warnings.begin(), res.warnings.end());
    out.parse_recovered = out.parse_recovered || res.parse_recovered;
}

} // namespace

std::map<std::string, CodebookResult> annotate_transcript(const Transcript& t,
                                                          const std::vector<std::string>& codebooks,
                                                          CodebookStore& store, const AnnotatorDeps& deps,
                                                          const AnnotateOptions& opt) {
    if (!deps.chat) throw Error(ErrorKind::BackendUnavailable, "no chat backend");
    if (opt.parallelism < 1) throw Error(ErrorKind::InvalidArgument, "parallelism must be >= 1");
    PassthroughReranker passthrough;
    Reranker& reranker = deps.reranker ? *deps.reranker : passthrough;
    const auto batches = batch_transcript(t, opt.max_turns, opt.context_overlap);

    struct Task {
        size_t codebook;
        size_t batch;
    };
    std::vector<Task> tasks;
    for (size_t c = 0; c < codebooks.size(); ++c)
        for (size_t b = 0; b < batches.size(); ++b) tasks.push_back({c, b});
    std::vector<TaskResult> results(tasks.size());

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next++; i < tasks.size(); i = next++) {
            const Task& task = tasks[i];
            const std::string& cb = codebooks[task.codebook];
            const Batch& batch = batches[task.batch];
            TaskResult& out = results[i];
            try {
                auto snap = store.snapshot(cb);
                out.version = snap->version();
                const std::string query = render_payload(t, batch);
                std::vector<RuleChunk> rules;
                for (auto& sc : retrieve_rules(snap->index, snap->registry, snap->version(), query, store.embedder(),
                                               reranker, opt.retrieval, store.cache(), &out.warnings))
                    rules.push_back(std::move(sc.chunk));
                std::vector<ExampleEntry> shots;
                if (deps.library && opt.use_fewshot)
                    shots = deps.library->select_fewshot(query, cb, deps.library->policy(cb), {t.id});
                run_piece(t, batch, *snap, rules, shots, deps, opt, out);
            } catch (const Error& e) {
                out.error = e.what();
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    const size_t n_workers = std::min(tasks.size(), static_cast<size_t>(opt.parallelism));
    std::vector<std::thread> pool;
    for (size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::map<std::string, CodebookResult> merged;
    for (size_t c = 0; c < codebooks.size(); ++c) {
        CodebookResult r;
        r.codebook = codebooks[c];
        std::set<std::string> rated;  // scale dimensions already rated
        for (size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].codebook != c) continue;
            TaskResult& tr = results[i];
            ++r.batches;
            if (!tr.version.empty()) r.versions.insert(tr.version);
            for (auto& w : tr.warnings) r.warnings.push_back("batch " + std::to_string(tasks[i].batch) + ": " + w);
            if (tr.error && !r.error) r.error = *tr.error;
            r.parse_recovered = r.parse_recovered || tr.parse_recovered;
            if (opt.scale_mode == ScaleMode::Segment) rated.clear();
            for (auto& a : tr.annotations) {
                if (a.scale_value && opt.scale_mode != ScaleMode::Sentence && !rated.insert(a.label).second) {
                    r.warnings.push_back(a.label + " already rated; dropped " + a.key() + " at T" +
                                         std::to_string(a.turn_index) + ".S" + std::to_string(a.sent_index));
                    continue;
                }
                r.annotations.push_back(std::move(a));
            }
        }
        if (r.error) {
            r.status = "failed";
            r.annotations.clear();
        } else {
            // a sentence whose only label was a dropped repeat rating still needs its None
            std::vector<Annotation> filled;
            size_t k = 0;
            for (const auto& turn : t.turns)
                for (const auto& s : turn.sentences) {
                    bool any = false;
                    while (k < r.annotations.size() && r.annotations[k].turn_index == s.turn_index &&
                           r.annotations[k].sent_index == s.sent_index) {
                        filled.push_back(std::move(r.annotations[k++]));
                        any = true;
                    }
                    if (!any) {
                        Annotation a;
                        a.transcript_id = t.id;
                        a.turn_index = s.turn_index;
                        a.sent_index = s.sent_index;
                        a.codebook = r.codebook;
                        filled.push_back(std::move(a));
                    }
                }
            r.annotations = std::move(filled);
        }
        merged[r.codebook] = std::move(r);
    }
    return merged;
}

} // namespace mosaic
