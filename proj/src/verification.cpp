#include "mosaic/verification.hpp"

#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <filesystem>
#include <sstream>

namespace mosaic {

namespace fs = std::filesystem;

nlohmann::json VerificationResult::to_json(size_t preview_rows) const {
    nlohmann::json cbs = nlohmann::json::array();
    for (const auto& r : by_codebook) cbs.push_back(mosaic::to_json(r));
    nlohmann::json previews = nlohmann::json::object();
    for (const auto* t : tables()) previews[t->title] = t->preview(preview_rows);
    return {{"transcript_id", alignment.transcript_id},
            {"overall", mosaic::to_json(overall)},
            {"codebooks", cbs},
            {"mismatch_count", mismatches.size()},
            {"previews", previews}};
}

VerificationResult verify_predictions(const GoldAnnotationSet& gold, const std::vector<Annotation>& pred,
                                      const std::vector<std::string>& codebooks,
                                      const std::map<std::string, LabelRegistry>& registries,
                                      std::optional<size_t> pred_sentence_count, int k_context) {
    VerificationResult v;
    v.alignment = align(gold, pred, codebooks, pred_sentence_count);
    v.overall = evaluate(v.alignment, registries, codebooks, gold.transcript_id);
    for (const auto& cb : codebooks) {
        MetricsReport r = evaluate(v.alignment, registries, {cb}, cb);
        r.level = ReportLevel::Codebook;
        v.by_codebook.push_back(std::move(r));
    }
    v.mismatches = mismatch_report(v.alignment, gold.transcript, k_context);
    v.comparison = comparison_table(v.alignment, gold.transcript);
    v.mismatch_csv = mismatch_table(v.mismatches);
    v.overall_csv = overall_table(v.overall, v.by_codebook);
    v.per_label_csv = per_label_table(v.overall);
    return v;
}

std::vector<std::string> write_reports(const VerificationResult& v, const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto* t : v.tables()) {
        std::string p = (fs::path(dir) / t->file_name).string();
        write_file(p, t->render());
        paths.push_back(p);
    }
    std::string p = (fs::path(dir) / "metrics.json").string();
    write_file(p, v.to_json(0).dump(2));
    paths.push_back(p);
    return paths;
}

LearningOutcome learn_from_verification(const VerificationResult& v, const Transcript& t, ExampleLibrary& library,
                                        const FeedbackParams& params, int k_context) {
    LearningOutcome out;
    const auto& manifest = library.training_manifest();
    if (manifest && !manifest->count(t.id)) {
        out.warnings.push_back("transcript '" + t.id + "' is not in the training manifest; library unchanged");
        return out;
    }
    const std::string none(kNoneLabel);
    for (const auto& row : v.alignment.rows) {
        if (row.gold.count(none) && row.pred.count(none)) continue;
        ExampleInput in;
        in.codebook = row.codebook;
        in.sentence = t.sentence(row.turn_index, row.sent_index).text;
        in.context = render_turns(context_window(t, row.turn_index, k_context));
        in.origin = t.id;
        in.turn_index = row.turn_index;
        in.sent_index = row.sent_index;
        for (const auto& g : row.gold) {
            in.human_label = g;
            in.agent_label = row.pred.count(g) ? g : *row.pred.begin();
            library.record_example(in);
            ++out.recorded;
        }
    }
    for (const auto& r : v.by_codebook) out.deltas.push_back(library.apply_feedback(r.name, r, params));
    return out;
}

const char* flag_reason_name(FlagReason r) {
    switch (r) {
    case FlagReason::VerifierDisagreement: return "verifier_disagreement";
    case FlagReason::InvalidParseRecovered: return "invalid_parse_recovered";
    case FlagReason::RareLabel: return "rare_label";
    }
    return "?";
}

nlohmann::json to_json(const Flag& f) {
    return {{"transcript_id", f.transcript_id}, {"turn_index", f.turn_index}, {"sent_index", f.sent_index},
            {"codebook", f.codebook},           {"label", f.label},           {"reason", flag_reason_name(f.reason)},
            {"detail", f.detail}};
}

namespace {

std::string slot_of(const Annotation& a) { return a.scale_value ? a.label : std::string(); }

} // namespace

std::vector<Flag> flag_inference(const Transcript& t, const std::map<std::string, std::vector<Annotation>>& pred,
                                 const std::map<std::string, LabelRegistry>& registries, ChatBackend* verifier,
                                 const ExampleLibrary* library, const FlagOptions& options,
                                 std::vector<std::string>* warnings) {
    std::vector<Flag> flags;
    auto flag = [&](const Annotation& a, FlagReason reason, std::string detail) {
        flags.push_back({t.id, a.turn_index, a.sent_index, a.codebook, a.key(), reason, std::move(detail)});
    };
    Batch whole;
    whole.first_turn = 0;
    whole.end_turn = static_cast<int>(t.turns.size());

    for (const auto& [cb, annotations] : pred) {
        std::vector<const Annotation*> labeled;
        for (const auto& a : annotations)
            if (a.label != kNoneLabel) labeled.push_back(&a);

        if (verifier && !labeled.empty()) {
            std::ostringstream payload;
            for (const auto* a : labeled) {
                const Turn& turn = t.turns.at(static_cast<size_t>(a->turn_index));
                payload << "T" << a->turn_index << ".S" << a->sent_index << " " << speaker_name(turn.speaker) << ": "
                        << t.sentence(a->turn_index, a->sent_index).text << " => "
                        << render_tag(a->label, a->scale_value) << "\n";
            }
            ChatRequest req;
            req.temperature = options.chat.temperature;
            req.max_tokens = options.chat.max_tokens;
            req.model = options.chat.model;
            req.meta = {{"codebook", cb}, {"batch_id", "0"}, {"transcript_id", t.id}, {"purpose", "verify"}};
            req.messages = {{"system", "You independently check " + cb +
                                           " annotations. For each line, reply `T<turn>.S<sentence>: [CODE]` with "
                                           "the label you would assign, or [None]."},
                            {"user", payload.str()}};
            try {
                auto reg = registries.find(cb);
                if (reg == registries.end()) throw Error(ErrorKind::NotFound, "no registry for " + cb);
                auto parsed = parse_model_output(verifier->complete(req).text, reg->second, t, whole);
                std::map<std::tuple<int, int, std::string>, std::string> verdict;
                for (const auto& v : parsed.annotations)
                    verdict[{v.turn_index, v.sent_index, slot_of(v)}] = v.key();
                for (const auto* a : labeled) {
                    auto it = verdict.find({a->turn_index, a->sent_index, slot_of(*a)});
                    std::string theirs = it == verdict.end() ? std::string(kNoneLabel) : it->second;
                    if (theirs != a->key()) flag(*a, FlagReason::VerifierDisagreement, "verifier chose " + theirs);
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::BackendUnavailable && e.kind() != ErrorKind::UnparseableOutput) throw;
                if (warnings)
                    warnings->push_back(cb + ": verifier pass skipped, rule-based flags only (" + e.what() + ")");
            }
        }

        std::map<std::string, int> support;
        if (library) support = library->support(cb);
        for (const auto* a : labeled) {
            int n = support.count(a->key()) ? support[a->key()] : 0;
            if (n < options.rare_threshold)
                flag(*a, FlagReason::RareLabel,
                     std::to_string(n) + " training examples, threshold " + std::to_string(options.rare_threshold));
        }
        for (const auto& a : annotations)
            if (a.parse_recovered && a.label != kNoneLabel)
                flag(a, FlagReason::InvalidParseRecovered, "label produced after a format re-ask");
    }
    return flags;
}

} // namespace mosaic
