#include "mosaic/workflow.hpp"

#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>

namespace mosaic {

void validate_inputs(WorkflowState& state) {
    if (!state.transcript) {
        state.error = "missing data: transcript";
        return;
    }
    for (const auto& w : state.transcript->warnings) state.warnings.push_back(w);
    state.parsed_uploads.clear();
    for (const auto& up : state.uploaded_codebooks) {
        try {
            state.parsed_uploads.push_back(parse_codebook(up.document, up.name));
        } catch (const Error& e) {
            state.error = "malformed codebook '" + up.name + "': " + e.detail();
            return;
        }
    }
    try {
        state.config.validate();
    } catch (const Error& e) {
        state.error = std::string("invalid run config: ") + e.detail();
    }
}

namespace {

void plan_node(WorkflowState& s, const WorkflowDeps& deps) {
    validate_inputs(s);
    if (s.error) return;
    std::vector<std::string> registered = deps.store->names();
    for (const auto& cb : s.parsed_uploads)
        if (std::find(registered.begin(), registered.end(), cb.name) == registered.end()) registered.push_back(cb.name);
    registered = canonical_order(registered);

    if (s.requested_override) {
        std::vector<std::string> chosen;
        for (const auto& name : *s.requested_override) {
            if (std::find(registered.begin(), registered.end(), name) == registered.end()) {
                s.error = "unknown codebook requested: " + name;
                return;
            }
            chosen.push_back(name);
        }
        s.requested_annotations = canonical_order(chosen);
        if (s.requested_annotations.empty()) s.warnings.emplace_back(kNoAgentsWarning);
    } else {
        KeywordRouter keyword;
        Router& router = deps.router ? *deps.router : keyword;
        RoutingDecision d = router.route(s.user_prompt, registered);
        s.requested_annotations = d.agents;
        if (d.warning) s.warnings.push_back(*d.warning);
    }
    s.codebook_update_flag = std::any_of(s.parsed_uploads.begin(), s.parsed_uploads.end(),
                                         [&](const Codebook& cb) { return detect_codebook_update(cb, *deps.store); });
    s.run_verification_flag = !s.requested_annotations.empty() && (s.gold_text.has_value() || s.verify_requested);
}

void update_node(WorkflowState& s, const WorkflowDeps& deps) {
    for (const auto& cb : s.parsed_uploads) {
        if (!detect_codebook_update(cb, *deps.store)) {
            UpdateReceipt r;
            r.codebook = cb.name;
            r.old_version = r.new_version = cb.version;
            s.updates.push_back(r);
            continue;
        }
        s.updates.push_back(deps.store->apply_update(cb));
        if (deps.library) deps.library->set_registry(label_registry(cb));
    }
}

void annotate_node(WorkflowState& s, const WorkflowDeps& deps) {
    s.results.clear();
    if (s.requested_annotations.empty()) return;
    for (const auto& cb : s.requested_annotations)
        if (!deps.store->contains(cb)) throw Error(ErrorKind::NotFound, "codebook '" + cb + "' is not registered");
    AnnotatorDeps ad;
    ad.chat = deps.chat;
    ad.reranker = deps.reranker;
    ad.library = deps.library;
    ad.audit = deps.audit;
    s.results = annotate_transcript(*s.transcript, s.requested_annotations, *deps.store, ad,
                                    s.config.annotate_options());
    std::vector<std::string> failures;
    bool all_transport = true;
    for (const auto& [cb, r] : s.results) {
        for (const auto& w : r.warnings) s.warnings.push_back(cb + ": " + w);
        if (r.status == "failed") {
            failures.push_back(cb + ": " + r.error.value_or("failed"));
            all_transport = all_transport && r.error->rfind("BackendUnavailable", 0) == 0;
        }
    }
    if (!failures.empty() && failures.size() == s.results.size()) {
        std::string msg = "annotation failed for every codebook; " + join(failures, "; ");
        if (all_transport) throw Error(ErrorKind::BackendUnavailable, msg);
        throw Error(ErrorKind::InvalidArgument, msg);
    }
    for (const auto& f : failures) s.warnings.push_back("codebook failed, others kept: " + f);
}

std::vector<std::string> succeeded(const WorkflowState& s) {
    std::vector<std::string> out;
    for (const auto& cb : s.requested_annotations) {
        auto it = s.results.find(cb);
        if (it != s.results.end() && it->second.status == "done") out.push_back(cb);
    }
    return out;
}

void verify_node(WorkflowState& s, const WorkflowDeps& deps) {
    const auto codebooks = succeeded(s);
    const auto all = deps.store->registries();
    std::map<std::string, LabelRegistry> active, inactive;
    for (const auto& [name, reg] : all)
        (std::find(codebooks.begin(), codebooks.end(), name) != codebooks.end() ? active : inactive)[name] = reg;
    std::vector<Annotation> pred;
    for (const auto& cb : codebooks)
        for (const auto& a : s.results.at(cb).annotations) pred.push_back(a);

    if (s.gold_text) {
        AnnotatedTranscript annotated = parse_annotated_transcript(*s.gold_text, s.transcript->id);
        const Transcript& g = annotated.transcript;
        bool same = g.turns.size() == s.transcript->turns.size();
        for (size_t i = 0; same && i < g.turns.size(); ++i)
            same = g.turns[i].sentences.size() == s.transcript->turns[i].sentences.size();
        if (!same)
            throw Error(ErrorKind::TranscriptMismatch,
                        "gold transcript has " + std::to_string(g.sentence_count()) + " sentences in " +
                            std::to_string(g.turns.size()) + " turns; annotated transcript has " +
                            std::to_string(s.transcript->sentence_count()) + " in " +
                            std::to_string(s.transcript->turns.size()));
        GoldAnnotationSet gold = gold_from_annotated(annotated, active, inactive);
        auto v = std::make_shared<VerificationResult>(
            verify_predictions(gold, pred, codebooks, active, s.transcript->sentence_count(), s.config.context_k));
        if (s.training && deps.library) {
            s.learning = learn_from_verification(*v, *s.transcript, *deps.library, {}, s.config.context_k);
            for (const auto& w : s.learning->warnings) s.warnings.push_back(w);
        }
        s.verification = std::move(v);
        return;
    }
    std::map<std::string, std::vector<Annotation>> by_cb;
    for (const auto& cb : codebooks) by_cb[cb] = s.results.at(cb).annotations;
    FlagOptions fo;
    fo.rare_threshold = s.config.rare_threshold;
    fo.chat = {s.config.temperature, s.config.max_tokens, s.config.model};
    s.flags = flag_inference(*s.transcript, by_cb, active, deps.chat, deps.library, fo, &s.warnings);
}

void feedback_node(WorkflowState& s) {
    s.feedback = "run halted: " + s.error.value_or("unknown error");
}

} // namespace

WorkflowState run_workflow(WorkflowState state, const WorkflowDeps& deps) {
    if (!deps.store || !deps.chat) {
        state.error = "workflow needs a codebook store and a chat backend";
        state.trace = {"Feedback", "End"};
        feedback_node(state);
        return state;
    }
    StateGraph<WorkflowState> g;
    g.add_node("Plan", [&](WorkflowState& s) { plan_node(s, deps); });
    g.add_node("Update", [&](WorkflowState& s) { update_node(s, deps); });
    g.add_node("Annotate", [&](WorkflowState& s) { annotate_node(s, deps); });
    g.add_node("Verify", [&](WorkflowState& s) { verify_node(s, deps); });
    g.add_node("Feedback", [](WorkflowState& s) { feedback_node(s); });
    g.set_entry("Plan");
    g.add_conditional_edge("Plan", [](const WorkflowState& s) { return s.codebook_update_flag ? "Update" : "Annotate"; });
    g.add_edge("Update", "Annotate");
    g.add_conditional_edge("Annotate", [](const WorkflowState& s) {
        return s.run_verification_flag ? std::string("Verify") : StateGraph<WorkflowState>::kEnd;
    });
    g.add_edge("Verify", StateGraph<WorkflowState>::kEnd);
    g.add_edge("Feedback", StateGraph<WorkflowState>::kEnd);
    g.set_error_node("Feedback");
    g.on_error([](WorkflowState& s, const std::string& node, const std::string& msg) {
        if (!s.error) s.error = node + ": " + msg;
    });
    g.has_error([](const WorkflowState& s) { return s.error.has_value(); });
    g.set_retries(1);
    if (deps.before_node) g.before_node(deps.before_node);

    GraphRun run = g.run(state);
    state.trace = run.trace;
    state.timings_ms = run.timings_ms;
    for (const auto& cb : deps.store->names())
        if (auto v = deps.store->version(cb)) state.codebook_versions[cb] = *v;
    return state;
}

nlohmann::json run_manifest(const WorkflowState& s, const WorkflowDeps& deps) {
    nlohmann::json versions = nlohmann::json::object();
    for (const auto& cb : s.requested_annotations)
        if (auto it = s.codebook_versions.find(cb); it != s.codebook_versions.end()) versions[cb] = it->second;
    nlohmann::json used = nlohmann::json::object();
    nlohmann::json statuses = nlohmann::json::object();
    for (const auto& [cb, r] : s.results) {
        used[cb] = r.versions;
        statuses[cb] = r.status;
    }
    nlohmann::json updates = nlohmann::json::array();
    for (const auto& u : s.updates) updates.push_back(u.to_json());
    nlohmann::json m = {
        {"transcript_id", s.transcript ? s.transcript->id : ""},
        {"transcript_hash", s.transcript ? hex64(fnv1a64(render_transcript(*s.transcript))) : ""},
        {"prompt", s.user_prompt},
        {"requested_annotations", s.requested_annotations},
        {"flags", {{"codebook_update", s.codebook_update_flag}, {"run_verification", s.run_verification_flag},
                   {"training", s.training}}},
        {"config", s.config.to_json()},
        {"codebook_versions", versions},
        {"versions_used", used},
        {"codebook_status", statuses},
        {"updates", updates},
        {"node_trace", s.trace},
        {"chat_backend", deps.chat ? deps.chat->describe() : ""},
        {"embedder", deps.store ? deps.store->embedder().fingerprint() : ""},
        {"warnings", s.warnings},
    };
    m["error"] = s.error ? nlohmann::json(*s.error) : nlohmann::json(nullptr);
    if (deps.library) m["library_version"] = deps.library->version();
    return m;
}

nlohmann::json annotations_json(const WorkflowState& s, const WorkflowDeps& deps,
                                const std::optional<std::string>& only) {
    nlohmann::json cbs = nlohmann::json::array();
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& cb : s.requested_annotations) {
        if (only && *only != cb) continue;
        auto it = s.results.find(cb);
        if (it == s.results.end() || it->second.status != "done") continue;
        auto v = s.codebook_versions.find(cb);
        cbs.push_back({{"name", cb}, {"version", v == s.codebook_versions.end() ? "" : v->second}});
        for (const auto& a : it->second.annotations) anns.push_back(to_json(a));
    }
    return {{"transcript_id", s.transcript ? s.transcript->id : ""},
            {"sentence_count", s.transcript ? s.transcript->sentence_count() : 0},
            {"codebooks", cbs},
            {"annotations", anns},
            {"manifest", run_manifest(s, deps)}};
}

std::string annotated_text(const WorkflowState& s) {
    if (!s.transcript) return {};
    std::map<std::pair<int, int>, std::vector<std::string>> tags;
    for (const auto& cb : s.requested_annotations) {
        auto it = s.results.find(cb);
        if (it == s.results.end() || it->second.status != "done") continue;
        for (const auto& a : it->second.annotations)
            if (a.label != kNoneLabel)
                tags[{a.turn_index, a.sent_index}].push_back(render_tag(a.label, a.scale_value, cb));
    }
    return render_annotated(*s.transcript, [&](int turn, int sent) {
        auto it = tags.find({turn, sent});
        return it == tags.end() ? std::vector<std::string>{} : it->second;
    });
}

} // namespace mosaic
