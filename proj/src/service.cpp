#include "mosaic/service.hpp"

#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace mosaic {

namespace fs = std::filesystem;

std::unique_ptr<ChatBackend> chat_backend_from_config(const ServiceConfig& config) {
    if (!config.chat_fixture.empty())
        return ScriptedChatBackend::from_file(config.chat_fixture);
    if (config.chat.configured()) return std::make_unique<HttpChatBackend>(config.chat);
    return std::make_unique<UnavailableChatBackend>("chat backend not configured: set chat.url or chat_fixture");
}

std::unique_ptr<Runtime> Runtime::create(ServiceConfig config, std::unique_ptr<ChatBackend> chat,
                                         std::unique_ptr<Embedder> embedder, std::unique_ptr<Reranker> reranker) {
    config.run.validate();
    auto rt = std::make_unique<Runtime>();
    rt->config = std::move(config);
    const ServiceConfig& c = rt->config;
    if (embedder) rt->embedder = std::move(embedder);
    else if (c.embedding.configured()) rt->embedder = std::make_unique<HttpEmbedder>(c.embedding, c.embedding_dimension);
    else rt->embedder = std::make_unique<HashEmbedder>(c.embedding_dimension);
    rt->chat = chat ? std::move(chat) : chat_backend_from_config(c);
    if (reranker) rt->reranker = std::move(reranker);
    else if (c.rerank.configured()) rt->reranker = std::make_unique<HttpReranker>(c.rerank);
    else rt->reranker = std::make_unique<PassthroughReranker>();
    rt->cache = std::make_unique<RetrievalCache>();
    const std::string data = c.data_dir;
    rt->store = std::make_unique<CodebookStore>(*rt->embedder, ChunkingParams{c.run.window, c.run.stride},
                                                rt->cache.get(),
                                                data.empty() ? "" : (fs::path(data) / "codebooks").string());
    rt->store->install_builtins();
    rt->library =
        std::make_unique<ExampleLibrary>(*rt->embedder, data.empty() ? "" : (fs::path(data) / "library").string());
    for (const auto& [_, reg] : rt->store->registries()) rt->library->set_registry(reg);
    if (c.training_manifest) rt->library->set_training_manifest(*c.training_manifest);
    return rt;
}

bool Runtime::chat_configured() const { return chat && chat->describe() != "unavailable"; }

WorkflowDeps Runtime::deps() const {
    WorkflowDeps d;
    d.store = store.get();
    d.chat = chat.get();
    d.reranker = reranker.get();
    d.library = library.get();
    return d;
}

int http_status_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::TranscriptMismatch:
    case ErrorKind::StaleIndex: return 409;
    case ErrorKind::ProvenanceViolation: return 403;
    case ErrorKind::BackendUnavailable: return 503;
    case ErrorKind::IoError: return 500;
    default: return 400;
    }
}

ServiceResponse error_response(const Error& e) {
    ServiceResponse r;
    r.status = http_status_for(e.kind());
    r.body = {{"error", e.kind_name()}, {"detail", e.detail()}, {"message", e.what()}};
    r.body["line"] = e.line() ? nlohmann::json(*e.line()) : nlohmann::json(nullptr);
    return r;
}

CorrectionRequest correction_from_json(const nlohmann::json& j) {
    try {
        CorrectionRequest c;
        c.job_id = j.at("job_id").get<std::string>();
        c.turn_index = j.at("turn_index").get<int>();
        c.sent_index = j.at("sent_index").get<int>();
        c.codebook = j.at("codebook").get<std::string>();
        c.old_label = j.at("old_label").get<std::string>();
        c.new_label = j.at("new_label").get<std::string>();
        c.editor = j.value("editor", "");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("bad correction event: ") + e.what());
    }
}

namespace {
std::string scratch_dir() {
    std::string tmpl = (fs::temp_directory_path() / "mosaic-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error(ErrorKind::IoError, "cannot create scratch directory");
    return tmpl;
}
} // namespace

Service::Service(std::unique_ptr<Runtime> runtime)
    : rt_(std::move(runtime)),
      jobs_(rt_->config.data_dir.empty() ? scratch_dir() : rt_->config.data_dir) {}

std::string Service::corrections_log_path() const {
    return (fs::path(jobs_.root()) / "corrections.jsonl").string();
}

namespace {

std::string stem_of(const std::string& name) {
    std::string s = fs::path(name).stem().string();
    return s.empty() ? "transcript" : s;
}

nlohmann::json results_summary(const WorkflowState& s) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [cb, r] : s.results) {
        size_t labeled = 0;
        for (const auto& a : r.annotations)
            if (a.label != kNoneLabel) ++labeled;
        out[cb] = {{"status", r.status}, {"annotations", r.annotations.size()}, {"labeled", labeled}};
        if (r.error) out[cb]["error"] = *r.error;
    }
    return out;
}

// Rebuilds enough workflow state from a stored annotations document to
// re-render the annotated transcript.
WorkflowState state_from_artifacts(const Transcript& t, const nlohmann::json& doc) {
    WorkflowState s;
    s.transcript = t;
    for (const auto& cb : doc.at("codebooks")) {
        std::string name = cb.at("name").get<std::string>();
        s.requested_annotations.push_back(name);
        s.results[name].codebook = name;
    }
    for (const auto& a : doc.at("annotations")) {
        Annotation ann = annotation_from_json(a);
        s.results[ann.codebook].annotations.push_back(ann);
    }
    return s;
}

void write_annotation_artifacts(JobStore& jobs, JobRecord& job, const WorkflowState& s, const WorkflowDeps& deps) {
    jobs.write_artifact(job, "annotated.txt", annotated_text(s));
    jobs.write_artifact(job, "annotations.json", annotations_json(s, deps).dump(2));
    for (const auto& cb : s.requested_annotations) {
        auto it = s.results.find(cb);
        if (it == s.results.end() || it->second.status != "done") continue;
        jobs.write_artifact(job, "annotations_" + cb + ".json", annotations_json(s, deps, cb).dump(2));
    }
}

} // namespace

ServiceResponse Service::annotate(const AnnotateRequest& req) {
    if (!rt_->chat_configured())
        return error_response(Error(ErrorKind::BackendUnavailable, "chat backend not configured"));
    WorkflowState state;
    try {
        state.transcript = parse_transcript(req.transcript, stem_of(req.transcript_name));
        for (const auto& up : req.codebooks) parse_codebook(up.document, up.name);
        state.config = rt_->config.run;
        state.config.merge(req.config);
        state.config.validate();
    } catch (const Error& e) {
        return error_response(e);
    }
    state.user_prompt = req.prompt;
    state.uploaded_codebooks = req.codebooks;
    state.requested_override = req.agents;
    state.gold_text = req.gold;
    state.verify_requested = req.verify;
    state.training = req.training;

    JobRecord job = jobs_.create(JobKind::Annotate);
    job.state = JobState::Running;
    jobs_.save(job);
    jobs_.write_artifact(job, "transcript.txt", req.transcript);

    const WorkflowDeps deps = rt_->deps();
    const auto t0 = std::chrono::steady_clock::now();
    {
        std::unique_lock<std::mutex> lock(update_mu_, std::defer_lock);
        if (!req.codebooks.empty()) lock.lock();
        state = run_workflow(std::move(state), deps);
    }
    const double total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& u : state.updates)
        if (u.changed) rt_->library->set_registry(rt_->store->snapshot(u.codebook)->registry);

    write_annotation_artifacts(jobs_, job, state, deps);
    jobs_.write_artifact(job, "manifest.json", run_manifest(state, deps).dump(2));
    nlohmann::json verification = nullptr;
    if (state.verification) {
        for (const auto* t : state.verification->tables()) jobs_.write_artifact(job, t->file_name, t->render());
        jobs_.write_artifact(job, "metrics.json", state.verification->to_json(0).dump(2));
        verification = state.verification->to_json(kPreviewRows);
    }
    if (!state.flags.empty() || (state.run_verification_flag && !state.gold_text)) {
        nlohmann::json flags = nlohmann::json::array();
        for (const auto& f : state.flags) flags.push_back(to_json(f));
        jobs_.write_artifact(job, "flags.json", flags.dump(2));
    }

    job.state = state.error ? JobState::Failed : JobState::Done;
    job.error = state.error;
    job.warnings = state.warnings;
    job.summary = {{"transcript_id", state.transcript->id},
                   {"requested_annotations", state.requested_annotations},
                   {"results", results_summary(state)},
                   {"node_trace", state.trace}};
    if (state.feedback) job.summary["feedback"] = *state.feedback;
    nlohmann::json timings = nlohmann::json::object();
    for (const auto& [node, ms] : state.timings_ms) timings[node] = timings.value(node, 0.0) + ms;
    timings["total"] = total_ms;
    job.timings_ms = timings;
    jobs_.save(job);

    ServiceResponse r;
    r.body = job.to_json();
    if (!verification.is_null()) r.body["verification"] = verification;
    return r;
}

ServiceResponse Service::verify(const VerifyRequest& req) {
    try {
        nlohmann::json doc;
        std::optional<Transcript> job_transcript;
        if (req.job_id) {
            auto job = jobs_.find(*req.job_id);
            if (!job) throw Error(ErrorKind::NotFound, "unknown job " + *req.job_id);
            auto ann = jobs_.read_artifact(*req.job_id, "annotations.json");
            auto raw = jobs_.read_artifact(*req.job_id, "transcript.txt");
            if (!ann || !raw) throw Error(ErrorKind::NotFound, "job " + *req.job_id + " has no annotations");
            doc = nlohmann::json::parse(*ann);
            job_transcript = parse_transcript(*raw, doc.value("transcript_id", "transcript"));
        } else if (req.predictions) {
            try {
                doc = nlohmann::json::parse(*req.predictions);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::InvalidArgument, std::string("predictions are not JSON: ") + e.what());
            }
        } else {
            throw Error(ErrorKind::InvalidArgument, "verify needs job_id or predictions");
        }
        if (!doc.contains("codebooks") || !doc.contains("annotations"))
            throw Error(ErrorKind::InvalidArgument, "predictions lack codebooks/annotations");
        const std::string tid = doc.value("transcript_id", "transcript");
        AnnotatedTranscript annotated = parse_annotated_transcript(req.gold, tid);
        if (job_transcript) {
            const auto& a = annotated.transcript;
            bool same = a.turns.size() == job_transcript->turns.size();
            for (size_t i = 0; same && i < a.turns.size(); ++i)
                same = a.turns[i].sentences.size() == job_transcript->turns[i].sentences.size();
            if (!same) throw Error(ErrorKind::TranscriptMismatch, "gold transcript differs from the job's transcript");
        }
        std::vector<std::string> codebooks;
        for (const auto& cb : doc["codebooks"]) codebooks.push_back(cb.at("name").get<std::string>());
        std::map<std::string, LabelRegistry> active, inactive;
        for (const auto& [name, reg] : rt_->store->registries())
            (std::find(codebooks.begin(), codebooks.end(), name) != codebooks.end() ? active : inactive)[name] = reg;
        for (const auto& cb : codebooks)
            if (!active.count(cb)) throw Error(ErrorKind::InvalidArgument, "predictions use unknown codebook " + cb);
        std::vector<Annotation> pred;
        for (const auto& a : doc["annotations"]) pred.push_back(annotation_from_json(a));
        std::optional<size_t> count;
        if (doc.contains("sentence_count")) count = doc["sentence_count"].get<size_t>();
        GoldAnnotationSet gold = gold_from_annotated(annotated, active, inactive);
        VerificationResult v = verify_predictions(gold, pred, codebooks, active, count, rt_->config.run.context_k);

        JobRecord job = jobs_.create(JobKind::Verify);
        for (const auto* t : v.tables()) jobs_.write_artifact(job, t->file_name, t->render());
        jobs_.write_artifact(job, "metrics.json", v.to_json(0).dump(2));
        job.state = JobState::Done;
        job.summary = {{"transcript_id", tid},
                       {"source_job", req.job_id ? nlohmann::json(*req.job_id) : nlohmann::json(nullptr)},
                       {"weighted_f1", v.overall.weighted_f1},
                       {"accuracy", v.overall.accuracy},
                       {"mismatches", v.mismatches.size()}};
        jobs_.save(job);
        ServiceResponse r;
        r.body = job.to_json();
        r.body["verification"] = v.to_json(kPreviewRows);
        return r;
    } catch (const Error& e) {
        return error_response(e);
    } catch (const nlohmann::json::exception& e) {
        return error_response(Error(ErrorKind::InvalidArgument, e.what()));
    }
}

ServiceResponse Service::upload_codebook(const std::string& name, const std::string& document) {
    try {
        if (trim(name).empty()) throw Error(ErrorKind::InvalidArgument, "codebook name is empty");
        Codebook cb = parse_codebook(document, trim(name));
        UpdateReceipt receipt;
        {
            std::lock_guard lock(update_mu_);
            receipt = rt_->store->apply_update(cb);
        }
        rt_->library->set_registry(rt_->store->snapshot(cb.name)->registry);
        JobRecord job = jobs_.create(JobKind::UpdateCodebook);
        jobs_.write_artifact(job, "receipt.json", receipt.to_json().dump(2));
        job.state = JobState::Done;
        job.summary = receipt.to_json();
        jobs_.save(job);
        ServiceResponse r;
        r.body = receipt.to_json();
        r.body["job_id"] = job.job_id;
        return r;
    } catch (const Error& e) {
        return error_response(e);
    }
}

ServiceResponse Service::correction(const CorrectionRequest& c) {
    try {
        std::lock_guard lock(corrections_mu_);
        auto job = jobs_.find(c.job_id);
        if (!job) throw Error(ErrorKind::NotFound, "unknown job " + c.job_id);
        auto ann = jobs_.read_artifact(c.job_id, "annotations.json");
        auto raw = jobs_.read_artifact(c.job_id, "transcript.txt");
        if (!ann || !raw) throw Error(ErrorKind::NotFound, "job " + c.job_id + " has no annotations");
        nlohmann::json doc = nlohmann::json::parse(*ann);
        const Transcript t = parse_transcript(*raw, doc.value("transcript_id", "transcript"));
        const std::string where = "T" + std::to_string(c.turn_index) + ".S" + std::to_string(c.sent_index);
        if (!t.has_sentence(c.turn_index, c.sent_index))
            throw Error(ErrorKind::NotFound, "job " + c.job_id + " has no sentence " + where);
        bool in_job = false;
        for (const auto& cb : doc["codebooks"]) in_job = in_job || cb.at("name") == c.codebook;
        if (!in_job) throw Error(ErrorKind::NotFound, "job " + c.job_id + " has no " + c.codebook + " annotations");
        const LabelRegistry registry = rt_->store->snapshot(c.codebook)->registry;
        for (const auto* label : {&c.old_label, &c.new_label})
            if (!registry.accepts_key(*label))
                throw Error(ErrorKind::InvalidLabel, c.codebook + " has no label '" + *label + "'");

        const std::string event_key =
            join({c.job_id, std::to_string(c.turn_index), std::to_string(c.sent_index), c.codebook, c.old_label,
                  c.new_label},
                 "|");
        const std::string log_path = corrections_log_path();
        if (fs::exists(log_path)) {
            for (const auto& line : split_lines(read_file(log_path))) {
                if (trim(line).empty()) continue;
                auto ev = nlohmann::json::parse(line);
                if (ev.value("key", "") == event_key) {
                    ServiceResponse r;
                    r.body = {{"status", "duplicate"}, {"event", ev}, {"library_size", rt_->library->size()}};
                    return r;
                }
            }
        }

        // Apply the edit to the job's annotations; the latest edit wins.
        auto parse_key = [](const std::string& key) -> std::pair<std::string, std::optional<int>> {
            auto pos = key.rfind(": ");
            if (pos == std::string::npos) return {key, std::nullopt};
            return {key.substr(0, pos), std::stoi(key.substr(pos + 2))};
        };
        const auto [new_code, new_scale] = parse_key(c.new_label);
        auto& anns = doc["annotations"];
        auto at_slot = [&](const nlohmann::json& a) {
            return a.at("codebook") == c.codebook && a.at("turn_index") == c.turn_index &&
                   a.at("sent_index") == c.sent_index;
        };
        auto key_of = [](const nlohmann::json& a) { return annotation_from_json(a).key(); };
        nlohmann::json* target = nullptr;
        for (auto& a : anns)
            if (at_slot(a) && key_of(a) == c.old_label) target = &a;
        if (!target) {
            for (auto& a : anns) {
                if (!at_slot(a)) continue;
                bool scale = !a["scale_value"].is_null();
                bool same_dimension = new_scale ? (scale && a["label"] == new_code) : !scale;
                if (same_dimension) target = &a;
            }
        }
        Annotation edited;
        edited.transcript_id = t.id;
        edited.turn_index = c.turn_index;
        edited.sent_index = c.sent_index;
        edited.codebook = c.codebook;
        edited.label = new_code;
        edited.scale_value = new_scale;
        edited.raw_span = "corrected by " + (c.editor.empty() ? std::string("reviewer") : c.editor);
        if (target) *target = to_json(edited);
        else anns.push_back(to_json(edited));
        // a real label no longer sits beside a None for the same slot
        size_t at = 0, labeled = 0;
        for (auto& a : anns)
            if (at_slot(a)) {
                ++at;
                if (a["label"] != kNoneLabel) ++labeled;
            }
        if (labeled > 0 && at > labeled) {
            nlohmann::json kept = nlohmann::json::array();
            for (auto& a : anns)
                if (!(at_slot(a) && a["label"] == kNoneLabel)) kept.push_back(a);
            anns = kept;
        }

        JobRecord rec = *job;
        WorkflowState s = state_from_artifacts(t, doc);
        jobs_.write_artifact(rec, "annotations.json", doc.dump(2));
        nlohmann::json per_cb = doc;
        per_cb["codebooks"] = nlohmann::json::array();
        per_cb["annotations"] = nlohmann::json::array();
        for (const auto& cb : doc["codebooks"])
            if (cb.at("name") == c.codebook) per_cb["codebooks"].push_back(cb);
        for (const auto& a : doc["annotations"])
            if (a.at("codebook") == c.codebook) per_cb["annotations"].push_back(a);
        jobs_.write_artifact(rec, "annotations_" + c.codebook + ".json", per_cb.dump(2));
        jobs_.write_artifact(rec, "annotated.txt", annotated_text(s));
        jobs_.save(rec);

        nlohmann::json library = nullptr;
        std::string library_status = "recorded";
        try {
            ExampleInput in;
            in.codebook = c.codebook;
            in.sentence = t.sentence(c.turn_index, c.sent_index).text;
            in.context = render_turns(context_window(t, c.turn_index, rt_->config.run.context_k));
            in.human_label = c.new_label;
            in.agent_label = c.old_label;
            in.origin = t.id;
            in.turn_index = c.turn_index;
            in.sent_index = c.sent_index;
            library = to_json(rt_->library->record_example(in), false);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ProvenanceViolation) throw;
            library_status = std::string("skipped: ") + e.detail();
        }
        nlohmann::json event = {{"key", event_key},          {"job_id", c.job_id},        {"turn_index", c.turn_index},
                                {"sent_index", c.sent_index}, {"codebook", c.codebook},    {"old_label", c.old_label},
                                {"new_label", c.new_label},   {"editor", c.editor},        {"timestamp", utc_timestamp()}};
        fs::create_directories(fs::path(log_path).parent_path());
        std::ofstream(log_path, std::ios::app) << event.dump() << '\n';
        ServiceResponse r;
        r.body = {{"status", "recorded"},
                  {"event", event},
                  {"example", library},
                  {"library", library_status},
                  {"library_size", rt_->library->size()}};
        return r;
    } catch (const Error& e) {
        return error_response(e);
    } catch (const nlohmann::json::exception& e) {
        return error_response(Error(ErrorKind::IoError, e.what()));
    }
}

ServiceResponse Service::job(const std::string& job_id) const {
    auto job = jobs_.find(job_id);
    if (!job) return error_response(Error(ErrorKind::NotFound, "unknown job " + job_id));
    ServiceResponse r;
    r.body = job->to_json();
    return r;
}

ServiceResponse Service::artifact(const std::string& job_id, const std::string& name) const {
    if (!jobs_.find(job_id)) return error_response(Error(ErrorKind::NotFound, "unknown job " + job_id));
    auto body = jobs_.read_artifact(job_id, name);
    if (!body) return error_response(Error(ErrorKind::NotFound, "job " + job_id + " has no artifact " + name));
    ServiceResponse r;
    r.raw = *body;
    const std::string ext = fs::path(name).extension().string();
    r.content_type = ext == ".csv" ? "text/csv" : ext == ".json" ? "application/json" : "text/plain; charset=utf-8";
    return r;
}

ServiceResponse Service::codebooks() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& name : rt_->store->names()) {
        auto snap = rt_->store->snapshot(name);
        nlohmann::json labels = nlohmann::json::array();
        for (const auto& l : snap->codebook.labels)
            labels.push_back({{"code", l.code},
                              {"kind", l.kind == LabelKind::Scale ? "scale" : "event"},
                              {"description", l.description}});
        list.push_back({{"name", name},
                        {"display_name", codebook_display_name(name)},
                        {"version", snap->version()},
                        {"labels", labels},
                        {"keys", snap->registry.ordered_keys()},
                        {"chunks", snap->index.chunks.size()}});
    }
    ServiceResponse r;
    r.body = {{"codebooks", list}};
    return r;
}

ServiceResponse Service::library(const std::string& codebook) const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : rt_->library->entries(codebook)) entries.push_back(to_json(e, false));
    ServiceResponse r;
    r.body = {{"version", rt_->library->version()}, {"size", rt_->library->size()}, {"entries", entries}};
    return r;
}

ServiceResponse Service::health() const {
    ServiceResponse r;
    r.body = {{"status", "ok"},
              {"chat", rt_->chat->describe()},
              {"chat_configured", rt_->chat_configured()},
              {"embedder", rt_->embedder->fingerprint()},
              {"codebooks", rt_->store->names()},
              {"library_size", rt_->library->size()}};
    return r;
}

} // namespace mosaic
