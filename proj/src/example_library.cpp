#include "mosaic/example_library.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>

namespace mosaic {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSnapshotFile = "library.snapshot.jsonl";
constexpr const char* kLogFile = "library.log.jsonl";

std::string embed_text(const std::string& sentence, const std::string& context) {
    return context.empty() ? sentence : sentence + "\n" + context;
}

nlohmann::json policy_json(const SelectionPolicy& p) {
    return {{"max_examples", p.max_examples}, {"precision_weight", p.precision_weight}, {"mix", p.mix}};
}

SelectionPolicy policy_from_json(const nlohmann::json& j) {
    SelectionPolicy p;
    p.max_examples = j.value("max_examples", p.max_examples);
    p.precision_weight = j.value("precision_weight", p.precision_weight);
    p.mix = j.value("mix", p.mix);
    return p;
}

} // namespace

const char* outcome_name(Outcome o) { return o == Outcome::CorrectMatch ? "correct_match" : "contrastive_error"; }

std::string ExampleEntry::dedupe_key() const {
    return join({codebook, origin, std::to_string(turn_index), std::to_string(sent_index), sentence, human_label,
                 agent_label},
                "\x1f");
}

nlohmann::json to_json(const ExampleEntry& e, bool with_embedding) {
    nlohmann::json j = {{"id", e.id},
                        {"codebook", e.codebook},
                        {"sentence", e.sentence},
                        {"context", e.context},
                        {"human_label", e.human_label},
                        {"agent_label", e.agent_label},
                        {"outcome", outcome_name(e.outcome)},
                        {"utility", e.utility},
                        {"origin", e.origin},
                        {"turn_index", e.turn_index},
                        {"sent_index", e.sent_index}};
    if (with_embedding) {
        auto v = e.embedding.values();
        j["embedding"] = std::vector<float>(v.begin(), v.end());
    }
    return j;
}

double feedback_multiplier(const ExampleEntry& entry, const std::vector<LabelConfusion>& per_label,
                           double precision_weight, const FeedbackParams& params) {
    auto find = [&](const std::string& label) -> const LabelConfusion* {
        for (const auto& c : per_label)
            if (c.codebook == entry.codebook && c.label == label) return &c;
        return nullptr;
    };
    double m = 1.0;
    if (const auto* h = find(entry.human_label)) m *= 1.0 + params.alpha * h->precision();
    const std::string& lever_label = entry.outcome == Outcome::CorrectMatch ? entry.human_label : entry.agent_label;
    if (const auto* c = find(lever_label); c && c->tp + c->fp > 0 && c->precision() < params.tau) {
        double gap = precision_weight * (params.tau - c->precision());
        m *= entry.outcome == Outcome::CorrectMatch ? std::max(params.min_factor, 1.0 - gap) : 1.0 + gap;
    }
    return m;
}

ExampleLibrary::ExampleLibrary(Embedder& embedder, std::string dir) : embedder_(embedder), dir_(std::move(dir)) {
    if (!dir_.empty()) load();
}

void ExampleLibrary::set_registry(const LabelRegistry& registry) {
    std::unique_lock lock(mu_);
    registries_[registry.codebook()] = registry;
}

void ExampleLibrary::set_training_manifest(std::set<std::string> transcript_ids) {
    std::unique_lock lock(mu_);
    manifest_ = std::move(transcript_ids);
}

ExampleEntry ExampleLibrary::record_example(const ExampleInput& in) {
    {
        std::shared_lock lock(mu_);
        auto reg = registries_.find(in.codebook);
        if (reg == registries_.end()) throw Error(ErrorKind::InvalidLabel, "unknown codebook '" + in.codebook + "'");
        for (const auto* label : {&in.human_label, &in.agent_label})
            if (!reg->second.accepts_key(*label))
                throw Error(ErrorKind::InvalidLabel, in.codebook + " has no label '" + *label + "'");
        if (manifest_ && !manifest_->count(in.origin))
            throw Error(ErrorKind::ProvenanceViolation,
                        "transcript '" + in.origin + "' is not in the training manifest");
        if (trim(in.sentence).empty()) throw Error(ErrorKind::InvalidArgument, "example sentence is empty");
    }
    ExampleEntry e;
    e.codebook = in.codebook;
    e.sentence = in.sentence;
    e.context = in.context;
    e.human_label = in.human_label;
    e.agent_label = in.agent_label;
    e.outcome = in.human_label == in.agent_label ? Outcome::CorrectMatch : Outcome::ContrastiveError;
    e.origin = in.origin;
    e.turn_index = in.turn_index;
    e.sent_index = in.sent_index;
    const std::string key = e.dedupe_key();
    {
        std::shared_lock lock(mu_);
        for (const auto& x : entries_)
            if (x.dedupe_key() == key) return x;
    }
    // Embedding may hit a remote backend, so it runs outside the lock.
    e.embedding = embedder_.embed(embed_text(e.sentence, e.context));
    std::unique_lock lock(mu_);
    for (const auto& x : entries_)
        if (x.dedupe_key() == key) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "ex%06ld", next_id_++);
    e.id = buf;
    entries_.push_back(e);
    append_log({{"op", "add"}, {"entry", to_json(e)}});
    return e;
}

std::vector<ExampleEntry> ExampleLibrary::select_fewshot(const std::string& query, const std::string& codebook,
                                                         const SelectionPolicy& policy,
                                                         const std::set<std::string>& exclude_origins) const {
    if (policy.mix < 0.0 || policy.mix > 1.0) throw Error(ErrorKind::InvalidArgument, "mix must be in [0, 1]");
    struct Scored {
        const ExampleEntry* e;
        double score;
    };
    std::shared_lock lock(mu_);
    std::vector<Scored> pool;
    std::optional<EmbeddingVector> q;
    for (const auto& e : entries_) {
        if (e.codebook != codebook || exclude_origins.count(e.origin)) continue;
        if (!q) q = embedder_.embed(query);
        double sim = (1.0 + q->dot(e.embedding)) / 2.0;
        pool.push_back({&e, sim * e.utility});
    }
    auto better = [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.e->id < b.e->id;
    };
    std::sort(pool.begin(), pool.end(), better);
    const size_t n = std::min(pool.size(), static_cast<size_t>(std::max(0, policy.max_examples)));
    std::vector<Scored> chosen(pool.begin(), pool.begin() + static_cast<long>(n));
    std::vector<Scored> rest(pool.begin() + static_cast<long>(n), pool.end());

    auto contrastive = [](const Scored& s) { return s.e->outcome == Outcome::ContrastiveError; };
    const size_t quota = static_cast<size_t>(std::ceil(policy.mix * double(n) - 1e-12));
    size_t have = static_cast<size_t>(std::count_if(chosen.begin(), chosen.end(), contrastive));
    auto next_in = rest.begin();
    while (have < quota) {
        next_in = std::find_if(next_in, rest.end(), contrastive);
        if (next_in == rest.end()) break;
        // lowest-scored correct match currently chosen
        auto out = std::find_if(chosen.rbegin(), chosen.rend(), [&](const Scored& s) { return !contrastive(s); });
        if (out == chosen.rend()) break;
        *out = *next_in;
        ++next_in;
        ++have;
        std::sort(chosen.begin(), chosen.end(), better);
    }
    std::vector<ExampleEntry> result;
    for (const auto& s : chosen) result.push_back(*s.e);
    return result;
}

LibraryDelta ExampleLibrary::apply_feedback(const std::string& codebook, const MetricsReport& report,
                                            const FeedbackParams& params) {
    std::unique_lock lock(mu_);
    LibraryDelta delta;
    delta.codebook = codebook;
    delta.old_version = version_;
    SelectionPolicy& pol = policies_[codebook];
    delta.old_mix = pol.mix;

    std::vector<LabelConfusion> labels;
    for (const auto& c : report.per_label)
        if (c.codebook == codebook) labels.push_back(c);

    for (const auto& e : entries_)
        if (e.codebook == codebook) delta.multipliers[e.id] = feedback_multiplier(e, labels, pol.precision_weight, params);
    for (auto& e : entries_)
        if (auto it = delta.multipliers.find(e.id); it != delta.multipliers.end())
            e.utility = std::min(params.cap, e.utility * it->second);

    // Prune, keeping the best entry of a human label that would otherwise vanish.
    std::map<std::string, std::vector<ExampleEntry*>> by_label;
    for (auto& e : entries_)
        if (e.codebook == codebook) by_label[e.human_label].push_back(&e);
    std::set<std::string> drop;
    for (auto& [label, group] : by_label) {
        std::vector<ExampleEntry*> low;
        for (auto* e : group)
            if (e->utility < params.epsilon) low.push_back(e);
        if (low.size() == group.size()) {
            auto keep = std::min_element(low.begin(), low.end(), [](const ExampleEntry* a, const ExampleEntry* b) {
                if (a->utility != b->utility) return a->utility > b->utility;
                return a->id < b->id;
            });
            low.erase(keep);
        }
        for (auto* e : low) drop.insert(e->id);
    }
    delta.pruned.assign(drop.begin(), drop.end());
    std::erase_if(entries_, [&](const ExampleEntry& e) { return drop.count(e.id) > 0; });

    if (report.weighted_precision < report.weighted_recall) pol.mix += params.mix_step;
    else if (report.weighted_precision > report.weighted_recall) pol.mix -= params.mix_step;
    pol.mix = std::clamp(pol.mix, params.mix_min, params.mix_max);
    delta.new_mix = pol.mix;
    delta.new_version = ++version_;

    nlohmann::json utilities = nlohmann::json::object();
    for (const auto& e : entries_)
        if (e.codebook == codebook) utilities[e.id] = e.utility;
    append_log({{"op", "feedback"},
                {"codebook", codebook},
                {"version", version_},
                {"utilities", utilities},
                {"pruned", delta.pruned},
                {"policy", policy_json(pol)}});
    return delta;
}

SelectionPolicy ExampleLibrary::policy(const std::string& codebook) const {
    std::shared_lock lock(mu_);
    auto it = policies_.find(codebook);
    return it == policies_.end() ? SelectionPolicy{} : it->second;
}

void ExampleLibrary::set_policy(const std::string& codebook, SelectionPolicy p) {
    std::unique_lock lock(mu_);
    policies_[codebook] = p;
    append_log({{"op", "policy"}, {"codebook", codebook}, {"policy", policy_json(p)}});
}

std::vector<ExampleEntry> ExampleLibrary::entries(const std::string& codebook) const {
    std::shared_lock lock(mu_);
    std::vector<ExampleEntry> out;
    for (const auto& e : entries_)
        if (codebook.empty() || e.codebook == codebook) out.push_back(e);
    return out;
}

std::optional<ExampleEntry> ExampleLibrary::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    for (const auto& e : entries_)
        if (e.id == id) return e;
    return std::nullopt;
}

size_t ExampleLibrary::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

long ExampleLibrary::version() const {
    std::shared_lock lock(mu_);
    return version_;
}

std::map<std::string, int> ExampleLibrary::support(const std::string& codebook) const {
    std::shared_lock lock(mu_);
    std::map<std::string, int> out;
    for (const auto& e : entries_)
        if (e.codebook == codebook) ++out[e.human_label];
    return out;
}

void ExampleLibrary::set_utility(const std::string& id, double utility) {
    if (!(utility >= 0.0)) throw Error(ErrorKind::InvalidArgument, "utility must be non-negative");
    std::unique_lock lock(mu_);
    for (auto& e : entries_)
        if (e.id == id) {
            e.utility = utility;
            append_log({{"op", "utility"}, {"id", id}, {"utility", utility}});
            return;
        }
    throw Error(ErrorKind::NotFound, "no example " + id);
}

void ExampleLibrary::append_log(const nlohmann::json& event) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    std::ofstream out(fs::path(dir_) / kLogFile, std::ios::app);
    if (!out) throw Error(ErrorKind::IoError, "cannot append to example log in " + dir_);
    out << event.dump() << '\n';
}

ExampleEntry ExampleLibrary::entry_from_json(const nlohmann::json& j) const {
    ExampleEntry e;
    e.id = j.at("id").get<std::string>();
    e.codebook = j.at("codebook").get<std::string>();
    e.sentence = j.at("sentence").get<std::string>();
    e.context = j.value("context", "");
    e.human_label = j.at("human_label").get<std::string>();
    e.agent_label = j.at("agent_label").get<std::string>();
    e.outcome = j.at("outcome").get<std::string>() == "correct_match" ? Outcome::CorrectMatch : Outcome::ContrastiveError;
    e.utility = j.at("utility").get<double>();
    e.origin = j.value("origin", "");
    e.turn_index = j.value("turn_index", -1);
    e.sent_index = j.value("sent_index", -1);
    if (j.contains("embedding")) e.embedding = EmbeddingVector::from_unit(j["embedding"].get<std::vector<float>>());
    return e;
}

void ExampleLibrary::load() {
    const fs::path snap = fs::path(dir_) / kSnapshotFile;
    const fs::path log = fs::path(dir_) / kLogFile;
    bool reembed = false;
    auto id_number = [](const std::string& id) { return std::stol(id.substr(2)); };
    try {
        if (fs::exists(snap)) {
            auto lines = split_lines(read_file(snap.string()));
            bool header = true;
            for (const auto& line : lines) {
                if (trim(line).empty()) continue;
                auto j = nlohmann::json::parse(line);
                if (header) {
                    header = false;
                    version_ = j.value("version", 0L);
                    next_id_ = j.value("next_id", 1L);
                    reembed = j.value("fingerprint", "") != embedder_.fingerprint();
                    const nlohmann::json policies = j.value("policies", nlohmann::json::object());
                    for (const auto& [cb, p] : policies.items()) policies_[cb] = policy_from_json(p);
                    continue;
                }
                entries_.push_back(entry_from_json(j));
            }
        }
        if (fs::exists(log)) {
            for (const auto& line : split_lines(read_file(log.string()))) {
                if (trim(line).empty()) continue;
                auto ev = nlohmann::json::parse(line);
                const std::string op = ev.at("op").get<std::string>();
                if (op == "add") {
                    entries_.push_back(entry_from_json(ev["entry"]));
                    next_id_ = std::max(next_id_, id_number(entries_.back().id) + 1);
                } else if (op == "utility") {
                    for (auto& e : entries_)
                        if (e.id == ev["id"]) e.utility = ev["utility"].get<double>();
                } else if (op == "feedback") {
                    std::set<std::string> pruned = ev["pruned"].get<std::set<std::string>>();
                    std::erase_if(entries_, [&](const ExampleEntry& e) { return pruned.count(e.id) > 0; });
                    for (auto& e : entries_)
                        if (ev["utilities"].contains(e.id)) e.utility = ev["utilities"][e.id].get<double>();
                    version_ = ev["version"].get<long>();
                    policies_[ev["codebook"].get<std::string>()] = policy_from_json(ev["policy"]);
                } else if (op == "policy") {
                    policies_[ev["codebook"].get<std::string>()] = policy_from_json(ev["policy"]);
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::IoError, "corrupt example library in " + dir_ + ": " + e.what());
    }
    bool missing = std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.embedding.dimension() != embedder_.dimension(); });
    if (reembed || missing) {
        for (auto& e : entries_) e.embedding = embedder_.embed(embed_text(e.sentence, e.context));
    }
}

void ExampleLibrary::compact() {
    if (dir_.empty()) return;
    std::unique_lock lock(mu_);
    nlohmann::json policies = nlohmann::json::object();
    for (const auto& [cb, p] : policies_) policies[cb] = policy_json(p);
    std::string body = nlohmann::json{{"version", version_},
                                      {"next_id", next_id_},
                                      {"fingerprint", embedder_.fingerprint()},
                                      {"policies", policies}}
                           .dump() +
                       "\n";
    for (const auto& e : entries_) body += to_json(e).dump() + "\n";
    write_file((fs::path(dir_) / kSnapshotFile).string(), body);
    write_file((fs::path(dir_) / kLogFile).string(), "");
}

} // namespace mosaic
