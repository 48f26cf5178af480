#include "mosaic/metrics.hpp"

#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>

namespace mosaic {

std::string Annotation::key() const { return label_key(label, scale_value); }

nlohmann::json to_json(const Annotation& a) {
    nlohmann::json j = {{"transcript_id", a.transcript_id}, {"turn_index", a.turn_index},
                        {"sent_index", a.sent_index},       {"codebook", a.codebook},
                        {"label", a.label},                 {"raw_span", a.raw_span}};
    j["scale_value"] = a.scale_value ? nlohmann::json(*a.scale_value) : nlohmann::json(nullptr);
    if (a.parse_recovered) j["parse_recovered"] = true;
    return j;
}

Annotation annotation_from_json(const nlohmann::json& j) {
    try {
        Annotation a;
        a.transcript_id = j.value("transcript_id", "");
        a.turn_index = j.at("turn_index").get<int>();
        a.sent_index = j.at("sent_index").get<int>();
        a.codebook = j.at("codebook").get<std::string>();
        a.label = j.at("label").get<std::string>();
        if (j.contains("scale_value") && !j["scale_value"].is_null()) a.scale_value = j["scale_value"].get<int>();
        a.raw_span = j.value("raw_span", "");
        a.parse_recovered = j.value("parse_recovered", false);
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("bad annotation record: ") + e.what());
    }
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double LabelConfusion::f1() const {
    double p = precision(), r = recall();
    return safe_ratio(2.0 * p * r, p + r);
}

const char* report_level_name(ReportLevel level) {
    switch (level) {
    case ReportLevel::Transcript: return "transcript";
    case ReportLevel::Category: return "category";
    case ReportLevel::Codebook: return "codebook";
    case ReportLevel::Overall: return "overall";
    }
    return "?";
}

const LabelConfusion* MetricsReport::find(const std::string& codebook, const std::string& label) const {
    for (const auto& c : per_label)
        if (c.codebook == codebook && c.label == label) return &c;
    return nullptr;
}

std::set<std::string> MetricsReport::codebooks() const {
    std::set<std::string> out;
    for (const auto& c : per_label) out.insert(c.codebook);
    return out;
}

MetricsReport weighted_metrics(const std::vector<LabelConfusion>& per_label, long correct, long total,
                               ReportLevel level, std::string name) {
    long n = 0;
    for (const auto& c : per_label) n += c.support();
    if (n == 0) throw Error(ErrorKind::EmptyGold, "no gold support across " + std::to_string(per_label.size()) + " labels");
    MetricsReport r;
    r.level = level;
    r.name = std::move(name);
    r.per_label = per_label;
    r.instances = total;
    r.correct = correct;
    r.accuracy = safe_ratio(double(correct), double(total));
    for (const auto& c : per_label) {
        double w = double(c.support()) / double(n);
        r.weighted_precision += w * c.precision();
        r.weighted_recall += w * c.recall();
        r.weighted_f1 += w * c.f1();
    }
    return r;
}

std::set<std::string> GoldAnnotationSet::codebooks() const {
    std::set<std::string> out;
    for (const auto& [_, per_cb] : labels)
        for (const auto& [cb, __] : per_cb) out.insert(cb);
    return out;
}

namespace {

std::string resolve_qualifier(const std::string& qual, const std::map<std::string, LabelRegistry>& active) {
    for (const auto& [name, _] : active)
        if (to_lower(name) == to_lower(qual) || to_lower(codebook_display_name(name)) == to_lower(qual)) return name;
    return {};
}

} // namespace

GoldAnnotationSet gold_from_annotated(const AnnotatedTranscript& annotated,
                                      const std::map<std::string, LabelRegistry>& active,
                                      const std::map<std::string, LabelRegistry>& ignored) {
    GoldAnnotationSet gold;
    gold.transcript_id = annotated.transcript.id;
    gold.transcript = annotated.transcript;
    for (const auto& tag : annotated.tags) {
        std::string cb;
        if (!tag.qualifier.empty()) {
            cb = resolve_qualifier(tag.qualifier, active);
            if (cb.empty() && !resolve_qualifier(tag.qualifier, ignored).empty()) continue;
            if (cb.empty())
                throw Error(ErrorKind::InvalidLabel, "tag qualifier '" + tag.qualifier + "' names no active codebook",
                            tag.line);
        } else if (tag.code == kNoneLabel) {
            continue;  // explicit None adds nothing over the default fill
        } else {
            std::vector<std::string> owners;
            for (const auto& [name, reg] : active)
                if (reg.has_code(tag.code)) owners.push_back(name);
            if (owners.empty() && std::any_of(ignored.begin(), ignored.end(), [&](const auto& kv) {
                    return kv.second.has_code(tag.code);
                }))
                continue;
            if (owners.empty())
                throw Error(ErrorKind::InvalidLabel, "tag '" + tag.code + "' is in no active codebook", tag.line);
            if (owners.size() > 1)
                throw Error(ErrorKind::AmbiguousTag,
                            "tag '" + tag.code + "' is defined by " + join(owners, " and ") + "; qualify it as Name::" +
                                tag.code,
                            tag.line);
            cb = owners.front();
        }
        const LabelRegistry& reg = active.at(cb);
        if (tag.code == kNoneLabel) continue;
        if (!reg.accepts(tag.code, tag.scale))
            throw Error(ErrorKind::InvalidLabel, cb + " does not accept " + label_key(tag.code, tag.scale), tag.line);
        gold.labels[{tag.turn_index, tag.sent_index}][cb].insert(label_key(tag.code, tag.scale));
    }
    return gold;
}

namespace {

void normalize(std::set<std::string>& s) {
    if (s.size() > 1) s.erase(std::string(kNoneLabel));
    if (s.empty()) s.insert(std::string(kNoneLabel));
}

} // namespace

Alignment align(const GoldAnnotationSet& gold, const std::vector<Annotation>& pred,
                const std::vector<std::string>& codebooks, std::optional<size_t> pred_sentence_count) {
    const Transcript& t = gold.transcript;
    if (pred_sentence_count && *pred_sentence_count != t.sentence_count())
        throw Error(ErrorKind::TranscriptMismatch, "gold has " + std::to_string(t.sentence_count()) +
                                                       " sentences, predictions cover " +
                                                       std::to_string(*pred_sentence_count));
    std::map<SlotKey, std::map<std::string, std::set<std::string>>> predicted;
    for (const auto& a : pred) {
        if (!a.transcript_id.empty() && !gold.transcript_id.empty() && a.transcript_id != gold.transcript_id)
            throw Error(ErrorKind::TranscriptMismatch,
                        "prediction for transcript '" + a.transcript_id + "' against gold '" + gold.transcript_id + "'");
        if (!t.has_sentence(a.turn_index, a.sent_index))
            throw Error(ErrorKind::TranscriptMismatch, "prediction at T" + std::to_string(a.turn_index) + ".S" +
                                                           std::to_string(a.sent_index) + " has no gold sentence");
        predicted[{a.turn_index, a.sent_index}][a.codebook].insert(a.key());
    }
    Alignment out;
    out.transcript_id = gold.transcript_id;
    out.codebooks = codebooks;
    for (const auto& turn : t.turns) {
        for (const auto& s : turn.sentences) {
            SlotKey slot{s.turn_index, s.sent_index};
            for (const auto& cb : codebooks) {
                AlignedSentence row;
                row.turn_index = s.turn_index;
                row.sent_index = s.sent_index;
                row.codebook = cb;
                if (auto g = gold.labels.find(slot); g != gold.labels.end())
                    if (auto c = g->second.find(cb); c != g->second.end()) row.gold = c->second;
                if (auto p = predicted.find(slot); p != predicted.end())
                    if (auto c = p->second.find(cb); c != p->second.end()) row.pred = c->second;
                normalize(row.gold);
                normalize(row.pred);
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

std::vector<LabelConfusion> per_label_counts(const Alignment& aligned, const LabelRegistry& registry) {
    std::vector<std::string> universe = registry.ordered_keys();
    std::set<std::string> known(universe.begin(), universe.end());
    for (const auto& row : aligned.rows) {
        if (row.codebook != registry.codebook()) continue;
        for (const auto* s : {&row.gold, &row.pred})
            for (const auto& k : *s)
                if (known.insert(k).second) universe.push_back(k);
    }
    std::vector<LabelConfusion> out;
    for (const auto& label : universe) {
        LabelConfusion c;
        c.codebook = registry.codebook();
        c.label = label;
        for (const auto& row : aligned.rows) {
            if (row.codebook != registry.codebook()) continue;
            bool g = row.gold.count(label) > 0, p = row.pred.count(label) > 0;
            if (g && p) ++c.tp;
            else if (p) ++c.fp;
            else if (g) ++c.fn;
            else ++c.tn;
        }
        out.push_back(std::move(c));
    }
    return out;
}

MetricsReport evaluate(const Alignment& aligned, const std::map<std::string, LabelRegistry>& registries,
                       const std::vector<std::string>& codebooks, std::string name) {
    std::vector<LabelConfusion> all;
    long correct = 0, total = 0;
    for (const auto& cb : codebooks) {
        auto it = registries.find(cb);
        if (it == registries.end()) throw Error(ErrorKind::NotFound, "no registry for codebook " + cb);
        auto counts = per_label_counts(aligned, it->second);
        all.insert(all.end(), counts.begin(), counts.end());
        for (const auto& row : aligned.rows) {
            if (row.codebook != cb) continue;
            ++total;
            if (row.match()) ++correct;
        }
    }
    return weighted_metrics(all, correct, total, ReportLevel::Transcript,
                            name.empty() ? aligned.transcript_id : std::move(name));
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports, ReportLevel level, std::string name) {
    if (reports.empty()) throw Error(ErrorKind::EmptyGold, "nothing to aggregate");
    std::vector<LabelConfusion> pooled;
    std::map<std::pair<std::string, std::string>, size_t> where;
    long correct = 0, total = 0;
    for (const auto& r : reports) {
        correct += r.correct;
        total += r.instances;
        for (const auto& c : r.per_label) {
            auto key = std::make_pair(c.codebook, c.label);
            auto it = where.find(key);
            if (it == where.end()) {
                where[key] = pooled.size();
                pooled.push_back(c);
            } else {
                auto& p = pooled[it->second];
                p.tp += c.tp;
                p.fp += c.fp;
                p.fn += c.fn;
                p.tn += c.tn;
            }
        }
    }
    if (level != ReportLevel::Category) return weighted_metrics(pooled, correct, total, level, std::move(name));
    MetricsReport r;
    r.level = level;
    r.name = std::move(name);
    r.per_label = std::move(pooled);
    r.instances = total;
    r.correct = correct;
    const double n = double(reports.size());
    for (const auto& x : reports) {
        r.accuracy += x.accuracy / n;
        r.weighted_precision += x.weighted_precision / n;
        r.weighted_recall += x.weighted_recall / n;
        r.weighted_f1 += x.weighted_f1 / n;
    }
    return r;
}

namespace {

bool is_scale_key(const std::string& k) { return k.find(": ") != std::string::npos; }

std::string mismatch_kind(const AlignedSentence& row) {
    const std::string none(kNoneLabel);
    for (const auto& g : row.gold)
        if (is_scale_key(g) && !row.pred.count(g)) {
            bool dimension_predicted = false;
            std::string code = g.substr(0, g.find(": "));
            for (const auto& p : row.pred)
                if (p.rfind(code + ": ", 0) == 0) dimension_predicted = true;
            if (!dimension_predicted) return "missed scale label";
        }
    if (row.pred.count(none)) return "missed";
    if (row.gold.count(none)) return "extra";
    return "substituted";
}

} // namespace

std::vector<MismatchRow> mismatch_report(const Alignment& aligned, const Transcript& transcript, int k_context) {
    std::vector<MismatchRow> out;
    for (const auto& row : aligned.rows) {
        if (row.match()) continue;
        MismatchRow m;
        m.transcript_id = aligned.transcript_id;
        m.turn_index = row.turn_index;
        m.sent_index = row.sent_index;
        m.codebook = row.codebook;
        m.kind = mismatch_kind(row);
        m.gold = row.gold;
        m.pred = row.pred;
        m.sentence = transcript.sentence(row.turn_index, row.sent_index).text;
        m.context = render_turns(context_window(transcript, row.turn_index, k_context));
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace mosaic
