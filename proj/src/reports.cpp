#include "mosaic/reports.hpp"

#include "mosaic/text_util.hpp"

namespace mosaic {

std::string CsvTable::render() const {
    std::string out = csv_row(header);
    for (const auto& r : rows) out += csv_row(r);
    return out;
}

nlohmann::json CsvTable::preview(size_t n) const {
    nlohmann::json shown = nlohmann::json::array();
    for (size_t i = 0; i < rows.size() && i < n; ++i) shown.push_back(rows[i]);
    return {{"title", title},
            {"file", file_name},
            {"header", header},
            {"rows", shown},
            {"total_rows", rows.size()},
            {"truncated", rows.size() > n}};
}

std::string join_labels(const std::set<std::string>& labels) {
    return join(std::vector<std::string>(labels.begin(), labels.end()), "; ");
}

CsvTable comparison_table(const Alignment& aligned, const Transcript& t) {
    CsvTable tab;
    tab.title = "All Sentences Comparison";
    tab.file_name = "all_sentences_comparison.csv";
    tab.header = {"transcript_id", "turn", "sentence", "speaker", "codebook", "text", "gold", "predicted", "match"};
    for (const auto& row : aligned.rows) {
        const Turn& turn = t.turns.at(static_cast<size_t>(row.turn_index));
        tab.rows.push_back({aligned.transcript_id, std::to_string(row.turn_index), std::to_string(row.sent_index),
                            speaker_name(turn.speaker), row.codebook,
                            t.sentence(row.turn_index, row.sent_index).text, join_labels(row.gold),
                            join_labels(row.pred), row.match() ? "yes" : "no"});
    }
    return tab;
}

CsvTable mismatch_table(const std::vector<MismatchRow>& rows) {
    CsvTable tab;
    tab.title = "Mismatches (with context)";
    tab.file_name = "mismatches_with_context.csv";
    tab.header = {"transcript_id", "turn", "sentence", "codebook", "kind", "gold", "predicted", "text", "context"};
    for (const auto& m : rows)
        tab.rows.push_back({m.transcript_id, std::to_string(m.turn_index), std::to_string(m.sent_index), m.codebook,
                            m.kind, join_labels(m.gold), join_labels(m.pred), m.sentence, m.context});
    return tab;
}

CsvTable overall_table(const MetricsReport& overall, const std::vector<MetricsReport>& by_codebook) {
    CsvTable tab;
    tab.title = "Overall Metrics";
    tab.file_name = "overall_metrics.csv";
    tab.header = {"Metric", "Value"};
    auto add = [&](const std::string& prefix, const MetricsReport& r) {
        tab.rows.push_back({prefix + "Accuracy", format3(r.accuracy)});
        tab.rows.push_back({prefix + "Weighted Precision", format3(r.weighted_precision)});
        tab.rows.push_back({prefix + "Weighted Recall", format3(r.weighted_recall)});
        tab.rows.push_back({prefix + "Weighted F1", format3(r.weighted_f1)});
        tab.rows.push_back({prefix + "Instances", std::to_string(r.instances)});
        tab.rows.push_back({prefix + "Correct", std::to_string(r.correct)});
    };
    add("", overall);
    if (by_codebook.size() > 1)
        for (const auto& r : by_codebook) add(r.name + " ", r);
    return tab;
}

CsvTable per_label_table(const MetricsReport& report) {
    CsvTable tab;
    tab.title = "Per-label Metrics";
    tab.file_name = "per_label_metrics.csv";
    tab.header = {"label", "TP", "FP", "FN", "TN", "total", "accuracy", "precision", "recall", "F1", "support"};
    const bool prefix = report.codebooks().size() > 1;
    for (const auto& c : report.per_label)
        tab.rows.push_back({prefix ? c.codebook + "::" + c.label : c.label, std::to_string(c.tp), std::to_string(c.fp),
                            std::to_string(c.fn), std::to_string(c.tn), std::to_string(c.total()),
                            format3(c.accuracy()), format3(c.precision()), format3(c.recall()), format3(c.f1()),
                            std::to_string(c.support())});
    return tab;
}

nlohmann::json to_json(const LabelConfusion& c) {
    return {{"codebook", c.codebook},   {"label", c.label},         {"tp", c.tp},
            {"fp", c.fp},               {"fn", c.fn},               {"tn", c.tn},
            {"total", c.total()},       {"support", c.support()},   {"accuracy", c.accuracy()},
            {"precision", c.precision()}, {"recall", c.recall()},   {"f1", c.f1()}};
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& c : r.per_label) labels.push_back(to_json(c));
    return {{"level", report_level_name(r.level)},
            {"name", r.name},
            {"accuracy", r.accuracy},
            {"weighted_precision", r.weighted_precision},
            {"weighted_recall", r.weighted_recall},
            {"weighted_f1", r.weighted_f1},
            {"instances", r.instances},
            {"correct", r.correct},
            {"per_label", labels}};
}

} // namespace mosaic
