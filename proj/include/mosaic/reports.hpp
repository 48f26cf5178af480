#pragma once

#include "mosaic/metrics.hpp"
#include "mosaic/transcript.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace mosaic {

inline constexpr size_t kPreviewRows = 50;

struct CsvTable {
    std::string title;
    std::string file_name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const;
    // {"title", "header", "rows" (first n), "total_rows", "truncated"}
    nlohmann::json preview(size_t n = kPreviewRows) const;
};

CsvTable comparison_table(const Alignment& aligned, const Transcript& t);
CsvTable mismatch_table(const std::vector<MismatchRow>& rows);
CsvTable overall_table(const MetricsReport& overall, const std::vector<MetricsReport>& by_codebook = {});
// Labels carry a "Codebook::" prefix only when the report spans several codebooks.
CsvTable per_label_table(const MetricsReport& report);

std::string join_labels(const std::set<std::string>& labels);

nlohmann::json to_json(const LabelConfusion& c);
nlohmann::json to_json(const MetricsReport& r);

} // namespace mosaic
