#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace mosaic {

// One label placed on one sentence by one codebook's annotator.
struct Annotation {
    std::string transcript_id;
    int turn_index = 0;
    int sent_index = 0;
    std::string codebook;
    std::string label = "None";      // code, never carries the scale
    std::optional<int> scale_value;  // present iff the label is a scale label
    std::string raw_span;            // the model output line the label came from
    bool parse_recovered = false;    // produced after a format re-ask

    // "RS", "Flow: 4", "None"
    std::string key() const;
    bool operator==(const Annotation&) const = default;
};

nlohmann::json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

} // namespace mosaic
