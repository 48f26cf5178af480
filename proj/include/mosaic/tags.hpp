#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

// A bracketed label occurrence such as `[RS]`, `[GO: 2]` or `[Bias::Rushed: 4]`.
struct TagToken {
    std::string qualifier;  // codebook name before `::`, empty when absent
    std::string code;       // internal whitespace collapsed
    std::optional<int> scale;
    size_t begin = 0;  // byte offsets of the full bracket expression
    size_t end = 0;

    // Code with scale rendered as "Name: k"; this is the key metrics use.
    std::string key() const;
};

std::vector<TagToken> find_tags(std::string_view text);

std::string label_key(std::string_view code, std::optional<int> scale);
std::string render_tag(std::string_view code, std::optional<int> scale, std::string_view qualifier = {});

} // namespace mosaic
