#include "mosaic/tags.hpp"

#include "mosaic/text_util.hpp"

#include <cctype>

namespace mosaic {

namespace {

bool valid_code(std::string_view code) {
    if (code.empty() || !std::isalpha(static_cast<unsigned char>(code.front()))) return false;
    for (unsigned char c : code) {
        if (std::isalnum(c) || c == ' ' || c == '/' || c == '&' || c == '\'' || c == '(' || c == ')' ||
            c == '+' || c == '-' || c == '_' || c == '.')
            continue;
        return false;
    }
    return true;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (unsigned char c : s)
        if (!std::isdigit(c)) return false;
    return true;
}

} // namespace

std::string label_key(std::string_view code, std::optional<int> scale) {
    std::string out(code);
    if (scale) out += ": " + std::to_string(*scale);
    return out;
}

std::string TagToken::key() const { return label_key(code, scale); }

std::string render_tag(std::string_view code, std::optional<int> scale, std::string_view qualifier) {
    std::string out = "[";
    if (!qualifier.empty()) {
        out += qualifier;
        out += "::";
    }
    out += label_key(code, scale);
    out += "]";
    return out;
}

std::vector<TagToken> find_tags(std::string_view text) {
    std::vector<TagToken> out;
    size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string_view::npos) {
        size_t close = text.find_first_of("[]", pos + 1);
        if (close == std::string_view::npos) break;
        if (text[close] == '[') {
            pos = close;
            continue;
        }
        std::string_view inner = text.substr(pos + 1, close - pos - 1);
        TagToken tok;
        tok.begin = pos;
        tok.end = close + 1;
        if (size_t q = inner.find("::"); q != std::string_view::npos) {
            tok.qualifier = trim(inner.substr(0, q));
            inner = inner.substr(q + 2);
        }
        std::string_view code_part = inner;
        bool ok = true;
        if (size_t colon = inner.rfind(':'); colon != std::string_view::npos) {
            std::string suffix = trim(inner.substr(colon + 1));
            if (all_digits(suffix) && suffix.size() <= 3) {
                tok.scale = std::stoi(suffix);
                code_part = inner.substr(0, colon);
            } else {
                ok = false;
            }
        }
        tok.code = collapse_whitespace(code_part);
        if (ok && valid_code(tok.code) && (tok.qualifier.empty() || valid_code(tok.qualifier))) {
            out.push_back(std::move(tok));
        }
        pos = close + 1;
    }
    return out;
}

} // namespace mosaic
