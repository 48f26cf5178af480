#include "mosaic/codebook.hpp"

#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <map>
#include <regex>

namespace mosaic {

const LabelDef* Codebook::find_label(std::string_view code) const {
    for (const auto& l : labels)
        if (l.code == code) return &l;
    return nullptr;
}

LabelRegistry::LabelRegistry(std::string codebook, std::vector<LabelDef> labels)
    : codebook_(std::move(codebook)), labels_(std::move(labels)) {
    for (const auto& l : labels_) {
        if (l.kind == LabelKind::Event) {
            ordered_.push_back(l.code);
        } else {
            for (int v = l.scale_min; v <= l.scale_max; ++v) ordered_.push_back(label_key(l.code, v));
        }
    }
    ordered_.emplace_back(kNoneLabel);
    keys_.insert(ordered_.begin(), ordered_.end());
}

const LabelDef* LabelRegistry::find(std::string_view code) const {
    for (const auto& l : labels_)
        if (l.code == code) return &l;
    return nullptr;
}

bool LabelRegistry::accepts(std::string_view code, std::optional<int> scale) const {
    if (code == kNoneLabel) return !scale.has_value();
    const LabelDef* def = find(code);
    if (!def) return false;
    if (def->kind == LabelKind::Event) return !scale.has_value();
    return scale && *scale >= def->scale_min && *scale <= def->scale_max;
}

std::set<std::string> LabelRegistry::codes() const {
    std::set<std::string> out;
    for (const auto& l : labels_) out.insert(l.code);
    return out;
}

std::string codebook_version(std::string_view doc) { return "v" + hex64(fnv1a64(doc)); }

namespace {

[[noreturn]] void malformed(const std::string& name, const std::string& reason) {
    throw Error(ErrorKind::MalformedCodebook, name + ": " + reason);
}

std::string describe_tag_context(const std::string& line, const TagToken& tok) {
    std::string before = trim(std::string_view(line).substr(0, tok.begin));
    while (!before.empty() && (before.front() == '-' || before.front() == '*')) before = trim(before.substr(1));
    while (!before.empty() && (before.back() == ':' || before.back() == '-')) before = trim(before.substr(0, before.size() - 1));
    if (!before.empty()) return before;
    return trim(std::string_view(line).substr(tok.end));
}

struct Declaration {
    LabelDef def;
    int line = 0;
};

// `@label CODE | event | description` or `@label CODE | scale 1-5 | description`
Declaration parse_declaration(const std::string& name, const std::string& line, int line_no) {
    std::string body = trim(std::string_view(line).substr(6));
    std::vector<std::string> parts;
    size_t start = 0;
    for (size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == '|') {
            parts.push_back(trim(std::string_view(body).substr(start, i - start)));
            start = i + 1;
        }
    }
    if (parts.size() < 2 || parts[0].empty())
        malformed(name, "line " + std::to_string(line_no) + ": expected `@label CODE | kind | description`");
    Declaration d;
    d.line = line_no;
    d.def.code = collapse_whitespace(parts[0]);
    d.def.description = parts.size() > 2 ? parts[2] : "";
    std::string kind = to_lower(collapse_whitespace(parts[1]));
    static const std::regex scale_re(R"(^scale\s*(\d+)\s*-\s*(\d+)$)");
    std::smatch m;
    if (kind == "event") {
        d.def.kind = LabelKind::Event;
    } else if (kind == "scale") {
        malformed(name, "scale label without range: " + d.def.code);
    } else if (std::regex_match(kind, m, scale_re)) {
        d.def.kind = LabelKind::Scale;
        d.def.scale_min = std::stoi(m[1]);
        d.def.scale_max = std::stoi(m[2]);
        if (d.def.scale_min != 1 || d.def.scale_max != 5)
            malformed(name, "scale range must be 1-5: " + d.def.code);
    } else {
        malformed(name, "unknown label kind '" + parts[1] + "' for " + d.def.code);
    }
    return d;
}

bool is_tabular(const std::vector<std::string>& lines) {
    for (const auto& l : lines) {
        std::string t = trim(l);
        if (t.empty()) continue;
        return to_lower(t).rfind("code\tkind", 0) == 0;
    }
    return false;
}

// Tab-separated export: code, kind, description[, example].
Codebook parse_tabular(const std::vector<std::string>& lines, const std::string& name) {
    Codebook cb;
    cb.name = name;
    bool header = true;
    for (const auto& raw : lines) {
        if (trim(raw).empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cols;
        size_t start = 0;
        for (size_t i = 0; i <= raw.size(); ++i) {
            if (i == raw.size() || raw[i] == '\t') {
                cols.push_back(trim(std::string_view(raw).substr(start, i - start)));
                start = i + 1;
            }
        }
        while (cols.size() < 4) cols.emplace_back();
        std::string decl = "@label " + cols[0] + " | " + cols[1] + " | " + cols[2];
        Declaration d = parse_declaration(name, decl, 0);
        if (cb.find_label(d.def.code)) malformed(name, "duplicate code: " + d.def.code);
        RuleSection sec;
        sec.heading = d.def.code;
        std::string tag = d.def.kind == LabelKind::Scale ? render_tag(d.def.code, d.def.scale_min)
                                                         : render_tag(d.def.code, std::nullopt);
        sec.body = d.def.description + " " + tag;
        if (!cols[3].empty()) {
            sec.body += "\n" + tag + " " + cols[3];
            sec.examples.push_back(tag + " " + cols[3]);
        }
        cb.rules.push_back(std::move(sec));
        cb.labels.push_back(std::move(d.def));
    }
    return cb;
}

} // namespace

Codebook parse_codebook(std::string_view doc, const std::string& name) {
    if (trim(doc).empty()) malformed(name, "empty document");
    auto lines = split_lines(doc);
    Codebook cb;
    if (is_tabular(lines)) {
        cb = parse_tabular(lines, name);
    } else {
        cb.name = name;
        std::vector<Declaration> decls;
        std::vector<std::string> body_lines;
        auto flush = [&]() {
            if (cb.rules.empty()) return;
            cb.rules.back().body = join(body_lines, "\n");
            body_lines.clear();
        };
        int line_no = 0;
        for (const auto& raw : lines) {
            ++line_no;
            std::string line = trim(raw);
            if (line.rfind("@label", 0) == 0) {
                decls.push_back(parse_declaration(name, line, line_no));
                continue;
            }
            if (!line.empty() && line.front() == '#') {
                flush();
                size_t h = line.find_first_not_of('#');
                cb.rules.push_back({h == std::string::npos ? "" : trim(line.substr(h)), "", {}});
                continue;
            }
            if (line.empty()) {
                if (!body_lines.empty()) body_lines.push_back("");
                continue;
            }
            if (cb.rules.empty()) cb.rules.push_back({name, "", {}});
            body_lines.push_back(line);
            if (!find_tags(line).empty()) cb.rules.back().examples.push_back(line);
        }
        flush();
        for (auto& sec : cb.rules)
            while (!sec.body.empty() && sec.body.back() == '\n') sec.body.pop_back();

        for (auto& d : decls) {
            if (d.def.code == kNoneLabel) malformed(name, "\"None\" is reserved");
            if (cb.find_label(d.def.code)) malformed(name, "duplicate code: " + d.def.code);
            cb.labels.push_back(d.def);
        }
        // Tags in rule text become labels; their usage must agree with declarations.
        std::map<std::string, std::pair<bool, bool>> usage;  // code -> (seen bare, seen scaled)
        for (const auto& sec : cb.rules) {
            for (const auto& line : split_lines(sec.heading + "\n" + sec.body)) {
                for (const auto& tok : find_tags(line)) {
                    if (tok.code == kNoneLabel) continue;
                    auto& u = usage[tok.code];
                    (tok.scale ? u.second : u.first) = true;
                    if (tok.scale && (*tok.scale < 1 || *tok.scale > 5))
                        malformed(name, "scale value out of range: " + tok.key());
                    if (!cb.find_label(tok.code)) {
                        LabelDef def;
                        def.code = tok.code;
                        def.kind = tok.scale ? LabelKind::Scale : LabelKind::Event;
                        if (tok.scale) {
                            def.scale_min = 1;
                            def.scale_max = 5;
                        }
                        def.description = describe_tag_context(line, tok);
                        cb.labels.push_back(std::move(def));
                    }
                }
            }
        }
        for (const auto& [code, u] : usage) {
            const LabelDef* def = cb.find_label(code);
            if (def->kind == LabelKind::Event && u.second)
                malformed(name, "event label used with a scale value: " + code);
            if (def->kind == LabelKind::Scale && u.first) malformed(name, "scale label without range: " + code);
        }
    }
    if (cb.labels.empty()) malformed(name, "no labels");
    cb.source = std::string(doc);
    cb.version = codebook_version(doc);
    return cb;
}

std::vector<RuleChunk> chunk_codebook(const Codebook& cb, int window, int stride) {
    if (stride <= 0 || stride > window) throw Error(ErrorKind::InvalidArgument, "require 0 < stride <= window");
    std::vector<RuleChunk> out;
    const auto registry = label_registry(cb);
    int next_id = 0;
    for (size_t si = 0; si < cb.rules.size(); ++si) {
        const auto& sec = cb.rules[si];
        auto tokens = split_whitespace(sec.heading + "\n" + sec.body);
        const int n = static_cast<int>(tokens.size());
        for (int start = 0; start < n; start += stride) {
            int end = std::min(n, start + window);
            RuleChunk chunk;
            chunk.codebook = cb.name;
            chunk.version = cb.version;
            chunk.chunk_id = next_id++;
            chunk.section = static_cast<int>(si);
            chunk.text = join(std::vector<std::string>(tokens.begin() + start, tokens.begin() + end), " ");
            for (const auto& tok : find_tags(chunk.text))
                if (registry.has_code(tok.code)) chunk.tags.insert(tok.code);
            out.push_back(std::move(chunk));
            if (end == n) break;
        }
    }
    return out;
}

LabelRegistry label_registry(const Codebook& cb) { return LabelRegistry(cb.name, cb.labels); }

} // namespace mosaic
