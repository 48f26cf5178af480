#include "mosaic/routing.hpp"

#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <set>

namespace mosaic {

namespace {

struct Synonym {
    const char* codebook;
    const char* phrase;
};

// Longer phrases are listed before their prefixes.
const Synonym kSynonyms[] = {
    {"WISER", "wiser"},
    {"WISER", "wisser"},
    {"WISER", "empathy"},
    {"WISER", "empathic"},
    {"WISER", "empathetic"},
    {"Global", "global"},
    {"Global", "overall"},
    {"Global", "dialogue quality"},
    {"Global", "conversation quality"},
    {"Global", "relational quality"},
    {"Global", "flow"},
    {"Intervention", "interventions"},
    {"Intervention", "intervention"},
    {"Intervention", "5as"},
    {"Intervention", "5a"},
    {"Intervention", "advice"},
    {"Intervention", "advise"},
    {"Intervention", "behavior change"},
    {"Intervention", "behaviour change"},
    {"PatientBehavior", "patient behaviors"},
    {"PatientBehavior", "patient behaviours"},
    {"PatientBehavior", "patient behavior"},
    {"PatientBehavior", "patient behaviour"},
    {"PatientBehavior", "patientbehavior"},
    {"Bias", "bias"},
    {"Bias", "biased"},
    {"Bias", "stigma"},
    {"Bias", "prejudice"},
    {"Bias", "dominance"},
    {"Bias", "stereotyping"},
    {"Bias", "stereotypes"},
    {"SDOHWeight", "sdoh"},
    {"SDOHWeight", "sdohweight"},
    {"SDOHWeight", "social determinants"},
    {"SDOHWeight", "obesity"},
    {"SDOHWeight", "weight"},
};

const std::set<std::string> kAll = {"all", "everything"};
const std::set<std::string> kNegators = {"not", "no", "none", "without", "except", "excluding",
                                        "exclude", "skip", "don", "dont", "never"};
const std::set<std::string> kConnectors = {"and", "or", "nor", "t"};

std::vector<std::string> tokenize(const std::string& prompt) {
    std::string cleaned;
    for (char c : prompt) {
        unsigned char u = static_cast<unsigned char>(c);
        cleaned += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ';
    }
    return split_whitespace(cleaned);
}

struct Phrase {
    std::string codebook;
    std::vector<std::string> words;
};

std::vector<Phrase> phrase_table(const std::vector<std::string>& registered) {
    std::set<std::string> reg(registered.begin(), registered.end());
    std::vector<Phrase> table;
    for (const auto& s : kSynonyms)
        if (reg.count(s.codebook)) table.push_back({s.codebook, tokenize(s.phrase)});
    for (const auto& name : registered) {
        table.push_back({name, tokenize(name)});
        table.push_back({name, tokenize(codebook_display_name(name))});
    }
    // Longest phrase first so "patient behaviors" wins over a shorter overlap.
    std::stable_sort(table.begin(), table.end(),
                     [](const Phrase& a, const Phrase& b) { return a.words.size() > b.words.size(); });
    return table;
}

} // namespace

std::vector<std::string> canonical_order(std::vector<std::string> names) {
    const auto& canon = canonical_codebook_names();
    auto rank = [&](const std::string& n) {
        auto it = std::find(canon.begin(), canon.end(), n);
        return static_cast<size_t>(it - canon.begin());
    };
    std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
        size_t ra = rank(a), rb = rank(b);
        if (ra != rb) return ra < rb;
        return a < b;
    });
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return names;
}

RoutingDecision KeywordRouter::route(const std::string& prompt, const std::vector<std::string>& registered) {
    const auto tokens = tokenize(prompt);
    const auto table = phrase_table(registered);
    std::set<std::string> positive, negative;
    bool all = false;
    bool negate_pending = false;  // a negator was seen, no codebook yet
    bool negating_chain = false;  // inside "not X and Y"
    int filler = 0;               // words since the negator

    for (size_t i = 0; i < tokens.size();) {
        const Phrase* hit = nullptr;
        for (const auto& p : table) {
            if (p.words.empty() || i + p.words.size() > tokens.size()) continue;
            if (std::equal(p.words.begin(), p.words.end(), tokens.begin() + static_cast<long>(i))) {
                hit = &p;
                break;
            }
        }
        if (hit) {
            if (negate_pending || negating_chain) {
                negative.insert(hit->codebook);
                negate_pending = false;
                negating_chain = true;
            } else {
                positive.insert(hit->codebook);
            }
            i += hit->words.size();
            continue;
        }
        const std::string& tok = tokens[i];
        if (kAll.count(tok) && !negate_pending) {
            all = true;
        } else if (kNegators.count(tok)) {
            negate_pending = true;
            negating_chain = false;
            filler = 0;
        } else if (!kConnectors.count(tok)) {
            negating_chain = false;
            // "don't run the bias agent" reaches its target within a few words
            if (negate_pending && ++filler > 3) negate_pending = false;
        }
        ++i;
    }

    std::vector<std::string> chosen;
    for (const auto& name : registered) {
        bool in = all || positive.count(name);
        if (in && !negative.count(name)) chosen.push_back(name);
    }
    RoutingDecision d;
    d.agents = canonical_order(std::move(chosen));
    if (d.agents.empty()) d.warning = kNoAgentsWarning;
    return d;
}

RoutingDecision ChatRouter::route(const std::string& prompt, const std::vector<std::string>& registered) {
    ChatRequest req;
    req.temperature = temperature_;
    req.max_tokens = 64;
    req.meta["purpose"] = "route";
    req.messages.push_back({"system", "Choose which annotation codebooks the user wants. Available: " +
                                          join(registered, ", ") +
                                          ". Reply with a comma-separated list of names, or NONE."});
    req.messages.push_back({"user", prompt});
    std::string reply;
    try {
        reply = backend_.complete(req).text;
    } catch (const Error& e) {
        if (!is_transport_error(e)) throw;
        return KeywordRouter().route(prompt, registered);
    }
    std::vector<std::string> chosen;
    std::string cur;
    auto flush = [&]() {
        std::string name = trim(cur);
        cur.clear();
        for (const auto& r : registered)
            if (to_lower(r) == to_lower(name)) chosen.push_back(r);
    };
    for (char c : reply) {
        if (c == ',' || c == '\n') flush();
        else cur += c;
    }
    flush();
    RoutingDecision d;
    d.agents = canonical_order(std::move(chosen));
    if (d.agents.empty()) d.warning = kNoAgentsWarning;
    return d;
}

RoutingDecision plan_route(const std::string& prompt, const std::vector<std::string>& registered) {
    return KeywordRouter().route(prompt, registered);
}

} // namespace mosaic
