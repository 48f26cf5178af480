#include "support/synthetic.hpp"

#include "mosaic/tags.hpp"
#include "mosaic/transcript.hpp"

#include <cstdio>
#include <set>

namespace mosaic::testing {

namespace {

const std::vector<std::string> kWords = {
    "pain",  "knee",  "sleep",   "worried",  "medication", "morning", "dose",   "walk",   "baby",   "weight",
    "blood", "test",  "results", "family",   "work",       "better",  "worse",  "swelling", "appointment",
    "diet",  "plan",  "week",    "tired",    "stiff",      "hands",   "smoke",  "quit",   "exercise", "food"};

std::string random_sentence(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(2, 9);
    std::uniform_int_distribution<size_t> word(0, kWords.size() - 1);
    std::uniform_int_distribution<int> end(0, 5);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (i) s += (i == n / 2 && end(rng) == 0) ? ", " : " ";
        s += kWords[word(rng)];
    }
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    int e = end(rng);
    s += e == 0 ? "?" : e == 1 ? "!" : ".";
    return s;
}

std::string speaker(std::mt19937_64& rng, bool others) {
    std::uniform_int_distribution<int> d(0, others ? 9 : 7);
    int v = d(rng);
    if (v < 4) return "Clinician";
    if (v < 8) return "Patient";
    return v == 8 ? "Nurse" : "Interpreter";
}

std::string timestamp(int seconds) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "[%02d:%02d]", seconds / 60, seconds % 60);
    return buf;
}

std::string silence(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> secs(1, 400);
    int s = secs(rng);
    char buf[48];
    std::snprintf(buf, sizeof buf, "[silence %02d:%02d:%02d]", s / 3600, (s / 60) % 60, s % 60);
    return buf;
}

} // namespace

std::string random_transcript_text(std::mt19937_64& rng, const SyntheticOptions& o) {
    std::uniform_int_distribution<int> turns_d(o.min_turns, o.max_turns);
    std::uniform_int_distribution<int> sents(1, 4);
    std::uniform_int_distribution<int> coin(0, 9);
    std::uniform_int_distribution<int> step(5, 200);
    std::string out;
    if (o.metadata && coin(rng) < 3) out += "# category: " + std::string(coin(rng) < 5 ? "rheumatology" : "obgyn") + "\n";
    int ts = coin(rng) * 7;
    out += timestamp(ts) + "\n";
    int n = turns_d(rng);
    bool last_was_speech = false;
    for (int i = 0; i < n; ++i) {
        if (i > 0 && coin(rng) == 0) {
            ts += step(rng);
            out += timestamp(ts) + "\n";
        }
        if (o.silences && last_was_speech && coin(rng) == 0) {
            out += silence(rng) + "\n";
            last_was_speech = false;
            continue;
        }
        std::string line = speaker(rng, o.other_speakers) + ":";
        line += (o.messy_spacing && coin(rng) == 0) ? "   " : " ";
        int k = sents(rng);
        for (int s = 0; s < k; ++s) {
            if (s) line += (o.messy_spacing && coin(rng) == 0) ? "  " : " ";
            line += random_sentence(rng);
        }
        if (o.messy_spacing && coin(rng) == 0) line += "  ";
        out += line + "\n";
        last_was_speech = true;
    }
    return out;
}

std::string random_annotated_transcript(std::mt19937_64& rng, const std::map<std::string, LabelRegistry>& registries,
                                        int turns, double label_rate) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> sents(1, 3);
    std::set<std::pair<std::string, std::string>> rated;  // (codebook, scale code)
    std::string out = "[00:00]\n";
    for (int i = 0; i < turns; ++i) {
        if (i > 0 && i % 10 == 0) out += timestamp(i * 12) + "\n";
        std::string line = std::string(i % 2 == 0 ? "Clinician" : "Patient") + ":";
        int k = sents(rng);
        for (int s = 0; s < k; ++s) {
            line += " " + random_sentence(rng);
            for (const auto& [cb, reg] : registries) {
                if (u(rng) >= label_rate) continue;
                const auto& labels = reg.labels();
                const LabelDef& def = labels[static_cast<size_t>(u(rng) * labels.size()) % labels.size()];
                if (def.kind == LabelKind::Scale) {
                    if (!rated.insert({cb, def.code}).second) continue;
                    std::uniform_int_distribution<int> v(def.scale_min, def.scale_max);
                    line += " " + render_tag(def.code, v(rng), cb);
                } else {
                    line += " " + render_tag(def.code, std::nullopt, cb);
                }
            }
        }
        out += line + "\n";
    }
    return out;
}

} // namespace mosaic::testing
