#include "mosaic/error.hpp"
#include "mosaic/transcript.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

using namespace mosaic;

namespace {

const char* kSample = R"(# category: rheumatology
[00:00]
Clinician: Hello there. How are you?
Patient: Fine, thanks! My knee hurts.
[silence 00:01:05]
[00:45]
Nurse: The doctor will see you now.
)";

ErrorKind kind_of(std::string_view raw) {
    try {
        parse_transcript(raw, "x");
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error for: " << raw;
    return ErrorKind::IoError;
}

std::optional<int> line_of(std::string_view raw) {
    try {
        parse_transcript(raw, "x");
    } catch (const Error& e) {
        return e.line();
    }
    return std::nullopt;
}

} // namespace

TEST(Transcript, ParsesBlocksTurnsAndSentences) {
    Transcript t = parse_transcript(kSample, "visit");
    EXPECT_EQ(t.id, "visit");
    EXPECT_EQ(t.source_meta.at("category"), "rheumatology");
    ASSERT_EQ(t.blocks.size(), 2u);
    EXPECT_EQ(t.blocks[1].timestamp, 45);
    EXPECT_EQ(t.blocks[0].turn_count, 3);
    ASSERT_EQ(t.turns.size(), 4u);
    EXPECT_EQ(t.turns[0].speaker, Speaker::Clinician);
    ASSERT_EQ(t.turns[0].sentences.size(), 2u);
    EXPECT_EQ(t.turns[0].sentences[1].text, "How are you?");
    EXPECT_EQ(t.turns[1].sentences.size(), 2u);
    EXPECT_TRUE(t.turns[2].is_silence);
    EXPECT_EQ(t.turns[2].silence_seconds, 65);
    EXPECT_TRUE(t.turns[2].sentences.empty());
    EXPECT_EQ(t.turns[3].speaker, Speaker::Other);
    EXPECT_EQ(t.turns[3].block_ref, 45);
    EXPECT_EQ(t.sentence_count(), 5u);
}

TEST(Transcript, UnknownSpeakerIsAWarningNotAnError) {
    Transcript t = parse_transcript(kSample, "visit");
    ASSERT_EQ(t.warnings.size(), 1u);
    EXPECT_NE(t.warnings[0].find("Nurse"), std::string::npos);
    EXPECT_NE(t.warnings[0].find("line 7"), std::string::npos);
}

TEST(Transcript, ClinicianAliases) {
    Transcript t = parse_transcript("[00:00]\nDoctor: Hi.\nphysician: Hi.\nProvider: Hi.\n", "x");
    for (const auto& turn : t.turns) EXPECT_EQ(turn.speaker, Speaker::Clinician);
    EXPECT_TRUE(t.warnings.empty());
}

TEST(Transcript, RejectsMalformedInput) {
    EXPECT_EQ(kind_of(""), ErrorKind::EmptyTranscript);
    EXPECT_EQ(kind_of("[00:00]\n\n"), ErrorKind::EmptyTranscript);
    EXPECT_EQ(kind_of("Clinician: no block yet."), ErrorKind::MalformedLine);
    EXPECT_EQ(kind_of("[00:00]\njust some words"), ErrorKind::MalformedLine);
    EXPECT_EQ(kind_of("[00:00]\n[bogus]"), ErrorKind::MalformedLine);
    EXPECT_EQ(kind_of("[00:00]\n12: number speaker"), ErrorKind::MalformedLine);
    EXPECT_EQ(kind_of("[00:00]\nClinician:   "), ErrorKind::MalformedLine);
    EXPECT_EQ(kind_of("[00:10]\nClinician: a.\n[00:10]\nPatient: b."), ErrorKind::NonMonotoneTimestamp);
    EXPECT_EQ(kind_of("[01:00]\nClinician: a.\n[00:59]\nPatient: b."), ErrorKind::NonMonotoneTimestamp);
    EXPECT_EQ(kind_of("[00:00]\nClinician: a.\n# no colon"), ErrorKind::MalformedLine);
}

TEST(Transcript, ErrorsCarryOneBasedLineNumbers) {
    EXPECT_EQ(line_of("[00:00]\nClinician: fine.\noops"), 3);
    EXPECT_EQ(line_of("[00:10]\nClinician: a.\n\n[00:05]"), 4);
}

TEST(Transcript, SentenceSplittingNeedsTrailingSpace) {
    EXPECT_EQ(split_sentences("Dr. Smith is here. Ok"), (std::vector<std::string>{"Dr.", "Smith is here.", "Ok"}));
    EXPECT_EQ(split_sentences("3.5 mg twice daily"), (std::vector<std::string>{"3.5 mg twice daily"}));
    EXPECT_EQ(split_sentences("Really?! Yes."), (std::vector<std::string>{"Really?!", "Yes."}));
}

TEST(Transcript, RenderIsCanonicalAndRoundTrips) {
    Transcript t = parse_transcript("[00:00]\nClinician:   Hello   there.   Bye.  \n[silence 00:00:03]\n", "x");
    EXPECT_EQ(render_transcript(t), "[00:00]\nClinician: Hello   there. Bye.\n[silence 00:00:03]\n");
    Transcript again = parse_transcript(render_transcript(t), "x");
    EXPECT_EQ(again.turns, t.turns);
    EXPECT_EQ(again.blocks, t.blocks);
}

TEST(Transcript, AnnotatedTagsAnchorToPrecedingSentence) {
    auto a = parse_annotated_transcript(
        "[00:00]\nClinician: A test. [RS] We can order one. [Global::Flow: 3]\nPatient: Girl. [AQ] [Bias::TP]\n", "g");
    ASSERT_EQ(a.transcript.turns.size(), 2u);
    EXPECT_EQ(a.transcript.turns[0].sentences[0].text, "A test.");
    EXPECT_EQ(a.transcript.turns[0].sentences[1].text, "We can order one.");
    ASSERT_EQ(a.tags.size(), 4u);
    EXPECT_EQ(a.tags[0].turn_index, 0);
    EXPECT_EQ(a.tags[0].sent_index, 0);
    EXPECT_EQ(a.tags[0].code, "RS");
    EXPECT_EQ(a.tags[1].sent_index, 1);
    EXPECT_EQ(a.tags[1].qualifier, "Global");
    EXPECT_EQ(a.tags[1].scale, 3);
    EXPECT_EQ(a.tags[2].turn_index, 1);
    EXPECT_EQ(a.tags[3].qualifier, "Bias");
    EXPECT_EQ(a.tags[3].line, 3);
}

TEST(Transcript, AnnotatedAndPlainParsesAgreeOnText) {
    const std::string gold = mosaic::testing::read_fixture("gold_obgyn_01.txt");
    auto a = parse_annotated_transcript(gold, "g");
    Transcript plain = parse_transcript(render_transcript(a.transcript), "g");
    EXPECT_EQ(plain.turns, a.transcript.turns);
}

TEST(Transcript, RenderAnnotatedPlacesTagsAfterSentences) {
    Transcript t = parse_transcript("[00:00]\nClinician: One. Two.\n", "x");
    std::string out = render_annotated(t, [](int, int s) {
        return s == 1 ? std::vector<std::string>{"[WISER::RS]"} : std::vector<std::string>{};
    });
    EXPECT_EQ(out, "[00:00]\nClinician: One. Two. [WISER::RS]\n");
}

TEST(Batching, PartitionsTurnsWithContextOverlap) {
    std::string raw = "[00:00]\n";
    for (int i = 0; i < 25; ++i) raw += (i % 2 ? "Patient: p.\n" : "Clinician: c.\n");
    Transcript t = parse_transcript(raw, "x");
    auto batches = batch_transcript(t, 10, 3);
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].context_begin, 0);
    EXPECT_EQ(batches[1].first_turn, 10);
    EXPECT_EQ(batches[1].context_begin, 7);
    EXPECT_EQ(batches[2].end_turn, 25);
    EXPECT_EQ(batches[2].size(), 5);
    EXPECT_EQ(batches[2].context_size(), 3);
    EXPECT_THROW(batch_transcript(t, 0, 0), Error);
    EXPECT_THROW(batch_transcript(t, 5, 5), Error);
}

TEST(Batching, TimestampsComeFromBlocks) {
    Transcript t = parse_transcript("[00:00]\nClinician: a.\nPatient: b.\n[02:00]\nClinician: c.\n", "x");
    auto b = batch_transcript(t, 2, 1);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].start_timestamp, 0);
    EXPECT_EQ(b[0].end_timestamp, 0);
    EXPECT_EQ(b[1].start_timestamp, 120);
}

TEST(ContextWindow, UpToKPrecedingTurnsPlusOwn) {
    std::string raw = "[00:00]\n";
    for (int i = 0; i < 12; ++i) raw += "Clinician: t" + std::to_string(i) + ".\n";
    Transcript t = parse_transcript(raw, "x");
    auto w = context_window(t, 10);
    ASSERT_EQ(w.size(), 9u);
    EXPECT_EQ(w.front().index, 2);
    EXPECT_EQ(w.back().index, 10);
    EXPECT_EQ(context_window(t, 3).size(), 4u);
    EXPECT_EQ(context_window(t, 0, 0).size(), 1u);
    EXPECT_THROW(context_window(t, 12), Error);
    EXPECT_EQ(render_turns(context_window(t, 1, 1)), "Clinician: t0.\nClinician: t1.\n");
}

TEST(Synthetic, GeneratedTranscriptsParse) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        std::string raw = mosaic::testing::random_transcript_text(rng);
        EXPECT_NO_THROW(parse_transcript(raw, "s")) << raw;
    }
}
