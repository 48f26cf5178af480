#include "mosaic/annotation.hpp"
#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "support/mock_backends.hpp"

#include <gtest/gtest.h>

using namespace mosaic;
using mosaic::testing::RecordingBackend;

namespace {

const char* kVisit = R"([00:00]
Clinician: Hello. How are you feeling today?
Patient: I'm really worried about the bills.
[silence 00:00:05]
[01:00]
Clinician: That sounds stressful. What worries you most?
Patient: Paying for the medication.
Clinician: So money is the main worry.
)";

Codebook builtin(const std::string& name) { return parse_codebook(builtin_codebook_doc(name), name); }

Transcript visit() { return parse_transcript(kVisit, "v1"); }

Batch whole(const Transcript& t) { return batch_transcript(t, 1000, 0)[0]; }

// Routes each call by codebook to a fixed reply.
class PerCodebookBackend final : public ChatBackend {
public:
    std::map<std::string, std::string> replies;
    std::set<std::string> down;
    ChatResponse complete(const ChatRequest& r) override {
        const std::string cb = r.meta.at("codebook");
        if (down.count(cb)) throw Error(ErrorKind::BackendUnavailable, "down");
        ChatResponse res;
        res.text = replies.count(cb) ? replies.at(cb) : "";
        return res;
    }
    std::string describe() const override { return "per-codebook"; }
};

} // namespace

TEST(Payload, MarksContextAndNumbersSentences) {
    Transcript t = visit();
    auto batches = batch_transcript(t, 3, 2);
    ASSERT_EQ(batches.size(), 2u);
    std::string p = render_payload(t, batches[1]);
    EXPECT_EQ(p,
              "Transcript v1, batch 1 (turns 3-5, [01:00] to [01:00])\n"
              "(context) T1 Patient: I'm really worried about the bills.\n"
              "(context) T2 [silence 00:00:05]\n"
              "T3.S0 Clinician: That sounds stressful.\n"
              "T3.S1 Clinician: What worries you most?\n"
              "T4.S0 Patient: Paying for the medication.\n"
              "T5.S0 Clinician: So money is the main worry.\n");
}

TEST(Prompt, HasAllSectionsInOrder) {
    Transcript t = visit();
    Codebook cb = builtin("WISER");
    RuleChunk rule;
    rule.chunk_id = 4;
    rule.text = "Reflective Statement [RS]";
    ExampleEntry shot;
    shot.id = "ex000001";
    shot.codebook = "WISER";
    shot.sentence = "A girl.";
    shot.human_label = "RS";
    shot.agent_label = "ES";
    shot.outcome = Outcome::ContrastiveError;
    Prompt p = assemble_prompt(t, whole(t), cb, {rule}, {shot});
    const std::string s = p.system_text();
    auto at = [&](const char* h) { return s.find(h); };
    ASSERT_NE(at("## Instructions"), std::string::npos);
    EXPECT_LT(at("## Instructions"), at("## Valid labels"));
    EXPECT_LT(at("## Valid labels"), at("## Coding rules"));
    EXPECT_LT(at("## Coding rules"), at("## Examples"));
    EXPECT_NE(s.find("[rule 4] Reflective Statement [RS]"), std::string::npos);
    EXPECT_NE(s.find("Wrong label: [ES]"), std::string::npos);
    EXPECT_NE(s.find("Correct label: [RS]"), std::string::npos);
    EXPECT_NE(s.find(cb.version), std::string::npos);
    EXPECT_EQ(p.valid_labels.back(), "None");
    EXPECT_EQ(p.valid_labels.front(), "EO");
    ASSERT_EQ(p.messages().size(), 2u);
    EXPECT_EQ(p.messages()[1].content, p.payload);
    EXPECT_EQ(p.token_estimate(), (s.size() + p.payload.size() + 3) / 4);

    Prompt bare = assemble_prompt(t, whole(t), cb, {}, {});
    EXPECT_EQ(bare.system_text().find("## Examples"), std::string::npos);
}

TEST(Prompt, ScaleInstructionsFollowMode) {
    Transcript t = visit();
    Codebook g = builtin("Global");
    EXPECT_NE(assemble_prompt(t, whole(t), g, {}, {}, 0, ScaleMode::Encounter).system_instructions.find("whole encounter"),
              std::string::npos);
    EXPECT_NE(assemble_prompt(t, whole(t), g, {}, {}, 0, ScaleMode::Segment).system_instructions.find("segment"),
              std::string::npos);
    EXPECT_EQ(assemble_prompt(t, whole(t), builtin("WISER"), {}, {}).system_instructions.find("Rate "),
              std::string::npos);
}

TEST(Prompt, RejectsForeignExamplesAndOversize) {
    Transcript t = visit();
    ExampleEntry shot;
    shot.codebook = "Bias";
    EXPECT_THROW(assemble_prompt(t, whole(t), builtin("WISER"), {}, {shot}), Error);
    try {
        assemble_prompt(t, whole(t), builtin("WISER"), {}, {}, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PromptTooLarge);
    }
}

TEST(ParseOutput, AcceptsGrammarVariants) {
    Transcript t = visit();
    LabelRegistry reg = label_registry(builtin("WISER"));
    auto out = parse_model_output("T1.S0: [EO]\n- t3 . s1 = [EQ]\n* T5.S0 - [RS] extra words\nT0.S1: [None]\n", reg,
                                  t, whole(t));
    ASSERT_EQ(out.annotations.size(), 3u);
    EXPECT_EQ(out.tuples, 4u);
    EXPECT_EQ(out.annotations[0].key(), "EO");
    EXPECT_EQ(out.annotations[1].turn_index, 3);
    EXPECT_EQ(out.annotations[1].sent_index, 1);
    EXPECT_EQ(out.annotations[2].raw_span, "* T5.S0 - [RS] extra words");
    EXPECT_EQ(out.annotations[0].codebook, "WISER");
    EXPECT_TRUE(out.warnings.empty());
}

TEST(ParseOutput, InvalidEntriesBecomeWarnings) {
    Transcript t = visit();
    auto batches = batch_transcript(t, 3, 2);
    LabelRegistry reg = label_registry(builtin("WISER"));
    auto out = parse_model_output("T1.S0: [EO]\n"     // context turn of batch 1
                                  "T9.S0: [RS]\n"     // beyond transcript
                                  "T3.S5: [RS]\n"     // no such sentence
                                  "T3.S0: [AQ]\n"     // other codebook's label
                                  "T3.S0: [ES] [RS]\n"  // second tag ignored
                                  "T3.S0: [RS]\n"     // duplicate event slot
                                  "Some chatter\n"
                                  "T4.S0: no tag\n",
                                  reg, t, batches[1]);
    ASSERT_EQ(out.annotations.size(), 1u);
    EXPECT_EQ(out.annotations[0].key(), "ES");
    EXPECT_EQ(out.warnings.size(), 8u);
}

TEST(ParseOutput, ScaleDimensionsHaveSeparateSlots) {
    Transcript t = visit();
    LabelRegistry reg = label_registry(builtin("Global"));
    auto out = parse_model_output("T0.S0: [Flow: 4]\nT0.S0: [Warmth: 5]\nT0.S0: [Flow: 2]\nT0.S1: [Flow: 9]\n"
                                  "T0.S1: [Warmth]\n",
                                  reg, t, whole(t));
    ASSERT_EQ(out.annotations.size(), 2u);
    EXPECT_EQ(out.annotations[0].key(), "Flow: 4");
    EXPECT_EQ(out.annotations[0].label, "Flow");
    EXPECT_EQ(out.annotations[0].scale_value, 4);
    EXPECT_EQ(out.annotations[1].key(), "Warmth: 5");
    EXPECT_EQ(out.warnings.size(), 3u);
}

TEST(ParseOutput, GarbageIsUnparseableButBlankIsEmpty) {
    Transcript t = visit();
    LabelRegistry reg = label_registry(builtin("WISER"));
    EXPECT_TRUE(parse_model_output("  \n", reg, t, whole(t)).annotations.empty());
    try {
        parse_model_output("I think the clinician was kind.", reg, t, whole(t));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnparseableOutput);
    }
}

TEST(NoneFill, CoversEveryBatchSentence) {
    Transcript t = visit();
    Annotation a;
    a.transcript_id = "v1";
    a.turn_index = 1;
    a.codebook = "WISER";
    a.label = "EO";
    auto filled = none_fill({a}, t, whole(t), "WISER");
    ASSERT_EQ(filled.size(), t.sentence_count());
    EXPECT_EQ(filled[2].key(), "EO");
    EXPECT_EQ(filled[0].key(), "None");
    EXPECT_EQ(filled[0].codebook, "WISER");
}

TEST(AnnotateBatch, ReasksOnceWithFormatReminder) {
    Transcript t = visit();
    Codebook cb = builtin("WISER");
    ScriptedChatBackend backend(nlohmann::json{
        {"responses",
         {{{"codebook", "WISER"}, {"batch_id", 0}, {"text", "The patient voices worry."}},
          {{"codebook", "WISER"}, {"batch_id", 0}, {"purpose", "reask"}, {"text", "T1.S0: [EO]"}}}}});
    std::vector<ChatRequest> seen;
    auto outcome = annotate_batch(assemble_prompt(t, whole(t), cb, {}, {}), backend, t, whole(t), label_registry(cb),
                                  {}, [&](const ChatRequest& r, const ChatResponse&) { seen.push_back(r); });
    EXPECT_TRUE(outcome.parse_recovered);
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_EQ(seen[1].meta.at("purpose"), "reask");
    ASSERT_EQ(seen[1].messages.size(), 4u);
    EXPECT_EQ(seen[1].messages[2].role, "assistant");
    EXPECT_EQ(seen[1].messages[2].content, "The patient voices worry.");
    EXPECT_EQ(seen[0].meta.at("transcript_id"), "v1");
    ASSERT_EQ(outcome.annotations.size(), t.sentence_count());
    EXPECT_EQ(outcome.annotations[2].key(), "EO");
    EXPECT_TRUE(outcome.annotations[2].parse_recovered);
}

TEST(AnnotateBatch, SecondGarbageReplyFails) {
    Transcript t = visit();
    Codebook cb = builtin("WISER");
    RecordingBackend garbage("no idea");
    EXPECT_THROW(annotate_batch(assemble_prompt(t, whole(t), cb, {}, {}), garbage, t, whole(t), label_registry(cb), {}),
                 Error);
    EXPECT_EQ(garbage.requests().size(), 2u);
}

class AnnotateTranscriptTest : public ::testing::Test {
protected:
    void SetUp() override { store.install_builtins(); }
    HashEmbedder embedder{128};
    CodebookStore store{embedder};
};

TEST_F(AnnotateTranscriptTest, FansOutAndMergesPerCodebook) {
    Transcript t = visit();
    PerCodebookBackend backend;
    backend.replies["WISER"] = "T1.S0: [EO]\nT5.S0: [RS]\n";
    backend.replies["Global"] = "T3.S0: [Warmth: 4]\n";
    AnnotatorDeps deps;
    deps.chat = &backend;
    AnnotateOptions opt;
    opt.max_turns = 2;
    opt.context_overlap = 1;
    auto results = annotate_transcript(t, {"WISER", "Global"}, store, deps, opt);
    ASSERT_EQ(results.size(), 2u);
    const auto& w = results.at("WISER");
    EXPECT_EQ(w.status, "done");
    EXPECT_EQ(w.batches, 3);
    ASSERT_EQ(w.annotations.size(), t.sentence_count());
    EXPECT_EQ(w.annotations[2].key(), "EO");
    EXPECT_EQ(w.annotations[6].key(), "RS");
    EXPECT_EQ(w.versions, (std::set<std::string>{*store.version("WISER")}));
    // WISER labels outside the batch that owns a turn are dropped with a warning.
    EXPECT_FALSE(w.warnings.empty());
    const auto& g = results.at("Global");
    EXPECT_EQ(g.annotations[3].key(), "Warmth: 4");
}

TEST_F(AnnotateTranscriptTest, EncounterModeKeepsFirstRatingPerDimension) {
    std::string raw = "[00:00]\n";
    for (int i = 0; i < 6; ++i) raw += "Clinician: Line " + std::to_string(i) + ".\n";
    Transcript t = parse_transcript(raw, "s");
    PerCodebookBackend backend;
    backend.replies["Global"] = "T0.S0: [Flow: 3]\nT2.S0: [Flow: 4]\nT4.S0: [Flow: 5]\nT4.S0: [Warmth: 2]\n";
    AnnotatorDeps deps;
    deps.chat = &backend;
    AnnotateOptions opt;
    opt.max_turns = 2;
    opt.context_overlap = 0;

    auto count_scale = [](const CodebookResult& r) {
        int n = 0;
        for (const auto& a : r.annotations) n += a.scale_value ? 1 : 0;
        return n;
    };
    opt.scale_mode = ScaleMode::Encounter;
    auto enc = annotate_transcript(t, {"Global"}, store, deps, opt).at("Global");
    EXPECT_EQ(count_scale(enc), 2);  // Flow: 3 and Warmth: 2
    EXPECT_EQ(enc.annotations.size(), 6u);
    opt.scale_mode = ScaleMode::Segment;
    EXPECT_EQ(count_scale(annotate_transcript(t, {"Global"}, store, deps, opt).at("Global")), 4);
    opt.scale_mode = ScaleMode::Sentence;
    EXPECT_EQ(count_scale(annotate_transcript(t, {"Global"}, store, deps, opt).at("Global")), 4);
}

TEST_F(AnnotateTranscriptTest, FailingCodebookDoesNotAffectOthers) {
    Transcript t = visit();
    PerCodebookBackend backend;
    backend.replies["WISER"] = "T1.S0: [EO]\n";
    backend.down = {"Bias"};
    AnnotatorDeps deps;
    deps.chat = &backend;
    auto results = annotate_transcript(t, {"WISER", "Bias"}, store, deps, AnnotateOptions{});
    EXPECT_EQ(results.at("WISER").status, "done");
    EXPECT_EQ(results.at("Bias").status, "failed");
    EXPECT_TRUE(results.at("Bias").annotations.empty());
    ASSERT_TRUE(results.at("Bias").error);
    EXPECT_NE(results.at("Bias").error->find("BackendUnavailable"), std::string::npos);
}

TEST_F(AnnotateTranscriptTest, OversizedPromptsAreSplit) {
    std::string raw = "[00:00]\n";
    for (int i = 0; i < 8; ++i) raw += "Patient: Sentence number " + std::to_string(i) + " is here.\n";
    Transcript t = parse_transcript(raw, "big");
    RecordingBackend backend("");
    AnnotatorDeps deps;
    deps.chat = &backend;
    AnnotateOptions opt;
    opt.context_overlap = 1;
    opt.parallelism = 1;
    store.apply_update(parse_codebook("@label X | event | thing\n# Rule\nUse [X] for things.\n", "Tiny"));
    auto snap = store.snapshot("Tiny");
    ASSERT_EQ(snap->index.chunks.size(), 1u);
    // limit sits between a 4-turn and an 8-turn prompt
    opt.max_prompt_tokens = assemble_prompt(t, {0, 0, 8, 0, 0, 0}, snap->codebook, snap->index.chunks, {}).token_estimate() - 1;
    auto r = annotate_transcript(t, {"Tiny"}, store, deps, opt).at("Tiny");
    EXPECT_EQ(r.status, "done") << (r.error ? *r.error : "");
    EXPECT_GT(backend.requests().size(), 1u);
    EXPECT_EQ(r.annotations.size(), 8u);
    bool split_warning = false;
    for (const auto& w : r.warnings) split_warning = split_warning || w.find("split at turn") != std::string::npos;
    EXPECT_TRUE(split_warning);
    for (const auto& req : backend.requests()) EXPECT_LE((req.messages[0].content.size() + req.messages[1].content.size() + 3) / 4, opt.max_prompt_tokens);
}

TEST(ScaleMode, NamesRoundTrip) {
    for (auto m : {ScaleMode::Sentence, ScaleMode::Segment, ScaleMode::Encounter})
        EXPECT_EQ(parse_scale_mode(scale_mode_name(m)), m);
    EXPECT_THROW(parse_scale_mode("weekly"), Error);
}
