#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/chat_backend.hpp"
#include "mosaic/error.hpp"
#include "mosaic/routing.hpp"
#include "support/fixtures.hpp"
#include "support/mock_backends.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <fstream>

using namespace mosaic;
using mosaic::testing::FlakyBackend;
using mosaic::testing::RecordingBackend;

namespace {

ChatRequest request(const std::string& codebook, int batch, const std::string& purpose = "annotate") {
    ChatRequest r;
    r.messages = {{"system", "s"}, {"user", "u " + codebook + std::to_string(batch)}};
    r.meta = {{"codebook", codebook}, {"batch_id", std::to_string(batch)}, {"purpose", purpose}};
    return r;
}

const std::vector<std::string>& all() { return canonical_codebook_names(); }

} // namespace

TEST(ChatRequest, WireJsonExcludesMeta) {
    ChatRequest r = request("WISER", 0);
    r.model = "m";
    auto j = r.wire_json();
    EXPECT_EQ(j.at("model"), "m");
    EXPECT_EQ(j.at("messages").size(), 2u);
    EXPECT_DOUBLE_EQ(j.at("temperature").get<double>(), 0.3);
    EXPECT_EQ(j.at("max_tokens"), 2048);
    EXPECT_FALSE(j.contains("meta"));
    ChatRequest other = r;
    other.meta["batch_id"] = "9";
    EXPECT_EQ(other.hash(), r.hash());
    other.temperature = 0.0;
    EXPECT_NE(other.hash(), r.hash());
}

TEST(ScriptedBackend, MatchesByHashThenBatchThenDefault) {
    ChatRequest byhash = request("Bias", 5);
    nlohmann::json fixture = {
        {"responses",
         {{{"codebook", "WISER"}, {"batch_id", 0}, {"text", "T0.S0: [RS]"}},
          {{"codebook", "WISER"}, {"batch_id", 0}, {"purpose", "verify"}, {"text", "verified"}},
          {{"request_hash", byhash.hash()}, {"text", "hashed"}}}},
        {"default", ""}};
    ScriptedChatBackend b(fixture);
    EXPECT_EQ(b.complete(request("WISER", 0)).text, "T0.S0: [RS]");
    EXPECT_EQ(b.complete(request("WISER", 0, "reask")).text, "T0.S0: [RS]");
    EXPECT_EQ(b.complete(request("WISER", 0, "verify")).text, "verified");
    EXPECT_EQ(b.complete(byhash).text, "hashed");
    EXPECT_EQ(b.complete(request("Global", 3)).text, "");
    EXPECT_EQ(b.calls(), 5u);
    EXPECT_EQ(b.describe().rfind("scripted:", 0), 0u);
}

TEST(ScriptedBackend, NoMatchWithoutDefaultIsUnavailable) {
    ScriptedChatBackend b(nlohmann::json{{"responses", nlohmann::json::array()}});
    try {
        b.complete(request("WISER", 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BackendUnavailable);
    }
}

TEST(ScriptedBackend, LoadsFromFile) {
    mosaic::testing::ScratchDir dir;
    std::ofstream(dir.file("f.json")) << R"({"responses": [], "default": "T1.S0: [OE]"})";
    auto b = ScriptedChatBackend::from_file(dir.file("f.json"));
    EXPECT_EQ(b->complete(request("X", 1)).text, "T1.S0: [OE]");
    std::ofstream(dir.file("bad.json")) << "{nope";
    EXPECT_THROW(ScriptedChatBackend::from_file(dir.file("bad.json")), Error);
    EXPECT_THROW(ScriptedChatBackend::from_file(dir.file("missing.json")), Error);
}

TEST(SimpleBackends, NullAndUnavailable) {
    NullChatBackend n;
    EXPECT_EQ(n.complete(request("X", 0)).text, "");
    UnavailableChatBackend u("nope");
    EXPECT_THROW(u.complete(request("X", 0)), Error);
    EXPECT_EQ(u.describe(), "unavailable");
}

TEST(Routing, CanonicalOrder) {
    EXPECT_EQ(canonical_order({"Bias", "Zeta", "WISER", "Alpha", "Bias"}),
              (std::vector<std::string>{"WISER", "Bias", "Alpha", "Zeta"}));
}

TEST(Routing, NegationRemovesNamedCodebooks) {
    EXPECT_EQ(plan_route("run all except bias", all()).agents,
              (std::vector<std::string>{"WISER", "Global", "Intervention", "PatientBehavior", "SDOHWeight"}));
    EXPECT_EQ(plan_route("run wiser but not bias or global", all()).agents, (std::vector<std::string>{"WISER"}));
    EXPECT_EQ(plan_route("don't run bias, just empathy", all()).agents, (std::vector<std::string>{"WISER"}));
    EXPECT_EQ(plan_route("I have no idea what this visit was about, run bias", all()).agents,
              (std::vector<std::string>{"Bias"}));
}

TEST(Routing, EmptyDecisionCarriesWarning) {
    auto d = plan_route("hello there", all());
    EXPECT_TRUE(d.agents.empty());
    EXPECT_EQ(d.warning, std::string(kNoAgentsWarning));
    auto ok = plan_route("run bias", all());
    EXPECT_FALSE(ok.warning);
}

TEST(Routing, OnlyRegisteredCodebooksAreChosen) {
    EXPECT_EQ(plan_route("run all", {"Bias", "WISER"}).agents, (std::vector<std::string>{"WISER", "Bias"}));
    EXPECT_TRUE(plan_route("run global", {"Bias"}).agents.empty());
    EXPECT_EQ(plan_route("run smoking and bias", {"Bias", "Smoking"}).agents,
              (std::vector<std::string>{"Bias", "Smoking"}));
}

TEST(ChatRouter, ParsesReplyAndFallsBackOnOutage) {
    RecordingBackend rec("Bias, wiser, Nonsense");
    ChatRouter r(rec, 0.0);
    auto d = r.route("whatever", all());
    EXPECT_EQ(d.agents, (std::vector<std::string>{"WISER", "Bias"}));
    ASSERT_EQ(rec.requests().size(), 1u);
    EXPECT_EQ(rec.requests()[0].meta.at("purpose"), "route");

    RecordingBackend none("NONE");
    EXPECT_EQ(ChatRouter(none, 0.0).route("x", all()).warning, std::string(kNoAgentsWarning));

    UnavailableChatBackend down;
    ChatRouter fallback(down, 0.0);
    EXPECT_EQ(fallback.route("run global", all()).agents, (std::vector<std::string>{"Global"}));
}

TEST(RoutingTable, ReferenceRowsReproduce) {
    auto table = nlohmann::json::parse(mosaic::testing::read_fixture("routing_table.json"));
    const auto every = table["all"].get<std::vector<std::string>>();
    int pass_rows = 0, no_agent_rows = 0;
    for (const auto& row : table["rows"]) {
        const std::string prompt = row["prompt"];
        auto d = plan_route(prompt, every);
        if (row["verdict"] == "PASS") {
            ++pass_rows;
            auto expected = row["expected"].is_string() ? every : canonical_order(row["expected"]);
            EXPECT_EQ(d.agents, expected) << prompt;
        } else {
            EXPECT_EQ(d.agents, canonical_order(row["pinned"])) << prompt;
        }
        if (row.value("warning", false)) {
            ++no_agent_rows;
            EXPECT_EQ(d.warning, std::string(kNoAgentsWarning)) << prompt;
        } else if (row["verdict"] == "PASS") {
            EXPECT_FALSE(d.warning) << prompt;
        }
    }
    EXPECT_EQ(pass_rows, 28);
    EXPECT_EQ(no_agent_rows, 5);
}
