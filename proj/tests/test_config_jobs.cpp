#include "mosaic/config.hpp"
#include "mosaic/error.hpp"
#include "mosaic/job_store.hpp"
#include "mosaic/text_util.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace mosaic;
using mosaic::testing::ScratchDir;

TEST(RunConfig, MergeAndValidate) {
    RunConfig c;
    c.merge({{"max_turns", 10}, {"context_overlap", 2}, {"scale_mode", "segment"}, {"lambda", 0.7}});
    EXPECT_EQ(c.max_turns, 10);
    EXPECT_EQ(c.scale_mode, ScaleMode::Segment);
    EXPECT_NO_THROW(c.validate());
    auto opt = c.annotate_options();
    EXPECT_EQ(opt.max_turns, 10);
    EXPECT_EQ(opt.context_overlap, 2);
    EXPECT_DOUBLE_EQ(opt.retrieval.lambda, 0.7);
    RunConfig round;
    round.merge(c.to_json());
    EXPECT_EQ(round.to_json(), c.to_json());

    EXPECT_THROW(c.merge({{"bogus", 1}}), Error);
    EXPECT_THROW(c.merge({{"max_turns", "ten"}}), Error);
    EXPECT_THROW(c.merge(nlohmann::json::array()), Error);
    auto invalid = [](nlohmann::json j) {
        RunConfig r;
        r.merge(j);
        try {
            r.validate();
        } catch (const Error& e) {
            return e.kind() == ErrorKind::InvalidArgument;
        }
        return false;
    };
    EXPECT_TRUE(invalid({{"temperature", 1.5}}));
    EXPECT_TRUE(invalid({{"context_overlap", 120}}));
    EXPECT_TRUE(invalid({{"lambda", -0.1}}));
    EXPECT_TRUE(invalid({{"stride", 300}}));
    EXPECT_TRUE(invalid({{"parallelism", 0}}));
    EXPECT_FALSE(invalid({{"temperature", 0.0}}));
}

TEST(ServiceConfig, FileAndEnvironment) {
    auto c = ServiceConfig::from_json({{"chat", {{"url", "http://127.0.0.1:9/v1/chat"}, {"retries", 1}}},
                                       {"embedding_dimension", 64},
                                       {"training_manifest", {"a", "b"}},
                                       {"run", {{"k", 3}}}});
    EXPECT_EQ(c.chat.url, "http://127.0.0.1:9/v1/chat");
    EXPECT_EQ(c.chat.token_env, "MOSAIC_CHAT_TOKEN");
    EXPECT_EQ(c.chat.retries, 1);
    EXPECT_EQ(c.embedding_dimension, 64u);
    EXPECT_EQ(c.run.k, 3);
    EXPECT_EQ(*c.training_manifest, (std::set<std::string>{"a", "b"}));
    EXPECT_THROW(ServiceConfig::from_json({{"run", {{"k", 0}}}}), Error);
    EXPECT_THROW(ServiceConfig::from_json(nlohmann::json::array()), Error);

    ::setenv("MOSAIC_DATA_DIR", "/tmp/elsewhere", 1);
    c.apply_env();
    ::unsetenv("MOSAIC_DATA_DIR");
    EXPECT_EQ(c.data_dir, "/tmp/elsewhere");
    EXPECT_FALSE(c.to_json().dump().find("\"token\"") != std::string::npos);

    ScratchDir dir;
    write_file(dir.file("bad.json"), "{not json");
    EXPECT_THROW(ServiceConfig::load(dir.file("bad.json")), Error);
    write_file(dir.file("ok.json"), R"({"port": 9000})");
    EXPECT_EQ(ServiceConfig::load(dir.file("ok.json")).port, 9000);
}

TEST(JobStore, CreatesSavesAndFindsJobs) {
    ScratchDir dir;
    JobStore store(dir.path());
    JobRecord a = store.create(JobKind::Annotate);
    JobRecord b = store.create(JobKind::Verify);
    EXPECT_EQ(a.job_id, "job-000001");
    EXPECT_EQ(b.job_id, "job-000002");
    store.write_artifact(a, "annotations.json", "{}");
    a.state = JobState::Done;
    a.summary["x"] = 1;
    store.save(a);
    auto found = store.find(a.job_id);
    ASSERT_TRUE(found);
    EXPECT_EQ(found->state, JobState::Done);
    EXPECT_EQ(found->artifacts, (std::vector<std::string>{"annotations.json"}));
    EXPECT_EQ(found->summary["x"], 1);
    EXPECT_TRUE(found->consistent());
    EXPECT_EQ(store.find(b.job_id)->kind, JobKind::Verify);
    EXPECT_EQ(*store.read_artifact(a.job_id, "annotations.json"), "{}");
    EXPECT_FALSE(store.read_artifact(a.job_id, "../job-000002/job.json"));
    EXPECT_FALSE(store.find("../x"));
    EXPECT_FALSE(store.find("job-999999"));

    JobStore reopened(dir.path());
    EXPECT_EQ(reopened.create(JobKind::UpdateCodebook).job_id, "job-000003");
}

TEST(JobRecord, TerminalJobsNeedArtifactsOrError) {
    JobRecord r;
    r.state = JobState::Done;
    EXPECT_FALSE(r.consistent());
    r.error = "x";
    EXPECT_TRUE(r.consistent());
    r.state = JobState::Running;
    r.error.reset();
    EXPECT_TRUE(r.consistent());
    auto j = r.to_json();
    EXPECT_EQ(j["state"], "running");
    EXPECT_TRUE(j["error"].is_null());
    EXPECT_EQ(JobRecord::from_json(j).to_json(), j);
}
