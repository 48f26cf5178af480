#include "mosaic/error.hpp"
#include "mosaic/tags.hpp"
#include "mosaic/text_util.hpp"

#include <gtest/gtest.h>

using namespace mosaic;

TEST(TextUtil, TrimAndSplit) {
    EXPECT_EQ(trim("  a b \t"), "a b");
    EXPECT_EQ(split_whitespace(" a  b\tc "), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(split_lines("a\r\nb\n\nc\n"), (std::vector<std::string>{"a", "b", "", "c"}));
    EXPECT_EQ(collapse_whitespace("  x   y "), "x y");
    EXPECT_TRUE(starts_with_ci("Clinician: hi", "CLINICIAN"));
}

TEST(TextUtil, RoundHalfUpAtThreeDecimals) {
    EXPECT_EQ(format3(2.0 / 3.0), "0.667");
    EXPECT_EQ(format3(0.6665), "0.667");
    EXPECT_EQ(format3(0.0), "0.000");
    EXPECT_EQ(format3(1.0), "1.000");
    EXPECT_DOUBLE_EQ(round3(0.12449), 0.124);
}

TEST(TextUtil, CsvEscaping) {
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_row({"a", "b c", "x\ny"}), "a,b c,\"x\ny\"\n");
}

TEST(TextUtil, FnvIsStable) {
    EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
    EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Error, MessageCarriesKindAndLine) {
    Error e(ErrorKind::MalformedLine, "bad", 7);
    EXPECT_STREQ(e.what(), "MalformedLine(7): bad");
    EXPECT_EQ(e.detail(), "bad");
    EXPECT_EQ(e.line(), 7);
    EXPECT_FALSE(is_transport_error(e));
    EXPECT_TRUE(is_transport_error(Error(ErrorKind::BackendUnavailable, "down")));
}

TEST(Tags, FindsEventScaleAndQualifiedTags) {
    auto tags = find_tags("A girl. [RS] then [GO: 2] and [Bias::Rushed:4] [ASSIST  w/ Solution]");
    ASSERT_EQ(tags.size(), 4u);
    EXPECT_EQ(tags[0].code, "RS");
    EXPECT_FALSE(tags[0].scale);
    EXPECT_EQ(tags[1].key(), "GO: 2");
    EXPECT_EQ(tags[2].qualifier, "Bias");
    EXPECT_EQ(tags[2].key(), "Rushed: 4");
    EXPECT_EQ(tags[3].code, "ASSIST w/ Solution");
}

TEST(Tags, IgnoresNonTagBrackets) {
    EXPECT_TRUE(find_tags("[00:30]").empty());
    EXPECT_TRUE(find_tags("[silence 00:00:04]").empty());
    EXPECT_TRUE(find_tags("no brackets here").empty());
}

TEST(Tags, RenderRoundTrips) {
    EXPECT_EQ(render_tag("Flow", 4), "[Flow: 4]");
    EXPECT_EQ(render_tag("S", std::nullopt, "WISER"), "[WISER::S]");
    auto t = find_tags(render_tag("Warmth", 3, "Global"));
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].qualifier, "Global");
    EXPECT_EQ(t[0].key(), "Warmth: 3");
}
