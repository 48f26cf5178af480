#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/error.hpp"
#include "mosaic/retrieval.hpp"
#include "mosaic/vector_index.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace mosaic;

namespace {

EmbeddingVector random_unit(std::mt19937_64& rng, size_t dim) {
    std::normal_distribution<float> g(0.f, 1.f);
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    return EmbeddingVector::normalized(v);
}

ScoredChunk candidate(int id, EmbeddingVector v, double relevance) {
    ScoredChunk c;
    c.chunk.chunk_id = id;
    c.chunk.text = "chunk " + std::to_string(id);
    c.embedding = std::move(v);
    c.relevance = relevance;
    return c;
}

class FixedReranker final : public Reranker {
public:
    explicit FixedReranker(std::vector<double> s) : scores_(std::move(s)) {}
    std::vector<double> score(const std::string&, const std::vector<std::string>& docs) override {
        return std::vector<double>(scores_.begin(), scores_.begin() + docs.size());
    }

private:
    std::vector<double> scores_;
};

class DownReranker final : public Reranker {
public:
    std::vector<double> score(const std::string&, const std::vector<std::string>&) override {
        throw Error(ErrorKind::BackendUnavailable, "down");
    }
};

} // namespace

TEST(Embedding, HashEmbedderIsDeterministicAndUnit) {
    HashEmbedder e;
    auto a = e.embed("Reflective statement about the patient");
    auto b = e.embed("Reflective statement about the patient");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.dimension(), 384u);
    EXPECT_NEAR(a.norm(), 1.0, 1e-6);
    EXPECT_NEAR(a.dot(a), 1.0, 1e-6);
    auto c = e.embed("Completely different words entirely");
    EXPECT_LT(a.dot(c), 0.9);
    EXPECT_GT(a.dot(e.embed("reflective statement about the patient's")), a.dot(c));
    EXPECT_THROW(e.embed("   "), Error);
    EXPECT_NE(HashEmbedder(384).fingerprint(), HashEmbedder(128).fingerprint());
}

TEST(Embedding, VectorValidation) {
    EXPECT_THROW(EmbeddingVector::normalized({0.f, 0.f}), Error);
    EXPECT_THROW(EmbeddingVector::from_unit({1.f, 1.f}), Error);
    auto v = EmbeddingVector::normalized({3.f, 4.f});
    EXPECT_NEAR(v.values()[0], 0.6, 1e-6);
    EXPECT_NO_THROW(EmbeddingVector::from_unit({0.6f, 0.8f}));
    EXPECT_THROW(v.dot(EmbeddingVector::normalized({1.f, 0.f, 0.f})), Error);
}

TEST(VectorIndex, SearchOrdersByScoreThenId) {
    VectorIndex idx({"C", "v1"}, 2);
    idx.add(0, EmbeddingVector::normalized({1.f, 0.f}));
    idx.add(1, EmbeddingVector::normalized({0.f, 1.f}));
    idx.add(2, EmbeddingVector::normalized({1.f, 0.f}));
    idx.add(3, EmbeddingVector::normalized({1.f, 1.f}));
    auto hits = idx.search(EmbeddingVector::normalized({1.f, 0.f}), 3);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].chunk_id, 0);
    EXPECT_EQ(hits[1].chunk_id, 2);
    EXPECT_EQ(hits[2].chunk_id, 3);
    EXPECT_EQ(idx.search(EmbeddingVector::normalized({1.f, 0.f}), 10).size(), 4u);
    EXPECT_THROW(idx.search(EmbeddingVector::normalized({1.f, 0.f}), 0), Error);
    EXPECT_THROW(idx.add(9, EmbeddingVector::normalized({1.f, 0.f, 0.f})), Error);
    EXPECT_TRUE(VectorIndex({"C", "v"}, 2).search(EmbeddingVector::normalized({1.f, 0.f}), 3).empty());
}

TEST(VectorIndex, SerializationRoundTrips) {
    std::mt19937_64 rng(3);
    VectorIndex idx({"WISER", "abc"}, 16);
    for (int i = 0; i < 20; ++i) idx.add(i, random_unit(rng, 16));
    std::string bytes = idx.serialize();
    EXPECT_EQ(bytes.substr(0, 8), "MOSAICIX");
    VectorIndex back = VectorIndex::deserialize(bytes);
    EXPECT_EQ(back, idx);
    mosaic::testing::ScratchDir dir;
    idx.save(dir.file("w.idx"));
    EXPECT_EQ(VectorIndex::load(dir.file("w.idx")), idx);
    EXPECT_THROW(VectorIndex::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
    EXPECT_THROW(VectorIndex::deserialize("NOTANIDX" + bytes.substr(8)), Error);
    EXPECT_THROW(VectorIndex::deserialize(bytes + "x"), Error);
}

TEST(Retrieval, SearchRejectsStaleIndex) {
    HashEmbedder e(64);
    Codebook cb = builtin_codebooks()[0];
    ChunkIndex idx = ChunkIndex::build(cb, chunk_codebook(cb, 40, 20), e);
    EXPECT_EQ(idx.key().version, cb.version);
    EXPECT_NO_THROW(search(idx, e.embed("empathy"), 3, cb.version));
    try {
        search(idx, e.embed("empathy"), 3, "other");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.kind(), ErrorKind::StaleIndex);
    }
}

TEST(Mmr, LambdaOneIsTopRelevance) {
    std::mt19937_64 rng(11);
    auto q = random_unit(rng, 8);
    std::vector<ScoredChunk> c;
    for (int i = 0; i < 8; ++i) {
        auto v = random_unit(rng, 8);
        double rel = v.dot(q);
        c.push_back(candidate(i, v, rel));
    }
    auto picked = mmr_select(c, q, 1.0, 4);
    auto sorted = c;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.relevance > b.relevance; });
    ASSERT_EQ(picked.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(picked[i].chunk.chunk_id, sorted[i].chunk.chunk_id);
}

TEST(Mmr, LambdaZeroPrefersDiversityAfterFirstPick) {
    auto x = EmbeddingVector::normalized({1.f, 0.f});
    auto x2 = EmbeddingVector::normalized({1.f, 0.01f});
    auto y = EmbeddingVector::normalized({0.f, 1.f});
    std::vector<ScoredChunk> c = {candidate(0, x, 0.9), candidate(1, x2, 0.89), candidate(2, y, 0.1)};
    auto picked = mmr_select(c, x, 0.0, 2);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_EQ(picked[0].chunk.chunk_id, 0);
    EXPECT_EQ(picked[1].chunk.chunk_id, 2);
    EXPECT_TRUE(mmr_select({}, x, 0.5, 3).empty());
    EXPECT_EQ(mmr_select(c, x, 0.5, 10).size(), 3u);
}

TEST(Rerank, OrdersByScoreAndKeepsOrderOnFailure) {
    auto v = EmbeddingVector::normalized({1.f, 0.f});
    std::vector<ScoredChunk> c = {candidate(0, v, 0.9), candidate(1, v, 0.8), candidate(2, v, 0.7)};
    FixedReranker fixed({0.1, 0.9, 0.5});
    auto r = rerank("q", c, fixed);
    EXPECT_EQ(r[0].chunk.chunk_id, 1);
    EXPECT_EQ(r[1].chunk.chunk_id, 2);
    EXPECT_DOUBLE_EQ(*r[0].rerank_score, 0.9);

    PassthroughReranker pass;
    auto p = rerank("q", c, pass);
    EXPECT_EQ(p[0].chunk.chunk_id, 0);
    EXPECT_DOUBLE_EQ(*p[2].rerank_score, 0.7);

    DownReranker down;
    std::vector<std::string> warnings;
    auto d = rerank("q", c, down, &warnings);
    EXPECT_EQ(d[0].chunk.chunk_id, 0);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(TagFilter, KeepsChunksWhoseTagsAreRegistered) {
    LabelRegistry reg("C", {{"RS", LabelKind::Event, 0, 0, ""}});
    auto v = EmbeddingVector::normalized({1.f});
    ScoredChunk a = candidate(0, v, 1), b = candidate(1, v, 1), c = candidate(2, v, 1);
    a.chunk.tags = {"RS"};
    b.chunk.tags = {"RS", "XX"};
    auto kept = tag_filter({a, b, c}, reg);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].chunk.chunk_id, 0);
}

TEST(RetrieveRules, ReturnsTaggedChunksAndUsesCache) {
    HashEmbedder e(128);
    Codebook cb = builtin_codebooks()[0];
    LabelRegistry reg = label_registry(cb);
    ChunkIndex idx = ChunkIndex::build(cb, chunk_codebook(cb, 30, 15), e);
    PassthroughReranker pass;
    RetrievalCache cache;
    RetrievalParams params;
    params.k = 3;
    auto first = retrieve_rules(idx, reg, cb.version, "patient is worried about money", e, pass, params, &cache);
    ASSERT_FALSE(first.empty());
    EXPECT_LE(first.size(), 3u);
    for (const auto& c : first) {
        EXPECT_FALSE(c.chunk.tags.empty());
        for (const auto& t : c.chunk.tags) EXPECT_TRUE(reg.has_code(t));
    }
    EXPECT_EQ(cache.size(), 1u);
    auto second = retrieve_rules(idx, reg, cb.version, "patient is worried about money", e, pass, params, &cache);
    EXPECT_EQ(cache.hits(), 1u);
    ASSERT_EQ(second.size(), first.size());
    for (size_t i = 0; i < first.size(); ++i) EXPECT_EQ(second[i].chunk.chunk_id, first[i].chunk.chunk_id);
    cache.invalidate(cb.name);
    EXPECT_EQ(cache.size(), 0u);
    EXPECT_THROW(retrieve_rules(idx, reg, "newer", "q", e, pass, params, &cache), Error);
}

TEST(RetrievalCache, RejectsStaleVersion) {
    RetrievalCache cache;
    cache.put({"C", "v1"}, "q", {});
    EXPECT_TRUE(cache.get({"C", "v1"}, "q").has_value());
    EXPECT_FALSE(cache.get({"C", "v2"}, "q").has_value());
    EXPECT_FALSE(cache.get({"D", "v1"}, "q").has_value());
}
