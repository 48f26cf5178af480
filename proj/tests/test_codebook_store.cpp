#include "mosaic/builtin_codebooks.hpp"
#include "mosaic/codebook_store.hpp"
#include "mosaic/error.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace mosaic;
using mosaic::testing::ScratchDir;

namespace {

const char* kV1 = "# Open questions\nAsk broadly [OE].\n# Reflections\nMirror back [RS].\n";
const char* kV2 = "# Open questions\nAsk broadly and wait [OE].\n# Reflections\nMirror back [RS].\n";

// Counts embedding calls.
class CountingEmbedder final : public Embedder {
public:
    size_t dimension() const override { return inner.dimension(); }
    std::string fingerprint() const override { return inner.fingerprint(); }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        calls += texts.size();
        return inner.embed_batch(texts);
    }
    HashEmbedder inner{32};
    size_t calls = 0;
};

} // namespace

TEST(CodebookStore, InstallsBuiltinsInCanonicalOrder) {
    HashEmbedder e(32);
    CodebookStore store(e, {20, 10});
    store.install_builtins();
    EXPECT_EQ(store.names(), canonical_codebook_names());
    EXPECT_GT(store.snapshot("WISER")->index.chunks.size(), 1u);
    EXPECT_THROW(store.snapshot("Nope"), Error);
    EXPECT_FALSE(store.version("Nope"));
    EXPECT_EQ(store.registries().size(), 6u);
}

TEST(CodebookStore, IdenticalUploadIsNoOp) {
    CountingEmbedder e;
    RetrievalCache cache;
    CodebookStore store(e, {6, 3}, &cache);
    auto first = store.apply_update(parse_codebook(kV1, "Mini"));
    EXPECT_TRUE(first.changed);
    EXPECT_TRUE(first.old_version.empty());
    EXPECT_EQ(first.to_json()["status"], "registered");
    const size_t calls = e.calls;
    const auto before = store.snapshot("Mini");
    auto again = store.apply_update(parse_codebook(kV1, "Mini"));
    EXPECT_FALSE(again.changed);
    EXPECT_FALSE(again.index_rebuilt);
    EXPECT_EQ(again.to_json()["status"], "no change");
    EXPECT_EQ(e.calls, calls);
    EXPECT_EQ(store.snapshot("Mini"), before);
    EXPECT_FALSE(detect_codebook_update(parse_codebook(kV1, "Mini"), store));
    EXPECT_FALSE(detect_codebook_update(std::nullopt, store));
}

TEST(CodebookStore, ChangedUploadRebuildsAndInvalidatesCache) {
    HashEmbedder e(32);
    RetrievalCache cache;
    CodebookStore store(e, {6, 3}, &cache);
    store.apply_update(parse_codebook(kV1, "Mini"));
    const auto old = store.snapshot("Mini");
    cache.put({"Mini", old->version()}, "q", {});
    ASSERT_TRUE(cache.get({"Mini", old->version()}, "q"));
    EXPECT_TRUE(detect_codebook_update(parse_codebook(kV2, "Mini"), store));
    auto r = store.apply_update(parse_codebook(kV2, "Mini"));
    EXPECT_TRUE(r.changed);
    EXPECT_EQ(r.old_version, old->version());
    EXPECT_EQ(r.to_json()["status"], "updated");
    EXPECT_NE(store.version("Mini"), old->version());
    EXPECT_FALSE(cache.get({"Mini", old->version()}, "q"));
    // holders of the old snapshot keep a complete view
    EXPECT_EQ(old->index.vectors.key().version, old->version());
    EXPECT_EQ(store.snapshot("Mini")->index.vectors.key().version, r.new_version);
}

TEST(CodebookStore, PersistsUploadsAndIndexes) {
    ScratchDir dir;
    std::string version;
    {
        CountingEmbedder e;
        CodebookStore store(e, {6, 3}, nullptr, dir.path());
        store.install_builtins();
        version = store.apply_update(parse_codebook(kV1, "Mini")).new_version;
    }
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir.path()) / "Mini.idx"));
    CountingEmbedder e;
    CodebookStore reloaded(e, {6, 3}, nullptr, dir.path());
    reloaded.install_builtins();
    EXPECT_EQ(reloaded.version("Mini"), version);
    EXPECT_EQ(e.calls, 0u);  // every index came from disk
    EXPECT_EQ(reloaded.names().back(), "Mini");
}
