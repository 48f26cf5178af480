#pragma once

#include "mosaic/codebook.hpp"
#include "mosaic/retrieval.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mosaic {

// An immutable view of one codebook version and its rule index. Annotators
// hold a snapshot for the duration of a batch.
struct CodebookSnapshot {
    Codebook codebook;
    LabelRegistry registry;
    ChunkIndex index;

    const std::string& name() const { return codebook.name; }
    const std::string& version() const { return codebook.version; }
};

struct UpdateReceipt {
    std::string codebook;
    std::string old_version;  // empty for a new codebook
    std::string new_version;
    bool changed = false;
    bool index_rebuilt = false;
    size_t chunks = 0;

    nlohmann::json to_json() const;
};

struct ChunkingParams {
    int window = 250;
    int stride = 125;
};

// Registered codebooks and their rule indexes. Updates rebuild outside the
// lock and swap the snapshot pointer, so readers never see a partial index.
class CodebookStore {
public:
    CodebookStore(Embedder& embedder, ChunkingParams chunking = {}, RetrievalCache* cache = nullptr,
                  std::string persist_dir = {});

    // Loads the shipped codebooks plus anything persisted earlier.
    void install_builtins();

    std::shared_ptr<const CodebookSnapshot> snapshot(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::optional<std::string> version(const std::string& name) const;
    std::vector<std::string> names() const;  // canonical order
    std::map<std::string, LabelRegistry> registries() const;

    // Re-chunks, re-embeds and swaps; a byte-identical codebook is a no-op.
    UpdateReceipt apply_update(const Codebook& cb);

    RetrievalCache* cache() const { return cache_; }
    Embedder& embedder() const { return embedder_; }

private:
    std::shared_ptr<const CodebookSnapshot> build(const Codebook& cb) const;

    Embedder& embedder_;
    ChunkingParams chunking_;
    RetrievalCache* cache_;
    std::string persist_dir_;
    mutable std::shared_mutex mu_;
    std::mutex update_mu_;  // one rebuild at a time
    std::map<std::string, std::shared_ptr<const CodebookSnapshot>> snapshots_;
};

// True iff `uploaded` is present and new or differs in version.
bool detect_codebook_update(const std::optional<Codebook>& uploaded, const CodebookStore& store);

} // namespace mosaic
