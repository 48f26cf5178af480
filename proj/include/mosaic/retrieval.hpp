#pragma once

#include "mosaic/codebook.hpp"
#include "mosaic/embedding.hpp"
#include "mosaic/http_client.hpp"
#include "mosaic/vector_index.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mosaic {

// Rule chunks of one codebook version with their embeddings.
struct ChunkIndex {
    VectorIndex vectors;
    std::vector<RuleChunk> chunks;  // chunks[i].chunk_id == i

    const IndexKey& key() const { return vectors.key(); }
    static ChunkIndex build(const Codebook& cb, std::vector<RuleChunk> chunks, Embedder& embedder);
};

struct ScoredChunk {
    RuleChunk chunk;
    EmbeddingVector embedding;
    double relevance = 0.0;
    std::optional<double> rerank_score;
};

// Exact top-k. Throws StaleIndex when the index was built for a different
// codebook version than `current_version`.
std::vector<ScoredChunk> search(const ChunkIndex& index, const EmbeddingVector& query, int k,
                                const std::string& current_version);

// Greedy maximal marginal relevance: the first pick is the most relevant
// candidate, each later pick maximizes
//   lambda * sim(d, q) - (1 - lambda) * max_{s in selected} sim(d, s).
// Output is in selection order; ties go to the lower chunk_id.
std::vector<ScoredChunk> mmr_select(const std::vector<ScoredChunk>& candidates, const EmbeddingVector& query,
                                    double lambda, int k);

class Reranker {
public:
    virtual ~Reranker() = default;
    // One score per document, higher is more relevant.
    virtual std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) = 0;
    virtual bool is_passthrough() const { return false; }
};

class PassthroughReranker final : public Reranker {
public:
    std::vector<double> score(const std::string&, const std::vector<std::string>& documents) override {
        return std::vector<double>(documents.size(), 0.0);
    }
    bool is_passthrough() const override { return true; }
};

// `POST {"query": str, "documents": [str]}` -> `{"scores": [float]}`.
class HttpReranker final : public Reranker {
public:
    explicit HttpReranker(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) override;

private:
    HttpEndpoint endpoint_;
};

// Reorders by reranker score (ties by chunk_id). The passthrough reranker and
// any backend failure keep the input order with rerank_score = relevance; a
// failure appends a warning instead of throwing.
std::vector<ScoredChunk> rerank(const std::string& query, std::vector<ScoredChunk> candidates, Reranker& reranker,
                                std::vector<std::string>* warnings = nullptr);

// Keeps chunks whose tag set is non-empty and contained in the registry. An
// empty result is the caller's signal to widen retrieval.
std::vector<ScoredChunk> tag_filter(const std::vector<ScoredChunk>& candidates, const LabelRegistry& registry);

struct RetrievalParams {
    int k = 6;
    int pool_factor = 4;
    double lambda = 0.5;
};

// Query results keyed by codebook version; a version bump invalidates every
// entry of that codebook.
class RetrievalCache {
public:
    std::optional<std::vector<ScoredChunk>> get(const IndexKey& key, const std::string& query_key) const;
    void put(const IndexKey& key, const std::string& query_key, std::vector<ScoredChunk> results);
    void invalidate(const std::string& codebook);

    size_t size() const;
    size_t hits() const;

private:
    struct Slot {
        std::string version;
        std::vector<ScoredChunk> results;
    };
    mutable std::mutex mu_;
    std::map<std::string, std::map<std::string, Slot>> slots_;  // codebook -> query key -> slot
    mutable size_t hits_ = 0;
};

// search -> MMR -> rerank -> tag filter, widening k while the filter leaves nothing.
std::vector<ScoredChunk> retrieve_rules(const ChunkIndex& index, const LabelRegistry& registry,
                                        const std::string& current_version, const std::string& query_text,
                                        Embedder& embedder, Reranker& reranker, const RetrievalParams& params,
                                        RetrievalCache* cache = nullptr, std::vector<std::string>* warnings = nullptr);

} // namespace mosaic
