#include "mosaic/retrieval.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <algorithm>
#include <limits>

namespace mosaic {

ChunkIndex ChunkIndex::build(const Codebook& cb, std::vector<RuleChunk> chunks, Embedder& embedder) {
    ChunkIndex idx;
    idx.vectors = VectorIndex({cb.name, cb.version}, embedder.dimension());
    std::vector<std::string> texts;
    for (size_t i = 0; i < chunks.size(); ++i) {
        if (chunks[i].chunk_id != static_cast<int>(i))
            throw Error(ErrorKind::InvalidArgument, "chunk ids must be dense from 0");
        texts.push_back(chunks[i].text);
    }
    auto vectors = texts.empty() ? std::vector<EmbeddingVector>{} : embedder.embed_batch(texts);
    if (vectors.size() != chunks.size()) throw Error(ErrorKind::BackendUnavailable, "embedder dropped inputs");
    for (size_t i = 0; i < chunks.size(); ++i) idx.vectors.add(chunks[i].chunk_id, std::move(vectors[i]));
    idx.chunks = std::move(chunks);
    return idx;
}

std::vector<ScoredChunk> search(const ChunkIndex& index, const EmbeddingVector& query, int k,
                                const std::string& current_version) {
    if (index.key().version != current_version)
        throw Error(ErrorKind::StaleIndex, index.key().codebook + " index built for " + index.key().version +
                                               ", current version is " + current_version);
    std::vector<ScoredChunk> out;
    for (const auto& hit : index.vectors.search(query, k)) {
        ScoredChunk sc;
        sc.chunk = index.chunks.at(static_cast<size_t>(hit.chunk_id));
        sc.embedding = *index.vectors.find(hit.chunk_id);
        sc.relevance = hit.score;
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<ScoredChunk> mmr_select(const std::vector<ScoredChunk>& candidates, const EmbeddingVector& query,
                                    double lambda, int k) {
    (void)query;  // relevance is carried on each candidate
    std::vector<ScoredChunk> selected;
    const size_t want = std::min(candidates.size(), static_cast<size_t>(std::max(0, k)));
    std::vector<bool> used(candidates.size(), false);
    // max similarity of each candidate to anything selected so far
    std::vector<double> redundancy(candidates.size(), 0.0);
    for (size_t step = 0; step < want; ++step) {
        size_t best = candidates.size();
        double best_score = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            double score = step == 0 ? candidates[i].relevance
                                     : lambda * candidates[i].relevance - (1.0 - lambda) * redundancy[i];
            if (best == candidates.size() || score > best_score ||
                (score == best_score && candidates[i].chunk.chunk_id < candidates[best].chunk.chunk_id)) {
                best = i;
                best_score = score;
            }
        }
        used[best] = true;
        selected.push_back(candidates[best]);
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            double sim = candidates[i].embedding.dot(candidates[best].embedding);
            redundancy[i] = step == 0 ? sim : std::max(redundancy[i], sim);
        }
    }
    return selected;
}

std::vector<double> HttpReranker::score(const std::string& query, const std::vector<std::string>& documents) {
    nlohmann::json res = post_json(endpoint_, {{"query", query}, {"documents", documents}});
    if (!res.contains("scores") || !res["scores"].is_array() || res["scores"].size() != documents.size())
        throw Error(ErrorKind::BackendUnavailable, "rerank response lacks one score per document");
    return res["scores"].get<std::vector<double>>();
}

std::vector<ScoredChunk> rerank(const std::string& query, std::vector<ScoredChunk> candidates, Reranker& reranker,
                                std::vector<std::string>* warnings) {
    auto passthrough = [&]() {
        for (auto& c : candidates) c.rerank_score = c.relevance;
        return std::move(candidates);
    };
    if (candidates.empty() || reranker.is_passthrough()) return passthrough();
    std::vector<std::string> docs;
    for (const auto& c : candidates) docs.push_back(c.chunk.text);
    std::vector<double> scores;
    try {
        scores = reranker.score(query, docs);
        if (scores.size() != candidates.size()) throw Error(ErrorKind::BackendUnavailable, "score count mismatch");
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::BackendUnavailable) throw;
        if (warnings) warnings->push_back(std::string("reranker unavailable, keeping retrieval order: ") + e.what());
        return passthrough();
    }
    for (size_t i = 0; i < candidates.size(); ++i) candidates[i].rerank_score = scores[i];
    std::stable_sort(candidates.begin(), candidates.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
        return a.chunk.chunk_id < b.chunk.chunk_id;
    });
    return candidates;
}

std::vector<ScoredChunk> tag_filter(const std::vector<ScoredChunk>& candidates, const LabelRegistry& registry) {
    std::vector<ScoredChunk> out;
    for (const auto& c : candidates) {
        if (c.chunk.tags.empty()) continue;
        bool ok = std::all_of(c.chunk.tags.begin(), c.chunk.tags.end(),
                              [&](const std::string& t) { return registry.has_code(t); });
        if (ok) out.push_back(c);
    }
    return out;
}

std::optional<std::vector<ScoredChunk>> RetrievalCache::get(const IndexKey& key, const std::string& query_key) const {
    std::lock_guard lock(mu_);
    auto cb = slots_.find(key.codebook);
    if (cb == slots_.end()) return std::nullopt;
    auto it = cb->second.find(query_key);
    if (it == cb->second.end() || it->second.version != key.version) return std::nullopt;
    ++hits_;
    return it->second.results;
}

void RetrievalCache::put(const IndexKey& key, const std::string& query_key, std::vector<ScoredChunk> results) {
    std::lock_guard lock(mu_);
    slots_[key.codebook][query_key] = Slot{key.version, std::move(results)};
}

void RetrievalCache::invalidate(const std::string& codebook) {
    std::lock_guard lock(mu_);
    slots_.erase(codebook);
}

size_t RetrievalCache::size() const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    for (const auto& [_, m] : slots_) n += m.size();
    return n;
}

size_t RetrievalCache::hits() const {
    std::lock_guard lock(mu_);
    return hits_;
}

std::vector<ScoredChunk> retrieve_rules(const ChunkIndex& index, const LabelRegistry& registry,
                                        const std::string& current_version, const std::string& query_text,
                                        Embedder& embedder, Reranker& reranker, const RetrievalParams& params,
                                        RetrievalCache* cache, std::vector<std::string>* warnings) {
    if (index.key().version != current_version)
        throw Error(ErrorKind::StaleIndex, index.key().codebook + " index is stale");
    if (index.vectors.empty()) {
        if (warnings) warnings->push_back(index.key().codebook + ": rule index is empty");
        return {};
    }
    const std::string query_key = hex64(fnv1a64(query_text)) + "/k" + std::to_string(params.k) + "/p" +
                                  std::to_string(params.pool_factor) + "/l" + std::to_string(params.lambda);
    if (cache) {
        if (auto hit = cache->get(index.key(), query_key)) return *hit;
    }
    const EmbeddingVector query = embedder.embed(query_text);
    const int total = static_cast<int>(index.vectors.size());
    std::vector<ScoredChunk> filtered;
    for (int k = std::max(1, params.k);; k *= 2) {
        int pool = std::min(total, std::max(k, params.pool_factor * k));
        auto candidates = search(index, query, pool, current_version);
        auto diverse = mmr_select(candidates, query, params.lambda, k);
        auto ordered = rerank(query_text, std::move(diverse), reranker, warnings);
        filtered = tag_filter(ordered, registry);
        if (!filtered.empty() || k >= total) break;
    }
    if (filtered.empty() && warnings) warnings->push_back(index.key().codebook + ": no tagged rule chunks retrieved");
    if (cache) cache->put(index.key(), query_key, filtered);
    return filtered;
}

} // namespace mosaic
