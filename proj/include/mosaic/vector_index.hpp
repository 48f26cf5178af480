#pragma once

#include "mosaic/embedding.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

struct IndexKey {
    std::string codebook;
    std::string version;

    bool operator==(const IndexKey&) const = default;
};

struct IndexEntry {
    int chunk_id = 0;
    EmbeddingVector vector;

    bool operator==(const IndexEntry&) const = default;
};

struct SearchHit {
    int chunk_id = 0;
    double score = 0.0;
};

// Exact (flat) cosine index over unit vectors.
class VectorIndex {
public:
    VectorIndex() = default;
    VectorIndex(IndexKey key, size_t dimension);

    const IndexKey& key() const { return key_; }
    size_t dimension() const { return dimension_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const EmbeddingVector* find(int chunk_id) const;

    void add(int chunk_id, EmbeddingVector v);

    // Top-k by dot product, ties by ascending chunk_id.
    std::vector<SearchHit> search(const EmbeddingVector& query, int k) const;

    // Binary layout: magic "MOSAICIX", u32 format, u32 dimension, key strings
    // (u32 length + bytes), u64 count, then (i32 chunk_id, f32[dimension])
    // records, all little-endian.
    std::string serialize() const;
    static VectorIndex deserialize(std::string_view bytes);

    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

    bool operator==(const VectorIndex&) const = default;

private:
    IndexKey key_;
    size_t dimension_ = 0;
    std::vector<IndexEntry> entries_;
};

} // namespace mosaic
