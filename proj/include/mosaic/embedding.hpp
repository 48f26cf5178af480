#pragma once

#include "mosaic/http_client.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mosaic {

inline constexpr size_t kDefaultEmbeddingDimension = 384;

// Unit-normalized dense vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    // Scales `values` to unit L2 norm. A zero vector is rejected.
    static EmbeddingVector normalized(std::vector<float> values);
    // Adopts already-unit values verbatim (persisted vectors); rejects non-unit input.
    static EmbeddingVector from_unit(std::vector<float> values);

    std::span<const float> values() const { return values_; }
    size_t dimension() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double dot(const EmbeddingVector& other) const;
    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
    std::vector<float> values_;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual size_t dimension() const = 0;
    // Identifies the model; persisted next to anything embedded with it.
    virtual std::string fingerprint() const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

    EmbeddingVector embed(const std::string& text);
};

// Deterministic embedder: signed feature hashing of character trigrams of
// the lower-cased text, normalized. Same text always yields the same vector.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(size_t dimension = kDefaultEmbeddingDimension, std::uint64_t seed = 0x9e3779b97f4a7c15ULL);

    size_t dimension() const override { return dimension_; }
    std::string fingerprint() const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

    EmbeddingVector embed_one(const std::string& text) const;

private:
    size_t dimension_;
    std::uint64_t seed_;
};

// `POST {"input": [...], "dimension": d}` -> `{"vectors": [[...], ...]}`.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(HttpEndpoint endpoint, size_t dimension, std::string model_name = "remote");

    size_t dimension() const override { return dimension_; }
    std::string fingerprint() const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    HttpEndpoint endpoint_;
    size_t dimension_;
    std::string model_name_;
};

} // namespace mosaic
