#include "mosaic/embedding.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <cmath>

namespace mosaic {

EmbeddingVector EmbeddingVector::normalized(std::vector<float> values) {
    double sq = 0.0;
    for (float v : values) sq += static_cast<double>(v) * v;
    if (sq <= 0.0 || !std::isfinite(sq)) throw Error(ErrorKind::InvalidArgument, "cannot normalize a zero vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : values) v = static_cast<float>(v * inv);
    return EmbeddingVector(std::move(values));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
    EmbeddingVector v(std::move(values));
    if (v.empty() || std::fabs(v.norm() - 1.0) > 1e-5)
        throw Error(ErrorKind::InvalidArgument, "vector is not unit-normalized");
    return v;
}

double EmbeddingVector::dot(const EmbeddingVector& other) const {
    if (other.dimension() != dimension())
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(dimension()) + " vs " + std::to_string(other.dimension()));
    double acc = 0.0;
    for (size_t i = 0; i < values_.size(); ++i) acc += static_cast<double>(values_[i]) * other.values_[i];
    return acc;
}

double EmbeddingVector::norm() const { return std::sqrt(dot(*this)); }

EmbeddingVector Embedder::embed(const std::string& text) {
    auto out = embed_batch({text});
    if (out.size() != 1) throw Error(ErrorKind::BackendUnavailable, "embedder returned no vector");
    return std::move(out.front());
}

HashEmbedder::HashEmbedder(size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw Error(ErrorKind::InvalidArgument, "embedding dimension must be positive");
}

std::string HashEmbedder::fingerprint() const {
    return "hash-trigram/d" + std::to_string(dimension_) + "/s" + hex64(seed_);
}

EmbeddingVector HashEmbedder::embed_one(const std::string& text) const {
    if (trim(text).empty()) throw Error(ErrorKind::InvalidArgument, "cannot embed empty text");
    const std::string padded = " " + to_lower(collapse_whitespace(text)) + " ";
    std::vector<float> acc(dimension_, 0.0f);
    for (size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3), seed_);
        size_t bucket = static_cast<size_t>(h % dimension_);
        acc[bucket] += (h >> 63) ? 1.0f : -1.0f;
    }
    bool any = false;
    for (float v : acc) any = any || v != 0.0f;
    if (!any) acc[static_cast<size_t>(fnv1a64(padded, seed_) % dimension_)] = 1.0f;
    return EmbeddingVector::normalized(std::move(acc));
}

std::vector<EmbeddingVector> HashEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, size_t dimension, std::string model_name)
    : endpoint_(std::move(endpoint)), dimension_(dimension), model_name_(std::move(model_name)) {}

std::string HttpEmbedder::fingerprint() const {
    return "http:" + model_name_ + "/d" + std::to_string(dimension_);
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(const std::vector<std::string>& texts) {
    nlohmann::json body = {{"input", texts}, {"dimension", dimension_}};
    nlohmann::json res = post_json(endpoint_, body);
    if (!res.contains("vectors") || !res["vectors"].is_array() || res["vectors"].size() != texts.size())
        throw Error(ErrorKind::BackendUnavailable, "embedding response lacks one vector per input");
    std::vector<EmbeddingVector> out;
    for (const auto& v : res["vectors"]) {
        std::vector<float> values = v.get<std::vector<float>>();
        if (values.size() != dimension_)
            throw Error(ErrorKind::DimensionMismatch, "backend returned " + std::to_string(values.size()) +
                                                          "-dim vector, index expects " + std::to_string(dimension_));
        out.push_back(EmbeddingVector::normalized(std::move(values)));
    }
    return out;
}

} // namespace mosaic
