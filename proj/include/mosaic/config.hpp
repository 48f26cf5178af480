#pragma once

#include "mosaic/annotation.hpp"
#include "mosaic/http_client.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>

namespace mosaic {

struct RunConfig {
    double temperature = 0.3;
    int max_turns = 120;
    int context_overlap = 8;
    int k = 6;
    int pool_factor = 4;
    double lambda = 0.5;
    int window = 250;
    int stride = 125;
    int parallelism = 4;
    int max_prompt_tokens = 0;  // 0 disables the limit
    ScaleMode scale_mode = ScaleMode::Encounter;
    int context_k = 8;
    std::string model;
    int max_tokens = 2048;
    int rare_threshold = 3;
    bool use_fewshot = true;

    // Throws InvalidArgument on the first violated bound.
    void validate() const;
    AnnotateOptions annotate_options() const;
    nlohmann::json to_json() const;
    // Unknown keys are rejected; missing keys keep their current value.
    void merge(const nlohmann::json& overrides);
};

struct ServiceConfig {
    HttpEndpoint chat;
    HttpEndpoint embedding;
    HttpEndpoint rerank;
    size_t embedding_dimension = 384;
    std::string data_dir = "mosaic-data";
    std::string host = "127.0.0.1";
    int port = 8080;
    // Scripted chat fixture; used in place of the HTTP chat endpoint.
    std::string chat_fixture;
    // When set, only these transcripts may feed the example library.
    std::optional<std::set<std::string>> training_manifest;
    RunConfig run;

    // File keys: chat/embedding/rerank {url, token_env, timeout_seconds,
    // retries}, chat_fixture, embedding_dimension, data_dir, host, port,
    // training_manifest, run {RunConfig fields}.
    static ServiceConfig from_json(const nlohmann::json& j);
    static ServiceConfig load(const std::string& path);
    // MOSAIC_CHAT_URL, MOSAIC_EMBED_URL, MOSAIC_RERANK_URL, MOSAIC_CHAT_MODEL,
    // MOSAIC_CHAT_FIXTURE, MOSAIC_DATA_DIR override file values.
    void apply_env();
    nlohmann::json to_json() const;  // never includes token values
};

} // namespace mosaic
