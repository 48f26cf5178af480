#include "mosaic/config.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <cstdlib>

namespace mosaic {

void RunConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); };
    if (!(temperature >= 0.0 && temperature <= 1.0)) bad("temperature must be in [0, 1]");
    if (parallelism < 1) bad("parallelism must be >= 1");
    if (max_turns < 1) bad("max_turns must be >= 1");
    if (context_overlap < 0 || context_overlap >= max_turns) bad("context_overlap must be in [0, max_turns)");
    if (k < 1) bad("k must be >= 1");
    if (pool_factor < 1) bad("pool_factor must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) bad("lambda must be in [0, 1]");
    if (stride < 1 || stride > window) bad("stride must be in [1, window]");
    if (max_prompt_tokens < 0) bad("max_prompt_tokens must be >= 0");
    if (context_k < 0) bad("context_k must be >= 0");
    if (max_tokens < 1) bad("max_tokens must be >= 1");
    if (rare_threshold < 0) bad("rare_threshold must be >= 0");
}

AnnotateOptions RunConfig::annotate_options() const {
    AnnotateOptions o;
    o.chat = {temperature, max_tokens, model};
    o.max_turns = max_turns;
    o.context_overlap = context_overlap;
    o.retrieval = {k, pool_factor, lambda};
    o.parallelism = parallelism;
    o.max_prompt_tokens = static_cast<size_t>(max_prompt_tokens);
    o.scale_mode = scale_mode;
    o.use_fewshot = use_fewshot;
    return o;
}

nlohmann::json RunConfig::to_json() const {
    return {{"temperature", temperature},
            {"max_turns", max_turns},
            {"context_overlap", context_overlap},
            {"k", k},
            {"pool_factor", pool_factor},
            {"lambda", lambda},
            {"window", window},
            {"stride", stride},
            {"parallelism", parallelism},
            {"max_prompt_tokens", max_prompt_tokens},
            {"scale_mode", scale_mode_name(scale_mode)},
            {"context_k", context_k},
            {"model", model},
            {"max_tokens", max_tokens},
            {"rare_threshold", rare_threshold},
            {"use_fewshot", use_fewshot}};
}

void RunConfig::merge(const nlohmann::json& j) {
    if (j.is_null()) return;
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "run config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "temperature") temperature = v.get<double>();
            else if (key == "max_turns") max_turns = v.get<int>();
            else if (key == "context_overlap") context_overlap = v.get<int>();
            else if (key == "k") k = v.get<int>();
            else if (key == "pool_factor") pool_factor = v.get<int>();
            else if (key == "lambda") lambda = v.get<double>();
            else if (key == "window") window = v.get<int>();
            else if (key == "stride") stride = v.get<int>();
            else if (key == "parallelism") parallelism = v.get<int>();
            else if (key == "max_prompt_tokens") max_prompt_tokens = v.get<int>();
            else if (key == "scale_mode") scale_mode = parse_scale_mode(v.get<std::string>());
            else if (key == "context_k") context_k = v.get<int>();
            else if (key == "model") model = v.get<std::string>();
            else if (key == "max_tokens") max_tokens = v.get<int>();
            else if (key == "rare_threshold") rare_threshold = v.get<int>();
            else if (key == "use_fewshot") use_fewshot = v.get<bool>();
            else throw Error(ErrorKind::InvalidArgument, "unknown run config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("bad run config value: ") + e.what());
    }
}

namespace {

HttpEndpoint endpoint_from_json(const nlohmann::json& j, const std::string& default_token_env) {
    HttpEndpoint ep;
    ep.token_env = default_token_env;
    if (j.is_null()) return ep;
    ep.url = j.value("url", "");
    ep.token_env = j.value("token_env", default_token_env);
    ep.timeout_seconds = j.value("timeout_seconds", ep.timeout_seconds);
    ep.retries = j.value("retries", ep.retries);
    return ep;
}

nlohmann::json endpoint_json(const HttpEndpoint& ep) {
    return {{"url", ep.url}, {"token_env", ep.token_env}, {"timeout_seconds", ep.timeout_seconds}, {"retries", ep.retries}};
}

} // namespace

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j) {
    ServiceConfig c;
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
    try {
        c.chat = endpoint_from_json(j.value("chat", nlohmann::json()), "MOSAIC_CHAT_TOKEN");
        c.embedding = endpoint_from_json(j.value("embedding", nlohmann::json()), "MOSAIC_EMBED_TOKEN");
        c.rerank = endpoint_from_json(j.value("rerank", nlohmann::json()), "MOSAIC_RERANK_TOKEN");
        c.embedding_dimension = j.value("embedding_dimension", c.embedding_dimension);
        c.data_dir = j.value("data_dir", c.data_dir);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.chat_fixture = j.value("chat_fixture", "");
        if (j.contains("training_manifest") && !j["training_manifest"].is_null())
            c.training_manifest = j["training_manifest"].get<std::set<std::string>>();
        c.run.merge(j.value("run", nlohmann::json::object()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("bad config: ") + e.what());
    }
    c.run.validate();
    return c;
}

ServiceConfig ServiceConfig::load(const std::string& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
    }
}

void ServiceConfig::apply_env() {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = env("MOSAIC_CHAT_URL")) chat.url = *v;
    if (auto v = env("MOSAIC_EMBED_URL")) embedding.url = *v;
    if (auto v = env("MOSAIC_RERANK_URL")) rerank.url = *v;
    if (auto v = env("MOSAIC_CHAT_MODEL")) run.model = *v;
    if (auto v = env("MOSAIC_CHAT_FIXTURE")) chat_fixture = *v;
    if (auto v = env("MOSAIC_DATA_DIR")) data_dir = *v;
}

nlohmann::json ServiceConfig::to_json() const {
    nlohmann::json j = {{"chat", endpoint_json(chat)},
                        {"embedding", endpoint_json(embedding)},
                        {"rerank", endpoint_json(rerank)},
                        {"embedding_dimension", embedding_dimension},
                        {"data_dir", data_dir},
                        {"host", host},
                        {"port", port},
                        {"chat_fixture", chat_fixture},
                        {"run", run.to_json()}};
    j["training_manifest"] = training_manifest ? nlohmann::json(*training_manifest) : nlohmann::json(nullptr);
    return j;
}

} // namespace mosaic
