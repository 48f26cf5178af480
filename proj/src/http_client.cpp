#include "mosaic/http_client.hpp"

#include "mosaic/error.hpp"

#include <httplib.h>

#include <cstdlib>

namespace mosaic {

SplitUrl split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorKind::InvalidArgument, "URL needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
    if (!endpoint.configured()) throw Error(ErrorKind::BackendUnavailable, "endpoint not configured");
    SplitUrl target = split_url(endpoint.url);
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!endpoint.token_env.empty()) {
        if (const char* tok = std::getenv(endpoint.token_env.c_str()); tok && *tok)
            headers.emplace("Authorization", std::string("Bearer ") + tok);
    }
    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
        httplib::Client client(target.origin);
        client.set_connection_timeout(endpoint.timeout_seconds, 0);
        client.set_read_timeout(endpoint.timeout_seconds, 0);
        client.set_write_timeout(endpoint.timeout_seconds, 0);
        auto res = client.Post(target.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (endpoint.wire_log) endpoint.wire_log(payload, res->body);
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("invalid JSON response: ") + e.what();
        }
    }
    throw Error(ErrorKind::BackendUnavailable, endpoint.url + ": " + last_error);
}

} // namespace mosaic
