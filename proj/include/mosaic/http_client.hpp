#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <string>

namespace mosaic {

// A JSON-over-HTTP backend location. The bearer token is read from the
// environment variable named by `token_env` at call time.
struct HttpEndpoint {
    std::string url;
    std::string token_env;
    int timeout_seconds = 60;
    int retries = 1;
    // Receives every request/response body pair, for audit logs and wire tests.
    std::function<void(const std::string& request, const std::string& response)> wire_log;

    bool configured() const { return !url.empty(); }
};

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // starts with '/'
};

SplitUrl split_url(const std::string& url);

// POSTs `body` and returns the parsed JSON response. Transport failures and
// non-2xx statuses are retried `endpoint.retries` times, then surface as
// BackendUnavailable.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

} // namespace mosaic
