#pragma once

#include "mosaic/http_client.hpp"

#include <map>
#include <memory>
#include <optional>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace mosaic {

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.3;
    int max_tokens = 2048;
    std::string model;
    // Routing hints for scripted backends (codebook, batch_id, transcript_id,
    // purpose). Never sent on the wire.
    std::map<std::string, std::string> meta;

    nlohmann::json wire_json() const;
    std::string hash() const;  // over the wire body only
};

struct ChatUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason = "stop";
    ChatUsage usage;
};

// Implementations must tolerate concurrent calls.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string describe() const = 0;
};

// OpenAI-style chat completions endpoint.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    ChatResponse complete(const ChatRequest& request) override;
    std::string describe() const override { return "http:" + endpoint_.url; }

private:
    HttpEndpoint endpoint_;
};

// Replays canned responses from a fixture:
//   {"responses": [{"codebook": "WISER", "batch_id": 0, "text": "..."},
//                  {"codebook": "WISER", "purpose": "verify", "text": "..."},
//                  {"request_hash": "...", "text": "..."}],
//    "default": "..."}
// A request hash match wins over a (purpose, codebook, batch_id) match;
// purpose defaults to "annotate" and a "reask" falls back to the annotate
// entry. Without a match the default text is returned, or
// BackendUnavailable when there is none.
class ScriptedChatBackend final : public ChatBackend {
public:
    explicit ScriptedChatBackend(const nlohmann::json& fixture);
    static std::unique_ptr<ScriptedChatBackend> from_file(const std::string& path);

    ChatResponse complete(const ChatRequest& request) override;
    std::string describe() const override { return "scripted:" + fixture_hash_; }
    size_t calls() const;

private:
    std::map<std::string, std::string> by_hash_;
    std::map<std::tuple<std::string, std::string, int>, std::string> by_batch_;
    std::optional<std::string> default_;
    std::string fixture_hash_;
    mutable std::mutex mu_;
    size_t calls_ = 0;
};

// Always answers with empty text, which annotators read as all-None.
class NullChatBackend final : public ChatBackend {
public:
    ChatResponse complete(const ChatRequest&) override { return {}; }
    std::string describe() const override { return "null"; }
};

// Fails every call with BackendUnavailable.
class UnavailableChatBackend final : public ChatBackend {
public:
    explicit UnavailableChatBackend(std::string reason = "chat backend not configured") : reason_(std::move(reason)) {}
    ChatResponse complete(const ChatRequest&) override;
    std::string describe() const override { return "unavailable"; }

private:
    std::string reason_;
};

} // namespace mosaic
