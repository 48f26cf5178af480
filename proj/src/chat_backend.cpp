#include "mosaic/chat_backend.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

namespace mosaic {

nlohmann::json ChatRequest::wire_json() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
}

std::string ChatRequest::hash() const { return hex64(fnv1a64(wire_json().dump())); }

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    nlohmann::json res = post_json(endpoint_, request.wire_json());
    try {
        ChatResponse out;
        const auto& choice = res.at("choices").at(0);
        out.text = choice.at("message").at("content").get<std::string>();
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
            out.finish_reason = choice["finish_reason"].get<std::string>();
        if (res.contains("usage") && res["usage"].is_object()) {
            out.usage.prompt_tokens = res["usage"].value("prompt_tokens", 0);
            out.usage.completion_tokens = res["usage"].value("completion_tokens", 0);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BackendUnavailable, std::string("chat response missing choices[0].message.content: ") + e.what());
    }
}

ScriptedChatBackend::ScriptedChatBackend(const nlohmann::json& fixture) {
    fixture_hash_ = hex64(fnv1a64(fixture.dump()));
    if (!fixture.is_object()) throw Error(ErrorKind::InvalidArgument, "chat fixture must be a JSON object");
    for (const auto& r : fixture.value("responses", nlohmann::json::array())) {
        std::string text = r.value("text", "");
        if (r.contains("request_hash")) {
            by_hash_[r["request_hash"].get<std::string>()] = text;
        } else if (r.contains("codebook")) {
            by_batch_[{r.value("purpose", "annotate"), r["codebook"].get<std::string>(), r.value("batch_id", 0)}] = text;
        } else {
            throw Error(ErrorKind::InvalidArgument, "chat fixture entry needs request_hash or codebook");
        }
    }
    if (fixture.contains("default") && fixture["default"].is_string()) default_ = fixture["default"].get<std::string>();
}

std::unique_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(const std::string& path) {
    try {
        return std::make_unique<ScriptedChatBackend>(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
    }
}

ChatResponse ScriptedChatBackend::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    ChatResponse out;
    if (auto it = by_hash_.find(request.hash()); it != by_hash_.end()) {
        out.text = it->second;
        return out;
    }
    auto cb = request.meta.find("codebook");
    auto batch = request.meta.find("batch_id");
    if (cb != request.meta.end()) {
        auto p = request.meta.find("purpose");
        std::string purpose = p == request.meta.end() ? "annotate" : p->second;
        int batch_id = batch == request.meta.end() ? 0 : std::stoi(batch->second);
        auto it = by_batch_.find({purpose, cb->second, batch_id});
        if (it == by_batch_.end() && purpose == "reask") it = by_batch_.find({"annotate", cb->second, batch_id});
        if (it != by_batch_.end()) {
            out.text = it->second;
            return out;
        }
    }
    if (!default_) throw Error(ErrorKind::BackendUnavailable, "no scripted response for request " + request.hash());
    out.text = *default_;
    return out;
}

size_t ScriptedChatBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

ChatResponse UnavailableChatBackend::complete(const ChatRequest&) {
    throw Error(ErrorKind::BackendUnavailable, reason_);
}

} // namespace mosaic
