#pragma once

#include "mosaic/chat_backend.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mosaic {

inline constexpr const char* kNoAgentsWarning = "No valid annotation agents found";

struct RoutingDecision {
    std::vector<std::string> agents;  // canonical order, custom codebooks after
    std::optional<std::string> warning;
    bool operator==(const RoutingDecision&) const = default;
};

// Orders `names` canonically: the shipped codebooks first in their fixed
// order, then any others alphabetically.
std::vector<std::string> canonical_order(std::vector<std::string> names);

class Router {
public:
    virtual ~Router() = default;
    virtual RoutingDecision route(const std::string& prompt, const std::vector<std::string>& registered) = 0;
};

// Case-insensitive phrase matcher over a synonym table.
//   "all" / "everything"            every registered codebook
//   "not" / "skip" / "except" ...   removes the next named codebook(s)
//   no positive match               empty set plus the warning
class KeywordRouter final : public Router {
public:
    RoutingDecision route(const std::string& prompt, const std::vector<std::string>& registered) override;
};

// Asks a chat model for a comma-separated list of codebook names. Names it
// returns that are not registered are dropped; a backend failure falls back
// to the keyword router.
class ChatRouter final : public Router {
public:
    ChatRouter(ChatBackend& backend, double temperature) : backend_(backend), temperature_(temperature) {}
    RoutingDecision route(const std::string& prompt, const std::vector<std::string>& registered) override;

private:
    ChatBackend& backend_;
    double temperature_;
};

RoutingDecision plan_route(const std::string& prompt, const std::vector<std::string>& registered);

} // namespace mosaic
