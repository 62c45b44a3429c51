#pragma once

#include "finqa/errors.hpp"
#include "finqa/gateway.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace finqa::roles {

struct TopicEntry {
    std::string topic;
    std::string category;
    std::string role_text;
    std::vector<std::string> aliases;
};

struct RolePrompt {
    std::string topic;
    std::string text;
};

/// Persona sentence shape every registry entry must follow:
/// "You are a(n) ... expert|analyst|specialist|manager|strategist" followed
/// by at least one responsibility clause.
bool matches_role_pattern(std::string_view text);

/// Immutable topic -> (category, role prompt) map. Lookup order: exact,
/// case-insensitive, alias, then the generic finance fallback (flagged).
class RoleRegistry {
public:
    struct Resolved {
        RolePrompt prompt;
        bool fallback = false;
    };

    static const RoleRegistry& builtin();
    static RoleRegistry from_entries(std::vector<TopicEntry> entries);
    static RoleRegistry load_file(const std::string& path);

    Resolved resolve_role(std::string_view topic) const;
    std::string category_of(std::string_view topic) const;   // throws UnknownTopicError
    bool is_registered(std::string_view topic) const;

    const std::vector<TopicEntry>& entries() const { return entries_; }

    static const std::vector<std::string>& canonical_categories();
    static const std::string& fallback_role_text();

private:
    RoleRegistry() = default;
    const TopicEntry* find(std::string_view topic) const;

    std::vector<TopicEntry> entries_;
};

/// Wraps a user message with the role according to backend capability:
/// dedicated system message when supported, otherwise the role text is
/// prepended to the user turn. Empty role text passes the body through.
std::vector<gateway::ChatMessage> apply_role(const gateway::BackendProfile& backend,
                                             const RolePrompt& role,
                                             const std::string& user_body);

} // namespace finqa::roles
