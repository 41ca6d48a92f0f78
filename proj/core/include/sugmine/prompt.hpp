#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sugmine::llm {

enum class TemplateName {
    extraction,
    category_assignment,
    clustering_pairwise,
    cluster_summarization,
    cluster_consolidation,
    cluster_naming,
};

std::string_view to_string(TemplateName name) noexcept;
/// Throws ConfigError for unknown names.
TemplateName parse_template_name(std::string_view name);

enum class Role { system, user, assistant };
std::string_view to_string(Role role) noexcept;

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

struct FewShotExample {
    Bindings input;      // rendered through the template's user_template
    std::string output;  // the assistant turn
};

/// A system instruction plus a user template with `{name}` placeholders.
/// `{{` and `}}` produce literal braces. Bound values are inserted verbatim
/// and never re-scanned, so braces inside review text are inert.
struct PromptTemplate {
    TemplateName name = TemplateName::extraction;
    std::string system_text;
    std::string user_template;
    std::vector<FewShotExample> few_shot_examples;

    /// Placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;
};

/// Throws ConfigError naming the first unbound placeholder.
std::string substitute(std::string_view tmpl, const Bindings& bindings);

/// System message (when non-empty), few-shot user/assistant pairs in their
/// stored order, then the live user message.
std::vector<ChatMessage> render(const PromptTemplate& tmpl, const Bindings& bindings);

inline constexpr std::string_view kNoneSentinel = "NONE";
inline constexpr std::string_view kSameTheme = "SAME_THEME";
inline constexpr std::string_view kDifferentTheme = "DIFFERENT_THEME";
inline constexpr std::string_view kCohesive = "COHESIVE";
inline constexpr std::string_view kNotCohesive = "NOT_COHESIVE";

/// The shipped prompt set used by the pipeline.
struct PromptLibrary {
    PromptTemplate extraction;
    PromptTemplate category_assignment;
    PromptTemplate clustering_pairwise;
    PromptTemplate cluster_summarization;
    PromptTemplate cluster_consolidation;
    PromptTemplate cluster_naming;

    const PromptTemplate& get(TemplateName name) const;
    static PromptLibrary standard();
};

/// Formats items as "- item" lines, the list form used inside prompts.
std::string bullet_list(std::span<const std::string> items);

struct ExtractionParse {
    std::optional<std::string> suggestion;  // absent for the NONE sentinel
    std::optional<std::string> warning;
};

/// Throws ProtocolError on empty content.
ExtractionParse parse_extraction(std::string_view content);

/// Exact match after trimming, else a unique case-insensitive match, else a
/// unique label contained in the content. Throws ProtocolError otherwise.
std::string parse_choice(std::string_view content, std::span<const std::string> allowed);

}  // namespace sugmine::llm
