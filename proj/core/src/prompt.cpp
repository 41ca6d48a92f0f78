#include "sugmine/prompt.hpp"

#include <algorithm>

#include "sugmine/error.hpp"
#include "sugmine/llm_error.hpp"
#include "sugmine/text.hpp"

namespace sugmine::llm {
namespace {

// Calls on_text for literal runs and on_name for each placeholder.
template <typename OnText, typename OnName>
void scan_template(std::string_view tmpl, OnText on_text, OnName on_name) {
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const char c = tmpl[i];
        if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            on_text("{");
            i += 2;
        } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
            on_text("}");
            i += 2;
        } else if (c == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close == std::string_view::npos) throw ConfigError("template: unterminated placeholder");
            const auto name = tmpl.substr(i + 1, close - i - 1);
            if (name.empty()) throw ConfigError("template: empty placeholder");
            on_name(name);
            i = close + 1;
        } else if (c == '}') {
            throw ConfigError("template: stray '}'");
        } else {
            const auto next = tmpl.find_first_of("{}", i);
            const auto end = next == std::string_view::npos ? tmpl.size() : next;
            on_text(tmpl.substr(i, end - i));
            i = end;
        }
    }
}

std::string lines_of(std::initializer_list<std::string_view> lines) {
    std::string out;
    for (auto l : lines) {
        if (!out.empty()) out.push_back('\n');
        out += l;
    }
    return out;
}

}  // namespace

std::string_view to_string(TemplateName name) noexcept {
    switch (name) {
    case TemplateName::extraction: return "extraction";
    case TemplateName::category_assignment: return "category_assignment";
    case TemplateName::clustering_pairwise: return "clustering_pairwise";
    case TemplateName::cluster_summarization: return "cluster_summarization";
    case TemplateName::cluster_consolidation: return "cluster_consolidation";
    case TemplateName::cluster_naming: return "cluster_naming";
    }
    return "unknown";
}

TemplateName parse_template_name(std::string_view name) {
    for (auto n : {TemplateName::extraction, TemplateName::category_assignment, TemplateName::clustering_pairwise,
                   TemplateName::cluster_summarization, TemplateName::cluster_consolidation,
                   TemplateName::cluster_naming}) {
        if (to_string(n) == name) return n;
    }
    throw ConfigError("unknown template name '" + std::string(name) + "'");
}

std::string_view to_string(Role role) noexcept {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    scan_template(
        user_template, [](std::string_view) {},
        [&](std::string_view n) {
            if (std::find(names.begin(), names.end(), n) == names.end()) names.emplace_back(n);
        });
    return names;
}

std::string substitute(std::string_view tmpl, const Bindings& bindings) {
    std::string out;
    out.reserve(tmpl.size());
    scan_template(
        tmpl, [&](std::string_view t) { out += t; },
        [&](std::string_view n) {
            auto it = bindings.find(n);
            if (it == bindings.end()) throw ConfigError("template: unbound placeholder '" + std::string(n) + "'");
            out += it->second;
        });
    return out;
}

std::vector<ChatMessage> render(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::vector<ChatMessage> messages;
    if (!tmpl.system_text.empty()) messages.push_back({Role::system, tmpl.system_text});
    for (const auto& ex : tmpl.few_shot_examples) {
        messages.push_back({Role::user, substitute(tmpl.user_template, ex.input)});
        messages.push_back({Role::assistant, ex.output});
    }
    messages.push_back({Role::user, substitute(tmpl.user_template, bindings)});
    return messages;
}

const PromptTemplate& PromptLibrary::get(TemplateName name) const {
    switch (name) {
    case TemplateName::extraction: return extraction;
    case TemplateName::category_assignment: return category_assignment;
    case TemplateName::clustering_pairwise: return clustering_pairwise;
    case TemplateName::cluster_summarization: return cluster_summarization;
    case TemplateName::cluster_consolidation: return cluster_consolidation;
    case TemplateName::cluster_naming: return cluster_naming;
    }
    return extraction;
}

PromptLibrary PromptLibrary::standard() {
    PromptLibrary lib;

    lib.extraction.name = TemplateName::extraction;
    lib.extraction.system_text = lines_of({
        "You are an analyst who reads customer reviews and looks for explicit improvement advice "
        "addressed to the business.",
        "",
        "Extraction criteria:",
        "- The review must state the advice directly, with an advisory or directive expression "
        "(for example \"should\", \"please\", \"I wish\", \"would be nice if\").",
        "- The advice must be addressed to the business, not to other customers.",
        "- Never infer, guess or reconstruct advice that the reviewer did not state.",
        "",
        "Output constraints:",
        "- Reply with a single concise rewrite of the recommendation as a self-contained imperative sentence.",
        "- If the review contains no such recommendation, reply with exactly: NONE",
        "- Do not add explanations or commentary.",
    });
    lib.extraction.user_template = "Review:\n\"\"\"\n{review}\n\"\"\"\n\nRecommendation:";
    lib.extraction.few_shot_examples = {
        {{{"review", "The tacos were cold when they arrived. You should heat the plates before serving."}},
         "Heat the plates before serving."},
        {{{"review", "Great atmosphere and a friendly bartender. You have to try the nachos!"}}, "NONE"},
        {{{"review", "Parking is a nightmare on weekends. Please add more spaces behind the building."}},
         "Add more parking spaces behind the building."},
    };

    lib.category_assignment.name = TemplateName::category_assignment;
    lib.category_assignment.system_text = lines_of({
        "You assign a customer recommendation to one operational category from a fixed list.",
        "",
        "Decision rules:",
        "- Pick the category that best matches the main theme of the recommendation.",
        "- Pick a specific category only when the correspondence is clear; otherwise pick the default label.",
        "- Output only the selected category label, exactly as written in the list.",
    });
    lib.category_assignment.user_template =
        "Categories:\n{categories}\n\nDefault label when nothing applies: {default_category}\n\n"
        "Recommendation: {suggestion}\n\nCategory:";

    lib.clustering_pairwise.name = TemplateName::clustering_pairwise;
    lib.clustering_pairwise.system_text = lines_of({
        "You compare two customer recommendations and decide whether they address the same broad "
        "improvement theme.",
        "",
        "- Judge the operational area being improved, not the wording.",
        "- Treat them as the same theme when they target the same operational area, even if the specific "
        "actions differ.",
        "- Answer with exactly one label: SAME_THEME or DIFFERENT_THEME. No explanation.",
    });
    lib.clustering_pairwise.user_template = "Recommendation A: {first}\nRecommendation B: {second}\n\nLabel:";
    lib.clustering_pairwise.few_shot_examples = {
        {{{"first", "Offer a larger selection of craft beers."}, {"second", "Add more local beers on tap."}},
         "SAME_THEME"},
        {{{"first", "Clean the restrooms more often."}, {"second", "Add more vegan desserts."}}, "DIFFERENT_THEME"},
    };

    lib.cluster_consolidation.name = TemplateName::cluster_consolidation;
    lib.cluster_consolidation.system_text = lines_of({
        "You check a group of customer recommendations that were grouped together.",
        "Answer COHESIVE when every recommendation belongs to one improvement theme.",
        "Answer NOT_COHESIVE when any recommendation is unrelated to the others.",
        "Output only the label.",
    });
    lib.cluster_consolidation.user_template = "Category: {category}\nRecommendations:\n{suggestions}\n\nLabel:";

    lib.cluster_naming.name = TemplateName::cluster_naming;
    lib.cluster_naming.system_text = lines_of({
        "You name a group of related customer recommendations.",
        "Reply with a short title of at most six words that captures their shared theme.",
        "No quotes and no explanation.",
    });
    lib.cluster_naming.user_template = "Category: {category}\nRecommendations:\n{suggestions}\n\nTitle:";

    lib.cluster_summarization.name = TemplateName::cluster_summarization;
    lib.cluster_summarization.system_text = lines_of({
        "You summarize a group of related customer recommendations for the business owner.",
        "",
        "- Merge overlapping recommendations into unified bullet points without redundancy.",
        "- Each bullet is short, actionable and covers one coherent improvement.",
        "- Keep every essential detail.",
        "- Output only the bullet points.",
    });
    lib.cluster_summarization.user_template = "Recommendations:\n{suggestions}\n\nSummary:";
    return lib;
}

std::string bullet_list(std::span<const std::string> items) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out.push_back('\n');
        out += "- ";
        out += item;
    }
    return out;
}

ExtractionParse parse_extraction(std::string_view content) {
    const auto trimmed = text::trim(content);
    if (trimmed.empty()) throw ProtocolError("extraction: empty response", std::string(content));
    ExtractionParse out;
    std::string_view first = trimmed;
    if (const auto nl = trimmed.find('\n'); nl != std::string_view::npos) {
        first = text::trim(trimmed.substr(0, nl));
        out.warning = "extraction: multi-line response collapsed to its first line";
    }
    if (text::iequals(first, kNoneSentinel)) return out;
    out.suggestion = std::string(first);
    return out;
}

std::string parse_choice(std::string_view content, std::span<const std::string> allowed) {
    if (allowed.empty()) throw ConfigError("parse_choice: allowed labels must be non-empty");
    const auto trimmed = text::trim(content);
    for (const auto& label : allowed)
        if (trimmed == label) return label;

    auto unique = [&](auto pred) -> std::optional<std::string> {
        std::optional<std::string> found;
        for (const auto& label : allowed) {
            if (!pred(label)) continue;
            if (found && *found != label)
                throw ProtocolError("ambiguous label in response: '" + std::string(trimmed) + "'",
                                    std::string(content));
            found = label;
        }
        return found;
    };
    if (auto m = unique([&](const std::string& l) { return text::iequals(trimmed, l); })) return *m;
    if (auto m = unique([&](const std::string& l) { return text::icontains(trimmed, l); })) return *m;
    throw ProtocolError("no allowed label in response: '" + std::string(trimmed) + "'", std::string(content));
}

}  // namespace sugmine::llm
