#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sugmine/corpus.hpp"
#include "sugmine/gateway.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/model.hpp"

namespace sugmine::pipeline {

inline constexpr std::string_view kDefaultCategory = "Miscellaneous";

/// {Menu, Wait Time, Service, Facilities, Pricing, Miscellaneous}.
std::vector<std::string> default_categories();

struct Suggestion {
    std::string id;
    std::string source_review_id;
    std::string text;
    std::optional<std::string> category;

    bool operator==(const Suggestion&) const = default;
};

struct Cluster {
    std::string category;
    std::string name;
    std::vector<std::string> member_ids;  // ascending
    std::optional<std::string> summary;

    bool operator==(const Cluster&) const = default;
};

struct PriorityItem {
    enum class Kind { cluster, standalone };
    Kind kind = Kind::cluster;
    std::size_t cluster_index = 0;  // into ClusterSet::clusters, for Kind::cluster
    std::string suggestion_id;      // for Kind::standalone

    bool operator==(const PriorityItem&) const = default;
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    std::vector<std::string> standalone;  // ascending ids
    std::vector<PriorityItem> priority_order;

    bool operator==(const ClusterSet&) const = default;
};

struct PipelineConfig {
    std::size_t pair_budget = 500;
    double failure_threshold = 0.2;
    std::uint64_t sampling_seed = 888;
    bool enable_categorization = true;
    bool enable_clustering = true;
    bool enable_summarization = true;
    /// Category given to every suggestion when categorization is disabled.
    std::string pooled_category = "All";

    void validate() const;
};

struct PipelineCounts {
    std::size_t reviews_in = 0;
    std::size_t gated = 0;
    std::size_t discarded = 0;
    std::size_t extracted = 0;
    std::size_t none_responses = 0;
    std::size_t extraction_failures = 0;
    std::size_t categorized = 0;
    std::size_t clusters = 0;
    std::size_t clustered = 0;
    std::size_t standalone = 0;
    std::size_t llm_requests = 0;
};

struct StageTiming {
    std::string stage;
    double milliseconds = 0.0;
};

struct PipelineRun {
    std::string run_id;
    nlohmann::ordered_json config;  // snapshot supplied by the caller
    std::vector<StageTiming> timings;
    PipelineCounts counts;
    std::vector<std::string> warnings;
    /// Ids of gated reviews whose extraction came back NONE.
    std::vector<std::string> none_review_ids;

    std::string to_json(int indent = 2) const;
};

struct PipelineResult {
    std::vector<Suggestion> suggestions;
    ClusterSet cluster_set;
    PipelineRun run;
};

/// Raised when a stage's failure rate exceeds PipelineConfig::failure_threshold.
class PipelineAborted : public std::runtime_error {
public:
    PipelineAborted(const std::string& what, std::string stage, std::size_t failures, std::size_t items)
        : std::runtime_error(what), stage_(std::move(stage)), failures_(failures), items_(items) {}
    const std::string& stage() const noexcept { return stage_; }
    std::size_t failures() const noexcept { return failures_; }
    std::size_t items() const noexcept { return items_; }

private:
    std::string stage_;
    std::size_t failures_;
    std::size_t items_;
};

/// Per-stage bookkeeping threaded through the stage functions.
struct StageLog {
    std::vector<std::string> warnings;
    std::size_t failures = 0;
    std::size_t items = 0;
};

/// One extraction call per review, in input order. Suggestion ids are
/// "S" followed by a zero-padded ordinal.
std::vector<Suggestion> extract_stage(std::span<const corpus::Review> gated, llm::Gateway& gateway,
                                      StageLog& log, std::vector<std::string>* none_review_ids = nullptr);

/// Unparseable answers are retried once, then the default label is used.
void categorize_stage(std::vector<Suggestion>& suggestions, std::span<const std::string> categories,
                      llm::Gateway& gateway, StageLog& log);

/// Pairwise same-theme graph per category, connected components as candidate
/// clusters, a cohesion check that splits rejected components, then naming.
/// Categories are visited in the given order; suggestions without one of
/// these categories are ignored.
ClusterSet cluster_stage(std::span<const Suggestion> suggestions, std::span<const std::string> categories,
                         llm::Gateway& gateway, const PipelineConfig& config, StageLog& log);

/// Every suggestion becomes standalone.
ClusterSet no_clustering(std::span<const Suggestion> suggestions);

void summarize_stage(ClusterSet& set, std::span<const Suggestion> suggestions, llm::Gateway& gateway,
                     StageLog& log);

/// Clusters by size descending (ties: earliest member id), then standalone ids.
std::vector<PriorityItem> prioritize(const ClusterSet& set);

/// Gate with the classifier, then run the LLM stages. Categories must be
/// non-empty and contain the default label.
PipelineResult run_pipeline(std::span<const corpus::Review> reviews, const classifier::ClassifierModel& model,
                            double gate_threshold, std::span<const std::string> categories,
                            llm::Gateway& gateway, const PipelineConfig& config = {});

/// Same as run_pipeline with gate decisions already made (one per review).
PipelineResult run_gated_pipeline(std::span<const corpus::Review> reviews, const std::vector<bool>& gates,
                                  std::span<const std::string> categories, llm::Gateway& gateway,
                                  const PipelineConfig& config = {});

/// clusters.json: one key per category (in the given order) holding its
/// clusters, then "standalone" and "priority_order". Stable bytes.
std::string cluster_set_json(const ClusterSet& set, std::span<const std::string> categories);
std::string suggestions_jsonl(std::span<const Suggestion> suggestions);
std::string report_markdown(const PipelineResult& result);

/// Writes run.json, suggestions.jsonl, clusters.json, report.md, warnings.log.
void write_run_directory(const std::filesystem::path& dir, const PipelineResult& result,
                         std::span<const std::string> categories);

/// Reference annotations for one review.
struct GoldReview {
    std::string review_id;
    std::optional<std::string> suggestion;
    std::optional<std::string> category;
    std::optional<std::string> cluster;  // absent for standalone
};

struct PipelineGold {
    std::vector<GoldReview> reviews;
    std::map<std::string, std::string> summaries;  // gold cluster label -> reference summary
};

/// {"reviews": [{"review_id", "suggestion", "category", "cluster"}], "summaries": {label: text}}.
PipelineGold parse_gold(std::string_view json_text);
PipelineGold load_gold(const std::filesystem::path& path);

/// Extraction span F1, categorization accuracy, AMI between predicted and
/// gold partitions of the suggestions both sides agree exist, and ROUGE-L of
/// summaries against the gold summary of each cluster's majority label.
metrics::EvalReport evaluate_run(const PipelineResult& result, const PipelineGold& gold,
                                 double fuzzy_threshold = 0.5);

}  // namespace sugmine::pipeline
