#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sugmine::corpus {

inline constexpr std::size_t kMaxReviewChars = 10000;

struct Review {
    std::string id;
    std::string text;
    std::optional<int> label;
    std::vector<std::string> gold_suggestions;
    std::optional<std::string> domain;

    bool operator==(const Review&) const = default;
};

enum class Format { jsonl, csv };

/// Parses "jsonl" / "csv". Throws ConfigError otherwise.
Format parse_format(std::string_view name);

/// Picks the format from a file extension (.jsonl/.json -> jsonl, .csv -> csv).
Format format_for_path(const std::filesystem::path& path);

/// Checks the per-record invariants; throws DataError naming the field.
void validate_review(const Review& review);

/// Parses dataset content. `source` is used in error messages only.
/// Errors name the (1-based) line and the offending field; duplicate ids
/// name both lines.
std::vector<Review> parse_dataset(std::string_view content, Format format,
                                  std::string_view source = "<memory>");

std::vector<Review> load_dataset(const std::filesystem::path& path, Format format);

std::string serialize_dataset(std::span<const Review> reviews, Format format);

void write_dataset(const std::filesystem::path& path, std::span<const Review> reviews,
                   Format format);

/// Separator used for gold suggestions inside a single CSV cell.
inline constexpr std::string_view kCsvGoldSeparator = " ||| ";

// ---------------------------------------------------------------------------
// Descriptive statistics

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

Tokenizer whitespace_tokenizer();

struct DatasetStats {
    std::size_t total = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    // Absent when the dataset is empty.
    std::optional<double> token_length_min;
    std::optional<double> token_length_max;
    std::optional<double> token_length_mean;
    std::optional<double> token_length_sd;  // population standard deviation
};

DatasetStats dataset_stats(std::span<const Review> reviews,
                           const Tokenizer& tokenizer = whitespace_tokenizer());

// ---------------------------------------------------------------------------
// Synthetic corpora

/// A family of equivalent directives. `{x}` in a phrasing or in the
/// suggestion is replaced by one of the slot values.
struct DirectiveFamily {
    std::vector<std::string> phrasings;
    std::string suggestion;
    std::vector<std::string> slot_values;
};

struct SyntheticConfig {
    std::size_t size = 1000;
    double positive_rate = 0.15;
    /// Probability that a positive review is annotated as 0 (missed
    /// annotation); its gold suggestions are dropped with the label.
    double label_noise = 0.0;
    /// Probability that a negative review carries customer-to-customer advice
    /// that shares surface cues ("you should", "I wish") with directives.
    double confusable_rate = 0.0;
    std::size_t min_filler_sentences = 1;
    std::size_t max_filler_sentences = 4;
    std::string domain = "restaurant";
    std::string id_prefix = "syn";

    std::vector<DirectiveFamily> directives;
    std::vector<std::string> filler_sentences;
    /// Confusable templates; `{x}` is filled from `confusable_slot_values`.
    std::vector<std::string> confusable_templates;
    std::vector<std::string> confusable_slot_values;
};

/// Vocabulary seeded from restaurant / dessert-shop review patterns; clean
/// labels, 1000 reviews, 15% positive.
SyntheticConfig default_synthetic_config();

/// The noisy benchmark corpus used by the ablation and learning-curve
/// harnesses: 1000 reviews, 15% positive, 5% label noise, 10% confusables.
SyntheticConfig standard_synthetic_config();

/// Deterministic per (config, seed). Exactly round(size * positive_rate)
/// reviews are generated as positives before label noise is applied.
std::vector<Review> generate_synthetic_corpus(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace sugmine::corpus
