#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sugmine::metrics {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct PrecisionRecall {
    std::optional<double> precision;  // absent when nothing was predicted positive
    std::optional<double> recall;     // absent when there are no positive labels
    ConfusionCounts counts;
};

PrecisionRecall precision_recall(std::span<const int> predictions, std::span<const int> labels);

struct PrCurvePoint {
    double threshold = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
};

/// Hard precision/recall per threshold; an item is predicted positive when
/// score >= threshold (the gate convention).
std::vector<PrCurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels,
                                   std::span<const double> thresholds);

enum class BootstrapMetric { recall, precision };

struct BootstrapResult {
    double observed_delta = 0.0;  // metric(a) - metric(b)
    double p_value = 1.0;
    std::size_t resamples = 0;
    std::uint64_t seed = 0;
};

/// Paired one-sided bootstrap of H1: metric(a) > metric(b). Review indices are
/// resampled with replacement; p = (1 + #{delta* <= 0}) / (1 + resamples).
/// A metric that is undefined on a resample counts as 0.
BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  std::span<const int> labels, BootstrapMetric metric,
                                  std::size_t resamples = 10000, std::uint64_t seed = 0,
                                  double threshold = 0.5);

/// item id -> cluster id.
using Partition = std::map<std::string, std::string>;

/// Adjusted mutual information with arithmetic-mean normalisation and the
/// exact hypergeometric expected mutual information. Returns 1 when the two
/// partitions are identical up to relabelling. Throws ConfigError when the
/// item sets differ.
double ami(const Partition& a, const Partition& b);

/// Same, over two aligned label vectors.
double ami(std::span<const int> labels_a, std::span<const int> labels_b);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// ROUGE-L over normalised whitespace tokens.
RougeScore rouge_l(std::string_view reference, std::string_view hypothesis);

enum class SpanMode { exact, fuzzy };

/// Token-multiset F1 between two normalised strings.
double token_f1(std::string_view gold, std::string_view predicted);

struct SpanMatch {
    double score = 0.0;  // 1/0 for exact, token F1 for fuzzy
    bool matched = false;
};

SpanMatch span_f1(std::string_view gold, std::string_view predicted, SpanMode mode,
                  double fuzzy_threshold = 0.5);

struct SpanItem {
    std::vector<std::string> gold;
    std::vector<std::string> predicted;
};

struct SpanF1Result {
    std::size_t matches = 0;
    std::size_t gold_count = 0;
    std::size_t predicted_count = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy highest-overlap one-to-one alignment inside every item; matches
/// are pooled over items (micro average).
SpanF1Result corpus_span_f1(std::span<const SpanItem> items, SpanMode mode, double fuzzy_threshold = 0.5);

double category_accuracy(std::span<const std::string> gold, std::span<const std::string> predicted);

/// Fleiss' kappa for an items x raters matrix of categorical labels.
/// Absent when expected agreement equals 1 (a single label used throughout).
std::optional<double> fleiss_kappa(const std::vector<std::vector<int>>& ratings);

/// Metric bundle for one evaluation run; sections left empty are omitted
/// from the JSON form.
struct EvalReport {
    struct Classifier {
        std::optional<double> precision;
        std::optional<double> recall;
        std::vector<PrCurvePoint> pr_curve;
    };
    struct Summarization {
        double rouge_l_precision = 0.0;
        double rouge_l_recall = 0.0;
        double rouge_l_f1 = 0.0;
        std::size_t clusters_evaluated = 0;
    };
    struct Extraction {
        double exact_f1 = 0.0;
        double fuzzy_f1 = 0.0;
        double fuzzy_threshold = 0.5;
    };

    std::optional<Classifier> classifier;
    std::optional<BootstrapResult> rq2;
    std::optional<double> clustering_ami;
    std::optional<Summarization> summarization;
    std::optional<Extraction> extraction;
    std::optional<double> categorization_accuracy;
    std::optional<double> fleiss_kappa;

    std::string to_json(int indent = 2) const;
};

}  // namespace sugmine::metrics
