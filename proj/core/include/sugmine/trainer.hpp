#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sugmine/corpus.hpp"
#include "sugmine/features.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/scorer.hpp"

namespace sugmine::classifier {

/// Optimiser and model-selection settings. Defaults follow the reference
/// fine-tuning recipe (AdamW, batch 16, lr 1e-5, wd 0.01, warmup 0.1,
/// seed 888); a linear hashed scorer usually wants a larger learning rate.
struct TrainConfig {
    std::size_t batch_size = 16;
    double learning_rate = 1e-5;
    double weight_decay = 0.01;
    double warmup_ratio = 0.1;
    std::size_t epochs = 20;
    std::uint64_t seed = 888;
    /// Stratified share of labelled data held out for model selection.
    /// 0 selects on the training data itself.
    double validation_fraction = 0.2;
    /// Model selection: best validation recall among epochs whose validation
    /// precision reaches this floor.
    double precision_floor = 0.8;
    /// Threshold used for validation precision/recall.
    double gate_threshold = 0.5;
    /// 0 = linear scorer; otherwise one tanh hidden layer of this width.
    std::size_t hidden_units = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double l_ce = 0.0;
    double l_pr = 0.0;
    double l_total = 0.0;
    std::optional<double> val_precision;
    std::optional<double> val_recall;
};

struct TrainingTrace {
    std::vector<EpochRecord> epochs;
    /// Epoch whose parameters were returned; 0 means the initial parameters.
    std::size_t selected_epoch = 0;

    /// One JSON object per epoch:
    /// {epoch, l_ce, l_pr, l_total, val_precision, val_recall}.
    std::string to_jsonl() const;
};

struct TrainResult {
    ScorerParams params;
    TrainingTrace trace;
};

/// Trains the scorer with AdamW (decoupled weight decay on weights, not
/// biases), linear warmup over warmup_ratio of all steps, then a constant
/// rate. Unlabelled reviews are ignored. Throws ConfigError when the
/// labelled data contains a single class.
TrainResult train(std::span<const corpus::Review> reviews, const FeaturizerConfig& featurizer,
                  const LossConfig& loss, const TrainConfig& config);

struct ScoredReview {
    corpus::Review review;
    double probability = 0.0;
    bool gate = false;
};

/// Gate decision is probability >= threshold. Order is preserved.
std::vector<ScoredReview> classify(const ScorerParams& params, const FeaturizerConfig& featurizer,
                                   double threshold, std::span<const corpus::Review> reviews,
                                   double epsilon = kDefaultEpsilon);

std::vector<std::string> default_lexical_patterns();

/// True iff any pattern occurs in the review text, case-insensitively.
bool lexical_baseline(const corpus::Review& review, std::span<const std::string> patterns);

struct LearningCurvePoint {
    double fraction = 0.0;
    std::optional<double> recall;  // absent when the subsample had one class
};

struct LearningCurveOptions {
    double holdout_fraction = 0.2;
    double threshold = 0.5;
};

/// Splits off a fixed stratified hold-out set (seeded by config.seed), then
/// trains once per fraction on a nested prefix of a seeded permutation of
/// the remaining data and reports hold-out recall.
std::vector<LearningCurvePoint> learning_curve(std::span<const corpus::Review> reviews,
                                               std::span<const double> fractions,
                                               const FeaturizerConfig& featurizer, const LossConfig& loss,
                                               const TrainConfig& config,
                                               const LearningCurveOptions& options = {});

/// Stratified split of labelled reviews into (train, held_out) indices.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> held_out;
};
SplitIndices stratified_split(std::span<const corpus::Review> reviews, double held_out_fraction,
                              std::uint64_t seed);

}  // namespace sugmine::classifier
