#pragma once

#include <span>
#include <vector>

#include "sugmine/features.hpp"
#include "sugmine/scorer.hpp"

namespace sugmine::classifier {

/// Settings of the hybrid objective
///
///   L_total = alpha * L_CE + (1 - alpha) * lambda * L_PR
///
/// where L_PR is one minus the soft precision averaged over `k` thresholds.
/// Both (1 - alpha) and lambda scale L_PR; they are kept as two knobs.
struct LossConfig {
    std::size_t k = 25;
    double tau = 0.02;
    double epsilon = 1e-8;
    double alpha = 0.6;
    double lambda = 1.3;

    /// Midpoint grid t_j = (j - 0.5) / k, j = 1..k, strictly inside (0, 1).
    std::vector<double> thresholds() const;
    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

struct SoftCounts {
    double predicted_positive = 0.0;  // PP_hat
    double true_positive = 0.0;       // TP_hat
};

struct LossBreakdown {
    double ce = 0.0;
    double pr = 0.0;
    double total = 0.0;
};

/// Mean binary cross-entropy. p must lie strictly inside (0, 1); no clamping
/// is applied here (score() clamps).
double ce_loss(std::span<const double> p, std::span<const int> y);

/// Sigmoid-relaxed predicted-positive and true-positive counts at threshold t.
SoftCounts soft_counts(std::span<const double> scores, std::span<const int> y, double t, double tau);

double soft_precision(double predicted_positive, double true_positive, double epsilon);

double pr_surrogate_loss(std::span<const double> scores, std::span<const int> y, const LossConfig& config);

/// alpha * ce + (1 - alpha) * lambda * pr.
double combine_losses(double ce, double pr, const LossConfig& config) noexcept;

LossBreakdown loss_breakdown(std::span<const double> scores, std::span<const int> y, const LossConfig& config);

double total_loss(std::span<const double> scores, std::span<const int> y, const LossConfig& config);

/// dL_total / ds_i for every score.
std::vector<double> total_loss_score_gradient(std::span<const double> scores, std::span<const int> y,
                                              const LossConfig& config);

struct Batch {
    std::vector<FeatureVector> features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    void validate() const;
};

/// Scores a batch with the scorer (clamped by config.epsilon).
std::vector<double> batch_scores(const Batch& batch, const ScorerParams& params, const LossConfig& config);

/// L_total evaluated end to end on a batch.
double batch_loss(const Batch& batch, const ScorerParams& params, const LossConfig& config);

/// Analytic gradient of batch_loss with respect to every scorer parameter.
/// Scores that sit on the clamp boundary contribute no gradient, matching
/// the derivative of the clamped score.
ScorerParams total_loss_gradient(const Batch& batch, const ScorerParams& params, const LossConfig& config);

}  // namespace sugmine::classifier
