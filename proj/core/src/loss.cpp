#include "sugmine/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sugmine/error.hpp"

namespace sugmine::classifier {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) {
        throw ConfigError("length mismatch: " + std::to_string(a) + " scores vs " + std::to_string(b) +
                          " labels");
    }
}

}  // namespace

std::vector<double> LossConfig::thresholds() const {
    std::vector<double> t(k);
    for (std::size_t j = 0; j < k; ++j) t[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
    return t;
}

void LossConfig::validate() const {
    if (k < 1) throw ConfigError("loss: k must be at least 1");
    if (!(tau > 0.0)) throw ConfigError("loss: tau must be positive");
    if (!(epsilon > 0.0) || epsilon >= 0.5) throw ConfigError("loss: epsilon must lie in (0, 0.5)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss: alpha must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be non-negative");
}

double ce_loss(std::span<const double> p, std::span<const int> y) {
    check_lengths(p.size(), y.size());
    if (p.empty()) throw ConfigError("ce_loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0)) throw ConfigError("ce_loss: probability outside (0, 1)");
        sum += y[i] ? std::log(p[i]) : std::log1p(-p[i]);
    }
    return -sum / static_cast<double>(p.size());
}

SoftCounts soft_counts(std::span<const double> scores, std::span<const int> y, double t, double tau) {
    check_lengths(scores.size(), y.size());
    if (!(tau > 0.0)) throw ConfigError("soft_counts: tau must be positive");
    SoftCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = sigmoid((scores[i] - t) / tau);
        c.predicted_positive += s;
        if (y[i]) c.true_positive += s;
    }
    return c;
}

double soft_precision(double predicted_positive, double true_positive, double epsilon) {
    return true_positive / (predicted_positive + epsilon);
}

double pr_surrogate_loss(std::span<const double> scores, std::span<const int> y, const LossConfig& config) {
    config.validate();
    check_lengths(scores.size(), y.size());
    double sum = 0.0;
    for (double t : config.thresholds()) {
        const auto c = soft_counts(scores, y, t, config.tau);
        sum += soft_precision(c.predicted_positive, c.true_positive, config.epsilon);
    }
    return 1.0 - sum / static_cast<double>(config.k);
}

double combine_losses(double ce, double pr, const LossConfig& config) noexcept {
    return config.alpha * ce + (1.0 - config.alpha) * config.lambda * pr;
}

LossBreakdown loss_breakdown(std::span<const double> scores, std::span<const int> y, const LossConfig& config) {
    LossBreakdown b;
    b.ce = ce_loss(scores, y);
    b.pr = pr_surrogate_loss(scores, y, config);
    b.total = combine_losses(b.ce, b.pr, config);
    return b;
}

double total_loss(std::span<const double> scores, std::span<const int> y, const LossConfig& config) {
    return loss_breakdown(scores, y, config).total;
}

std::vector<double> total_loss_score_gradient(std::span<const double> scores, std::span<const int> y,
                                              const LossConfig& config) {
    config.validate();
    check_lengths(scores.size(), y.size());
    const std::size_t n = scores.size();
    if (n == 0) throw ConfigError("gradient: empty input");
    std::vector<double> grad(n, 0.0);

    // Cross-entropy term.
    const double ce_w = config.alpha / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        grad[i] = y[i] ? -ce_w / scores[i] : ce_w / (1.0 - scores[i]);

    // Surrogate term: dL_PR/ds_i = -(1/K) sum_k dPrec_k/ds_i with
    // dPrec_k/ds_i = sigma'_ik / tau * (y_i * (PP_k + eps) - TP_k) / (PP_k + eps)^2.
    const double pr_w = (1.0 - config.alpha) * config.lambda;
    if (pr_w == 0.0) return grad;
    std::vector<double> sig(n);
    const double scale = -pr_w / static_cast<double>(config.k) / config.tau;
    for (double t : config.thresholds()) {
        double pp = 0.0;
        double tp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sig[i] = sigmoid((scores[i] - t) / config.tau);
            pp += sig[i];
            if (y[i]) tp += sig[i];
        }
        const double d = pp + config.epsilon;
        const double inv_d2 = 1.0 / (d * d);
        for (std::size_t i = 0; i < n; ++i) {
            const double dsig = sig[i] * (1.0 - sig[i]);
            const double num = (y[i] ? d : 0.0) - tp;
            grad[i] += scale * dsig * num * inv_d2;
        }
    }
    return grad;
}

void Batch::validate() const {
    if (features.size() != labels.size()) throw ConfigError("batch: features and labels differ in length");
    if (labels.empty()) throw ConfigError("batch: must contain at least one example");
    for (int y : labels)
        if (y != 0 && y != 1) throw ConfigError("batch: labels must be 0 or 1");
}

std::vector<double> batch_scores(const Batch& batch, const ScorerParams& params, const LossConfig& config) {
    batch.validate();
    std::vector<double> s(batch.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = score(params, batch.features[i], config.epsilon);
    return s;
}

double batch_loss(const Batch& batch, const ScorerParams& params, const LossConfig& config) {
    const auto s = batch_scores(batch, params, config);
    return total_loss(s, batch.labels, config);
}

ScorerParams total_loss_gradient(const Batch& batch, const ScorerParams& params, const LossConfig& config) {
    batch.validate();
    std::vector<double> s(batch.size());
    std::vector<double> dpdz(batch.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double raw = sigmoid(logit(params, batch.features[i]));
        const bool clamped = raw < config.epsilon || raw > 1.0 - config.epsilon;
        s[i] = std::clamp(raw, config.epsilon, 1.0 - config.epsilon);
        dpdz[i] = clamped ? 0.0 : raw * (1.0 - raw);
    }
    const auto ds = total_loss_score_gradient(s, batch.labels, config);
    ScorerParams grad = params.zeros_like();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double dz = ds[i] * dpdz[i];
        if (dz != 0.0) accumulate_logit_gradient(params, batch.features[i], dz, grad);
    }
    return grad;
}

}  // namespace sugmine::classifier
