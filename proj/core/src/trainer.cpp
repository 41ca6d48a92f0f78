#include "sugmine/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sugmine/error.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/random.hpp"
#include "sugmine/text.hpp"

namespace sugmine::classifier {
namespace {

constexpr std::uint64_t kSplitSalt = 0x7a11d5eedULL;
constexpr std::uint64_t kInitSalt = 0x1417ULL;
constexpr std::uint64_t kCurveSalt = 0xc0ffeeULL;

struct AdamState {
    ScorerParams m;
    ScorerParams v;
    std::size_t t = 0;
};

void adam_block(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double lr, double decay, double c1, double c2, const TrainConfig& cfg) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_epsilon) + decay * theta[i]);
    }
}

void adamw_step(ScorerParams& p, const ScorerParams& g, AdamState& s, double lr, const TrainConfig& cfg) {
    ++s.t;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(s.t));
    adam_block(p.weights, g.weights, s.m.weights, s.v.weights, lr, cfg.weight_decay, c1, c2, cfg);
    adam_block(p.hidden_weights, g.hidden_weights, s.m.hidden_weights, s.v.hidden_weights, lr, cfg.weight_decay,
               c1, c2, cfg);
    adam_block(p.hidden_bias, g.hidden_bias, s.m.hidden_bias, s.v.hidden_bias, lr, 0.0, c1, c2, cfg);
    std::vector<double> b{p.bias}, gb{g.bias}, mb{s.m.bias}, vb{s.v.bias};
    adam_block(b, gb, mb, vb, lr, 0.0, c1, c2, cfg);
    p.bias = b[0];
    s.m.bias = mb[0];
    s.v.bias = vb[0];
}

// Strictly better model-selection candidate?
bool better(const EpochRecord& cand, const EpochRecord& best, double floor) {
    auto eligible = [floor](const EpochRecord& r) { return r.val_precision && *r.val_precision >= floor; };
    auto f1 = [](const EpochRecord& r) {
        const double p = r.val_precision.value_or(0.0);
        const double q = r.val_recall.value_or(0.0);
        return p + q > 0.0 ? 2.0 * p * q / (p + q) : 0.0;
    };
    const bool ce = eligible(cand);
    const bool be = eligible(best);
    if (ce != be) return ce;
    if (ce) {
        const double rc = cand.val_recall.value_or(0.0);
        const double rb = best.val_recall.value_or(0.0);
        if (rc != rb) return rc > rb;
        return cand.val_precision.value_or(0.0) > best.val_precision.value_or(0.0);
    }
    return f1(cand) > f1(best);
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
    if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ConfigError("train: warmup_ratio must lie in [0, 1]");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("train: validation_fraction must lie in [0, 1)");
    if (!(precision_floor >= 0.0 && precision_floor <= 1.0))
        throw ConfigError("train: precision_floor must lie in [0, 1]");
    if (!(gate_threshold > 0.0 && gate_threshold < 1.0))
        throw ConfigError("train: gate_threshold must lie in (0, 1)");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("train: Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: adam_epsilon must be positive");
}

std::string TrainingTrace::to_jsonl() const {
    std::string out;
    for (const auto& r : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["l_ce"] = r.l_ce;
        j["l_pr"] = r.l_pr;
        j["l_total"] = r.l_total;
        j["val_precision"] = r.val_precision ? nlohmann::ordered_json(*r.val_precision) : nlohmann::ordered_json(nullptr);
        j["val_recall"] = r.val_recall ? nlohmann::ordered_json(*r.val_recall) : nlohmann::ordered_json(nullptr);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

SplitIndices stratified_split(std::span<const corpus::Review> reviews, double held_out_fraction,
                              std::uint64_t seed) {
    if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0))
        throw ConfigError("split: held-out fraction must lie in [0, 1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < reviews.size(); ++i)
        if (reviews[i].label) by_class[*reviews[i].label].push_back(i);

    SplitMix64 rng(seed ^ kSplitSalt);
    SplitIndices out;
    for (auto& idx : by_class) {
        shuffle(std::span<std::size_t>(idx), rng);
        const auto n_out = static_cast<std::size_t>(
            std::floor(held_out_fraction * static_cast<double>(idx.size()) + 0.5));
        out.held_out.insert(out.held_out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_out));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_out), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.held_out.begin(), out.held_out.end());
    return out;
}

TrainResult train(std::span<const corpus::Review> reviews, const FeaturizerConfig& featurizer,
                  const LossConfig& loss, const TrainConfig& config) {
    featurizer.validate();
    loss.validate();
    config.validate();

    std::size_t pos = 0;
    std::size_t neg = 0;
    for (const auto& r : reviews) {
        if (!r.label) continue;
        (*r.label ? pos : neg)++;
    }
    if (pos == 0 || neg == 0)
        throw ConfigError("train: labelled data must contain both positive and negative examples");

    std::vector<FeatureVector> features(reviews.size());
    for (std::size_t i = 0; i < reviews.size(); ++i)
        if (reviews[i].label) features[i] = featurize(reviews[i].text, featurizer);

    auto split = stratified_split(reviews, config.validation_fraction, config.seed);
    auto has_both = [&](const std::vector<std::size_t>& idx) {
        bool p = false, n = false;
        for (auto i : idx) (*reviews[i].label ? p : n) = true;
        return p && n;
    };
    std::vector<std::size_t> train_idx = split.train;
    std::vector<std::size_t> val_idx = split.held_out;
    if (!has_both(train_idx) || !has_both(val_idx)) {
        train_idx.clear();
        for (std::size_t i = 0; i < reviews.size(); ++i)
            if (reviews[i].label) train_idx.push_back(i);
        val_idx = train_idx;
    }

    TrainResult result;
    result.params = config.hidden_units
                        ? ScorerParams::with_hidden_layer(featurizer.dim, config.hidden_units, config.seed ^ kInitSalt)
                        : ScorerParams::linear(featurizer.dim);
    if (config.epochs == 0) return result;

    ScorerParams params = result.params;
    AdamState adam{params.zeros_like(), params.zeros_like(), 0};
    SplitMix64 rng(config.seed);

    const std::size_t steps_per_epoch = (train_idx.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = steps_per_epoch * config.epochs;
    const auto warmup_steps =
        static_cast<std::size_t>(std::ceil(config.warmup_ratio * static_cast<double>(total_steps)));

    auto evaluate = [&](const std::vector<std::size_t>& idx, std::vector<double>& s, std::vector<int>& y) {
        s.resize(idx.size());
        y.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            s[k] = score(params, features[idx[k]], loss.epsilon);
            y[k] = *reviews[idx[k]].label;
        }
    };

    EpochRecord best_record;
    bool have_best = false;
    std::size_t step = 0;
    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Batch batch;
            for (std::size_t k = start; k < end; ++k) {
                batch.features.push_back(features[order[k]]);
                batch.labels.push_back(*reviews[order[k]].label);
            }
            const auto grad = total_loss_gradient(batch, params, loss);
            double lr = config.learning_rate;
            if (warmup_steps > 0 && step < warmup_steps)
                lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
            adamw_step(params, grad, adam, lr, config);
            ++step;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        std::vector<double> s;
        std::vector<int> y;
        evaluate(train_idx, s, y);
        const auto b = loss_breakdown(s, y, loss);
        rec.l_ce = b.ce;
        rec.l_pr = b.pr;
        rec.l_total = b.total;
        evaluate(val_idx, s, y);
        std::vector<int> pred(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) pred[k] = s[k] >= config.gate_threshold ? 1 : 0;
        const auto pr = metrics::precision_recall(pred, y);
        rec.val_precision = pr.precision;
        rec.val_recall = pr.recall;
        result.trace.epochs.push_back(rec);

        if (!have_best || better(rec, best_record, config.precision_floor)) {
            best_record = rec;
            have_best = true;
            result.params = params;
            result.trace.selected_epoch = epoch;
        }
    }
    if (!result.params.all_finite()) throw DataError("train: parameters diverged to non-finite values");
    return result;
}

std::vector<ScoredReview> classify(const ScorerParams& params, const FeaturizerConfig& featurizer,
                                   double threshold, std::span<const corpus::Review> reviews, double epsilon) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("classify: threshold must lie in (0, 1)");
    std::vector<ScoredReview> out;
    out.reserve(reviews.size());
    for (const auto& r : reviews) {
        ScoredReview s;
        s.review = r;
        s.probability = score(params, featurize(r.text, featurizer), epsilon);
        s.gate = s.probability >= threshold;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> default_lexical_patterns() {
    return {"should", "please", "wish", "add more", "would be nice"};
}

bool lexical_baseline(const corpus::Review& review, std::span<const std::string> patterns) {
    if (patterns.empty()) throw ConfigError("lexical_baseline: pattern list must be non-empty");
    return std::any_of(patterns.begin(), patterns.end(),
                       [&](const std::string& p) { return text::icontains(review.text, p); });
}

std::vector<LearningCurvePoint> learning_curve(std::span<const corpus::Review> reviews,
                                               std::span<const double> fractions,
                                               const FeaturizerConfig& featurizer, const LossConfig& loss,
                                               const TrainConfig& config, const LearningCurveOptions& options) {
    if (!std::is_sorted(fractions.begin(), fractions.end()))
        throw ConfigError("learning_curve: fractions must be sorted ascending");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("learning_curve: fractions must lie in (0, 1]");
    if (!(options.threshold > 0.0 && options.threshold < 1.0))
        throw ConfigError("learning_curve: threshold must lie in (0, 1)");

    const auto split = stratified_split(reviews, options.holdout_fraction, config.seed);
    std::vector<std::size_t> pool = split.train;
    SplitMix64 rng(config.seed ^ kCurveSalt);
    shuffle(std::span<std::size_t>(pool), rng);

    std::vector<corpus::Review> held_out;
    for (auto i : split.held_out) held_out.push_back(reviews[i]);

    std::vector<LearningCurvePoint> out;
    for (double f : fractions) {
        LearningCurvePoint point{f, std::nullopt};
        const auto m = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(f * static_cast<double>(pool.size()))));
        // subset in corpus order
        std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(m, pool.size())));
        std::sort(chosen.begin(), chosen.end());
        std::vector<corpus::Review> subset;
        bool p = false, n = false;
        for (auto i : chosen) {
            subset.push_back(reviews[i]);
            (*subset.back().label ? p : n) = true;
        }
        if (p && n && !held_out.empty()) {
            const auto trained = train(subset, featurizer, loss, config);
            const auto scored = classify(trained.params, featurizer, options.threshold, held_out, loss.epsilon);
            std::vector<int> pred;
            std::vector<int> y;
            for (const auto& s : scored) {
                pred.push_back(s.gate ? 1 : 0);
                y.push_back(*s.review.label);
            }
            point.recall = metrics::precision_recall(pred, y).recall;
        }
        out.push_back(point);
    }
    return out;
}

}  // namespace sugmine::classifier
