#include "sugmine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "sugmine/error.hpp"
#include "sugmine/random.hpp"
#include "sugmine/text.hpp"

namespace sugmine::metrics {
namespace {

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ConfigError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
    }
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

// Dense relabelling 0..k-1 in order of first appearance.
template <typename T>
std::vector<int> canonical_labels(const std::vector<T>& labels) {
    std::vector<int> out(labels.size());
    std::map<T, int> ids;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    return out;
}

double entropy(const std::vector<std::size_t>& sizes, double n) {
    double h = 0.0;
    for (std::size_t s : sizes) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / n;
        h -= p * std::log(p);
    }
    return h;
}

double ami_canonical(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    if (a == b) return 1.0;  // identical up to relabelling (both canonical)

    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    std::vector<std::size_t> rows(static_cast<std::size_t>(ka), 0);
    std::vector<std::size_t> cols(static_cast<std::size_t>(kb), 0);
    std::vector<std::size_t> table(static_cast<std::size_t>(ka * kb), 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++rows[static_cast<std::size_t>(a[i])];
        ++cols[static_cast<std::size_t>(b[i])];
        ++table[static_cast<std::size_t>(a[i] * kb + b[i])];
    }
    const double nn = static_cast<double>(n);

    double mi = 0.0;
    for (int i = 0; i < ka; ++i) {
        for (int j = 0; j < kb; ++j) {
            const auto nij = table[static_cast<std::size_t>(i * kb + j)];
            if (nij == 0) continue;
            const double r = static_cast<double>(rows[static_cast<std::size_t>(i)]);
            const double c = static_cast<double>(cols[static_cast<std::size_t>(j)]);
            const double v = static_cast<double>(nij);
            mi += v / nn * std::log(nn * v / (r * c));
        }
    }

    // Expected MI under the hypergeometric (permutation) model.
    const double lg_n = std::lgamma(nn + 1.0);
    double emi = 0.0;
    for (std::size_t ra : rows) {
        for (std::size_t cb : cols) {
            const double r = static_cast<double>(ra);
            const double c = static_cast<double>(cb);
            const double base = std::lgamma(r + 1.0) + std::lgamma(c + 1.0) + std::lgamma(nn - r + 1.0) +
                                std::lgamma(nn - c + 1.0) - lg_n;
            const std::size_t lo = std::max<std::size_t>(1, ra + cb > n ? ra + cb - n : 1);
            const std::size_t hi = std::min(ra, cb);
            for (std::size_t nij = lo; nij <= hi; ++nij) {
                const double v = static_cast<double>(nij);
                const double log_p = base - std::lgamma(v + 1.0) - std::lgamma(r - v + 1.0) -
                                     std::lgamma(c - v + 1.0) - std::lgamma(nn - r - c + v + 1.0);
                emi += v / nn * std::log(nn * v / (r * c)) * std::exp(log_p);
            }
        }
    }

    const double normalizer = 0.5 * (entropy(rows, nn) + entropy(cols, nn));
    double denominator = normalizer - emi;
    const double tiny = std::numeric_limits<double>::epsilon();
    denominator = denominator < 0.0 ? std::min(denominator, -tiny) : std::max(denominator, tiny);
    return (mi - emi) / denominator;
}

double metric_value(std::size_t tp, std::size_t fp, std::size_t fn, BootstrapMetric metric) {
    const std::size_t den = metric == BootstrapMetric::recall ? tp + fn : tp + fp;
    return den == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(den);
}

}  // namespace

PrecisionRecall precision_recall(std::span<const int> predictions, std::span<const int> labels) {
    check_same_length(predictions.size(), labels.size(), "precision_recall");
    PrecisionRecall r;
    auto& c = r.counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool y = labels[i] != 0;
        if (p && y) ++c.tp;
        else if (p) ++c.fp;
        else if (y) ++c.fn;
        else ++c.tn;
    }
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    return r;
}

std::vector<PrCurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels,
                                   std::span<const double> thresholds) {
    check_same_length(scores.size(), labels.size(), "pr_curve");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw ConfigError("pr_curve: thresholds must be sorted");
    std::vector<PrCurvePoint> out;
    out.reserve(thresholds.size());
    std::vector<int> pred(scores.size());
    for (double t : thresholds) {
        for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= t ? 1 : 0;
        const auto pr = precision_recall(pred, labels);
        out.push_back({t, pr.precision, pr.recall});
    }
    return out;
}

BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  std::span<const int> labels, BootstrapMetric metric,
                                  std::size_t resamples, std::uint64_t seed, double threshold) {
    check_same_length(scores_a.size(), labels.size(), "bootstrap_compare");
    check_same_length(scores_b.size(), labels.size(), "bootstrap_compare");
    if (resamples < 1000) throw ConfigError("bootstrap_compare: resamples must be at least 1000");
    if (labels.empty()) throw ConfigError("bootstrap_compare: empty input");

    const std::size_t n = labels.size();
    std::vector<char> pa(n);
    std::vector<char> pb(n);
    for (std::size_t i = 0; i < n; ++i) {
        pa[i] = scores_a[i] >= threshold;
        pb[i] = scores_b[i] >= threshold;
    }
    auto delta_for = [&](auto index_of) {
        std::size_t tpa = 0, fpa = 0, fna = 0, tpb = 0, fpb = 0, fnb = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = index_of(k);
            const bool y = labels[i] != 0;
            if (pa[i] && y) ++tpa;
            else if (pa[i]) ++fpa;
            else if (y) ++fna;
            if (pb[i] && y) ++tpb;
            else if (pb[i]) ++fpb;
            else if (y) ++fnb;
        }
        return metric_value(tpa, fpa, fna, metric) - metric_value(tpb, fpb, fnb, metric);
    };

    BootstrapResult result;
    result.resamples = resamples;
    result.seed = seed;
    result.observed_delta = delta_for([](std::size_t k) { return k; });

    // One generator per resample, derived from the master seed, so the
    // outcome does not depend on how resamples are scheduled.
    std::size_t not_better = 0;
    for (std::size_t r = 0; r < resamples; ++r) {
        SplitMix64 rng(SplitMix64::derive(seed, r));
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
        if (delta_for([&](std::size_t k) { return idx[k]; }) <= 0.0) ++not_better;
    }
    result.p_value = static_cast<double>(not_better + 1) / static_cast<double>(resamples + 1);
    return result;
}

double ami(const Partition& a, const Partition& b) {
    if (a.size() != b.size()) throw ConfigError("ami: partitions cover different item sets");
    std::vector<std::string> la;
    std::vector<std::string> lb;
    la.reserve(a.size());
    lb.reserve(b.size());
    auto ib = b.begin();
    for (const auto& [item, cluster] : a) {
        if (ib->first != item) throw ConfigError("ami: partitions cover different item sets ('" + item + "')");
        la.push_back(cluster);
        lb.push_back(ib->second);
        ++ib;
    }
    if (la.empty()) return 1.0;
    return ami_canonical(canonical_labels(la), canonical_labels(lb));
}

double ami(std::span<const int> labels_a, std::span<const int> labels_b) {
    check_same_length(labels_a.size(), labels_b.size(), "ami");
    if (labels_a.empty()) return 1.0;
    return ami_canonical(canonical_labels(std::vector<int>(labels_a.begin(), labels_a.end())),
                         canonical_labels(std::vector<int>(labels_b.begin(), labels_b.end())));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(std::string_view reference, std::string_view hypothesis) {
    const auto ref = text::normalized_tokens(reference);
    const auto hyp = text::normalized_tokens(hypothesis);
    RougeScore s;
    if (ref.empty() || hyp.empty()) return s;
    const auto lcs = static_cast<double>(lcs_length(ref, hyp));
    if (lcs == 0.0) return s;
    s.precision = lcs / static_cast<double>(hyp.size());
    s.recall = lcs / static_cast<double>(ref.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double token_f1(std::string_view gold, std::string_view predicted) {
    const auto g = text::normalized_tokens(gold);
    const auto p = text::normalized_tokens(predicted);
    if (g.empty() || p.empty()) return 0.0;
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& t : g) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(g.size() + p.size());
}

SpanMatch span_f1(std::string_view gold, std::string_view predicted, SpanMode mode, double fuzzy_threshold) {
    if (!(fuzzy_threshold > 0.0 && fuzzy_threshold <= 1.0))
        throw ConfigError("span_f1: fuzzy threshold must lie in (0, 1]");
    SpanMatch m;
    if (mode == SpanMode::exact) {
        const auto g = text::normalize(gold);
        m.matched = !g.empty() && g == text::normalize(predicted);
        m.score = m.matched ? 1.0 : 0.0;
    } else {
        m.score = token_f1(gold, predicted);
        m.matched = m.score >= fuzzy_threshold;
    }
    return m;
}

SpanF1Result corpus_span_f1(std::span<const SpanItem> items, SpanMode mode, double fuzzy_threshold) {
    SpanF1Result r;
    for (const auto& item : items) {
        r.gold_count += item.gold.size();
        r.predicted_count += item.predicted.size();
        struct Cell {
            SpanMatch m;
            std::size_t g;
            std::size_t p;
        };
        std::vector<Cell> cells;
        for (std::size_t g = 0; g < item.gold.size(); ++g)
            for (std::size_t p = 0; p < item.predicted.size(); ++p)
                cells.push_back({span_f1(item.gold[g], item.predicted[p], mode, fuzzy_threshold), g, p});
        std::stable_sort(cells.begin(), cells.end(),
                         [](const Cell& x, const Cell& y) { return x.m.score > y.m.score; });
        std::vector<char> gold_used(item.gold.size(), 0);
        std::vector<char> pred_used(item.predicted.size(), 0);
        for (const auto& c : cells) {
            if (!c.m.matched) break;
            if (gold_used[c.g] || pred_used[c.p]) continue;
            gold_used[c.g] = pred_used[c.p] = 1;
            ++r.matches;
        }
    }
    if (r.predicted_count) r.precision = static_cast<double>(r.matches) / static_cast<double>(r.predicted_count);
    if (r.gold_count) r.recall = static_cast<double>(r.matches) / static_cast<double>(r.gold_count);
    if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double category_accuracy(std::span<const std::string> gold, std::span<const std::string> predicted) {
    check_same_length(gold.size(), predicted.size(), "category_accuracy");
    if (gold.empty()) throw ConfigError("category_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (gold[i] == predicted[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

std::optional<double> fleiss_kappa(const std::vector<std::vector<int>>& ratings) {
    if (ratings.empty()) throw ConfigError("fleiss_kappa: no items");
    const std::size_t raters = ratings.front().size();
    if (raters < 2) throw ConfigError("fleiss_kappa: at least two raters per item required");
    std::map<int, std::size_t> label_totals;
    for (const auto& row : ratings) {
        if (row.size() != raters) throw ConfigError("fleiss_kappa: ragged ratings matrix");
        for (int label : row) ++label_totals[label];
    }

    const double n = static_cast<double>(raters);
    const double items = static_cast<double>(ratings.size());
    double p_bar = 0.0;
    for (const auto& row : ratings) {
        std::map<int, std::size_t> counts;
        for (int label : row) ++counts[label];
        double agree = 0.0;
        for (const auto& [label, c] : counts) agree += static_cast<double>(c) * static_cast<double>(c);
        p_bar += (agree - n) / (n * (n - 1.0));
    }
    p_bar /= items;

    double p_e = 0.0;
    for (const auto& [label, c] : label_totals) {
        const double pj = static_cast<double>(c) / (items * n);
        p_e += pj * pj;
    }
    if (p_e >= 1.0) return std::nullopt;
    return (p_bar - p_e) / (1.0 - p_e);
}

}  // namespace sugmine::metrics
