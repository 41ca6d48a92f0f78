#include <doctest.h>

#include <cmath>
#include <numbers>

#include "batches.hpp"
#include "oracles.hpp"
#include "sugmine/error.hpp"
#include "sugmine/features.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/random.hpp"

using namespace sugmine;
using namespace sugmine::classifier;

TEST_CASE("loss config defaults and thresholds") {
    LossConfig c;
    CHECK(c.k == 25);
    CHECK(c.tau == 0.02);
    CHECK(c.epsilon == 1e-8);
    CHECK(c.alpha == 0.6);
    CHECK(c.lambda == 1.3);
    const auto t = c.thresholds();
    REQUIRE(t.size() == 25);
    CHECK(t.front() == doctest::Approx(0.02));
    CHECK(t.back() == doctest::Approx(0.98));
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);

    auto bad = c;
    bad.tau = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.alpha = 1.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.lambda = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.k = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cross entropy examples") {
    const std::vector<double> half{0.5};
    const std::vector<int> one{1};
    CHECK(ce_loss(half, one) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));

    const std::vector<double> sure{1 - 1e-12, 1e-12};
    const std::vector<int> y10{1, 0};
    CHECK(std::abs(ce_loss(sure, y10)) < 1e-9);

    // Independent evaluation: -(ln 0.9 + ln 0.8 + ln 0.7) / 3.
    const std::vector<double> p{0.9, 0.2, 0.7};
    const std::vector<int> y{1, 0, 1};
    CHECK(ce_loss(p, y) == doctest::Approx(0.22839300363692283).epsilon(1e-14));

    CHECK_THROWS_AS(ce_loss(p, one), ConfigError);
    const std::vector<double> edge{1.0};
    CHECK_THROWS_AS(ce_loss(edge, one), ConfigError);
}

TEST_CASE("soft count examples") {
    const std::vector<double> s{0.9, 0.1};
    const std::vector<int> y{1, 0};
    const auto c = soft_counts(s, y, 0.5, 0.02);
    CHECK(std::abs(c.predicted_positive - 1.0) < 1e-8);
    CHECK(std::abs(c.true_positive - 1.0) < 1e-8);

    const std::vector<double> at{0.3, 0.3, 0.3, 0.3};
    const std::vector<int> ya{1, 0, 1, 0};
    CHECK(soft_counts(at, ya, 0.3, 0.02).predicted_positive == 2.0);
    CHECK(soft_counts(at, ya, 0.3, 0.02).true_positive == 1.0);

    const std::vector<int> zeros{0, 0};
    CHECK(soft_counts(s, zeros, 0.5, 0.02).true_positive == 0.0);
}

TEST_CASE("soft precision examples") {
    CHECK(soft_precision(0.0, 0.0, 1e-8) == 0.0);
    CHECK(soft_precision(1.0, 1.0, 1e-8) == doctest::Approx(1.0 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(soft_precision(1.0, 1.0, 1e-8) < 1.0);
    CHECK(soft_precision(1.2, 0.9, 1e-8) == doctest::Approx(0.7499999937500001).epsilon(1e-13));
}

TEST_CASE("precision surrogate examples") {
    LossConfig sharp;
    sharp.tau = 1e-4;
    const std::vector<double> s{1.0, 1.0, 0.0, 0.0, 0.0};
    const std::vector<int> y{1, 1, 0, 0, 0};
    CHECK(pr_surrogate_loss(s, y, sharp) < 1e-3);

    const std::vector<int> none{0, 0, 0, 0, 0};
    CHECK(pr_surrogate_loss(s, none, LossConfig{}) == 1.0);

    // Frozen from an independent direct summation over the 25 midpoints.
    const std::vector<double> s3{0.9, 0.6, 0.2};
    const std::vector<int> y3{1, 1, 0};
    CHECK(std::abs(pr_surrogate_loss(s3, y3, LossConfig{}) - 0.06936582755869025) < 1e-10);
    CHECK(std::abs(pr_surrogate_loss(s3, y3, LossConfig{}) -
                   oracle::direct_total_loss({0.9, 0.6, 0.2}, {1, 1, 0}, 25, 0.02, 1e-8, 0.0, 1.0)) < 1e-12);
}

TEST_CASE("total loss examples") {
    const std::vector<double> s{0.9, 0.6, 0.2, 0.35};
    const std::vector<int> y{1, 1, 0, 1};
    LossConfig ce_only;
    ce_only.alpha = 1.0;
    CHECK(total_loss(s, y, ce_only) == ce_loss(s, y));

    LossConfig pr_only;
    pr_only.alpha = 0.0;
    pr_only.lambda = 1.0;
    CHECK(total_loss(s, y, pr_only) == pr_surrogate_loss(s, y, pr_only));

    CHECK(combine_losses(0.5, 0.4, LossConfig{}) == doctest::Approx(0.508).epsilon(1e-15));

    const auto b = loss_breakdown(s, y, LossConfig{});
    CHECK(b.total == doctest::Approx(combine_losses(b.ce, b.pr, LossConfig{})).epsilon(1e-15));
    CHECK(b.total == doctest::Approx(oracle::direct_total_loss({0.9, 0.6, 0.2, 0.35}, {1, 1, 0, 1}, 25, 0.02,
                                                               1e-8, 0.6, 1.3))
                         .epsilon(1e-12));
}

TEST_CASE("loss bounds and monotone soft counts") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = 1e-6 + rng.uniform() * (1 - 2e-6);
            y[i] = rng.uniform() < 0.5;
        }
        LossConfig cfg;
        cfg.alpha = rng.uniform();
        cfg.lambda = rng.uniform() * 3;
        const auto b = loss_breakdown(s, y, cfg);
        CHECK(b.ce >= 0.0);
        CHECK(b.pr >= 0.0);
        CHECK(b.pr <= 1.0);
        CHECK(b.total >= 0.0);

        double last = static_cast<double>(n) + 1;
        for (double t : cfg.thresholds()) {
            const auto c = soft_counts(s, y, t, cfg.tau);
            CHECK(c.predicted_positive <= last);
            CHECK(c.true_positive <= c.predicted_positive + 1e-12);
            CHECK(c.true_positive >= 0.0);
            last = c.predicted_positive;
        }
    }
}

TEST_CASE("score gradient matches finite differences on scores") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(10);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = 0.05 + 0.9 * rng.uniform();
            y[i] = i % 2;
        }
        const LossConfig cfg;
        const auto g = total_loss_score_gradient(s, y, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            auto up = s, down = s;
            up[i] += 1e-6;
            down[i] -= 1e-6;
            const double fd = (total_loss(up, y, cfg) - total_loss(down, y, cfg)) / 2e-6;
            CHECK(oracle::close(g[i], fd, 1e-4, 1e-7));
        }
    }
}

TEST_CASE("parameter gradient matches central differences") {
    // A fixed 8-example batch at D = 32 plus a spread of random cases.
    SUBCASE("eight examples, D = 32") {
        FeaturizerConfig f;
        f.dim = 32;
        Batch batch;
        const char* texts[] = {"please add more seating", "great food",       "should notify about the wait",
                               "the fries were crispy",   "wish there were more vegan options", "loved it",
                               "add pictures to the menu", "service was slow"};
        for (int i = 0; i < 8; ++i) {
            batch.features.push_back(featurize(texts[i], f));
            batch.labels.push_back(i % 2 == 0 ? 1 : 0);
        }
        auto params = ScorerParams::linear(32);
        SplitMix64 rng(8);
        for (auto& w : params.weights) w = rng.uniform() * 2 - 1;
        const LossConfig cfg;
        const auto analytic = oracle::flatten(total_loss_gradient(batch, params, cfg));
        const auto fd = oracle::finite_difference_gradient(batch, params, cfg, 1e-5);
        REQUIRE(analytic.size() == fd.size());
        for (std::size_t i = 0; i < fd.size(); ++i) CHECK(oracle::close(analytic[i], fd[i], 1e-4, 1e-7));
    }
    SUBCASE("random batches with linear and hidden scorers") {
        for (std::uint64_t seed = 1000; seed < 1012; ++seed) {
            auto c = testing_support::random_gradient_case(seed);
            const auto analytic = oracle::flatten(total_loss_gradient(c.batch, c.params, c.loss));
            const auto fd = oracle::finite_difference_gradient(c.batch, c.params, c.loss, 1e-5);
            REQUIRE(analytic.size() == fd.size());
            for (std::size_t i = 0; i < fd.size(); ++i) {
                CAPTURE(seed);
                CAPTURE(i);
                CHECK(oracle::close(analytic[i], fd[i], 1e-4, 1e-7));
            }
        }
    }
}

TEST_CASE("gradient vanishes at a confident cross-entropy optimum") {
    Batch batch;
    batch.features = {FeatureVector{4, {0}, {1.0}}, FeatureVector{4, {1}, {1.0}}};
    batch.labels = {1, 0};
    auto params = ScorerParams::linear(4);
    params.weights = {17.0, -17.0, 0.0, 0.0};
    LossConfig cfg;
    cfg.alpha = 1.0;
    const auto g = oracle::flatten(total_loss_gradient(batch, params, cfg));
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("duplicating a batch keeps the mean cross-entropy gradient") {
    auto c = testing_support::random_gradient_case(42);
    c.loss.alpha = 1.0;
    auto doubled = c.batch;
    doubled.features.insert(doubled.features.end(), c.batch.features.begin(), c.batch.features.end());
    doubled.labels.insert(doubled.labels.end(), c.batch.labels.begin(), c.batch.labels.end());
    const auto a = oracle::flatten(total_loss_gradient(c.batch, c.params, c.loss));
    const auto b = oracle::flatten(total_loss_gradient(doubled, c.params, c.loss));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("clamped scores carry no gradient") {
    Batch batch;
    batch.features = {FeatureVector{2, {0}, {1.0}}, FeatureVector{2, {1}, {1.0}}};
    batch.labels = {1, 0};
    auto params = ScorerParams::linear(2);
    params.weights = {40.0, -40.0};
    LossConfig cfg;
    cfg.alpha = 1.0;
    const auto g = total_loss_gradient(batch, params, cfg);
    CHECK(g.weights[0] == 0.0);
    CHECK(g.weights[1] == 0.0);
    CHECK(g.bias == 0.0);
}

TEST_CASE("batch validation") {
    Batch b;
    CHECK_THROWS_AS(b.validate(), ConfigError);
    b.features = {FeatureVector{2, {}, {}}};
    b.labels = {1, 0};
    CHECK_THROWS_AS(b.validate(), ConfigError);
    b.labels = {2};
    CHECK_THROWS_AS(b.validate(), ConfigError);
}

TEST_CASE("soft precision approaches hard precision as tau shrinks") {
    SplitMix64 rng(3);
    LossConfig cfg;
    cfg.tau = 1e-4;
    const auto grid = cfg.thresholds();
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        while (s.size() < 12) {
            const double v = rng.uniform();
            const bool far = std::all_of(grid.begin(), grid.end(), [&](double t) { return std::abs(v - t) >= 0.005; });
            if (!far) continue;
            s.push_back(v);
            y.push_back(rng.uniform() < 0.5);
        }
        const auto hard = metrics::pr_curve(s, y, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto c = soft_counts(s, y, grid[k], cfg.tau);
            const double soft = soft_precision(c.predicted_positive, c.true_positive, cfg.epsilon);
            CHECK(std::abs(soft - hard[k].precision.value_or(0.0)) < 1e-3);
        }
    }
}
