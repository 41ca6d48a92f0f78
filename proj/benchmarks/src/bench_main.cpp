#include <benchmark/benchmark.h>

#include <vector>

#include "sugmine/corpus.hpp"
#include "sugmine/features.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/random.hpp"
#include "sugmine/trainer.hpp"

using namespace sugmine;

namespace {

const std::vector<corpus::Review>& reviews() {
    static const auto r = corpus::generate_synthetic_corpus(corpus::standard_synthetic_config(), 888);
    return r;
}

void BM_Featurize(benchmark::State& state) {
    const classifier::FeaturizerConfig cfg;
    const auto& rs = reviews();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(classifier::featurize(rs[i++ % rs.size()].text, cfg));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Featurize);

// Full-batch hybrid loss gradient over a batch of the given size.
void BM_LossGradient(benchmark::State& state) {
    const classifier::FeaturizerConfig fcfg;
    const classifier::LossConfig lcfg;
    const auto& rs = reviews();
    classifier::Batch batch;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        batch.features.push_back(classifier::featurize(rs[i].text, fcfg));
        batch.labels.push_back(*rs[i].label);
    }
    const auto params = classifier::ScorerParams::linear(fcfg.dim);
    for (auto _ : state) benchmark::DoNotOptimize(classifier::total_loss_gradient(batch, params, lcfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradient)->Arg(16)->Arg(256);

void BM_TrainEpoch(benchmark::State& state) {
    classifier::TrainConfig t;
    t.learning_rate = 0.05;
    t.epochs = 1;
    for (auto _ : state)
        benchmark::DoNotOptimize(classifier::train(reviews(), {}, {}, t));
    state.SetItemsProcessed(state.iterations() * reviews().size());
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Ami(benchmark::State& state) {
    SplitMix64 rng(1);
    std::vector<int> a(state.range(0)), b(state.range(0));
    for (auto& v : a) v = static_cast<int>(rng.below(20));
    for (auto& v : b) v = static_cast<int>(rng.below(20));
    for (auto _ : state) benchmark::DoNotOptimize(metrics::ami(a, b));
}
BENCHMARK(BM_Ami)->Arg(100)->Arg(2000);

void BM_RougeL(benchmark::State& state) {
    const std::string ref = "Accurately communicate wait times in advance, especially during busy hours.";
    const std::string hyp = "Give customers accurate wait time estimates up front, above all at busy times.";
    for (auto _ : state) benchmark::DoNotOptimize(metrics::rouge_l(ref, hyp));
}
BENCHMARK(BM_RougeL);

}  // namespace

BENCHMARK_MAIN();
