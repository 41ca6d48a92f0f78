// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "batches.hpp"
#include "golden.hpp"
#include "oracles.hpp"
#include "rouge_cases.hpp"
#include "sugmine/corpus.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/pipeline.hpp"
#include "sugmine/random.hpp"
#include "sugmine/text.hpp"
#include "sugmine/trainer.hpp"

namespace fs = std::filesystem;
using namespace sugmine;
using llm::TemplateName;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

classifier::TrainConfig test_train_config(std::uint64_t seed) {
    classifier::TrainConfig t;
    t.learning_rate = 0.05;
    t.epochs = 20;
    t.seed = seed;
    return t;
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_oracle() {
    std::size_t worst_case = 0, checked = 0;
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto c = testing_support::random_gradient_case(seed);
        const auto analytic = oracle::flatten(classifier::total_loss_gradient(c.batch, c.params, c.loss));
        const auto fd = oracle::finite_difference_gradient(c.batch, c.params, c.loss, 1e-5);
        if (analytic.size() != fd.size()) return {false, "gradient size mismatch on case " + std::to_string(seed)};
        for (std::size_t i = 0; i < fd.size(); ++i) {
            ++checked;
            const double scale = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3});
            const double rel = std::abs(analytic[i] - fd[i]) / scale;
            if (rel > worst) {
                worst = rel;
                worst_case = seed;
            }
            if (!oracle::close(analytic[i], fd[i], 1e-4, 1e-7)) ok = false;
        }
    }
    return {ok, "100 batches, " + std::to_string(checked) + " partials, worst scaled error " + num(worst * 1e6, 3) +
                    "e-6 (case " + std::to_string(worst_case) + ")"};
}

// 2 ---------------------------------------------------------------------------

Outcome surrogate_limit() {
    classifier::LossConfig cfg;
    cfg.tau = 1e-4;
    const auto grid = cfg.thresholds();
    constexpr double kMargin = 0.015;
    SplitMix64 rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<double> s;
        std::vector<int> y;
        while (s.size() < n) {
            const double v = rng.uniform();
            bool far = true;
            // Midpoints sit 0.04 apart, so no probability is 0.05 from all of
            // them; 0.015 is the widest margin that leaves room to sample.
            for (double t : grid) far = far && std::abs(v - t) >= kMargin;
            if (!far) continue;
            s.push_back(v);
            y.push_back(rng.uniform() < 0.5 ? 1 : 0);
        }
        const auto hard = metrics::pr_curve(s, y, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto c = classifier::soft_counts(s, y, grid[k], cfg.tau);
            const double soft = classifier::soft_precision(c.predicted_positive, c.true_positive, cfg.epsilon);
            worst = std::max(worst, std::abs(soft - hard[k].precision.value_or(0.0)));
        }
    }
    return {worst < 1e-3, "1000 instances, scores >= " + num(kMargin, 3) +
                              " from every midpoint, max |soft - hard| = " + num(worst, 10)};
}

// 3 ---------------------------------------------------------------------------

Outcome rq2_direction() {
    const auto corpus_cfg = corpus::standard_synthetic_config();
    classifier::FeaturizerConfig feat;
    classifier::LossConfig hybrid;
    auto ce_only = hybrid;
    ce_only.alpha = 1.0;

    double rh = 0, rc = 0, ph = 0, pc = 0;
    std::size_t big_gaps = 0, significant = 0;
    double best_p = 1.0;
    std::ostringstream per_seed;
    const int seeds = 10;
    for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = 888 + k;
        const auto reviews = corpus::generate_synthetic_corpus(corpus_cfg, seed);
        const auto split = classifier::stratified_split(reviews, 0.2, seed);
        std::vector<corpus::Review> train_set, held;
        for (auto i : split.train) train_set.push_back(reviews[i]);
        for (auto i : split.held_out) held.push_back(reviews[i]);
        std::vector<int> labels;
        for (const auto& r : held) labels.push_back(*r.label);

        auto fit = [&](const classifier::LossConfig& loss) {
            const auto params = classifier::train(train_set, feat, loss, test_train_config(seed)).params;
            std::vector<double> probs;
            for (const auto& s : classifier::classify(params, feat, 0.5, held)) probs.push_back(s.probability);
            return probs;
        };
        const auto a = fit(hybrid);
        const auto b = fit(ce_only);
        auto pr = [&](const std::vector<double>& p) {
            std::vector<int> pred;
            for (double v : p) pred.push_back(v >= 0.5 ? 1 : 0);
            return metrics::precision_recall(pred, labels);
        };
        const auto ma = pr(a), mb = pr(b);
        rh += ma.recall.value_or(0);
        rc += mb.recall.value_or(0);
        ph += ma.precision.value_or(0);
        pc += mb.precision.value_or(0);
        const double gap = ma.recall.value_or(0) - mb.recall.value_or(0);
        per_seed << (k ? " " : "") << std::showpos << num(gap, 3) << std::noshowpos;
        if (gap > 0.02) {
            ++big_gaps;
            const auto boot = metrics::bootstrap_compare(a, b, labels, metrics::BootstrapMetric::recall, 10000, seed);
            best_p = std::min(best_p, boot.p_value);
            if (boot.p_value < 0.05) ++significant;
        }
    }
    rh /= seeds;
    rc /= seeds;
    ph /= seeds;
    pc /= seeds;
    const bool recall_ok = rh >= rc;
    const bool precision_ok = std::abs(ph - pc) <= 0.02;
    const bool boot_ok = big_gaps == 0 || significant > 0;
    std::string detail = "recall hybrid " + num(rh) + " vs ce " + num(rc) + ", precision " + num(ph) + " vs " +
                         num(pc) + "; per-seed recall gaps [" + per_seed.str() + "]; " +
                         std::to_string(big_gaps) + " gap(s) > 0.02";
    if (big_gaps) detail += ", best bootstrap p " + num(best_p);
    return {recall_ok && precision_ok && boot_ok, detail};
}

// 4 ---------------------------------------------------------------------------

Outcome ami_oracle() {
    double worst = 0.0;
    std::size_t pairs = 0;
    for (int n = 1; n <= 7; ++n) {
        const auto parts = oracle::all_partitions(n);
        for (const auto& a : parts)
            for (const auto& b : parts) {
                const double got = metrics::ami(a, b);
                const double want = oracle::ami(a, b, false);
                worst = std::max(worst, std::abs(got - want));
                ++pairs;
            }
    }
    bool trivial = true;
    SplitMix64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<int> p(n), one(n, 0);
        for (auto& v : p) v = static_cast<int>(rng.below(5));
        trivial = trivial && std::abs(metrics::ami(p, p) - 1.0) < 1e-10;
        const bool single = std::set<int>(p.begin(), p.end()).size() == 1;
        if (!single) trivial = trivial && std::abs(metrics::ami(p, one)) < 1e-10;
    }
    return {worst < 1e-10 && trivial, std::to_string(pairs) + " partition pairs (n <= 7), max |ami - oracle| = " +
                                          num(worst * 1e12, 3) + "e-12, trivial cases " +
                                          (trivial ? "ok" : "wrong")};
}

// 5 ---------------------------------------------------------------------------

Outcome rouge_oracle() {
    std::size_t ok = 0;
    const auto& cases = testing_support::rouge_cases();
    for (const auto& c : cases) {
        const auto ref = text::normalized_tokens(c.reference);
        const auto hyp = text::normalized_tokens(c.hypothesis);
        const double p = double(c.lcs) / double(c.hypothesis_tokens);
        const double r = double(c.lcs) / double(c.reference_tokens);
        const double f = c.lcs == 0 ? 0.0 : 2 * p * r / (p + r);
        const auto got = metrics::rouge_l(c.reference, c.hypothesis);
        const bool match = ref.size() == c.reference_tokens && hyp.size() == c.hypothesis_tokens &&
                           oracle::lcs(ref, hyp) == c.lcs && got.f1 == f && got.precision == p && got.recall == r;
        ok += match;
    }
    const double cat = metrics::rouge_l("the cat sat", "the cat").f1;
    const bool pass = ok == cases.size() && cases.size() == 20 && cat == 0.8;
    return {pass, std::to_string(ok) + "/" + std::to_string(cases.size()) +
                      " fixture pairs exact; \"the cat sat\"/\"the cat\" -> " + num(cat, 17)};
}

// 6 ---------------------------------------------------------------------------

const classifier::ClassifierModel& gate_model() {
    static const auto m = golden::gate_model();
    return m;
}

pipeline::PipelineResult golden_run() {
    llm::Gateway gw(golden::example_backend());
    const auto reviews = golden::example_reviews();
    const auto cats = pipeline::default_categories();
    return pipeline::run_pipeline(reviews, gate_model(), 0.5, cats, gw);
}

Outcome golden_pipeline() {
    const auto cats = pipeline::default_categories();
    const auto a = golden_run();
    const auto b = golden_run();
    const auto json_a = pipeline::cluster_set_json(a.cluster_set, cats);
    const auto json_b = pipeline::cluster_set_json(b.cluster_set, cats);
    const auto fixture = read_file(SUGMINE_FIXTURE_DIR "/golden_clusters.json");

    std::vector<std::string> problems;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) problems.push_back(what);
    };
    const auto& c = a.run.counts;
    expect(c.extracted == 7 && a.suggestions.size() == 7, "extracted " + std::to_string(c.extracted));
    expect(c.discarded == 1, "discarded " + std::to_string(c.discarded));
    const auto& set = a.cluster_set;
    auto text_of = [&](const std::string& id) {
        for (const auto& s : a.suggestions)
            if (s.id == id) return s.text;
        return std::string();
    };
    expect(set.clusters.size() == 2, "cluster count");
    if (set.clusters.size() == 2) {
        const auto& menu = set.clusters[0];
        const auto& wait = set.clusters[1];
        expect(menu.name == golden::kMenuClusterName && menu.member_ids.size() == 2, "menu cluster");
        expect(wait.name == golden::kWaitClusterName && wait.member_ids.size() == 3, "wait cluster");
        expect(menu.summary == golden::kMenuSummary, "menu summary");
        expect(wait.summary == golden::kWaitSummary, "wait summary");
        const auto& p = set.priority_order;
        expect(p.size() == 4 && p[0].kind == pipeline::PriorityItem::Kind::cluster && p[0].cluster_index == 1 &&
                   p[1].kind == pipeline::PriorityItem::Kind::cluster && p[1].cluster_index == 0 &&
                   p[2].kind == pipeline::PriorityItem::Kind::standalone &&
                   p[3].kind == pipeline::PriorityItem::Kind::standalone,
               "priority order");
    }
    expect(set.standalone.size() == 2, "standalone count");
    if (set.standalone.size() == 2) {
        expect(text_of(set.standalone[0]).rfind("Waitress", 0) == 0, "standalone 'Waitress...'");
        expect(text_of(set.standalone[1]) == "Add pictures to the menu.", "standalone 'Add pictures...'");
    }
    expect(json_a == json_b, "clusters.json differs between reruns");
    expect(json_a == fixture, "clusters.json differs from tests/fixtures/golden_clusters.json");

    std::string detail = "7 suggestions, 1 discarded, clusters " + std::to_string(set.clusters.size()) +
                         ", standalone " + std::to_string(set.standalone.size()) + ", clusters.json " +
                         std::to_string(json_a.size()) + " bytes";
    for (const auto& p : problems) detail += "; MISMATCH: " + p;
    return {problems.empty(), detail};
}

// 7 ---------------------------------------------------------------------------

/// Deterministic in-process model service that records every prompt.
class RecordingService : public llm::Backend {
public:
    explicit RecordingService(std::uint64_t salt) : salt_(salt) {}

    llm::RawReply send(const llm::LlmRequest& r) override {
        const auto content = r.user_content();
        {
            std::lock_guard lock(mutex_);
            prompts_.push_back(content);
        }
        return {200, llm::completion_body(answer(*r.template_name, content))};
    }

    std::vector<std::string> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }

private:
    std::string answer(TemplateName name, const std::string& content) const {
        const auto h = llm::sha256_hex(std::to_string(salt_) + "|" + content);
        const auto digit = [&](std::size_t i) { return std::stoi(h.substr(i, 1), nullptr, 16); };
        switch (name) {
            case TemplateName::extraction:
                return digit(0) < 3 ? "NONE" : "Improve item " + h.substr(1, 6) + ".";
            case TemplateName::category_assignment: {
                static const char* cats[] = {"Menu", "Wait Time", "Service", "Facilities", "Pricing", "Miscellaneous"};
                return cats[digit(0) % 6];
            }
            case TemplateName::clustering_pairwise:
                return digit(0) < 7 ? "SAME_THEME" : "DIFFERENT_THEME";
            case TemplateName::cluster_consolidation:
                return digit(0) < 12 ? "COHESIVE" : "NOT_COHESIVE";
            case TemplateName::cluster_naming:
                return "Theme " + h.substr(0, 4);
            case TemplateName::cluster_summarization:
                return "Summary " + h.substr(0, 8) + ".";
        }
        return "";
    }

    std::uint64_t salt_;
    mutable std::mutex mutex_;
    std::vector<std::string> prompts_;
};

Outcome conservation() {
    auto cfg = corpus::standard_synthetic_config();
    std::size_t suggestions = 0, negatives = 0, calls = 0;
    std::vector<std::string> problems;
    for (std::uint64_t run = 0; run < 100; ++run) {
        SplitMix64 rng(run);
        cfg.size = 5 + rng.below(36);
        auto reviews = corpus::generate_synthetic_corpus(cfg, 5000 + run);
        // A unique marker token in every text makes leaks traceable.
        for (std::size_t i = 0; i < reviews.size(); ++i) {
            reviews[i].id = "r" + std::to_string(run) + "x" + std::to_string(i) + "q";
            reviews[i].text = reviews[i].id + " " + reviews[i].text;
        }
        auto service = std::make_shared<RecordingService>(run);
        llm::GatewayConfig gc;
        gc.concurrency = 1 + run % 4;
        llm::Gateway gw(service, gc);
        pipeline::PipelineConfig pc;
        pc.pair_budget = 20 + rng.below(200);
        pc.enable_categorization = run % 5 != 4;
        const auto cats = pipeline::default_categories();
        const auto result = pipeline::run_pipeline(reviews, gate_model(), 0.5, cats, gw, pc);

        std::size_t members = result.cluster_set.standalone.size();
        for (const auto& c : result.cluster_set.clusters) members += c.member_ids.size();
        if (members != result.suggestions.size() || result.run.counts.extracted != result.suggestions.size())
            problems.push_back("run " + std::to_string(run) + ": " + std::to_string(result.suggestions.size()) +
                               " suggestions vs " + std::to_string(members) + " placed");

        const auto scored = classifier::classify(gate_model().params, gate_model().featurizer, 0.5, reviews);
        const auto prompts = service->prompts();
        calls += prompts.size();
        for (const auto& s : scored) {
            const bool seen = std::any_of(prompts.begin(), prompts.end(),
                                          [&](const auto& p) { return p.find(s.review.id + " ") != std::string::npos; });
            if (s.gate) {
                if (!seen) problems.push_back("run " + std::to_string(run) + ": gated review " + s.review.id +
                                              " never reached the model service");
                continue;
            }
            ++negatives;
            for (const auto& p : prompts)
                if (p.find(s.review.id + " ") != std::string::npos) {
                    problems.push_back("run " + std::to_string(run) + ": negative review " + s.review.id +
                                       " reached the model service");
                    break;
                }
        }
        suggestions += result.suggestions.size();
    }
    std::string detail = "100 runs, " + std::to_string(suggestions) + " suggestions conserved, " +
                         std::to_string(negatives) + " negative-gated reviews, " + std::to_string(calls) +
                         " service calls";
    if (!problems.empty()) detail += "; first problem: " + problems.front();
    return {problems.empty(), detail};
}

// 8 ---------------------------------------------------------------------------

Outcome fleiss_oracle() {
    std::vector<std::string> notes;
    bool ok = true;
    for (const char* name : {"ratings_restaurant.json", "ratings_ice_cream.json"}) {
        const auto table = nlohmann::json::parse(read_file(fs::path(SUGMINE_FIXTURE_DIR) / name))
                               .get<std::vector<std::vector<int>>>();
        const auto got = metrics::fleiss_kappa(table);
        const auto want = oracle::fleiss_kappa(table);
        ok = ok && got && want && std::abs(*got - *want) < 1e-10;
        notes.push_back(std::string(name) + " " + (got ? num(*got, 12) : "undefined"));
    }
    const std::vector<std::vector<std::vector<int>>> perfect = {
        {{1, 1}, {2, 2}}, {{4, 4, 4}, {5, 5, 5}, {3, 3, 3}}, {{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}}};
    for (const auto& t : perfect) {
        const auto k = metrics::fleiss_kappa(t);
        const auto want = oracle::fleiss_kappa(t);
        ok = ok && k && want && std::abs(*k - 1.0) < 1e-10 && std::abs(*k - *want) < 1e-10;
    }
    return {ok, notes[0] + ", " + notes[1] + ", 3 perfect-agreement tables"};
}

// 9 ---------------------------------------------------------------------------

Outcome learning_curve_saturation() {
    const auto reviews = corpus::generate_synthetic_corpus(corpus::standard_synthetic_config(), 888);
    const std::vector<double> fractions{0.7, 1.0};
    double r70 = 0.0, r100 = 0.0;
    std::ostringstream per_seed;
    for (int k = 0; k < 5; ++k) {
        const auto curve = classifier::learning_curve(reviews, fractions, {}, {}, test_train_config(888 + k));
        const double a = curve[0].recall.value_or(0.0), b = curve[1].recall.value_or(0.0);
        r70 += a;
        r100 += b;
        per_seed << (k ? " " : "") << num(a, 3) << "/" << num(b, 3);
    }
    r70 /= 5;
    r100 /= 5;
    return {std::abs(r70 - r100) <= 0.02, "mean recall 0.7 -> " + num(r70) + ", 1.0 -> " + num(r100) + " (gap " +
                                              num(std::abs(r70 - r100)) + "); per seed [" + per_seed.str() + "]"};
}

// 10 --------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SUGMINE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / ("sugmine_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto d = dir.string();
    const std::string fx = SUGMINE_FIXTURE_DIR;
    const std::string cfg = " -c \"" + fx + "/golden_config.json\"";
    std::vector<std::string> problems;
    if (run_cli("synth --seed 888 -o \"" + d + "/train.jsonl\"") != 0) problems.push_back("synth failed");
    for (const char* m : {"a", "b"})
        if (run_cli("train" + cfg + " --seed 888 --data \"" + d + "/train.jsonl\" --model \"" + d + "/" + m +
                    ".json\"") != 0)
            problems.push_back(std::string("train ") + m + " failed");
    const auto ma = read_file(dir / "a.json"), mb = read_file(dir / "b.json");
    const bool models_equal = !ma.empty() && ma == mb;
    if (!models_equal) problems.push_back("model files differ");

    for (const char* r : {"run1", "run2"})
        if (run_cli("run-pipeline" + cfg + " --data \"" + fx + "/example_reviews.jsonl\" --model \"" + d +
                    "/a.json\" --fixtures \"" + fx + "/golden_mock.jsonl\" --out \"" + d + "/" + r + "\"") != 0)
            problems.push_back(std::string("run-pipeline ") + r + " failed");
    const auto ca = read_file(dir / "run1" / "clusters.json"), cb = read_file(dir / "run2" / "clusters.json");
    if (ca.empty() || ca != cb) problems.push_back("clusters.json differs between reruns");

    std::string detail = "model " + std::to_string(ma.size()) + " bytes x2 " + (models_equal ? "identical" : "DIFFER") +
                         ", clusters.json " + std::to_string(ca.size()) + " bytes x2 " +
                         (!ca.empty() && ca == cb ? "identical" : "DIFFER");
    for (const auto& p : problems) detail += "; " + p;
    if (problems.empty()) fs::remove_all(dir);
    return {problems.empty(), detail};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "gradient oracle", 30, gradient_oracle},
        {2, "surrogate limit", 10, surrogate_limit},
        {3, "hybrid-loss recall direction", 300, rq2_direction},
        {4, "AMI oracle", 60, ami_oracle},
        {5, "ROUGE-L oracle", 1, rouge_oracle},
        {6, "golden pipeline run", 5, golden_pipeline},
        {7, "conservation invariant", 60, conservation},
        {8, "Fleiss kappa oracle", 1, fleiss_oracle},
        {9, "learning-curve saturation", 300, learning_curve_saturation},
        {10, "determinism", 120, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ") " << num(secs, 2)
                  << "s/" << c.budget_seconds << "s: " << o.detail << (in_time ? "" : " [over time budget]") << "\n"
                  << std::flush;
    }
    return failed == 0 ? 0 : 1;
}
