#include "sugmine/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "sugmine/error.hpp"
#include "sugmine/random.hpp"
#include "sugmine/text.hpp"
#include "sugmine/trainer.hpp"

namespace sugmine::pipeline {
namespace {

using ojson = nlohmann::ordered_json;
using llm::TemplateName;
using Clock = std::chrono::steady_clock;

// Runs fn(i) for i in [0, n) on up to `workers` threads; results keep input order.
// The first exception thrown by any task is rethrown after all workers finish.
template <typename R>
std::vector<R> parallel_map(std::size_t n, std::size_t workers, const std::function<R(std::size_t)>& fn) {
    std::vector<R> out(n);
    if (n == 0) return out;
    workers = std::clamp<std::size_t>(workers, 1, n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

std::string suggestion_id(std::size_t ordinal, std::size_t total) {
    const std::size_t width = std::max<std::size_t>(4, std::to_string(total).size());
    auto digits = std::to_string(ordinal);
    return "S" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

void check_stage(std::string_view stage, const StageLog& log, double threshold) {
    if (log.items == 0) return;
    const double rate = static_cast<double>(log.failures) / static_cast<double>(log.items);
    if (rate > threshold) {
        std::ostringstream msg;
        msg << "stage '" << stage << "' failed on " << log.failures << " of " << log.items
            << " items (threshold " << threshold << ")";
        if (!log.warnings.empty()) msg << "; first: " << log.warnings.front();
        throw PipelineAborted(msg.str(), std::string(stage), log.failures, log.items);
    }
}

// First non-empty line, stripped of surrounding quotes and markdown emphasis.
std::string clean_title(std::string_view content) {
    std::string_view line;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto nl = content.find('\n', pos);
        const auto end = nl == std::string_view::npos ? content.size() : nl;
        line = text::trim(content.substr(pos, end - pos));
        if (!line.empty()) break;
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    auto strip = [](char c) { return c == '"' || c == '\'' || c == '*' || c == '#' || c == '`'; };
    while (!line.empty() && strip(line.front())) line.remove_prefix(1);
    while (!line.empty() && strip(line.back())) line.remove_suffix(1);
    return std::string(text::trim(line));
}

std::vector<std::string> texts_of(std::span<const std::size_t> members, std::span<const Suggestion> suggestions) {
    std::vector<std::string> out;
    out.reserve(members.size());
    for (auto m : members) out.push_back(suggestions[m].text);
    return out;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

// Clustering state for a single category. Member positions index `members`.
struct CategoryClusterer {
    std::string_view category;
    std::span<const std::size_t> members;  // indices into suggestions
    std::span<const Suggestion> suggestions;
    std::vector<std::vector<bool>> same;  // adjacency over member positions
    llm::Gateway& gateway;
    StageLog& log;

    bool is_clique(std::span<const std::size_t> group) const {
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b)
                if (!same[group[a]][group[b]]) return false;
        return true;
    }

    bool cohesive(std::span<const std::size_t> group) {
        std::vector<std::size_t> ids;
        for (auto g : group) ids.push_back(members[g]);
        const auto list = llm::bullet_list(texts_of(ids, suggestions));
        ++log.items;
        try {
            const auto resp = gateway.ask(TemplateName::cluster_consolidation,
                                          {{"category", std::string(category)}, {"suggestions", list}});
            const std::vector<std::string> allowed{std::string(llm::kCohesive), std::string(llm::kNotCohesive)};
            return llm::parse_choice(resp.content, allowed) == llm::kCohesive;
        } catch (const llm::GatewayError& e) {
            ++log.failures;
            log.warnings.push_back("cluster check in '" + std::string(category) + "' failed, kept as is: " +
                                   e.what());
            return true;
        }
    }

    // Greedy clique cover in member order.
    std::vector<std::vector<std::size_t>> split(std::span<const std::size_t> group) const {
        std::vector<std::vector<std::size_t>> parts;
        for (auto m : group) {
            auto fits = [&](const std::vector<std::size_t>& part) {
                return std::all_of(part.begin(), part.end(), [&](std::size_t p) { return same[m][p]; });
            };
            auto it = std::find_if(parts.begin(), parts.end(), fits);
            if (it == parts.end())
                parts.push_back({m});
            else
                it->push_back(m);
        }
        return parts;
    }

    void consolidate(std::vector<std::size_t> group, std::vector<std::vector<std::size_t>>& accepted,
                     std::vector<std::size_t>& singles) {
        if (group.size() < 2) {
            singles.insert(singles.end(), group.begin(), group.end());
            return;
        }
        if (cohesive(group)) {
            accepted.push_back(std::move(group));
            return;
        }
        log.warnings.push_back("cluster of " + std::to_string(group.size()) + " in '" + std::string(category) +
                               "' rejected by cohesion check");
        if (is_clique(group)) {
            singles.insert(singles.end(), group.begin(), group.end());
            return;
        }
        for (auto& part : split(group)) consolidate(std::move(part), accepted, singles);
    }
};

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ojson opt_string(const std::optional<std::string>& s) { return s ? ojson(*s) : ojson(nullptr); }

void write_text(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

ojson config_snapshot(const PipelineConfig& c, std::span<const std::string> categories) {
    ojson j;
    j["categories"] = std::vector<std::string>(categories.begin(), categories.end());
    j["pair_budget"] = c.pair_budget;
    j["failure_threshold"] = c.failure_threshold;
    j["sampling_seed"] = c.sampling_seed;
    j["enable_categorization"] = c.enable_categorization;
    j["enable_clustering"] = c.enable_clustering;
    j["enable_summarization"] = c.enable_summarization;
    j["pooled_category"] = c.pooled_category;
    return j;
}

}  // namespace

std::vector<std::string> default_categories() {
    return {"Menu", "Wait Time", "Service", "Facilities", "Pricing", std::string(kDefaultCategory)};
}

void PipelineConfig::validate() const {
    if (pair_budget < 1) throw ConfigError("pipeline: pair_budget must be >= 1");
    if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0))
        throw ConfigError("pipeline: failure_threshold must be in [0, 1]");
    if (!enable_categorization && pooled_category.empty())
        throw ConfigError("pipeline: pooled_category must be non-empty");
}

std::string PipelineRun::to_json(int indent) const {
    ojson j;
    j["run_id"] = run_id;
    j["config"] = config;
    ojson t = ojson::object();
    for (const auto& s : timings) t[s.stage] = s.milliseconds;
    j["timings_ms"] = std::move(t);
    const auto& c = counts;
    j["counts"] = {{"reviews_in", c.reviews_in},
                   {"gated", c.gated},
                   {"discarded", c.discarded},
                   {"extracted", c.extracted},
                   {"none_responses", c.none_responses},
                   {"extraction_failures", c.extraction_failures},
                   {"categorized", c.categorized},
                   {"clusters", c.clusters},
                   {"clustered", c.clustered},
                   {"standalone", c.standalone},
                   {"llm_requests", c.llm_requests}};
    j["none_review_ids"] = none_review_ids;
    j["warnings"] = warnings.size();
    return j.dump(indent) + "\n";
}

std::vector<Suggestion> extract_stage(std::span<const corpus::Review> gated, llm::Gateway& gateway, StageLog& log,
                                      std::vector<std::string>* none_review_ids) {
    struct Outcome {
        std::optional<llm::ExtractionParse> parse;
        std::string error;
    };
    const auto outcomes = parallel_map<Outcome>(gated.size(), gateway.config().concurrency, [&](std::size_t i) {
        Outcome o;
        try {
            const auto resp = gateway.ask(TemplateName::extraction, {{"review", gated[i].text}});
            o.parse = llm::parse_extraction(resp.content);
        } catch (const llm::GatewayError& e) {
            o.error = e.what();
        }
        return o;
    });

    log.items += gated.size();
    std::vector<std::pair<std::size_t, std::string>> found;
    for (std::size_t i = 0; i < gated.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.parse) {
            ++log.failures;
            log.warnings.push_back("review '" + gated[i].id + "' skipped: " + o.error);
            continue;
        }
        if (o.parse->warning) log.warnings.push_back("review '" + gated[i].id + "': " + *o.parse->warning);
        if (!o.parse->suggestion) {
            log.warnings.push_back("review '" + gated[i].id + "' gated positive but no suggestion extracted");
            if (none_review_ids) none_review_ids->push_back(gated[i].id);
            continue;
        }
        found.emplace_back(i, *o.parse->suggestion);
    }
    std::vector<Suggestion> out;
    out.reserve(found.size());
    for (std::size_t k = 0; k < found.size(); ++k)
        out.push_back({suggestion_id(k + 1, found.size()), gated[found[k].first].id, found[k].second, std::nullopt});
    return out;
}

void categorize_stage(std::vector<Suggestion>& suggestions, std::span<const std::string> categories,
                      llm::Gateway& gateway, StageLog& log) {
    if (categories.empty()) throw ConfigError("pipeline: categories must be non-empty");
    if (std::find(categories.begin(), categories.end(), kDefaultCategory) == categories.end())
        throw ConfigError("pipeline: categories must include '" + std::string(kDefaultCategory) + "'");
    const auto list = llm::bullet_list(categories);
    struct Outcome {
        std::string category;
        std::optional<std::string> warning;
    };
    const auto outcomes =
        parallel_map<Outcome>(suggestions.size(), gateway.config().concurrency, [&](std::size_t i) {
            const llm::Bindings b{{"categories", list},
                                  {"default_category", std::string(kDefaultCategory)},
                                  {"suggestion", suggestions[i].text}};
            std::string last;
            for (int attempt = 0; attempt < 2; ++attempt) {
                try {
                    const auto resp = gateway.ask(TemplateName::category_assignment, b);
                    return Outcome{llm::parse_choice(resp.content, categories), std::nullopt};
                } catch (const llm::ProtocolError& e) {
                    last = e.what();
                } catch (const llm::GatewayError& e) {
                    last = e.what();
                    break;
                }
            }
            return Outcome{std::string(kDefaultCategory), "suggestion '" + suggestions[i].id +
                                                              "' assigned '" + std::string(kDefaultCategory) +
                                                              "' after failed categorization: " + last};
        });
    log.items += suggestions.size();
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
        suggestions[i].category = outcomes[i].category;
        if (outcomes[i].warning) log.warnings.push_back(*outcomes[i].warning);
    }
}

ClusterSet cluster_stage(std::span<const Suggestion> suggestions, std::span<const std::string> categories,
                         llm::Gateway& gateway, const PipelineConfig& config, StageLog& log) {
    ClusterSet set;
    for (std::size_t ci = 0; ci < categories.size(); ++ci) {
        const auto& category = categories[ci];
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < suggestions.size(); ++i)
            if (suggestions[i].category == category) members.push_back(i);
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) { return suggestions[a].id < suggestions[b].id; });
        const std::size_t n = members.size();
        if (n < 2) {
            for (auto m : members) set.standalone.push_back(suggestions[m].id);
            continue;
        }

        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
        if (pairs.size() > config.pair_budget) {
            log.warnings.push_back("category '" + category + "': " + std::to_string(pairs.size()) +
                                   " pairs exceed the budget of " + std::to_string(config.pair_budget) +
                                   "; sampling");
            SplitMix64 rng(SplitMix64::derive(config.sampling_seed, ci));
            shuffle(std::span(pairs), rng);
            pairs.resize(config.pair_budget);
            std::sort(pairs.begin(), pairs.end());
        }

        struct Verdict {
            bool same = false;
            std::string error;
        };
        const std::vector<std::string> allowed{std::string(llm::kSameTheme), std::string(llm::kDifferentTheme)};
        const auto verdicts =
            parallel_map<Verdict>(pairs.size(), gateway.config().concurrency, [&](std::size_t k) {
                const auto& [a, b] = pairs[k];
                try {
                    const auto resp = gateway.ask(
                        TemplateName::clustering_pairwise,
                        {{"first", suggestions[members[a]].text}, {"second", suggestions[members[b]].text}});
                    return Verdict{llm::parse_choice(resp.content, allowed) == llm::kSameTheme, {}};
                } catch (const llm::GatewayError& e) {
                    return Verdict{false, e.what()};
                }
            });

        CategoryClusterer cc{category, members, suggestions, std::vector<std::vector<bool>>(n, std::vector<bool>(n)),
                             gateway, log};
        UnionFind uf(n);
        log.items += pairs.size();
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& [a, b] = pairs[k];
            if (!verdicts[k].error.empty()) {
                ++log.failures;
                log.warnings.push_back("pair (" + suggestions[members[a]].id + ", " + suggestions[members[b]].id +
                                       ") treated as different: " + verdicts[k].error);
                continue;
            }
            if (verdicts[k].same) {
                cc.same[a][b] = cc.same[b][a] = true;
                uf.unite(a, b);
            }
        }

        std::map<std::size_t, std::vector<std::size_t>> components;  // root is the smallest member
        for (std::size_t a = 0; a < n; ++a) components[uf.find(a)].push_back(a);

        std::vector<std::vector<std::size_t>> accepted;
        std::vector<std::size_t> singles;
        for (auto& [root, group] : components) cc.consolidate(group, accepted, singles);
        std::sort(accepted.begin(), accepted.end());

        for (const auto& group : accepted) {
            Cluster c;
            c.category = category;
            std::vector<std::size_t> ids;
            for (auto g : group) {
                ids.push_back(members[g]);
                c.member_ids.push_back(suggestions[members[g]].id);
            }
            std::sort(c.member_ids.begin(), c.member_ids.end());
            ++log.items;
            try {
                const auto resp =
                    gateway.ask(TemplateName::cluster_naming,
                                {{"category", category}, {"suggestions", llm::bullet_list(texts_of(ids, suggestions))}});
                c.name = clean_title(resp.content);
                if (c.name.empty()) throw llm::ProtocolError("empty cluster name", resp.content);
            } catch (const llm::GatewayError& e) {
                ++log.failures;
                c.name = category + " group " + std::to_string(set.clusters.size() + 1);
                log.warnings.push_back("cluster naming failed, using '" + c.name + "': " + e.what());
            }
            set.clusters.push_back(std::move(c));
        }
        for (auto s : singles) set.standalone.push_back(suggestions[members[s]].id);
    }
    std::sort(set.standalone.begin(), set.standalone.end());
    set.priority_order = prioritize(set);
    return set;
}

ClusterSet no_clustering(std::span<const Suggestion> suggestions) {
    ClusterSet set;
    for (const auto& s : suggestions) set.standalone.push_back(s.id);
    std::sort(set.standalone.begin(), set.standalone.end());
    set.priority_order = prioritize(set);
    return set;
}

void summarize_stage(ClusterSet& set, std::span<const Suggestion> suggestions, llm::Gateway& gateway,
                     StageLog& log) {
    std::map<std::string, const Suggestion*> by_id;
    for (const auto& s : suggestions) by_id[s.id] = &s;
    struct Outcome {
        std::optional<std::string> summary;
        std::string error;
    };
    const auto outcomes =
        parallel_map<Outcome>(set.clusters.size(), gateway.config().concurrency, [&](std::size_t i) {
            std::vector<std::string> texts;
            for (const auto& id : set.clusters[i].member_ids) {
                auto it = by_id.find(id);
                if (it == by_id.end()) throw ConfigError("summarize: unknown suggestion id '" + id + "'");
                texts.push_back(it->second->text);
            }
            try {
                const auto resp =
                    gateway.ask(TemplateName::cluster_summarization, {{"suggestions", llm::bullet_list(texts)}});
                const auto summary = text::trim(resp.content);
                if (summary.empty()) return Outcome{std::nullopt, "empty summary"};
                return Outcome{std::string(summary), {}};
            } catch (const llm::GatewayError& e) {
                return Outcome{std::nullopt, e.what()};
            }
        });
    log.items += set.clusters.size();
    for (std::size_t i = 0; i < set.clusters.size(); ++i) {
        set.clusters[i].summary = outcomes[i].summary;
        if (!outcomes[i].summary) {
            ++log.failures;
            log.warnings.push_back("cluster '" + set.clusters[i].name + "' has no summary: " + outcomes[i].error);
        }
    }
}

std::vector<PriorityItem> prioritize(const ClusterSet& set) {
    std::vector<std::size_t> order(set.clusters.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto earliest = [&](std::size_t i) -> const std::string& {
        static const std::string none;
        const auto& m = set.clusters[i].member_ids;
        return m.empty() ? none : *std::min_element(m.begin(), m.end());
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto sa = set.clusters[a].member_ids.size();
        const auto sb = set.clusters[b].member_ids.size();
        if (sa != sb) return sa > sb;
        return earliest(a) < earliest(b);
    });
    std::vector<PriorityItem> out;
    for (auto i : order) out.push_back({PriorityItem::Kind::cluster, i, {}});
    auto standalone = set.standalone;
    std::sort(standalone.begin(), standalone.end());
    for (auto& id : standalone) out.push_back({PriorityItem::Kind::standalone, 0, std::move(id)});
    return out;
}

PipelineResult run_gated_pipeline(std::span<const corpus::Review> reviews, const std::vector<bool>& gates,
                                  std::span<const std::string> categories, llm::Gateway& gateway,
                                  const PipelineConfig& config) {
    config.validate();
    if (gates.size() != reviews.size()) throw ConfigError("pipeline: one gate decision per review is required");
    if (config.enable_categorization) {
        if (categories.empty()) throw ConfigError("pipeline: categories must be non-empty");
        if (std::find(categories.begin(), categories.end(), kDefaultCategory) == categories.end())
            throw ConfigError("pipeline: categories must include '" + std::string(kDefaultCategory) + "'");
    }

    PipelineResult result;
    auto& run = result.run;
    run.config = config_snapshot(config, categories);
    const auto requests_before = gateway.request_count();

    std::vector<corpus::Review> gated;
    for (std::size_t i = 0; i < reviews.size(); ++i)
        if (gates[i]) gated.push_back(reviews[i]);
    run.counts.reviews_in = reviews.size();
    run.counts.gated = gated.size();
    run.counts.discarded = reviews.size() - gated.size();

    auto stage = [&](std::string_view name, auto&& body) {
        StageLog log;
        const auto start = Clock::now();
        body(log);
        run.timings.push_back({std::string(name), elapsed_ms(start)});
        run.warnings.insert(run.warnings.end(), log.warnings.begin(), log.warnings.end());
        check_stage(name, log, config.failure_threshold);
        return log;
    };

    const auto extract_log = stage("extract", [&](StageLog& log) {
        result.suggestions = extract_stage(gated, gateway, log, &run.none_review_ids);
    });
    run.counts.extracted = result.suggestions.size();
    run.counts.none_responses = run.none_review_ids.size();
    run.counts.extraction_failures = extract_log.failures;

    std::vector<std::string> cluster_categories(categories.begin(), categories.end());
    if (config.enable_categorization) {
        stage("categorize", [&](StageLog& log) { categorize_stage(result.suggestions, categories, gateway, log); });
    } else {
        for (auto& s : result.suggestions) s.category = config.pooled_category;
        cluster_categories = {config.pooled_category};
    }
    run.counts.categorized = result.suggestions.size();

    if (config.enable_clustering) {
        stage("cluster", [&](StageLog& log) {
            result.cluster_set = cluster_stage(result.suggestions, cluster_categories, gateway, config, log);
        });
        if (config.enable_summarization)
            stage("summarize", [&](StageLog& log) {
                summarize_stage(result.cluster_set, result.suggestions, gateway, log);
            });
    } else {
        result.cluster_set = no_clustering(result.suggestions);
    }
    result.cluster_set.priority_order = prioritize(result.cluster_set);

    run.counts.clusters = result.cluster_set.clusters.size();
    for (const auto& c : result.cluster_set.clusters) run.counts.clustered += c.member_ids.size();
    run.counts.standalone = result.cluster_set.standalone.size();
    run.counts.llm_requests = gateway.request_count() - requests_before;

    std::string fingerprint = run.config.dump();
    for (std::size_t i = 0; i < reviews.size(); ++i) {
        fingerprint += '\n';
        fingerprint += gates[i] ? '1' : '0';
        fingerprint += reviews[i].id;
        fingerprint += '\t';
        fingerprint += reviews[i].text;
    }
    run.run_id = "run-" + llm::sha256_hex(fingerprint).substr(0, 12);
    return result;
}

PipelineResult run_pipeline(std::span<const corpus::Review> reviews, const classifier::ClassifierModel& model,
                            double gate_threshold, std::span<const std::string> categories, llm::Gateway& gateway,
                            const PipelineConfig& config) {
    const auto start = Clock::now();
    const auto scored = classifier::classify(model.params, model.featurizer, gate_threshold, reviews,
                                             model.loss.epsilon);
    std::vector<bool> gates;
    gates.reserve(scored.size());
    for (const auto& s : scored) gates.push_back(s.gate);
    const double gate_ms = elapsed_ms(start);
    auto result = run_gated_pipeline(reviews, gates, categories, gateway, config);
    result.run.timings.insert(result.run.timings.begin(), StageTiming{"gate", gate_ms});
    result.run.config["gate_threshold"] = gate_threshold;
    return result;
}

std::string cluster_set_json(const ClusterSet& set, std::span<const std::string> categories) {
    ojson j = ojson::object();
    std::vector<std::string> keys(categories.begin(), categories.end());
    for (const auto& c : set.clusters)
        if (std::find(keys.begin(), keys.end(), c.category) == keys.end()) keys.push_back(c.category);
    for (const auto& k : keys) {
        if (k == "standalone" || k == "priority_order")
            throw ConfigError("category name '" + k + "' collides with a clusters.json key");
        j[k] = ojson::array();
    }
    for (const auto& c : set.clusters) {
        ojson entry;
        entry["name"] = c.name;
        entry["member_ids"] = c.member_ids;
        entry["summary"] = opt_string(c.summary);
        j[c.category].push_back(std::move(entry));
    }
    j["standalone"] = set.standalone;
    ojson order = ojson::array();
    for (const auto& item : set.priority_order) {
        ojson e;
        if (item.kind == PriorityItem::Kind::cluster) {
            const auto& c = set.clusters.at(item.cluster_index);
            e["kind"] = "cluster";
            e["category"] = c.category;
            e["name"] = c.name;
            e["size"] = c.member_ids.size();
        } else {
            e["kind"] = "standalone";
            e["id"] = item.suggestion_id;
        }
        order.push_back(std::move(e));
    }
    j["priority_order"] = std::move(order);
    return j.dump(2) + "\n";
}

std::string suggestions_jsonl(std::span<const Suggestion> suggestions) {
    std::string out;
    for (const auto& s : suggestions) {
        ojson j;
        j["id"] = s.id;
        j["source_review_id"] = s.source_review_id;
        j["text"] = s.text;
        j["category"] = opt_string(s.category);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string report_markdown(const PipelineResult& result) {
    std::map<std::string, const Suggestion*> by_id;
    for (const auto& s : result.suggestions) by_id[s.id] = &s;
    const auto& c = result.run.counts;
    std::ostringstream out;
    out << "# Suggestion report\n\n";
    out << "Run `" << result.run.run_id << "`: " << c.reviews_in << " reviews, " << c.gated << " passed the gate, "
        << c.extracted << " suggestions extracted, " << c.clusters << " clusters, " << c.standalone
        << " standalone.\n\n";
    out << "## Priority order\n\n";
    std::size_t rank = 0;
    for (const auto& item : result.cluster_set.priority_order) {
        ++rank;
        if (item.kind == PriorityItem::Kind::cluster) {
            const auto& cl = result.cluster_set.clusters.at(item.cluster_index);
            out << rank << ". **" << cl.name << "** (" << cl.category << ", " << cl.member_ids.size()
                << " suggestions)\n";
            if (cl.summary) {
                std::istringstream lines(*cl.summary);
                std::string line;
                while (std::getline(lines, line))
                    if (!text::trim(line).empty()) out << "   > " << text::trim(line) << "\n";
            }
            for (const auto& id : cl.member_ids) {
                auto it = by_id.find(id);
                out << "   - " << id << ": " << (it != by_id.end() ? it->second->text : std::string("?")) << "\n";
            }
        } else {
            auto it = by_id.find(item.suggestion_id);
            out << rank << ". " << item.suggestion_id << ": "
                << (it != by_id.end() ? it->second->text : std::string("?"));
            if (it != by_id.end() && it->second->category) out << " (" << *it->second->category << ", standalone)";
            out << "\n";
        }
    }
    if (result.cluster_set.priority_order.empty()) out << "No suggestions.\n";
    if (!result.run.warnings.empty())
        out << "\n" << result.run.warnings.size() << " warning(s); see warnings.log.\n";
    return out.str();
}

void write_run_directory(const std::filesystem::path& dir, const PipelineResult& result,
                         std::span<const std::string> categories) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create run directory '" + dir.string() + "': " + ec.message());
    write_text(dir / "run.json", result.run.to_json());
    write_text(dir / "suggestions.jsonl", suggestions_jsonl(result.suggestions));
    write_text(dir / "clusters.json", cluster_set_json(result.cluster_set, categories));
    write_text(dir / "report.md", report_markdown(result));
    std::string warnings;
    for (const auto& w : result.run.warnings) warnings += w + "\n";
    write_text(dir / "warnings.log", warnings);
}

PipelineGold parse_gold(std::string_view json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const ojson::parse_error& e) {
        throw DataError(std::string("gold: invalid JSON: ") + e.what());
    }
    auto opt = [](const ojson& obj, const char* key) -> std::optional<std::string> {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        return it->get<std::string>();
    };
    try {
        PipelineGold gold;
        std::set<std::string> seen;
        for (const auto& r : j.at("reviews")) {
            for (const auto& [key, _] : r.items())
                if (key != "review_id" && key != "suggestion" && key != "category" && key != "cluster")
                    throw DataError("gold: unknown field '" + key + "'");
            GoldReview g{r.at("review_id").get<std::string>(), opt(r, "suggestion"), opt(r, "category"),
                         opt(r, "cluster")};
            if (!seen.insert(g.review_id).second) throw DataError("gold: duplicate review_id '" + g.review_id + "'");
            gold.reviews.push_back(std::move(g));
        }
        if (auto it = j.find("summaries"); it != j.end())
            for (const auto& [label, summary] : it->items()) gold.summaries[label] = summary.get<std::string>();
        return gold;
    } catch (const ojson::exception& e) {
        throw DataError(std::string("gold: ") + e.what());
    }
}

PipelineGold load_gold(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open gold file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_gold(buf.str());
}

metrics::EvalReport evaluate_run(const PipelineResult& result, const PipelineGold& gold, double fuzzy_threshold) {
    metrics::EvalReport report;
    std::map<std::string, std::vector<const Suggestion*>> by_review;
    for (const auto& s : result.suggestions) by_review[s.source_review_id].push_back(&s);
    std::map<std::string, const GoldReview*> gold_by_review;
    for (const auto& g : gold.reviews) gold_by_review[g.review_id] = &g;

    std::vector<metrics::SpanItem> items;
    for (const auto& g : gold.reviews) {
        metrics::SpanItem item;
        if (g.suggestion) item.gold.push_back(*g.suggestion);
        if (auto it = by_review.find(g.review_id); it != by_review.end())
            for (const auto* s : it->second) item.predicted.push_back(s->text);
        items.push_back(std::move(item));
    }
    for (const auto& [rid, preds] : by_review) {
        if (gold_by_review.count(rid)) continue;
        metrics::SpanItem item;
        for (const auto* s : preds) item.predicted.push_back(s->text);
        items.push_back(std::move(item));
    }
    metrics::EvalReport::Extraction ex;
    ex.fuzzy_threshold = fuzzy_threshold;
    ex.exact_f1 = metrics::corpus_span_f1(items, metrics::SpanMode::exact).f1;
    ex.fuzzy_f1 = metrics::corpus_span_f1(items, metrics::SpanMode::fuzzy, fuzzy_threshold).f1;
    report.extraction = ex;

    std::vector<std::string> gold_cats, pred_cats;
    for (const auto& g : gold.reviews) {
        if (!g.category) continue;
        auto it = by_review.find(g.review_id);
        if (it == by_review.end() || !it->second.front()->category) continue;
        gold_cats.push_back(*g.category);
        pred_cats.push_back(*it->second.front()->category);
    }
    if (!gold_cats.empty()) report.categorization_accuracy = metrics::category_accuracy(gold_cats, pred_cats);

    std::map<std::string, std::string> predicted_label;  // suggestion id -> cluster label
    for (std::size_t i = 0; i < result.cluster_set.clusters.size(); ++i)
        for (const auto& id : result.cluster_set.clusters[i].member_ids) predicted_label[id] = "c" + std::to_string(i);
    metrics::Partition pred_part, gold_part;
    for (const auto& g : gold.reviews) {
        if (!g.suggestion) continue;
        auto it = by_review.find(g.review_id);
        if (it == by_review.end()) continue;
        const auto& sid = it->second.front()->id;
        auto pl = predicted_label.find(sid);
        pred_part[g.review_id] = pl != predicted_label.end() ? pl->second : "s:" + sid;
        gold_part[g.review_id] = g.cluster ? "g:" + *g.cluster : "s:" + g.review_id;
    }
    if (!pred_part.empty()) report.clustering_ami = metrics::ami(gold_part, pred_part);

    std::map<std::string, std::string> sid_to_review;
    for (const auto& s : result.suggestions) sid_to_review[s.id] = s.source_review_id;
    metrics::EvalReport::Summarization summ;
    for (const auto& c : result.cluster_set.clusters) {
        if (!c.summary) continue;
        std::map<std::string, std::size_t> votes;
        for (const auto& id : c.member_ids) {
            auto g = gold_by_review.find(sid_to_review[id]);
            if (g != gold_by_review.end() && g->second->cluster) ++votes[*g->second->cluster];
        }
        if (votes.empty()) continue;
        const auto best = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
            return a.second < b.second;
        });
        auto ref = gold.summaries.find(best->first);
        if (ref == gold.summaries.end()) continue;
        const auto r = metrics::rouge_l(ref->second, *c.summary);
        summ.rouge_l_precision += r.precision;
        summ.rouge_l_recall += r.recall;
        summ.rouge_l_f1 += r.f1;
        ++summ.clusters_evaluated;
    }
    if (summ.clusters_evaluated > 0) {
        const auto n = static_cast<double>(summ.clusters_evaluated);
        summ.rouge_l_precision /= n;
        summ.rouge_l_recall /= n;
        summ.rouge_l_f1 /= n;
        report.summarization = summ;
    }
    return report;
}

}  // namespace sugmine::pipeline
