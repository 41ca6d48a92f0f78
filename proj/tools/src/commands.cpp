#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "sugmine/corpus.hpp"
#include "sugmine/error.hpp"
#include "sugmine/metrics.hpp"
#include "sugmine/model.hpp"
#include "sugmine/trainer.hpp"

namespace sugmine::app {

namespace {

using ojson = nlohmann::ordered_json;

const std::string& require(const std::string& value, const char* key) {
    if (value.empty()) throw ConfigError(std::string("missing required setting '") + key + "'");
    return value;
}

std::vector<corpus::Review> load_reviews(const std::string& path) {
    return corpus::load_dataset(path, corpus::format_for_path(path));
}

std::vector<corpus::Review> labelled(std::vector<corpus::Review> reviews) {
    std::erase_if(reviews, [](const corpus::Review& r) { return !r.label; });
    if (reviews.empty()) throw DataError("dataset has no labelled reviews");
    return reviews;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw DataError("cannot write '" + path.string() + "'");
}

std::string fmt(std::optional<double> v, int precision = 4) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v;
    return s.str();
}

ojson opt(std::optional<double> v) { return v ? ojson(*v) : ojson(nullptr); }

std::unique_ptr<llm::Gateway> make_gateway(const AppConfig& config) {
    std::shared_ptr<llm::Backend> backend;
    if (config.llm.backend == BackendKind::mock) {
        auto mock = std::make_shared<llm::MockBackend>();
        mock->load_fixture_file(require(config.llm.fixtures, "llm.fixtures"));
        backend = mock;
    } else {
        backend = std::make_shared<llm::HttpBackend>(config.llm.base_url);
    }
    return std::make_unique<llm::Gateway>(backend, config.llm.gateway);
}

struct Scored {
    std::vector<double> probabilities;
    std::vector<int> predictions;
    std::vector<int> labels;
};

Scored score_all(const classifier::ClassifierModel& model, std::span<const corpus::Review> reviews,
                 double threshold) {
    Scored s;
    for (const auto& r : classifier::classify(model.params, model.featurizer, threshold, reviews, model.loss.epsilon)) {
        s.probabilities.push_back(r.probability);
        s.predictions.push_back(r.gate ? 1 : 0);
        s.labels.push_back(*r.review.label);
    }
    return s;
}

void print_row(std::ostream& out, const std::string& name, const metrics::PrecisionRecall& pr) {
    out << "  " << std::left << std::setw(22) << name << std::right << std::setw(10) << fmt(pr.precision)
        << std::setw(10) << fmt(pr.recall) << "\n";
}

void print_header(std::ostream& out) {
    out << "  " << std::left << std::setw(22) << "system" << std::right << std::setw(10) << "precision"
        << std::setw(10) << "recall" << "\n";
}

pipeline::PipelineConfig pipeline_config(const AppConfig& config) { return config.pipeline.config; }

pipeline::PipelineResult run_configured(const AppConfig& config, const pipeline::PipelineConfig& pcfg) {
    const auto model = classifier::load_model(require(config.paths.model, "paths.model"));
    const auto reviews = load_reviews(require(config.paths.data, "paths.data"));
    auto gateway = make_gateway(config);
    auto result = pipeline::run_pipeline(reviews, model, config.classifier.train.gate_threshold,
                                         config.pipeline.categories, *gateway, pcfg);
    result.run.config["app"] = config.to_json();
    return result;
}

void print_run(std::ostream& out, const pipeline::PipelineResult& r, const std::filesystem::path& dir) {
    const auto& c = r.run.counts;
    out << "run " << r.run.run_id << " -> " << dir.string() << "\n";
    out << "  reviews " << c.reviews_in << ", gated " << c.gated << ", discarded " << c.discarded << "\n";
    out << "  suggestions " << c.extracted << " (NONE replies " << c.none_responses << ", failures "
        << c.extraction_failures << ")\n";
    out << "  clusters " << c.clusters << " covering " << c.clustered << ", standalone " << c.standalone << "\n";
    out << "  llm requests " << c.llm_requests << ", warnings " << r.run.warnings.size() << "\n";
}

ojson report_json(const metrics::EvalReport& report) { return ojson::parse(report.to_json()); }

void print_pipeline_eval(std::ostream& out, const metrics::EvalReport& e) {
    if (e.extraction)
        out << "  extraction      exact F1 " << fmt(e.extraction->exact_f1) << ", fuzzy F1 "
            << fmt(e.extraction->fuzzy_f1) << " (threshold " << e.extraction->fuzzy_threshold << ")\n";
    out << "  categorization  accuracy " << fmt(e.categorization_accuracy) << "\n";
    out << "  clustering      AMI " << fmt(e.clustering_ami) << "\n";
    if (e.summarization)
        out << "  summarization   ROUGE-L F1 " << fmt(e.summarization->rouge_l_f1) << " over "
            << e.summarization->clusters_evaluated << " cluster(s)\n";
    if (e.fleiss_kappa) out << "  agreement       Fleiss kappa " << fmt(e.fleiss_kappa) << "\n";
}

std::vector<std::vector<int>> load_ratings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open ratings file '" + path + "'");
    try {
        return ojson::parse(in).get<std::vector<std::vector<int>>>();
    } catch (const ojson::exception& e) {
        throw DataError("ratings file '" + path + "' must hold a JSON array of integer rows: " + e.what());
    }
}

int ablate_pr_loss(const AppConfig& config, std::ostream& out) {
    const auto reviews = labelled(load_reviews(require(config.paths.data, "paths.data")));
    const auto& t = config.classifier.train;
    const auto split = classifier::stratified_split(reviews, 0.2, t.seed);
    std::vector<corpus::Review> train_set, held;
    for (auto i : split.train) train_set.push_back(reviews[i]);
    for (auto i : split.held_out) held.push_back(reviews[i]);

    auto ce = config.classifier.loss;
    ce.alpha = 1.0;
    auto fit = [&](const classifier::LossConfig& loss) {
        classifier::ClassifierModel m{config.classifier.featurizer, {}, loss, t};
        m.params = classifier::train(train_set, m.featurizer, loss, t).params;
        return score_all(m, held, t.gate_threshold);
    };
    const auto hybrid = fit(config.classifier.loss);
    const auto ce_only = fit(ce);
    const auto pr_h = metrics::precision_recall(hybrid.predictions, hybrid.labels);
    const auto pr_c = metrics::precision_recall(ce_only.predictions, ce_only.labels);
    const auto boot = metrics::bootstrap_compare(hybrid.probabilities, ce_only.probabilities, hybrid.labels,
                                                 metrics::BootstrapMetric::recall, config.eval.bootstrap_resamples,
                                                 config.eval.bootstrap_seed, t.gate_threshold);

    out << "ablation no-pr-loss: " << train_set.size() << " training / " << held.size() << " held-out reviews\n";
    print_header(out);
    print_row(out, "hybrid loss", pr_h);
    print_row(out, "cross-entropy only", pr_c);
    out << "  recall delta (hybrid - ce-only) " << std::showpos << fmt(boot.observed_delta) << std::noshowpos
        << ", bootstrap p = " << fmt(boot.p_value) << " (" << boot.resamples << " resamples)\n";
    return 0;
}

int ablate_pipeline(const AppConfig& config, const std::string& ablation, std::ostream& out) {
    auto ablated = pipeline_config(config);
    if (ablation == "no-clustering")
        ablated.enable_clustering = false;
    else
        ablated.enable_categorization = false;
    const auto base = run_configured(config, pipeline_config(config));
    const auto other = run_configured(config, ablated);
    const std::filesystem::path dir = config.paths.run_dir;
    pipeline::write_run_directory(dir / "baseline", base, config.pipeline.categories);
    pipeline::write_run_directory(dir / ablation, other, config.pipeline.categories);

    std::optional<double> ami_base, ami_other;
    if (!config.paths.gold.empty()) {
        const auto gold = pipeline::load_gold(config.paths.gold);
        ami_base = pipeline::evaluate_run(base, gold, config.eval.fuzzy_threshold).clustering_ami;
        ami_other = pipeline::evaluate_run(other, gold, config.eval.fuzzy_threshold).clustering_ami;
    } else if (ablation == "no-category") {
        throw ConfigError("ablation no-category needs 'paths.gold' to compare AMI");
    }

    out << "ablation " << ablation << " (runs under " << dir.string() << ")\n";
    out << "  " << std::left << std::setw(16) << "variant" << std::right << std::setw(10) << "clusters"
        << std::setw(12) << "standalone" << std::setw(10) << "AMI" << "\n";
    auto row = [&](const char* name, const pipeline::PipelineResult& r, std::optional<double> a) {
        out << "  " << std::left << std::setw(16) << name << std::right << std::setw(10) << r.run.counts.clusters
            << std::setw(12) << r.run.counts.standalone << std::setw(10) << fmt(a) << "\n";
    };
    row("baseline", base, ami_base);
    row(ablation.c_str(), other, ami_other);
    if (ami_base && ami_other)
        out << "  AMI delta (ablated - baseline) " << std::showpos << fmt(*ami_other - *ami_base) << std::noshowpos
            << "\n";
    return 0;
}

}  // namespace

int cmd_train(const AppConfig& config, const TrainOptions& opts, std::ostream& out) {
    const auto reviews = load_reviews(require(config.paths.data, "paths.data"));
    classifier::ClassifierModel model{config.classifier.featurizer, {}, config.classifier.loss, config.classifier.train};
    const auto result = classifier::train(reviews, model.featurizer, model.loss, model.train);
    model.params = result.params;

    const std::filesystem::path model_path = require(config.paths.model, "paths.model");
    if (model_path.has_parent_path()) std::filesystem::create_directories(model_path.parent_path());
    classifier::save_model(model_path, model);
    const auto trace_path = opts.trace_path.empty() ? model_path.string() + ".trace.jsonl" : opts.trace_path;
    write_file(trace_path, result.trace.to_jsonl());

    const auto stats = corpus::dataset_stats(reviews);
    out << "trained on " << stats.total << " reviews (" << stats.positives << " positive, " << stats.negatives
        << " negative), " << result.trace.epochs.size() << " epoch(s)\n";
    if (result.trace.selected_epoch > 0) {
        const auto& e = result.trace.epochs[result.trace.selected_epoch - 1];
        out << "selected epoch " << e.epoch << ": validation precision " << fmt(e.val_precision) << ", recall "
            << fmt(e.val_recall) << "\n";
    } else {
        out << "selected the initial parameters\n";
    }
    out << "model: " << model_path.string() << "\ntrace: " << trace_path << "\n";
    return 0;
}

int cmd_eval_classifier(const AppConfig& config, const EvalClassifierOptions& opts, std::ostream& out) {
    const auto model = classifier::load_model(require(config.paths.model, "paths.model"));
    const auto reviews = labelled(load_reviews(require(config.paths.data, "paths.data")));
    const double threshold = config.classifier.train.gate_threshold;
    const auto a = score_all(model, reviews, threshold);

    metrics::EvalReport report;
    const auto pr = metrics::precision_recall(a.predictions, a.labels);
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    report.classifier = metrics::EvalReport::Classifier{pr.precision, pr.recall,
                                                        metrics::pr_curve(a.probabilities, a.labels, grid)};

    const auto patterns = classifier::default_lexical_patterns();
    std::vector<int> lexical;
    for (const auto& r : reviews) lexical.push_back(classifier::lexical_baseline(r, patterns) ? 1 : 0);
    const auto pr_lex = metrics::precision_recall(lexical, a.labels);

    out << reviews.size() << " labelled reviews, threshold " << threshold << "\n";
    print_header(out);
    print_row(out, "classifier", pr);
    print_row(out, "lexical baseline", pr_lex);

    if (!opts.compare_model.empty()) {
        const auto other = classifier::load_model(opts.compare_model);
        const auto b = score_all(other, reviews, threshold);
        print_row(out, "compared model", metrics::precision_recall(b.predictions, b.labels));
        report.rq2 = metrics::bootstrap_compare(a.probabilities, b.probabilities, a.labels,
                                                metrics::BootstrapMetric::recall, config.eval.bootstrap_resamples,
                                                config.eval.bootstrap_seed, threshold);
        out << "  recall delta (classifier - compared) " << std::showpos << fmt(report.rq2->observed_delta)
            << std::noshowpos << ", one-sided bootstrap p = " << fmt(report.rq2->p_value) << "\n";
    }
    if (!opts.report_path.empty()) {
        auto j = report_json(report);
        j["lexical_baseline"] = {{"precision", opt(pr_lex.precision)}, {"recall", opt(pr_lex.recall)}};
        write_file(opts.report_path, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_run_pipeline(const AppConfig& config, std::ostream& out) {
    const auto result = run_configured(config, pipeline_config(config));
    const std::filesystem::path dir = require(config.paths.run_dir, "paths.run_dir");
    pipeline::write_run_directory(dir, result, config.pipeline.categories);
    print_run(out, result, dir);
    return 0;
}

int cmd_eval_pipeline(const AppConfig& config, const PipelineOptions& opts, std::ostream& out) {
    const auto gold = pipeline::load_gold(require(config.paths.gold, "paths.gold"));
    const auto result = run_configured(config, pipeline_config(config));
    const std::filesystem::path dir = require(config.paths.run_dir, "paths.run_dir");
    pipeline::write_run_directory(dir, result, config.pipeline.categories);
    auto report = pipeline::evaluate_run(result, gold, config.eval.fuzzy_threshold);
    if (!opts.ratings_path.empty()) report.fleiss_kappa = metrics::fleiss_kappa(load_ratings(opts.ratings_path));
    write_file(dir / "eval.json", report.to_json() + "\n");
    print_run(out, result, dir);
    print_pipeline_eval(out, report);
    return 0;
}

int cmd_ablate(const AppConfig& config, const AblateOptions& opts, std::ostream& out) {
    if (opts.ablation == "no-pr-loss") return ablate_pr_loss(config, out);
    if (opts.ablation == "no-clustering" || opts.ablation == "no-category")
        return ablate_pipeline(config, opts.ablation, out);
    throw ConfigError("unknown ablation '" + opts.ablation + "' (no-pr-loss, no-clustering, no-category)");
}

int cmd_learning_curve(const AppConfig& config, const LearningCurveOptions& opts, std::ostream& out) {
    if (opts.seeds == 0) throw ConfigError("--seeds must be >= 1");
    const auto reviews = labelled(load_reviews(require(config.paths.data, "paths.data")));
    std::vector<double> sum(opts.fractions.size(), 0.0);
    std::vector<std::size_t> defined(opts.fractions.size(), 0);
    for (std::size_t s = 0; s < opts.seeds; ++s) {
        auto t = config.classifier.train;
        t.seed += s;
        const auto curve = classifier::learning_curve(reviews, opts.fractions, config.classifier.featurizer,
                                                      config.classifier.loss, t);
        for (std::size_t i = 0; i < curve.size(); ++i) {
            if (!curve[i].recall) continue;
            sum[i] += *curve[i].recall;
            ++defined[i];
        }
    }
    std::ostringstream csv;
    csv << "fraction,recall\n";
    for (std::size_t i = 0; i < opts.fractions.size(); ++i) {
        csv << opts.fractions[i] << ",";
        if (defined[i]) csv << std::setprecision(10) << sum[i] / static_cast<double>(defined[i]);
        csv << "\n";
    }
    if (opts.csv_path.empty()) {
        out << csv.str();
    } else {
        write_file(opts.csv_path, csv.str());
        out << "learning curve (" << opts.seeds << " seed(s)) written to " << opts.csv_path << "\n";
    }
    return 0;
}

int cmd_synth(const SynthOptions& opts, std::ostream& out) {
    corpus::SyntheticConfig cfg;
    if (opts.preset == "default")
        cfg = corpus::default_synthetic_config();
    else if (opts.preset == "standard")
        cfg = corpus::standard_synthetic_config();
    else
        throw ConfigError("unknown preset '" + opts.preset + "' (default, standard)");
    if (opts.size) cfg.size = *opts.size;
    const auto& path = require(opts.out, "--out");
    const auto format = opts.format.empty() ? corpus::format_for_path(path) : corpus::parse_format(opts.format);
    const auto reviews = corpus::generate_synthetic_corpus(cfg, opts.seed);
    write_file(path, corpus::serialize_dataset(reviews, format));
    const auto stats = corpus::dataset_stats(reviews);
    out << "wrote " << stats.total << " reviews (" << stats.positives << " labelled positive) to " << path << "\n";
    return 0;
}

}  // namespace sugmine::app
