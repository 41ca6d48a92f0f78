#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>

#include "app_config.hpp"
#include "commands.hpp"
#include "sugmine/error.hpp"
#include "sugmine/llm_error.hpp"
#include "sugmine/pipeline.hpp"

namespace {

using namespace sugmine;
using namespace sugmine::app;

enum Exit { kOk = 0, kUserError = 1, kDataError = 2, kGatewayError = 3 };

/// Config-file path plus ordered key=value overrides collected from flags.
struct ConfigFlags {
    std::string file;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("-c,--config", flags.file, "JSON config file (sections classifier, llm, pipeline, paths, eval)");
    cmd->add_option_function<std::vector<std::string>>(
           "--set",
           [&flags](const std::vector<std::string>& items) {
               for (const auto& item : items) {
                   const auto eq = item.find('=');
                   if (eq == std::string::npos || eq == 0)
                       throw CLI::ValidationError("--set", "expected key=value, got '" + item + "'");
                   flags.overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
               }
           },
           "Override any config key, e.g. --set classifier.alpha=1.0")
        ->take_all();
}

/// A flag that writes one config key.
void key_flag(CLI::App* cmd, ConfigFlags& flags, const std::string& name, const std::string& key,
              const std::string& help) {
    cmd->add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help + " [" + key + "]");
}

AppConfig resolve(const ConfigFlags& flags) {
    ConfigBuilder b;
    if (!flags.file.empty()) b.merge_file(flags.file);
    b.apply_environment();
    for (const auto& [k, v] : flags.overrides) b.set(k, v);
    return b.build();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sugmine: mine actionable suggestions from customer reviews"};
    app.require_subcommand(1);
    const std::string footer = "Configuration keys and defaults (file < SUGMINE_LLM_BASE_URL/SUGMINE_LLM_MODEL < flags):\n" +
                               describe_keys() + "\nExit codes: 0 success, 1 usage or config error, 2 data error, "
                               "3 model-service error or pipeline abort.";
    app.footer(footer);

    ConfigFlags flags;
    std::function<int(const AppConfig&)> action;

    auto* train = app.add_subcommand("train", "Train the gate classifier and write the model and its trace");
    TrainOptions train_opts;
    add_config_flags(train, flags);
    key_flag(train, flags, "--data", "paths.data", "Labelled dataset (.jsonl or .csv)");
    key_flag(train, flags, "--model", "paths.model", "Output model file");
    key_flag(train, flags, "--alpha", "classifier.alpha", "Cross-entropy weight of the hybrid loss");
    key_flag(train, flags, "--lambda", "classifier.lambda", "Weight of the precision surrogate");
    key_flag(train, flags, "--seed", "classifier.seed", "Random seed");
    key_flag(train, flags, "--epochs", "classifier.epochs", "Training epochs");
    key_flag(train, flags, "--lr", "classifier.learning_rate", "Learning rate");
    train->add_option("--trace", train_opts.trace_path, "Trace JSONL path (default <model>.trace.jsonl)");
    train->callback([&] { action = [&](const AppConfig& c) { return cmd_train(c, train_opts, std::cout); }; });

    auto* eval = app.add_subcommand("eval-classifier", "Precision/recall of a model against the lexical baseline");
    EvalClassifierOptions eval_opts;
    add_config_flags(eval, flags);
    key_flag(eval, flags, "--data", "paths.data", "Labelled dataset");
    key_flag(eval, flags, "--model", "paths.model", "Model file");
    key_flag(eval, flags, "--threshold", "classifier.gate_threshold", "Gate threshold");
    eval->add_option("--compare", eval_opts.compare_model, "Second model; runs a paired bootstrap on recall");
    eval->add_option("--report", eval_opts.report_path, "Write the metrics as JSON");
    eval->callback([&] { action = [&](const AppConfig& c) { return cmd_eval_classifier(c, eval_opts, std::cout); }; });

    auto pipeline_flags = [&](CLI::App* cmd) {
        add_config_flags(cmd, flags);
        key_flag(cmd, flags, "--data", "paths.data", "Reviews to process");
        key_flag(cmd, flags, "--model", "paths.model", "Gate model file");
        key_flag(cmd, flags, "--out", "paths.run_dir", "Run output directory");
        key_flag(cmd, flags, "--backend", "llm.backend", "live or mock");
        key_flag(cmd, flags, "--fixtures", "llm.fixtures", "Mock fixture JSONL");
        key_flag(cmd, flags, "--base-url", "llm.base_url", "Chat-completions endpoint base URL");
        key_flag(cmd, flags, "--threshold", "classifier.gate_threshold", "Gate threshold");
    };

    auto* run = app.add_subcommand("run-pipeline", "Gate, extract, categorize, cluster, summarize and rank");
    pipeline_flags(run);
    run->callback([&] { action = [&](const AppConfig& c) { return cmd_run_pipeline(c, std::cout); }; });

    auto* evalp = app.add_subcommand("eval-pipeline", "Run the pipeline and score it against gold annotations");
    PipelineOptions evalp_opts;
    pipeline_flags(evalp);
    key_flag(evalp, flags, "--gold", "paths.gold", "Gold annotation JSON");
    evalp->add_option("--ratings", evalp_opts.ratings_path, "Items x raters JSON matrix for Fleiss' kappa");
    evalp->callback([&] { action = [&](const AppConfig& c) { return cmd_eval_pipeline(c, evalp_opts, std::cout); }; });

    auto* ablate = app.add_subcommand("ablate", "Compare the full system with one component removed");
    AblateOptions ablate_opts;
    pipeline_flags(ablate);
    key_flag(ablate, flags, "--gold", "paths.gold", "Gold annotation JSON");
    key_flag(ablate, flags, "--seed", "classifier.seed", "Random seed");
    ablate->add_option("ablation", ablate_opts.ablation, "no-pr-loss, no-clustering or no-category")
        ->required()
        ->check(CLI::IsMember({"no-pr-loss", "no-clustering", "no-category"}));
    ablate->callback([&] { action = [&](const AppConfig& c) { return cmd_ablate(c, ablate_opts, std::cout); }; });

    auto* curve = app.add_subcommand("learning-curve", "Hold-out recall against training-set fraction, as CSV");
    LearningCurveOptions curve_opts;
    add_config_flags(curve, flags);
    key_flag(curve, flags, "--data", "paths.data", "Labelled dataset");
    key_flag(curve, flags, "--seed", "classifier.seed", "First seed");
    key_flag(curve, flags, "--epochs", "classifier.epochs", "Training epochs");
    key_flag(curve, flags, "--lr", "classifier.learning_rate", "Learning rate");
    curve->add_option("--fractions", curve_opts.fractions, "Ascending fractions in (0, 1]")->delimiter(',');
    curve->add_option("--seeds", curve_opts.seeds, "Seeds to average (seed, seed+1, ...)");
    curve->add_option("--csv", curve_opts.csv_path, "CSV output path (default stdout)");
    curve->callback([&] { action = [&](const AppConfig& c) { return cmd_learning_curve(c, curve_opts, std::cout); }; });

    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    SynthOptions synth_opts;
    synth->add_option("--preset", synth_opts.preset, "default (clean) or standard (noisy benchmark)")
        ->check(CLI::IsMember({"default", "standard"}));
    synth->add_option("--seed", synth_opts.seed, "Generator seed");
    synth->add_option("--size", synth_opts.size, "Number of reviews");
    synth->add_option("-o,--out", synth_opts.out, "Output path (.jsonl or .csv)")->required();
    synth->add_option("--format", synth_opts.format, "jsonl or csv (default: from extension)");
    bool synth_only = false;
    synth->callback([&] { synth_only = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUserError;
    }

    try {
        if (synth_only) return cmd_synth(synth_opts, std::cout);
        return action(resolve(flags));
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const pipeline::PipelineAborted& e) {
        std::cerr << "pipeline aborted: " << e.what() << "\n";
        return kGatewayError;
    } catch (const llm::GatewayError& e) {
        std::cerr << "model service error: " << e.what() << "\n";
        return kGatewayError;
    } catch (const llm::MockMiss& e) {
        std::cerr << "model service error: " << e.what() << "\n";
        return kGatewayError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    }
}
