#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "app_config.hpp"

namespace sugmine::app {

struct TrainOptions {
    std::string trace_path;  // empty: <model>.trace.jsonl
};

struct EvalClassifierOptions {
    std::string compare_model;
    std::string report_path;
};

struct PipelineOptions {
    std::string ratings_path;  // eval-pipeline only: items x raters JSON matrix
};

struct AblateOptions {
    std::string ablation;  // no-pr-loss | no-clustering | no-category
};

struct LearningCurveOptions {
    std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t seeds = 1;
    std::string csv_path;  // empty: stdout
};

struct SynthOptions {
    std::string preset = "default";  // default | standard
    std::uint64_t seed = 888;
    std::optional<std::size_t> size;
    std::string out;
    std::string format;  // empty: from extension
};

int cmd_train(const AppConfig& config, const TrainOptions& opts, std::ostream& out);
int cmd_eval_classifier(const AppConfig& config, const EvalClassifierOptions& opts, std::ostream& out);
int cmd_run_pipeline(const AppConfig& config, std::ostream& out);
int cmd_eval_pipeline(const AppConfig& config, const PipelineOptions& opts, std::ostream& out);
int cmd_ablate(const AppConfig& config, const AblateOptions& opts, std::ostream& out);
int cmd_learning_curve(const AppConfig& config, const LearningCurveOptions& opts, std::ostream& out);
int cmd_synth(const SynthOptions& opts, std::ostream& out);

}  // namespace sugmine::app
