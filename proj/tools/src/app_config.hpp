#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sugmine/features.hpp"
#include "sugmine/gateway.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/pipeline.hpp"
#include "sugmine/trainer.hpp"

namespace sugmine::app {

enum class BackendKind { live, mock };

struct ClassifierSection {
    classifier::FeaturizerConfig featurizer;
    classifier::LossConfig loss;
    classifier::TrainConfig train;
};

struct LlmSection {
    std::string base_url = "http://localhost:11434";
    llm::GatewayConfig gateway;
    BackendKind backend = BackendKind::live;
    std::string fixtures;
};

struct PipelineSection {
    std::vector<std::string> categories = pipeline::default_categories();
    pipeline::PipelineConfig config;
};

struct PathsSection {
    std::string data;
    std::string model = "model.json";
    std::string run_dir = "run";
    std::string gold;
};

struct EvalSection {
    std::size_t bootstrap_resamples = 10000;
    std::uint64_t bootstrap_seed = 888;
    double fuzzy_threshold = 0.5;
};

struct AppConfig {
    ClassifierSection classifier;
    LlmSection llm;
    PipelineSection pipeline;
    PathsSection paths;
    EvalSection eval;

    nlohmann::ordered_json to_json() const;
    /// Throws ConfigError for unknown keys, wrong types or invalid values.
    static AppConfig from_json(const nlohmann::ordered_json& j);
    void validate() const;
};

/// Layers, lowest first: defaults, config file, SUGMINE_LLM_BASE_URL /
/// SUGMINE_LLM_MODEL, then `key=value` overrides with dotted keys.
class ConfigBuilder {
public:
    ConfigBuilder();
    void merge_file(const std::filesystem::path& path);
    void merge_json(const nlohmann::ordered_json& j, std::string_view source);
    void apply_environment();
    /// Value text is parsed as JSON when possible, else taken as a string.
    void set(std::string_view dotted_key, std::string_view value);
    AppConfig build() const;
    const nlohmann::ordered_json& tree() const noexcept { return tree_; }

private:
    nlohmann::ordered_json tree_;
};

/// "section.key = default" lines for every config key.
std::string describe_keys();

}  // namespace sugmine::app
