#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sugmine/features.hpp"
#include "sugmine/loss.hpp"
#include "sugmine/scorer.hpp"
#include "sugmine/trainer.hpp"

namespace sugmine::classifier {

inline constexpr int kModelFormatVersion = 1;

/// Everything needed to reproduce gate decisions: featurizer settings,
/// scorer parameters, and the configs the model was trained with.
struct ClassifierModel {
    FeaturizerConfig featurizer;
    ScorerParams params;
    LossConfig loss;
    TrainConfig train;

    bool operator==(const ClassifierModel&) const = default;
};

/// JSON container: {"format": "sugmine-classifier", "version": 1, ...}.
/// Only non-zero weights are stored. Output is byte-stable for equal models.
std::string serialize_model(const ClassifierModel& model);

/// Throws DataError on malformed content or a version mismatch.
ClassifierModel parse_model(std::string_view content);

void save_model(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace sugmine::classifier
