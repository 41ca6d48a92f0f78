#include <nlohmann/json.hpp>

#include "sugmine/metrics.hpp"

namespace sugmine::metrics {
namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string EvalReport::to_json(int indent) const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (classifier) {
        auto curve = nlohmann::ordered_json::array();
        for (const auto& p : classifier->pr_curve)
            curve.push_back({{"threshold", p.threshold}, {"precision", opt(p.precision)}, {"recall", opt(p.recall)}});
        j["classifier"] = {{"precision", opt(classifier->precision)},
                           {"recall", opt(classifier->recall)},
                           {"pr_curve", curve}};
    }
    if (rq2) {
        j["rq2"] = {{"observed_delta", rq2->observed_delta},
                    {"p_value", rq2->p_value},
                    {"resamples", rq2->resamples},
                    {"seed", rq2->seed}};
    }
    if (clustering_ami) j["clustering"] = {{"ami", *clustering_ami}};
    if (summarization) {
        j["summarization"] = {{"rouge_l", summarization->rouge_l_f1},
                              {"rouge_l_precision", summarization->rouge_l_precision},
                              {"rouge_l_recall", summarization->rouge_l_recall},
                              {"clusters_evaluated", summarization->clusters_evaluated}};
    }
    if (extraction) {
        j["extraction"] = {{"exact_f1", extraction->exact_f1},
                           {"fuzzy_f1", extraction->fuzzy_f1},
                           {"fuzzy_threshold", extraction->fuzzy_threshold}};
    }
    if (categorization_accuracy) j["categorization"] = {{"accuracy", *categorization_accuracy}};
    if (fleiss_kappa) j["agreement"] = {{"fleiss_kappa", *fleiss_kappa}};
    return j.dump(indent);
}

}  // namespace sugmine::metrics
