#include "sugmine/model.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sugmine/error.hpp"

namespace sugmine::classifier {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kFormatName = "sugmine-classifier";

ojson sparse(const std::vector<double>& v) {
    ojson out = ojson::array();
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] != 0.0) out.push_back(ojson::array({i, v[i]}));
    return out;
}

std::vector<double> dense(const ojson& entries, std::size_t size, const char* what) {
    std::vector<double> v(size, 0.0);
    for (const auto& e : entries) {
        const auto i = e.at(0).get<std::size_t>();
        if (i >= size) throw DataError(std::string("model: index out of range in ") + what);
        v[i] = e.at(1).get<double>();
    }
    return v;
}

}  // namespace

std::string serialize_model(const ClassifierModel& m) {
    ojson j;
    j["format"] = kFormatName;
    j["version"] = kModelFormatVersion;
    j["featurizer"] = {{"dim", m.featurizer.dim},
                       {"ngram_max", m.featurizer.ngram_max},
                       {"hash_seed", m.featurizer.hash_seed}};
    j["scorer"] = {{"dim", m.params.dim},
                   {"hidden_units", m.params.hidden_units},
                   {"bias", m.params.bias},
                   {"weights", sparse(m.params.weights)},
                   {"hidden_weights", sparse(m.params.hidden_weights)},
                   {"hidden_bias", sparse(m.params.hidden_bias)}};
    j["loss"] = {{"k", m.loss.k},
                 {"tau", m.loss.tau},
                 {"epsilon", m.loss.epsilon},
                 {"alpha", m.loss.alpha},
                 {"lambda", m.loss.lambda}};
    const auto& t = m.train;
    j["train"] = {{"batch_size", t.batch_size},
                  {"learning_rate", t.learning_rate},
                  {"weight_decay", t.weight_decay},
                  {"warmup_ratio", t.warmup_ratio},
                  {"epochs", t.epochs},
                  {"seed", t.seed},
                  {"validation_fraction", t.validation_fraction},
                  {"precision_floor", t.precision_floor},
                  {"gate_threshold", t.gate_threshold},
                  {"hidden_units", t.hidden_units},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_epsilon", t.adam_epsilon}};
    return j.dump() + "\n";
}

ClassifierModel parse_model(std::string_view content) {
    ojson j;
    try {
        j = ojson::parse(content);
    } catch (const ojson::parse_error& e) {
        throw DataError(std::string("model: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormatName) throw DataError("model: not a classifier model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw DataError("model: format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
        }
        ClassifierModel m;
        const auto& f = j.at("featurizer");
        m.featurizer.dim = f.at("dim").get<std::size_t>();
        m.featurizer.ngram_max = f.at("ngram_max").get<int>();
        m.featurizer.hash_seed = f.at("hash_seed").get<std::uint64_t>();
        m.featurizer.validate();

        const auto& s = j.at("scorer");
        m.params.dim = s.at("dim").get<std::size_t>();
        m.params.hidden_units = s.at("hidden_units").get<std::size_t>();
        if (m.params.dim != m.featurizer.dim) throw DataError("model: scorer and featurizer dimensions differ");
        m.params.bias = s.at("bias").get<double>();
        const std::size_t h = m.params.hidden_units;
        m.params.weights = dense(s.at("weights"), h ? h : m.params.dim, "weights");
        m.params.hidden_weights = dense(s.at("hidden_weights"), h * m.params.dim, "hidden_weights");
        m.params.hidden_bias = dense(s.at("hidden_bias"), h, "hidden_bias");

        const auto& l = j.at("loss");
        m.loss.k = l.at("k").get<std::size_t>();
        m.loss.tau = l.at("tau").get<double>();
        m.loss.epsilon = l.at("epsilon").get<double>();
        m.loss.alpha = l.at("alpha").get<double>();
        m.loss.lambda = l.at("lambda").get<double>();
        m.loss.validate();

        const auto& t = j.at("train");
        m.train.batch_size = t.at("batch_size").get<std::size_t>();
        m.train.learning_rate = t.at("learning_rate").get<double>();
        m.train.weight_decay = t.at("weight_decay").get<double>();
        m.train.warmup_ratio = t.at("warmup_ratio").get<double>();
        m.train.epochs = t.at("epochs").get<std::size_t>();
        m.train.seed = t.at("seed").get<std::uint64_t>();
        m.train.validation_fraction = t.at("validation_fraction").get<double>();
        m.train.precision_floor = t.at("precision_floor").get<double>();
        m.train.gate_threshold = t.at("gate_threshold").get<double>();
        m.train.hidden_units = t.at("hidden_units").get<std::size_t>();
        m.train.adam_beta1 = t.at("adam_beta1").get<double>();
        m.train.adam_beta2 = t.at("adam_beta2").get<double>();
        m.train.adam_epsilon = t.at("adam_epsilon").get<double>();
        if (!m.params.all_finite()) throw DataError("model: non-finite parameters");
        return m;
    } catch (const ojson::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const ClassifierModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model '" + path.string() + "'");
    out << serialize_model(model);
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace sugmine::classifier
