#include "app_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sugmine/error.hpp"

namespace sugmine::app {

using ojson = nlohmann::ordered_json;

namespace {

std::string_view to_string(BackendKind k) { return k == BackendKind::mock ? "mock" : "live"; }

bool same_kind(const ojson& schema, const ojson& value) {
    if (schema.is_number()) return value.is_number();
    if (schema.is_boolean()) return value.is_boolean();
    if (schema.is_string()) return value.is_string();
    if (schema.is_array()) return value.is_array();
    if (schema.is_object()) return value.is_object();
    return false;
}

void merge_into(ojson& target, const ojson& patch, const std::string& prefix, std::string_view source) {
    if (!patch.is_object()) throw ConfigError(std::string(source) + ": '" + prefix + "' must be an object");
    for (const auto& [key, value] : patch.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        auto it = target.find(key);
        if (it == target.end()) throw ConfigError(std::string(source) + ": unknown config key '" + path + "'");
        if (!same_kind(*it, value))
            throw ConfigError(std::string(source) + ": '" + path + "' expects " + std::string(it->type_name()) +
                              ", got " + value.type_name());
        if (it->is_object())
            merge_into(*it, value, path, source);
        else
            *it = value;
    }
}

const ojson& at(const ojson& j, const char* section, const char* key) { return j.at(section).at(key); }

double num(const ojson& j, const char* section, const char* key) { return at(j, section, key).get<double>(); }

std::uint64_t uint(const ojson& j, const char* section, const char* key) {
    const auto& v = at(j, section, key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(std::string("'") + section + "." + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string str(const ojson& j, const char* section, const char* key) {
    return at(j, section, key).get<std::string>();
}

}  // namespace

ojson AppConfig::to_json() const {
    ojson j;
    auto& c = j["classifier"];
    c["dim"] = classifier.featurizer.dim;
    c["ngram_max"] = classifier.featurizer.ngram_max;
    c["hash_seed"] = classifier.featurizer.hash_seed;
    c["k"] = classifier.loss.k;
    c["tau"] = classifier.loss.tau;
    c["epsilon"] = classifier.loss.epsilon;
    c["alpha"] = classifier.loss.alpha;
    c["lambda"] = classifier.loss.lambda;
    c["batch_size"] = classifier.train.batch_size;
    c["learning_rate"] = classifier.train.learning_rate;
    c["weight_decay"] = classifier.train.weight_decay;
    c["warmup_ratio"] = classifier.train.warmup_ratio;
    c["epochs"] = classifier.train.epochs;
    c["seed"] = classifier.train.seed;
    c["validation_fraction"] = classifier.train.validation_fraction;
    c["precision_floor"] = classifier.train.precision_floor;
    c["gate_threshold"] = classifier.train.gate_threshold;
    c["hidden_units"] = classifier.train.hidden_units;

    auto& l = j["llm"];
    l["backend"] = to_string(llm.backend);
    l["base_url"] = llm.base_url;
    l["fixtures"] = llm.fixtures;
    l["model"] = llm.gateway.model;
    l["temperature"] = llm.gateway.temperature;
    l["max_tokens"] = llm.gateway.max_tokens;
    l["timeout_ms"] = llm.gateway.timeout.count();
    l["max_retries"] = llm.gateway.retry.max_retries;
    l["initial_backoff_ms"] = llm.gateway.retry.initial_backoff.count();
    l["max_backoff_ms"] = llm.gateway.retry.max_backoff.count();
    l["concurrency"] = llm.gateway.concurrency;

    auto& p = j["pipeline"];
    p["categories"] = pipeline.categories;
    p["pair_budget"] = pipeline.config.pair_budget;
    p["failure_threshold"] = pipeline.config.failure_threshold;
    p["sampling_seed"] = pipeline.config.sampling_seed;

    auto& d = j["paths"];
    d["data"] = paths.data;
    d["model"] = paths.model;
    d["run_dir"] = paths.run_dir;
    d["gold"] = paths.gold;

    auto& e = j["eval"];
    e["bootstrap_resamples"] = eval.bootstrap_resamples;
    e["bootstrap_seed"] = eval.bootstrap_seed;
    e["fuzzy_threshold"] = eval.fuzzy_threshold;
    return j;
}

AppConfig AppConfig::from_json(const ojson& input) {
    ojson j = AppConfig{}.to_json();
    merge_into(j, input, "", "config");
    AppConfig a;
    try {
        a.classifier.featurizer.dim = uint(j, "classifier", "dim");
        a.classifier.featurizer.ngram_max = static_cast<int>(uint(j, "classifier", "ngram_max"));
        a.classifier.featurizer.hash_seed = uint(j, "classifier", "hash_seed");
        a.classifier.loss.k = uint(j, "classifier", "k");
        a.classifier.loss.tau = num(j, "classifier", "tau");
        a.classifier.loss.epsilon = num(j, "classifier", "epsilon");
        a.classifier.loss.alpha = num(j, "classifier", "alpha");
        a.classifier.loss.lambda = num(j, "classifier", "lambda");
        a.classifier.train.batch_size = uint(j, "classifier", "batch_size");
        a.classifier.train.learning_rate = num(j, "classifier", "learning_rate");
        a.classifier.train.weight_decay = num(j, "classifier", "weight_decay");
        a.classifier.train.warmup_ratio = num(j, "classifier", "warmup_ratio");
        a.classifier.train.epochs = uint(j, "classifier", "epochs");
        a.classifier.train.seed = uint(j, "classifier", "seed");
        a.classifier.train.validation_fraction = num(j, "classifier", "validation_fraction");
        a.classifier.train.precision_floor = num(j, "classifier", "precision_floor");
        a.classifier.train.gate_threshold = num(j, "classifier", "gate_threshold");
        a.classifier.train.hidden_units = uint(j, "classifier", "hidden_units");

        const auto backend = str(j, "llm", "backend");
        if (backend == "live")
            a.llm.backend = BackendKind::live;
        else if (backend == "mock")
            a.llm.backend = BackendKind::mock;
        else
            throw ConfigError("'llm.backend' must be \"live\" or \"mock\" (got \"" + backend + "\")");
        a.llm.base_url = str(j, "llm", "base_url");
        a.llm.fixtures = str(j, "llm", "fixtures");
        a.llm.gateway.model = str(j, "llm", "model");
        a.llm.gateway.temperature = num(j, "llm", "temperature");
        a.llm.gateway.max_tokens = static_cast<int>(uint(j, "llm", "max_tokens"));
        a.llm.gateway.timeout = llm::Millis{static_cast<llm::Millis::rep>(uint(j, "llm", "timeout_ms"))};
        a.llm.gateway.retry.max_retries = static_cast<int>(uint(j, "llm", "max_retries"));
        a.llm.gateway.retry.initial_backoff =
            llm::Millis{static_cast<llm::Millis::rep>(uint(j, "llm", "initial_backoff_ms"))};
        a.llm.gateway.retry.max_backoff = llm::Millis{static_cast<llm::Millis::rep>(uint(j, "llm", "max_backoff_ms"))};
        a.llm.gateway.concurrency = uint(j, "llm", "concurrency");

        a.pipeline.categories = at(j, "pipeline", "categories").get<std::vector<std::string>>();
        a.pipeline.config.pair_budget = uint(j, "pipeline", "pair_budget");
        a.pipeline.config.failure_threshold = num(j, "pipeline", "failure_threshold");
        a.pipeline.config.sampling_seed = uint(j, "pipeline", "sampling_seed");

        a.paths.data = str(j, "paths", "data");
        a.paths.model = str(j, "paths", "model");
        a.paths.run_dir = str(j, "paths", "run_dir");
        a.paths.gold = str(j, "paths", "gold");

        a.eval.bootstrap_resamples = uint(j, "eval", "bootstrap_resamples");
        a.eval.bootstrap_seed = uint(j, "eval", "bootstrap_seed");
        a.eval.fuzzy_threshold = num(j, "eval", "fuzzy_threshold");
    } catch (const ojson::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    a.validate();
    return a;
}

void AppConfig::validate() const {
    classifier.featurizer.validate();
    classifier.loss.validate();
    classifier.train.validate();
    llm.gateway.validate();
    pipeline.config.validate();
    if (pipeline.categories.empty()) throw ConfigError("'pipeline.categories' must be non-empty");
    if (!(eval.fuzzy_threshold > 0.0 && eval.fuzzy_threshold <= 1.0))
        throw ConfigError("'eval.fuzzy_threshold' must lie in (0, 1]");
}

ConfigBuilder::ConfigBuilder() : tree_(AppConfig{}.to_json()) {}

void ConfigBuilder::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ojson j;
    try {
        j = ojson::parse(buf.str());
    } catch (const ojson::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    merge_json(j, path.string());
}

void ConfigBuilder::merge_json(const ojson& j, std::string_view source) { merge_into(tree_, j, "", source); }

void ConfigBuilder::apply_environment() {
    if (const char* url = std::getenv("SUGMINE_LLM_BASE_URL"); url && *url) tree_["llm"]["base_url"] = url;
    if (const char* model = std::getenv("SUGMINE_LLM_MODEL"); model && *model) tree_["llm"]["model"] = model;
}

void ConfigBuilder::set(std::string_view dotted_key, std::string_view value) {
    ojson v;
    try {
        v = ojson::parse(value);
    } catch (const ojson::parse_error&) {
        v = std::string(value);
    }
    ojson patch = ojson::object();
    ojson* cursor = &patch;
    const ojson* schema = &tree_;
    std::string_view rest = dotted_key;
    while (true) {
        const auto dot = rest.find('.');
        const std::string key(rest.substr(0, dot));
        auto it = schema->find(key);
        if (it == schema->end()) throw ConfigError("unknown config key '" + std::string(dotted_key) + "'");
        if (dot == std::string_view::npos) {
            if (it->is_string() && !v.is_string()) v = std::string(value);
            if (it->is_array() && v.is_string()) {
                std::vector<std::string> parts;
                std::string_view s = value;
                while (!s.empty()) {
                    const auto comma = s.find(',');
                    parts.emplace_back(s.substr(0, comma));
                    if (comma == std::string_view::npos) break;
                    s.remove_prefix(comma + 1);
                }
                v = parts;
            }
            (*cursor)[key] = v;
            break;
        }
        cursor = &(*cursor)[key];
        schema = &*it;
        rest.remove_prefix(dot + 1);
    }
    merge_into(tree_, patch, "", "--set " + std::string(dotted_key));
}

AppConfig ConfigBuilder::build() const { return AppConfig::from_json(tree_); }

std::string describe_keys() {
    std::ostringstream out;
    const auto defaults = AppConfig{}.to_json();
    for (const auto& [section, values] : defaults.items())
        for (const auto& [key, value] : values.items()) out << "  " << section << "." << key << " = " << value.dump() << "\n";
    return out.str();
}

}  // namespace sugmine::app
