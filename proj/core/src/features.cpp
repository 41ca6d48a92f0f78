#include "sugmine/features.hpp"

#include <cmath>
#include <map>
#include <string>

#include "sugmine/error.hpp"
#include "sugmine/text.hpp"

namespace sugmine::classifier {
namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // final avalanche so that low bits are usable for the modulus
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

}  // namespace

void check_feature_vector(const FeatureVector& x) {
    if (x.indices.size() != x.values.size())
        throw DataError("feature vector: indices and values differ in length");
    for (std::size_t i = 0; i < x.indices.size(); ++i) {
        if (x.indices[i] >= x.dim) throw DataError("feature vector: index out of range");
        if (i && x.indices[i] <= x.indices[i - 1])
            throw DataError("feature vector: indices not strictly increasing");
        if (!std::isfinite(x.values[i])) throw DataError("feature vector: non-finite value");
    }
}

void FeaturizerConfig::validate() const {
    if (dim < 2) throw ConfigError("featurizer dim must be at least 2");
    if (dim > (std::size_t{1} << 31)) throw ConfigError("featurizer dim too large");
    if (ngram_max < 1 || ngram_max > 3) throw ConfigError("ngram_max must be 1, 2 or 3");
}

FeatureVector featurize(std::string_view text_in, const FeaturizerConfig& config) {
    config.validate();
    const auto tokens = text::word_tokens(text_in);
    std::map<std::uint32_t, std::size_t> counts;
    for (int n = 1; n <= config.ngram_max; ++n) {
        const auto un = static_cast<std::size_t>(n);
        if (tokens.size() < un) break;
        for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (std::size_t k = 1; k < un; ++k) {
                gram.push_back('\x1f');
                gram += tokens[i + k];
            }
            const auto bucket = static_cast<std::uint32_t>(
                fnv1a(gram, config.hash_seed + static_cast<std::uint64_t>(n)) % config.dim);
            ++counts[bucket];
        }
    }

    FeatureVector x;
    x.dim = config.dim;
    x.indices.reserve(counts.size());
    x.values.reserve(counts.size());
    double norm2 = 0.0;
    for (const auto& [idx, c] : counts) {
        const double v = 1.0 + std::log(static_cast<double>(c));
        x.indices.push_back(idx);
        x.values.push_back(v);
        norm2 += v * v;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : x.values) v *= inv;
    }
    return x;
}

}  // namespace sugmine::classifier
