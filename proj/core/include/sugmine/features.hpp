#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sugmine::classifier {

/// Sparse feature vector over a fixed hashed dimension.
/// Invariants: indices strictly increasing and < dim, values finite,
/// indices.size() == values.size().
struct FeatureVector {
    std::size_t dim = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    bool empty() const noexcept { return indices.empty(); }
    bool operator==(const FeatureVector&) const = default;
};

/// Throws DataError when an invariant does not hold.
void check_feature_vector(const FeatureVector& x);

struct FeaturizerConfig {
    std::size_t dim = std::size_t{1} << 16;
    int ngram_max = 2;
    std::uint64_t hash_seed = 0x5eed;

    void validate() const;
    bool operator==(const FeaturizerConfig&) const = default;
};

/// Hashed bag of word n-grams (1..ngram_max). Each bucket holds
/// 1 + ln(count); the vector is then L2-normalized.
FeatureVector featurize(std::string_view text, const FeaturizerConfig& config);

}  // namespace sugmine::classifier
