#pragma once

#include <cstdint>
#include <vector>

#include "sugmine/features.hpp"

namespace sugmine::classifier {

inline constexpr double kDefaultEpsilon = 1e-8;

/// Parameters of the differentiable scorer.
///
/// Linear mode (hidden_units == 0): z = weights . x + bias.
/// Hidden mode: h = tanh(hidden_weights * x + hidden_bias), z = weights . h + bias,
/// with hidden_weights stored row-major (one row of length dim per unit).
///
/// The same type doubles as the container for gradients.
struct ScorerParams {
    std::size_t dim = 0;
    std::size_t hidden_units = 0;
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> hidden_weights;
    std::vector<double> hidden_bias;

    static ScorerParams linear(std::size_t dim);
    /// Small seeded uniform initialisation of the hidden layer; output layer zero.
    static ScorerParams with_hidden_layer(std::size_t dim, std::size_t units, std::uint64_t seed);

    /// A zero-valued parameter set of the same shape.
    ScorerParams zeros_like() const;

    std::size_t parameter_count() const noexcept;
    bool all_finite() const noexcept;
    bool operator==(const ScorerParams&) const = default;
};

double sigmoid(double z) noexcept;

/// Raw logit z. Throws ConfigError on dimension mismatch.
double logit(const ScorerParams& params, const FeatureVector& x);

/// p = logistic(z) clamped to [epsilon, 1 - epsilon].
double score(const ScorerParams& params, const FeatureVector& x, double epsilon = kDefaultEpsilon);

/// Adds `scale * dz/dparams` for input x into `grad`.
void accumulate_logit_gradient(const ScorerParams& params, const FeatureVector& x, double scale,
                               ScorerParams& grad);

}  // namespace sugmine::classifier
