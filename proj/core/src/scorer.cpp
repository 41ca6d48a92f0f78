#include "sugmine/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sugmine/error.hpp"
#include "sugmine/random.hpp"

namespace sugmine::classifier {
namespace {

void check_dim(const ScorerParams& params, const FeatureVector& x) {
    if (x.dim != params.dim) {
        throw ConfigError("feature dimension " + std::to_string(x.dim) +
                          " does not match scorer dimension " + std::to_string(params.dim));
    }
}

double sparse_row_dot(const double* row, const FeatureVector& x) noexcept {
    double z = 0.0;
    for (std::size_t k = 0; k < x.indices.size(); ++k) z += row[x.indices[k]] * x.values[k];
    return z;
}

std::vector<double> hidden_activations(const ScorerParams& p, const FeatureVector& x) {
    std::vector<double> h(p.hidden_units);
    for (std::size_t u = 0; u < p.hidden_units; ++u)
        h[u] = std::tanh(sparse_row_dot(p.hidden_weights.data() + u * p.dim, x) + p.hidden_bias[u]);
    return h;
}

}  // namespace

ScorerParams ScorerParams::linear(std::size_t dim) {
    ScorerParams p;
    p.dim = dim;
    p.weights.assign(dim, 0.0);
    return p;
}

ScorerParams ScorerParams::with_hidden_layer(std::size_t dim, std::size_t units, std::uint64_t seed) {
    if (units == 0) return linear(dim);
    ScorerParams p;
    p.dim = dim;
    p.hidden_units = units;
    p.weights.assign(units, 0.0);
    p.hidden_bias.assign(units, 0.0);
    p.hidden_weights.resize(units * dim);
    SplitMix64 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(units));
    for (double& w : p.hidden_weights) w = (2.0 * rng.uniform() - 1.0) * scale;
    // Output weights start small but non-zero so hidden units receive gradient.
    for (double& w : p.weights) w = (2.0 * rng.uniform() - 1.0) * 0.01;
    return p;
}

ScorerParams ScorerParams::zeros_like() const {
    ScorerParams z;
    z.dim = dim;
    z.hidden_units = hidden_units;
    z.weights.assign(weights.size(), 0.0);
    z.hidden_weights.assign(hidden_weights.size(), 0.0);
    z.hidden_bias.assign(hidden_bias.size(), 0.0);
    return z;
}

std::size_t ScorerParams::parameter_count() const noexcept {
    return weights.size() + 1 + hidden_weights.size() + hidden_bias.size();
}

bool ScorerParams::all_finite() const noexcept {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
    };
    return std::isfinite(bias) && finite(weights) && finite(hidden_weights) && finite(hidden_bias);
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logit(const ScorerParams& params, const FeatureVector& x) {
    check_dim(params, x);
    if (params.hidden_units == 0) return sparse_row_dot(params.weights.data(), x) + params.bias;
    const auto h = hidden_activations(params, x);
    double z = params.bias;
    for (std::size_t u = 0; u < h.size(); ++u) z += params.weights[u] * h[u];
    return z;
}

double score(const ScorerParams& params, const FeatureVector& x, double epsilon) {
    return std::clamp(sigmoid(logit(params, x)), epsilon, 1.0 - epsilon);
}

void accumulate_logit_gradient(const ScorerParams& params, const FeatureVector& x, double scale,
                               ScorerParams& grad) {
    check_dim(params, x);
    grad.bias += scale;
    if (params.hidden_units == 0) {
        for (std::size_t k = 0; k < x.indices.size(); ++k)
            grad.weights[x.indices[k]] += scale * x.values[k];
        return;
    }
    const auto h = hidden_activations(params, x);
    for (std::size_t u = 0; u < params.hidden_units; ++u) {
        grad.weights[u] += scale * h[u];
        const double da = scale * params.weights[u] * (1.0 - h[u] * h[u]);
        grad.hidden_bias[u] += da;
        double* row = grad.hidden_weights.data() + u * params.dim;
        for (std::size_t k = 0; k < x.indices.size(); ++k) row[x.indices[k]] += da * x.values[k];
    }
}

}  // namespace sugmine::classifier
