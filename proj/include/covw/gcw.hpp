#pragma once

#include "covw/weights.hpp"

#include <optional>
#include <span>
#include <vector>

namespace covw {

// One test under the Gaussian covariate model: the effect has prior
// N(prior_mean, prior_sd^2) and the covariate is the effect plus
// N(0, covariate_noise_sd^2) noise.
struct GcwTest {
    double prior_mean = 0.0;
    double prior_sd = 0.0;
    double covariate_noise_sd = 1.0;
    double covariate = 0.0;
    // Ratio of the marginal covariate density to its fitted normal density.
    double density_ratio = 1.0;

    void validate() const;
};

// Posterior mean of the effect given the covariate, and the excess variance
// s^2 - 1 of the test statistic's predictive distribution.
struct GcwReparam {
    double mean = 0.0;
    double excess_variance = 0.0;
};

GcwReparam gcw_reparameterize(const GcwTest& t);

// Smallest multiplier for which the optimal threshold of this test is real.
// Below it the test gets weight 0.
double lambda_lower_bound(const GcwTest& t, double alpha, int m);

// Threshold u with weight (m / alpha) * sf(u), or nullopt when lambda is
// below the feasibility bound (weight 0).
std::optional<double> gcw_threshold(const GcwTest& t, double lambda, double alpha, int m);

// Weights at a fixed multiplier, unnormalized.
std::vector<double> gcw_raw_weights(std::span<const GcwTest> tests, double lambda, double alpha);

WeightVector gcw_weights(std::span<const GcwTest> tests, double alpha);

// Bayes weights for effects N(prior_mean_i, spread_i^2 - 1) without a
// covariate; spread_i must exceed 1.
WeightVector bw_weights(std::span<const double> prior_means, std::span<const double> spreads, double alpha);

struct Gcw2Inputs {
    std::vector<double> covariate_density;
    std::vector<double> conditional_density;
    double mean_test_effect = 0.0;
    double alpha = 0.05;

    void validate() const;
};

WeightVector gcw2_weights(const Gcw2Inputs& in);

// Prior sd at or below this is treated as a point prior.
inline constexpr double kPointPriorSd = 1e-6;

} // namespace covw
