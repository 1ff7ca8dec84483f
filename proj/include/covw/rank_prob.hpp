#pragma once

#include "covw/effect.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace covw {

enum class FocalKind { null, alternative };

struct McConfig {
    std::int64_t replications = 100000;
    std::uint64_t seed = 20240601;
    unsigned threads = 0;

    void validate() const;
};

// P(rank = k) for k = 1..m; rank 1 is the largest covariate statistic.
// probabilities[k - 1] holds rank k.
struct RankDistribution {
    std::vector<double> probabilities;
    // Monte-Carlo standard error per rank (zero for closed forms).
    std::vector<double> standard_errors;
    double focal_effect = 0.0;
    FocalKind focal = FocalKind::null;
    std::optional<TestPopulation> population;

    std::size_t size() const { return probabilities.size(); }
    double at_rank(std::size_t k) const { return probabilities.at(k - 1); }
};

// Stratified Monte Carlo over the focal statistic t with the two-binomial
// count convolved exactly (m <= 500) or by the normal approximation.
RankDistribution rank_prob_exact_mc(const TestPopulation& pop, double focal_effect,
                                    FocalKind focal, const McConfig& mc = {});

// Normal approximation of the count of other tests above t, integrated over
// [k - 1/2, k + 1/2] and averaged over Monte-Carlo draws of t.
RankDistribution rank_prob_normal_approx(const TestPopulation& pop, double focal_effect,
                                         FocalKind focal, const McConfig& mc = {});

RankDistribution rank_prob_all_null(int m);

// Simulates whole populations and records the focal test's rank.
RankDistribution rank_prob_bruteforce(const TestPopulation& pop, double focal_effect,
                                      FocalKind focal, std::int64_t samples,
                                      std::uint64_t seed, unsigned threads = 0);

// Optional smoothing across ranks with a cubic smoothing spline; negative
// fitted values are floored at zero before renormalizing.
RankDistribution smooth_rank_distribution(const RankDistribution& dist, double df);

// Above this size the exact estimator switches to the normal approximation.
inline constexpr int kExactConvolutionLimit = 500;

} // namespace covw
