#pragma once

#include "covw/weights.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace covw {

enum class EffectType { continuous, binary };

struct GroupConfig {
    int n_groups = 10;
    int bins_per_group = 20;
    // Smoothing spline degrees of freedom; 0 selects n_groups (no smoothing).
    double spline_df = 0.0;
    EffectType effect_type = EffectType::continuous;

    void validate() const;
    double effective_spline_df() const { return spline_df > 0.0 ? spline_df : n_groups; }
};

// Rank 1 is the largest covariate; ties keep the original index order.
std::vector<std::size_t> order_by_covariate(std::span<const double> pvalues, std::span<const double> covariates);

// Sizes of G consecutive groups over m tests; the first m mod G groups take one
// extra test.
std::vector<std::size_t> group_sizes(std::size_t m, int n_groups);

struct GroupRankProbs {
    std::vector<double> raw;
    std::vector<double> smoothed;  // floored, normalized to sum 1
    bool normalized = false;
    bool smoothing_applied = false;
    bool uniform_fallback = false;
    std::string diagnostic;
};

using Pi0Estimator = std::function<double(std::span<const double>)>;

// sorted_pvalues must already be in covariate-rank order. The estimator is
// only used for binary effects; an empty one selects Storey's estimator.
GroupRankProbs dcw_rank_probs(std::span<const double> sorted_pvalues, const GroupConfig& cfg,
                              const Pi0Estimator& pi0_estimator = {});

// Per-test weights in covariate-rank order, constant within groups.
WeightVector dcw_weights(const GroupRankProbs& probs, double mean_test_effect, double alpha, int m, int m1,
                         const GroupConfig& cfg);

struct DcwFit {
    WeightVector weights;  // aligned with the input test order
    GroupRankProbs probs;
    GroupConfig config;
};

DcwFit dcw_fit(std::span<const double> pvalues, std::span<const double> covariates, double mean_test_effect,
               double alpha, int m1, const GroupConfig& cfg);

enum class RejectionRule { bh, bonferroni };

struct GroupChoice {
    int n_groups = 2;
    double spline_df = 2.0;
    std::size_t rejections = 0;
};

// Grid over G = 2..g_max and df in {2, ..., floor(G)} plus G, counting
// rejections of the weighted procedure; ties go to smaller G, then smaller df.
GroupChoice optimize_groups(std::span<const double> pvalues, std::span<const double> covariates, int g_max,
                            double alpha, double mean_test_effect, int m1, EffectType effect_type,
                            RejectionRule rule = RejectionRule::bh, int threads = 1);

} // namespace covw
