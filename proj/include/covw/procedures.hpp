#pragma once

#include <span>
#include <vector>

namespace covw {

// Null-proportion estimate and the implied null/alternative counts.
struct NullEstimate {
    double pi0 = 1.0;
    int m0 = 0;
    int m1 = 0;
    // Set when m < 20 forced the conservative pi0 = 1.
    bool fallback = false;
};

// Storey's smoother: pi0(lambda) = #{p > lambda} / (m (1 - lambda)) on
// lambda = 0.05, 0.10, ..., 0.95, smoothed by a df = 3 cubic spline and read
// at lambda = 0.95, then clamped to [0, 1].
NullEstimate estimate_pi0_storey(std::span<const double> pvalues);

// Reject p_i <= alpha w_i / m. Weights must be normalized (sum m).
std::vector<bool> weighted_bonferroni(std::span<const double> pvalues, std::span<const double> weights,
                                      double alpha);

struct BhResult {
    std::vector<double> adjusted;
    std::vector<bool> rejected;
};

// Benjamini-Hochberg on q_i = p_i / w_i (w_i = 0 gives adjusted 1). Weights
// must be normalized.
BhResult weighted_bh(std::span<const double> pvalues, std::span<const double> weights, double alpha);

// Unweighted BH.
BhResult bh(std::span<const double> pvalues, double alpha);

std::size_t count_true(const std::vector<bool>& v);

} // namespace covw
