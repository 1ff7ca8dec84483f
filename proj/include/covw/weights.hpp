#pragma once

#include <span>
#include <string>
#include <vector>

namespace covw {

enum class Tails { one = 1, two = 2 };

// Nonnegative per-test weights. When normalized they sum to the number of
// tests (mean weight 1).
struct WeightVector {
    std::vector<double> weights;
    // Lagrange multiplier that produced the weights (delta for CRW/DCW/GCW2,
    // lambda for GCW/BW).
    double multiplier = 0.0;
    bool normalized = false;
    // Which solver path produced the multiplier, or why a fallback was taken.
    std::string solver_path;
    bool uniform_fallback = false;

    std::size_t size() const { return weights.size(); }
};

// Rescales to sum m. Throws DegenerateInputError when every weight is zero.
void normalize_weights(WeightVector& w);

WeightVector uniform_weights(std::size_t m, std::string reason);

// True when all weights are >= 0 and sum to size() within tol * size().
bool weights_are_normalized(std::span<const double> w, double tol = 1e-6);

// Effective significance level per tail.
inline double tail_alpha(double alpha, Tails tails) {
    return tails == Tails::two ? 0.5 * alpha : alpha;
}

// Solves  prefactor * sum_i sf(offsets_i + log(delta) / effect) = target  for
// delta, the shape shared by every rank- and density-based weight. The sum is
// decreasing in delta. Algorithm: start at log_delta_start, step down by 0.5
// while the sum is short of the target, bracket, then Newton with bisection
// safeguards in log(delta); on failure fall back to a grid over delta in
// (0, 1) step 0.001, extended once to (0, 10) when the grid edge wins.
struct MultiplierSolution {
    double delta = 0.0;
    std::string path;
    double residual = 0.0;
};

MultiplierSolution solve_sf_multiplier(std::span<const double> offsets, double effect, double prefactor,
                                       double target, double log_delta_start);

} // namespace covw
