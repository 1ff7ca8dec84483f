#pragma once

#include "covw/effect.hpp"
#include "covw/rank_prob.hpp"
#include "covw/weights.hpp"

#include <functional>
#include <vector>

namespace covw {

// Inputs of the rank-probability weights. rank_probs[k - 1] is the probability
// that an alternative test lands at covariate rank k; weights come back in the
// same rank order.
struct CrwInputs {
    std::vector<double> rank_probs;
    double mean_test_effect = 0.0;
    double alpha = 0.05;
    int m = 1;
    int m1 = 1;
    Tails tails = Tails::one;

    void validate() const;
};

enum class WeightFormula { continuous, binary };

struct DeltaSolution {
    double delta = 0.0;
    std::string path;  // "newton", "grid" or "grid-extended"
    double residual = 0.0;  // sum of weights minus m at delta
};

DeltaSolution solve_delta(const CrwInputs& in, WeightFormula formula);

// Unnormalized weights at a given delta.
std::vector<double> crw_raw_weights(const CrwInputs& in, WeightFormula formula, double delta);

WeightVector crw_weights_continuous(const CrwInputs& in);
WeightVector crw_weights_binary(const CrwInputs& in);

// Weights from the full integral over the effect prior: for each rank the
// threshold z solves  sum_q w_q exp(z e_q - e_q^2 / 2) P(r | e_q) = delta / alpha
// over quantile nodes e_q of the prior, then delta enforces the sum constraint.
struct ExactCrwOptions {
    double alpha = 0.05;
    int quadrature_nodes = 24;
    Tails tails = Tails::one;
};

using RankProbsByEffect = std::function<RankDistribution(double effect)>;

WeightVector crw_weights_exact(const TestPopulation& pop, const RankProbsByEffect& rank_probs_by_effect,
                               const ExactCrwOptions& opt);

// Equal-weight quantile nodes of the prior (midpoints in probability space).
std::vector<double> prior_quantile_nodes(const EffectPrior& prior, int nodes);

// Floor applied to rank probabilities before taking logs.
inline double rank_prob_floor(int m) { return 1.0 / (static_cast<double>(m) * 1e6); }

} // namespace covw
