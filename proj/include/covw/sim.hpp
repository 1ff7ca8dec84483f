#pragma once

#include "covw/pipeline.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace covw {

// Block-equicorrelated unit normals plus `effects`: within a block of
// block_size consecutive tests every pair has correlation rho, across blocks
// none. rho = 0 draws independent normals.
std::vector<double> gen_correlated_stats(int m, double rho, int block_size, std::span<const double> effects,
                                         std::uint64_t seed);
std::vector<double> gen_correlated_stats(int m, double rho, int block_size, std::span<const double> effects,
                                         std::mt19937_64& rng);

// How CRW weights are formed in a simulation. `oracle` builds them from the
// true alternative count and effects (computed once per effect point),
// `estimated` runs the full analysis pipeline on every replicate.
enum class CrwSource { oracle, estimated };

struct SimScenario {
    int m = 1000;
    double pi0 = 0.9;
    // Mean covariate effects E(tau); test effects equal them when cv = 0 and
    // are drawn from N(E(tau), cv E(tau)) per alternative otherwise.
    std::vector<double> effect_grid{2.0};
    double cv = 0.0;
    double rho = 0.0;
    int block_size = 100;
    int replications = 200;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::crw_continuous, Method::bh};
    ErrorMode mode = ErrorMode::fdr;
    CrwSource crw_source = CrwSource::estimated;
    // Options forwarded to the pipeline (alpha and mode are overridden).
    AnalysisOptions analysis{};
    unsigned threads = 1;

    void validate() const;
};

struct MetricRow {
    double effect = 0.0;
    Method method = Method::bh;
    double power = 0.0, power_se = 0.0;
    // false when no replicate had an alternative
    bool power_defined = false;
    double fdr = 0.0, fdr_se = 0.0;
    double fwer = 0.0, fwer_se = 0.0;
    double mean_rejections = 0.0;
    int replications = 0;
};

struct SimMetrics {
    std::vector<MetricRow> rows;

    const MetricRow& at(double effect, Method method) const;
};

// One replicate's data: which tests are alternatives and their p-values and
// covariates. Exposed so tests can check the generator.
struct SimDataset {
    TestCollection tests;
    std::vector<bool> alternative;
    std::vector<double> test_effects;
    int m1 = 0;
};

SimDataset simulate_dataset(const SimScenario& s, double covariate_effect, std::mt19937_64& rng);

SimMetrics simulate_metrics(const SimScenario& s);

// Tidy CSV: scenario columns, method, metric, value, se.
void write_metrics_csv(std::ostream& out, const SimScenario& s, const SimMetrics& metrics);

struct DilutionRow {
    double pi0 = 0.0;
    double best_group_alt_proportion = 0.0, proportion_se = 0.0;
    double best_group_mean_effect = 0.0, mean_effect_se = 0.0;
};

// Ranks tests by covariate, splits them into n_groups and reports the
// alternative share and mean effect of the top group.
std::vector<DilutionRow> group_dilution_demo(int m, std::span<const double> pi0_grid, double effect, int n_groups,
                                             int replications, std::uint64_t seed);

struct EffectRelationshipCurve {
    double rho = 0.0;
    double test_effect = 0.0;
    // P(covariate rank = k | test effect), k = 1..m
    std::vector<double> probabilities;
    // rank probabilities when the covariate effect equals the test effect
    std::vector<double> direct;
    double max_deviation = 0.0;
    // sample mean and standard error of the drawn covariate effects
    double drawn_mean = 0.0;
    double drawn_mean_se = 0.0;
};

// Covariate effects are drawn as N(rho * test_effect, 1 - rho^2); each draw's
// rank distribution uses `replications` Monte-Carlo draws. The other m - m0
// alternatives carry covariate effect rho * test_effect.
std::vector<EffectRelationshipCurve> effect_relationship_sim(int m, int m0, double test_effect,
                                                             std::span<const double> rho_grid, int replications,
                                                             int inner_draws, std::uint64_t seed,
                                                             unsigned threads = 1);

} // namespace covw
