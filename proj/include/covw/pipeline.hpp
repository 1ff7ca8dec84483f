#pragma once

#include "covw/procedures.hpp"
#include "covw/rank_prob.hpp"
#include "covw/weights.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace covw {

struct TestCollection {
    std::vector<double> pvalues;
    std::vector<double> covariates;
    Tails tails = Tails::one;
    // Empty, or one identifier per test.
    std::vector<std::string> labels;

    std::size_t size() const { return pvalues.size(); }
    void validate() const;
};

// p-values below this are clamped before conversion; p = 1 maps to
// kMinStatistic instead of minus infinity.
inline constexpr double kMinPvalue = 1e-300;
inline constexpr double kMinStatistic = -8.2;

struct StatConversion {
    std::vector<double> statistics;
    std::size_t clamped_small = 0;
    std::size_t clamped_one = 0;
};

StatConversion pvals_to_stats(const TestCollection& tests);

// Regression of covariates on statistics over every test, plus summaries of
// the m1 largest statistics. Effect fields are meaningful only when
// `defined` is true (m1 >= 1).
struct EffectEstimate {
    bool defined = false;
    double mean_test_effect = 0.0;
    double median_test_effect = 0.0;
    // standard deviation of the top statistics
    double test_effect_sd = 0.0;
    double predicted_mean_covariate_effect = 0.0;
    double predicted_median_covariate_effect = 0.0;
    double regression_slope = 0.0;
    double regression_intercept = 0.0;
    double r_squared = 0.0;
    // statistic regressed on covariate, the reverse conditional
    double reverse_slope = 0.0;
    double reverse_intercept = 0.0;
    std::optional<double> boxcox_lambda;
    // Covariates as used by the regression (Box-Cox transformed when enabled).
    std::vector<double> working_covariates;
    double covariate_mean = 0.0;
    double covariate_sd = 0.0;
};

// Throws DomainError for non-positive covariates under Box-Cox and
// DegenerateInputError when the statistics have zero variance.
EffectEstimate estimate_effects(std::span<const double> statistics, std::span<const double> covariates,
                                const NullEstimate& null_estimate, bool use_boxcox);

enum class Method { crw_continuous, crw_binary, gcw, gcw2, dcw, bh, bonferroni, bw };
enum class ErrorMode { fwer, fdr };

// Command-line tags: crw-cont, crw-bin, gcw, gcw2, dcw, bh, bonferroni, bw.
std::string_view method_tag(Method m);
std::optional<Method> parse_method(std::string_view tag);
// Display names: CRW-cont, CRW-bin, GCW, GCW2, DCW, BH, Bonferroni, BW.
std::string_view method_name(Method m);

struct AnalysisOptions {
    double alpha = 0.05;
    ErrorMode mode = ErrorMode::fdr;
    bool use_boxcox = false;
    // Rank-probability Monte Carlo for CRW.
    std::int64_t mc_replications = 20000;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    // DCW: a positive value fixes the group count, 0 searches 2..max_groups.
    int groups = 0;
    int max_groups = 10;
    int bins = 20;
    // Replaces the Storey estimate when set (simulation oracles).
    std::optional<int> known_m1;

    void validate() const;
};

using DiagnosticValue = std::variant<bool, std::int64_t, double, std::string>;

struct AnalysisResult {
    Method method = Method::bh;
    double alpha = 0.05;
    ErrorMode mode = ErrorMode::fdr;
    WeightVector weights;
    std::vector<double> adjusted_pvalues;
    std::vector<bool> rejected;
    std::size_t rejections = 0;
    // 1 = largest covariate; ties keep input order.
    std::vector<std::size_t> covariate_rank;
    std::vector<double> statistics;
    NullEstimate null_estimate;
    std::optional<EffectEstimate> effects;
    // Rank probabilities indexed by covariate rank (CRW) or group (DCW).
    std::vector<double> rank_probabilities;
    std::map<std::string, DiagnosticValue> diagnostics;
};

AnalysisResult run_analysis(const TestCollection& tests, Method method, const AnalysisOptions& options = {});

// Weighted Bonferroni adjusted values min(1, m p / w); w = 0 gives 1.
std::vector<double> bonferroni_adjusted(std::span<const double> pvalues, std::span<const double> weights);

} // namespace covw
