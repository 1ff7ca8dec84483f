#include "covw/pipeline.hpp"

#include "covw/crw.hpp"
#include "covw/dcw.hpp"
#include "covw/errors.hpp"
#include "covw/gcw.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace covw {

void TestCollection::validate() const {
    if (pvalues.empty()) throw ArgumentError("TestCollection: no tests");
    if (covariates.size() != pvalues.size()) throw ArgumentError("TestCollection: covariate length mismatch");
    if (!labels.empty() && labels.size() != pvalues.size()) {
        throw ArgumentError("TestCollection: label length mismatch");
    }
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        if (!(pvalues[i] >= 0.0 && pvalues[i] <= 1.0)) {
            throw ArgumentError("TestCollection: p-value " + std::to_string(i) + " outside [0, 1]");
        }
        if (!std::isfinite(covariates[i])) {
            throw ArgumentError("TestCollection: covariate " + std::to_string(i) + " is not finite");
        }
    }
}

void AnalysisOptions::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("AnalysisOptions: alpha must lie in (0, 1)");
    if (mc_replications < 1) throw ArgumentError("AnalysisOptions: mc_replications must be positive");
    if (groups < 0 || groups == 1) throw ArgumentError("AnalysisOptions: groups must be 0 or at least 2");
    if (max_groups < 2) throw ArgumentError("AnalysisOptions: max_groups must be at least 2");
    if (bins < 2) throw ArgumentError("AnalysisOptions: bins must be at least 2");
    if (known_m1 && *known_m1 < 0) throw ArgumentError("AnalysisOptions: known_m1 must be nonnegative");
}

StatConversion pvals_to_stats(const TestCollection& tests) {
    StatConversion out;
    out.statistics.reserve(tests.size());
    for (double p : tests.pvalues) {
        if (p >= 1.0) {
            ++out.clamped_one;
            out.statistics.push_back(kMinStatistic);
            continue;
        }
        if (p < kMinPvalue) {
            ++out.clamped_small;
            p = kMinPvalue;
        }
        const double tail = tests.tails == Tails::two ? 0.5 * p : p;
        out.statistics.push_back(std::max(norm_sf_inverse(tail), kMinStatistic));
    }
    return out;
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DegenerateInputError("regression: regressor has zero variance");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

EffectEstimate estimate_effects(std::span<const double> statistics, std::span<const double> covariates,
                                const NullEstimate& null_estimate, bool use_boxcox) {
    if (statistics.size() != covariates.size()) throw ArgumentError("estimate_effects: length mismatch");
    if (statistics.empty()) throw ArgumentError("estimate_effects: no tests");
    const int m1 = null_estimate.m1;
    if (m1 < 0 || static_cast<std::size_t>(m1) > statistics.size()) {
        throw ArgumentError("estimate_effects: m1 must lie in [0, m]");
    }
    EffectEstimate est;
    if (use_boxcox) {
        BoxCoxResult bc = box_cox(covariates, statistics);
        est.working_covariates = std::move(bc.transformed);
        est.boxcox_lambda = bc.lambda;
    } else {
        est.working_covariates.assign(covariates.begin(), covariates.end());
    }
    const auto& y = est.working_covariates;
    const LineFit fit = least_squares(statistics, y);
    est.regression_slope = fit.slope;
    est.regression_intercept = fit.intercept;
    est.r_squared = fit.r_squared;
    est.covariate_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    est.covariate_sd = sample_sd(y);
    if (est.covariate_sd > 0.0) {
        const LineFit rev = least_squares(y, statistics);
        est.reverse_slope = rev.slope;
        est.reverse_intercept = rev.intercept;
    }
    if (m1 == 0) return est;

    std::vector<std::size_t> order(statistics.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return statistics[a] > statistics[b]; });
    std::vector<double> top(static_cast<std::size_t>(m1));
    for (std::size_t k = 0; k < top.size(); ++k) top[k] = statistics[order[k]];
    est.defined = true;
    est.mean_test_effect = std::accumulate(top.begin(), top.end(), 0.0) / static_cast<double>(top.size());
    est.median_test_effect = median_of(top);
    est.test_effect_sd = sample_sd(top);
    est.predicted_mean_covariate_effect = fit.intercept + fit.slope * est.mean_test_effect;
    est.predicted_median_covariate_effect = fit.intercept + fit.slope * est.median_test_effect;
    return est;
}

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 8> kTags{{
    {Method::crw_continuous, "crw-cont"},
    {Method::crw_binary, "crw-bin"},
    {Method::gcw, "gcw"},
    {Method::gcw2, "gcw2"},
    {Method::dcw, "dcw"},
    {Method::bh, "bh"},
    {Method::bonferroni, "bonferroni"},
    {Method::bw, "bw"},
}};

constexpr std::array<std::string_view, 8> kNames{"CRW-cont", "CRW-bin", "GCW", "GCW2",
                                                 "DCW",      "BH",      "Bonferroni", "BW"};

} // namespace

std::string_view method_tag(Method m) { return kTags[static_cast<std::size_t>(m)].second; }

std::string_view method_name(Method m) { return kNames[static_cast<std::size_t>(m)]; }

std::optional<Method> parse_method(std::string_view tag) {
    for (const auto& [m, t] : kTags) {
        if (t == tag) return m;
    }
    return std::nullopt;
}

std::vector<double> bonferroni_adjusted(std::span<const double> pvalues, std::span<const double> weights) {
    if (pvalues.size() != weights.size()) throw ArgumentError("bonferroni_adjusted: length mismatch");
    const double m = static_cast<double>(pvalues.size());
    std::vector<double> out(pvalues.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = weights[i] > 0.0 ? std::min(1.0, m * pvalues[i] / weights[i]) : 1.0;
    }
    return out;
}

namespace {

using Diagnostics = std::map<std::string, DiagnosticValue>;

std::vector<std::size_t> ranks_from_order(std::span<const std::size_t> perm) {
    std::vector<std::size_t> rank(perm.size());
    for (std::size_t r = 0; r < perm.size(); ++r) rank[perm[r]] = r + 1;
    return rank;
}

// Weights indexed by covariate rank, returned in input order.
WeightVector scatter_by_rank(WeightVector by_rank, std::span<const std::size_t> perm) {
    WeightVector out = by_rank;
    for (std::size_t r = 0; r < perm.size(); ++r) out.weights[perm[r]] = by_rank.weights[r];
    return out;
}

WeightVector crw_analysis(const TestCollection& tests, const AnalysisOptions& opt, const EffectEstimate& eff,
                          const NullEstimate& null, bool binary, std::span<const std::size_t> perm,
                          AnalysisResult& res) {
    const int m = static_cast<int>(tests.size());
    const double covariate_effect =
        binary ? eff.predicted_median_covariate_effect : eff.predicted_mean_covariate_effect;
    const double test_effect = binary ? eff.median_test_effect : eff.mean_test_effect;
    res.diagnostics["covariate_effect"] = covariate_effect;
    res.diagnostics["test_effect"] = test_effect;

    const auto pop = TestPopulation::make(m, m - null.m1, EffectPrior::point_mass(covariate_effect));
    McConfig mc;
    mc.replications = opt.mc_replications;
    mc.seed = opt.seed;
    mc.threads = opt.threads;
    const RankDistribution dist = rank_prob_exact_mc(pop, covariate_effect, FocalKind::alternative, mc);
    res.rank_probabilities = dist.probabilities;
    res.diagnostics["rank_prob_estimator"] =
        std::string(m > kExactConvolutionLimit ? "normal approximation" : "exact convolution");

    CrwInputs in;
    in.rank_probs = dist.probabilities;
    in.mean_test_effect = test_effect;
    in.alpha = opt.alpha;
    in.m = m;
    in.m1 = null.m1;
    in.tails = tests.tails;
    WeightVector by_rank = binary ? crw_weights_binary(in) : crw_weights_continuous(in);
    return scatter_by_rank(std::move(by_rank), perm);
}

std::vector<GcwTest> gcw_tests(const EffectEstimate& eff, Diagnostics& diag) {
    const double eta = eff.mean_test_effect;
    const double sigma = eff.test_effect_sd;
    const double tau = eff.covariate_sd;
    const double nu_sq = tau * tau - sigma * sigma;
    const double nu = std::sqrt(std::max(nu_sq, 1e-8));
    diag["prior_mean"] = eta;
    diag["prior_sd"] = sigma;
    diag["covariate_sd"] = tau;
    diag["covariate_noise_sd"] = nu;
    diag["covariate_noise_clipped"] = !(nu_sq >= 1e-8);
    std::vector<GcwTest> out;
    out.reserve(eff.working_covariates.size());
    for (double x : eff.working_covariates) {
        GcwTest t;
        t.prior_mean = eta;
        t.prior_sd = sigma;
        t.covariate_noise_sd = nu;
        t.covariate = x;
        out.push_back(t);
    }
    return out;
}

WeightVector gcw2_analysis(const TestCollection& tests, const AnalysisOptions& opt, const EffectEstimate& eff,
                           Diagnostics& diag) {
    const double tau = eff.covariate_sd;
    if (!(tau > 0.0)) throw DegenerateInputError("GCW2: covariates have zero variance");
    const double centre = eff.regression_intercept + eff.regression_slope * eff.mean_test_effect;
    diag["conditional_covariate_mean"] = centre;
    diag["covariate_sd"] = tau;
    Gcw2Inputs in;
    in.mean_test_effect = eff.mean_test_effect;
    in.alpha = tail_alpha(opt.alpha, tests.tails);
    // Both densities share the scale tau, so only their ratio matters; it is
    // evaluated in log space and folded into the conditional density.
    for (double x : eff.working_covariates) {
        const double za = (x - eff.covariate_mean) / tau;
        const double zc = (x - centre) / tau;
        in.covariate_density.push_back(1.0);
        in.conditional_density.push_back(std::exp(std::clamp(0.5 * (za * za - zc * zc), -700.0, 700.0)));
    }
    return gcw2_weights(in);
}

WeightVector bw_analysis(const TestCollection& tests, const AnalysisOptions& opt, const EffectEstimate& eff,
                         Diagnostics& diag) {
    const double sigma_sq = std::max(eff.test_effect_sd * eff.test_effect_sd, 1e-8);
    const double spread = std::sqrt(1.0 + sigma_sq);
    diag["prior_sd"] = std::sqrt(sigma_sq);
    diag["reverse_slope"] = eff.reverse_slope;
    std::vector<double> means;
    means.reserve(eff.working_covariates.size());
    for (double x : eff.working_covariates) means.push_back(eff.reverse_intercept + eff.reverse_slope * x);
    const std::vector<double> spreads(means.size(), spread);
    return bw_weights(means, spreads, tail_alpha(opt.alpha, tests.tails));
}

WeightVector dcw_analysis(const TestCollection& tests, const AnalysisOptions& opt, const EffectEstimate& eff,
                          const NullEstimate& null, AnalysisResult& res) {
    const int m = static_cast<int>(tests.size());
    const double effect = eff.mean_test_effect;
    const auto type = EffectType::continuous;
    const double a = tail_alpha(opt.alpha, tests.tails);
    GroupConfig cfg;
    cfg.bins_per_group = opt.bins;
    cfg.effect_type = type;
    if (opt.groups > 0) {
        cfg.n_groups = std::min(opt.groups, m);
        cfg.spline_df = 0.0;
        res.diagnostics["group_search"] = std::string("fixed");
    } else {
        const auto rule = opt.mode == ErrorMode::fdr ? RejectionRule::bh : RejectionRule::bonferroni;
        const GroupChoice best = optimize_groups(tests.pvalues, tests.covariates, opt.max_groups, a, effect,
                                                 null.m1, type, rule, static_cast<int>(opt.threads));
        cfg.n_groups = best.n_groups;
        cfg.spline_df = best.spline_df;
        res.diagnostics["group_search"] = std::string("optimized");
    }
    if (cfg.n_groups < 2) throw ArgumentError("DCW: need at least two tests");
    const DcwFit fit = dcw_fit(tests.pvalues, tests.covariates, effect, a, null.m1, cfg);
    res.rank_probabilities = fit.probs.smoothed;
    res.diagnostics["groups"] = static_cast<std::int64_t>(cfg.n_groups);
    res.diagnostics["spline_df"] = cfg.effective_spline_df();
    res.diagnostics["bins_per_group"] = static_cast<std::int64_t>(cfg.bins_per_group);
    res.diagnostics["test_effect"] = effect;
    if (!fit.probs.diagnostic.empty()) res.diagnostics["rank_prob_note"] = fit.probs.diagnostic;
    return fit.weights;
}

} // namespace

AnalysisResult run_analysis(const TestCollection& tests, Method method, const AnalysisOptions& options) {
    tests.validate();
    options.validate();
    const std::size_t m = tests.size();
    AnalysisResult res;
    res.method = method;
    res.alpha = options.alpha;
    res.mode = options.mode;
    auto& diag = res.diagnostics;
    diag["method"] = std::string(method_name(method));
    diag["alpha"] = options.alpha;
    diag["mode"] = std::string(options.mode == ErrorMode::fdr ? "fdr" : "fwer");
    diag["tails"] = static_cast<std::int64_t>(tests.tails == Tails::two ? 2 : 1);
    diag["m"] = static_cast<std::int64_t>(m);

    const StatConversion conv = pvals_to_stats(tests);
    res.statistics = conv.statistics;
    diag["clamped_small_pvalues"] = static_cast<std::int64_t>(conv.clamped_small);
    diag["clamped_unit_pvalues"] = static_cast<std::int64_t>(conv.clamped_one);

    const auto perm = order_by_covariate(tests.pvalues, tests.covariates);
    res.covariate_rank = ranks_from_order(perm);

    const bool weighted = method != Method::bh && method != Method::bonferroni;
    if (!weighted) {
        res.weights = uniform_weights(m, "unit weights");
        res.weights.uniform_fallback = false;
    } else {
        res.null_estimate = estimate_pi0_storey(tests.pvalues);
        if (options.known_m1) {
            if (static_cast<std::size_t>(*options.known_m1) > m) {
                throw ArgumentError("run_analysis: known_m1 exceeds the number of tests");
            }
            res.null_estimate.m1 = *options.known_m1;
            res.null_estimate.m0 = static_cast<int>(m) - *options.known_m1;
            res.null_estimate.pi0 = static_cast<double>(res.null_estimate.m0) / static_cast<double>(m);
            res.null_estimate.fallback = false;
            diag["null_source"] = std::string("supplied");
        } else {
            diag["null_source"] = std::string("storey");
        }
        const NullEstimate& null = res.null_estimate;
        diag["pi0"] = null.pi0;
        diag["m0"] = static_cast<std::int64_t>(null.m0);
        diag["m1"] = static_cast<std::int64_t>(null.m1);
        diag["pi0_fallback"] = null.fallback;

        res.effects = estimate_effects(res.statistics, tests.covariates, null, options.use_boxcox);
        const EffectEstimate& eff = *res.effects;
        diag["regression_slope"] = eff.regression_slope;
        diag["regression_intercept"] = eff.regression_intercept;
        diag["r_squared"] = eff.r_squared;
        diag["reverse_regression_slope"] = eff.reverse_slope;
        diag["reverse_regression_intercept"] = eff.reverse_intercept;
        if (eff.boxcox_lambda) diag["boxcox_lambda"] = *eff.boxcox_lambda;
        diag["effects_defined"] = eff.defined;
        if (eff.defined) {
            diag["mean_test_effect"] = eff.mean_test_effect;
            diag["median_test_effect"] = eff.median_test_effect;
            diag["test_effect_sd"] = eff.test_effect_sd;
            diag["predicted_mean_covariate_effect"] = eff.predicted_mean_covariate_effect;
            diag["predicted_median_covariate_effect"] = eff.predicted_median_covariate_effect;
        }

        if (!eff.defined) {
            res.weights = uniform_weights(m, "uniform: no alternatives estimated (m1 = 0)");
        } else {
            switch (method) {
            case Method::crw_continuous:
                res.weights = crw_analysis(tests, options, eff, null, false, perm, res);
                break;
            case Method::crw_binary:
                res.weights = crw_analysis(tests, options, eff, null, true, perm, res);
                break;
            case Method::gcw: {
                const auto params = gcw_tests(eff, diag);
                res.weights = gcw_weights(params, tail_alpha(options.alpha, tests.tails));
                break;
            }
            case Method::gcw2:
                res.weights = gcw2_analysis(tests, options, eff, diag);
                break;
            case Method::bw:
                res.weights = bw_analysis(tests, options, eff, diag);
                break;
            case Method::dcw:
                res.weights = dcw_analysis(tests, options, eff, null, res);
                break;
            default:
                break;
            }
        }
    }
    diag["multiplier"] = res.weights.multiplier;
    diag["solver_path"] = res.weights.solver_path;
    diag["uniform_fallback"] = res.weights.uniform_fallback;

    const auto& w = res.weights.weights;
    if (options.mode == ErrorMode::fdr) {
        BhResult r = weighted_bh(tests.pvalues, w, options.alpha);
        res.adjusted_pvalues = std::move(r.adjusted);
        res.rejected = std::move(r.rejected);
    } else {
        res.adjusted_pvalues = bonferroni_adjusted(tests.pvalues, w);
        res.rejected = weighted_bonferroni(tests.pvalues, w, options.alpha);
    }
    res.rejections = count_true(res.rejected);
    diag["rejections"] = static_cast<std::int64_t>(res.rejections);
    return res;
}

} // namespace covw
