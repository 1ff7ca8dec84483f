#include "covw/dcw.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"
#include "covw/parallel.hpp"
#include "covw/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace covw {

void GroupConfig::validate() const {
    if (n_groups < 2) throw ArgumentError("GroupConfig: need at least two groups");
    if (bins_per_group < 2) throw ArgumentError("GroupConfig: need at least two bins per group");
    const double df = effective_spline_df();
    if (!(df > 1.0 && df <= n_groups)) throw ArgumentError("GroupConfig: spline df must lie in (1, G]");
}

std::vector<std::size_t> order_by_covariate(std::span<const double> pvalues, std::span<const double> covariates) {
    if (pvalues.size() != covariates.size()) throw ArgumentError("order_by_covariate: length mismatch");
    for (double x : covariates) {
        if (!std::isfinite(x)) throw ArgumentError("order_by_covariate: covariates must be finite");
    }
    std::vector<std::size_t> perm(covariates.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return covariates[a] > covariates[b]; });
    return perm;
}

std::vector<std::size_t> group_sizes(std::size_t m, int n_groups) {
    if (n_groups < 1) throw ArgumentError("group_sizes: need at least one group");
    const std::size_t g = static_cast<std::size_t>(n_groups);
    if (m < g) throw ArgumentError("group_sizes: fewer tests than groups leaves a group empty");
    std::vector<std::size_t> sizes(g, m / g);
    for (std::size_t k = 0; k < m % g; ++k) ++sizes[k];
    return sizes;
}

GroupRankProbs dcw_rank_probs(std::span<const double> sorted_pvalues, const GroupConfig& cfg,
                              const Pi0Estimator& pi0_estimator) {
    cfg.validate();
    const auto sizes = group_sizes(sorted_pvalues.size(), cfg.n_groups);
    const std::size_t G = sizes.size();
    GroupRankProbs out;
    out.raw.resize(G);
    const double first_bin = 1.0 / cfg.bins_per_group;
    std::size_t start = 0;
    for (std::size_t g = 0; g < G; ++g) {
        const auto members = sorted_pvalues.subspan(start, sizes[g]);
        start += sizes[g];
        if (cfg.effect_type == EffectType::continuous) {
            const auto hits = std::count_if(members.begin(), members.end(), [&](double p) { return p < first_bin; });
            out.raw[g] = static_cast<double>(hits) / static_cast<double>(members.size());
        } else {
            const double pi0 = pi0_estimator ? pi0_estimator(members) : estimate_pi0_storey(members).pi0;
            out.raw[g] = 1.0 - pi0;
        }
    }

    if (std::all_of(out.raw.begin(), out.raw.end(), [](double v) { return !(v > 0.0); })) {
        out.smoothed.assign(G, 1.0 / static_cast<double>(G));
        out.normalized = true;
        out.uniform_fallback = true;
        out.diagnostic = "no group shows alternative signal; using uniform rank probabilities";
        return out;
    }

    out.smoothed = out.raw;
    if (G >= 4) {
        std::vector<double> ranks(G);
        std::iota(ranks.begin(), ranks.end(), 1.0);
        const SplineFit fit = fit_smoothing_spline(ranks, out.raw, cfg.effective_spline_df());
        out.smoothed.assign(fit.fitted().begin(), fit.fitted().end());
        out.smoothing_applied = true;
    } else {
        out.diagnostic = "fewer than four groups; smoothing skipped";
    }
    for (double& v : out.smoothed) v = std::max(v, 1e-12);
    const double total = std::accumulate(out.smoothed.begin(), out.smoothed.end(), 0.0);
    for (double& v : out.smoothed) v /= total;
    out.normalized = true;
    return out;
}

WeightVector dcw_weights(const GroupRankProbs& probs, double mean_test_effect, double alpha, int m, int m1,
                         const GroupConfig& cfg) {
    cfg.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("dcw_weights: alpha must lie in (0, 1)");
    const std::size_t G = static_cast<std::size_t>(cfg.n_groups);
    if (probs.smoothed.size() != G) throw ArgumentError("dcw_weights: probabilities do not match the group count");
    const auto sizes = group_sizes(static_cast<std::size_t>(m), cfg.n_groups);
    if (!(mean_test_effect > 0.0) || !std::isfinite(mean_test_effect)) {
        return uniform_weights(static_cast<std::size_t>(m), "uniform: mean test effect not positive");
    }
    const double E = mean_test_effect;
    const double Gd = static_cast<double>(G);
    std::vector<double> offs(G);
    if (cfg.effect_type == EffectType::continuous) {
        for (std::size_t g = 0; g < G; ++g) offs[g] = 0.5 * E - std::log(alpha * probs.smoothed[g]) / E;
    } else {
        if (m1 < 1) throw ArgumentError("dcw_weights: binary effects need m1 >= 1");
        const double md = static_cast<double>(m);
        for (std::size_t g = 0; g < G; ++g) {
            offs[g] = 0.5 * E + std::log(md * md / (alpha * m1 * Gd * probs.smoothed[g])) / E;
        }
    }
    const double pre = Gd / alpha;
    auto group_weight_sum = [&](double delta) {
        double s = 0.0;
        for (double o : offs) s += pre * norm_sf(o + std::log(delta) / E);
        return s - Gd;
    };

    WeightVector out;
    const auto grid = open_grid(0.0, 1.0, 0.001);
    double delta = grid_search_root(group_weight_sum, grid);
    out.solver_path = "grid";
    const bool at_edge = delta == grid.front() || delta == grid.back();
    if (at_edge && std::abs(group_weight_sum(delta)) > 1e-3 * Gd) {
        // the constraint root lies outside (0, 1); solve for it directly
        std::vector<double> sorted = offs;
        std::nth_element(sorted.begin(), sorted.begin() + G / 2, sorted.end());
        const double start = E * (norm_sf_inverse(std::min(alpha / Gd, 0.5)) - sorted[G / 2]);
        delta = solve_sf_multiplier(offs, E, pre, Gd, start).delta;
        out.solver_path = "grid edge; direct solve";
    }
    out.multiplier = delta;
    out.weights.reserve(static_cast<std::size_t>(m));
    for (std::size_t g = 0; g < G; ++g) {
        const double w = pre * norm_sf(offs[g] + std::log(delta) / E);
        out.weights.insert(out.weights.end(), sizes[g], w);
    }
    normalize_weights(out);
    return out;
}

DcwFit dcw_fit(std::span<const double> pvalues, std::span<const double> covariates, double mean_test_effect,
               double alpha, int m1, const GroupConfig& cfg) {
    const auto perm = order_by_covariate(pvalues, covariates);
    std::vector<double> sorted(pvalues.size());
    for (std::size_t r = 0; r < perm.size(); ++r) sorted[r] = pvalues[perm[r]];
    DcwFit fit;
    fit.config = cfg;
    fit.probs = dcw_rank_probs(sorted, cfg);
    const WeightVector by_rank =
        dcw_weights(fit.probs, mean_test_effect, alpha, static_cast<int>(pvalues.size()), m1, cfg);
    fit.weights = by_rank;
    for (std::size_t r = 0; r < perm.size(); ++r) fit.weights.weights[perm[r]] = by_rank.weights[r];
    return fit;
}

GroupChoice optimize_groups(std::span<const double> pvalues, std::span<const double> covariates, int g_max,
                            double alpha, double mean_test_effect, int m1, EffectType effect_type,
                            RejectionRule rule, int threads) {
    if (g_max < 2) throw ArgumentError("optimize_groups: g_max must be at least 2");
    g_max = std::min<int>(g_max, static_cast<int>(pvalues.size()));
    if (g_max < 2) throw ArgumentError("optimize_groups: need at least two tests");
    std::vector<GroupConfig> grid;
    for (int g = 2; g <= g_max; ++g) {
        for (int df = 2; df <= g; ++df) {
            GroupConfig cfg;
            cfg.n_groups = g;
            cfg.spline_df = df;
            cfg.effect_type = effect_type;
            grid.push_back(cfg);
        }
    }
    // covariate order is shared by every configuration
    const auto perm = order_by_covariate(pvalues, covariates);
    std::vector<double> sorted(pvalues.size());
    for (std::size_t r = 0; r < perm.size(); ++r) sorted[r] = pvalues[perm[r]];

    std::vector<std::size_t> counts(grid.size());
    parallel_for(grid.size(), static_cast<unsigned>(std::max(threads, 1)), [&](std::size_t k) {
        const auto probs = dcw_rank_probs(sorted, grid[k]);
        const auto w = dcw_weights(probs, mean_test_effect, alpha, static_cast<int>(sorted.size()), m1, grid[k]);
        counts[k] = rule == RejectionRule::bh ? count_true(weighted_bh(sorted, w.weights, alpha).rejected)
                                              : count_true(weighted_bonferroni(sorted, w.weights, alpha));
    });

    GroupChoice best{grid.front().n_groups, grid.front().spline_df, counts.front()};
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (counts[k] > best.rejections) best = {grid[k].n_groups, grid[k].spline_df, counts[k]};
    }
    return best;
}

} // namespace covw
