#include "covw/procedures.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"
#include "covw/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace covw {

namespace {

void check_pvalues(std::span<const double> p) {
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("p-values must lie in [0, 1]");
    }
}

void check_inputs(std::span<const double> p, std::span<const double> w, double alpha) {
    if (p.size() != w.size()) throw ArgumentError("p-values and weights differ in length");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    check_pvalues(p);
    if (!weights_are_normalized(w)) throw ArgumentError("weights must be nonnegative and sum to m");
}

// Step-up adjustment of already-divided values q.
BhResult step_up(const std::vector<double>& q, double alpha) {
    const std::size_t m = q.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] < q[b]; });
    BhResult out;
    out.adjusted.assign(m, 1.0);
    out.rejected.assign(m, false);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t i = order[k];
        const double scaled = q[i] * static_cast<double>(m) / static_cast<double>(k + 1);
        running = std::min(running, scaled);
        out.adjusted[i] = std::min(1.0, running);
    }
    for (std::size_t i = 0; i < m; ++i) out.rejected[i] = out.adjusted[i] <= alpha;
    return out;
}

} // namespace

NullEstimate estimate_pi0_storey(std::span<const double> pvalues) {
    check_pvalues(pvalues);
    const int m = static_cast<int>(pvalues.size());
    NullEstimate out;
    if (m < 20) {
        out.pi0 = 1.0;
        out.fallback = true;
    } else {
        std::vector<double> sorted(pvalues.begin(), pvalues.end());
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> lambdas, ratios;
        for (int k = 1; k <= 19; ++k) {
            const double lambda = 0.05 * k;
            const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), lambda);
            lambdas.push_back(lambda);
            ratios.push_back(static_cast<double>(above) / (m * (1.0 - lambda)));
        }
        const SplineFit fit = fit_smoothing_spline(lambdas, ratios, 3.0);
        out.pi0 = std::clamp(fit(lambdas.back()), 0.0, 1.0);
    }
    out.m0 = static_cast<int>(std::lround(out.pi0 * m));
    out.m1 = m - out.m0;
    return out;
}

std::vector<bool> weighted_bonferroni(std::span<const double> pvalues, std::span<const double> weights,
                                      double alpha) {
    check_inputs(pvalues, weights, alpha);
    const double m = static_cast<double>(pvalues.size());
    std::vector<bool> out(pvalues.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pvalues[i] <= alpha * weights[i] / m;
    return out;
}

BhResult weighted_bh(std::span<const double> pvalues, std::span<const double> weights, double alpha) {
    check_inputs(pvalues, weights, alpha);
    std::vector<double> q(pvalues.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = weights[i] > 0.0 ? pvalues[i] / weights[i] : std::numeric_limits<double>::infinity();
    }
    return step_up(q, alpha);
}

BhResult bh(std::span<const double> pvalues, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    check_pvalues(pvalues);
    return step_up(std::vector<double>(pvalues.begin(), pvalues.end()), alpha);
}

std::size_t count_true(const std::vector<bool>& v) {
    return static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
}

} // namespace covw
