#include "covw/crw.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <type_traits>
#include <variant>

namespace covw {

void CrwInputs::validate() const {
    if (m < 1) throw ArgumentError("CrwInputs: m must be at least 1");
    if (rank_probs.size() != static_cast<std::size_t>(m)) {
        throw ArgumentError("CrwInputs: rank_probs length must equal m");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("CrwInputs: alpha must lie in (0, 1)");
    if (m1 < 0 || m1 > m) throw ArgumentError("CrwInputs: m1 must lie in [0, m]");
    for (double p : rank_probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("CrwInputs: rank probabilities must be >= 0");
    }
}

namespace {

std::vector<double> offsets(const CrwInputs& in, WeightFormula formula) {
    const double E = in.mean_test_effect;
    const double a = tail_alpha(in.alpha, in.tails);
    const double floor = rank_prob_floor(in.m);
    // binary form: log(delta m / (alpha m1 P)) = log delta + log(m / (alpha m1 P))
    const double binary_shift =
        formula == WeightFormula::binary ? std::log(static_cast<double>(in.m) / in.m1) : 0.0;
    std::vector<double> out(in.rank_probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double p = std::max(in.rank_probs[i], floor);
        out[i] = 0.5 * E + (binary_shift - std::log(a * p)) / E;
    }
    return out;
}

double start_log_delta(const CrwInputs& in, std::span<const double> offs) {
    // delta making a test at the median offset receive weight 1
    std::vector<double> sorted(offs.begin(), offs.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double a = tail_alpha(in.alpha, in.tails);
    const double z = norm_sf_inverse(std::min(a / in.m, 0.5));
    return in.mean_test_effect * (z - sorted[sorted.size() / 2]);
}

void check_formula(const CrwInputs& in, WeightFormula formula) {
    in.validate();
    if (formula == WeightFormula::binary && in.m1 < 1) {
        throw ArgumentError("binary weights need at least one alternative (m1 >= 1)");
    }
}

WeightVector crw_weights(const CrwInputs& in, WeightFormula formula) {
    check_formula(in, formula);
    if (!(in.mean_test_effect > 0.0) || !std::isfinite(in.mean_test_effect)) {
        return uniform_weights(static_cast<std::size_t>(in.m), "uniform: mean test effect not positive");
    }
    const DeltaSolution sol = solve_delta(in, formula);
    WeightVector w;
    w.weights = crw_raw_weights(in, formula, sol.delta);
    w.multiplier = sol.delta;
    w.solver_path = sol.path;
    normalize_weights(w);
    return w;
}

} // namespace

DeltaSolution solve_delta(const CrwInputs& in, WeightFormula formula) {
    check_formula(in, formula);
    if (!(in.mean_test_effect > 0.0)) throw ArgumentError("solve_delta: mean test effect must be positive");
    const auto offs = offsets(in, formula);
    const double a = tail_alpha(in.alpha, in.tails);
    const auto sol = solve_sf_multiplier(offs, in.mean_test_effect, in.m / a, in.m, start_log_delta(in, offs));
    return {sol.delta, sol.path, sol.residual};
}

std::vector<double> crw_raw_weights(const CrwInputs& in, WeightFormula formula, double delta) {
    check_formula(in, formula);
    const auto offs = offsets(in, formula);
    const double a = tail_alpha(in.alpha, in.tails);
    const double shift = std::log(delta) / in.mean_test_effect;
    std::vector<double> w(offs.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = in.m / a * norm_sf(offs[i] + shift);
    return w;
}

WeightVector crw_weights_continuous(const CrwInputs& in) { return crw_weights(in, WeightFormula::continuous); }

WeightVector crw_weights_binary(const CrwInputs& in) { return crw_weights(in, WeightFormula::binary); }

std::vector<double> prior_quantile_nodes(const EffectPrior& prior, int nodes) {
    if (nodes < 1) throw ArgumentError("prior_quantile_nodes: need at least one node");
    if (const auto* p = std::get_if<PointMass>(&prior.variant())) return {p->effect};
    std::vector<double> out(static_cast<std::size_t>(nodes));
    for (int q = 0; q < nodes; ++q) {
        const double u = (q + 0.5) / nodes;
        out[static_cast<std::size_t>(q)] = std::visit(
            [u](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, UniformEffect>) return d.lo + (d.hi - d.lo) * u;
                else if constexpr (std::is_same_v<T, ExponentialEffect>) return -std::log1p(-u) / d.rate;
                else if constexpr (std::is_same_v<T, NormalEffect>) return d.mean + d.sd * norm_quantile(u);
                else return d.effect;
            },
            prior.variant());
    }
    return out;
}

WeightVector crw_weights_exact(const TestPopulation& pop, const RankProbsByEffect& rank_probs_by_effect,
                               const ExactCrwOptions& opt) {
    pop.validate();
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ArgumentError("crw_weights_exact: alpha must lie in (0, 1)");
    const int m = pop.m;
    const double a = tail_alpha(opt.alpha, opt.tails);
    const auto nodes = prior_quantile_nodes(pop.alt_prior, opt.quadrature_nodes);
    for (double e : nodes) {
        if (!(e > 0.0)) throw ArgumentError("crw_weights_exact: prior nodes must be positive effects");
    }
    const std::size_t Q = nodes.size();
    const double node_weight = 1.0 / static_cast<double>(Q);
    const double floor = rank_prob_floor(m);

    // log(node_weight * P(r | e_q)) - e_q^2 / 2, per rank and node
    std::vector<std::vector<double>> base(static_cast<std::size_t>(m), std::vector<double>(Q));
    for (std::size_t q = 0; q < Q; ++q) {
        const RankDistribution d = rank_probs_by_effect(nodes[q]);
        if (d.size() != static_cast<std::size_t>(m)) throw ArgumentError("crw_weights_exact: rank distribution length");
        for (int r = 0; r < m; ++r) {
            base[static_cast<std::size_t>(r)][q] =
                std::log(node_weight * std::max(d.probabilities[static_cast<std::size_t>(r)], floor)) -
                0.5 * nodes[q] * nodes[q];
        }
    }

    // log h_r(z) = logsumexp_q(base + z e_q); convex and increasing in z
    auto log_h = [&](std::size_t r, double z, double* slope) {
        double mx = -INFINITY;
        for (std::size_t q = 0; q < Q; ++q) mx = std::max(mx, base[r][q] + z * nodes[q]);
        double s = 0.0, se = 0.0;
        for (std::size_t q = 0; q < Q; ++q) {
            const double v = std::exp(base[r][q] + z * nodes[q] - mx);
            s += v;
            se += v * nodes[q];
        }
        if (slope) *slope = se / s;
        return mx + std::log(s);
    };

    std::vector<double> z_warm(static_cast<std::size_t>(m), 0.0);
    bool inner_failed = false;
    auto thresholds = [&](double log_target, std::vector<double>& z) {
        for (std::size_t r = 0; r < static_cast<std::size_t>(m); ++r) {
            auto f = [&](double zz) { return log_h(r, zz, nullptr) - log_target; };
            auto fp = [&](double zz) {
                double s = 0.0;
                log_h(r, zz, &s);
                return s;
            };
            double lo = z_warm[r] - 1.0, hi = z_warm[r] + 1.0;
            for (int k = 0; k < 200 && f(lo) > 0.0; ++k) lo -= 2.0 * (k + 1);
            for (int k = 0; k < 200 && f(hi) < 0.0; ++k) hi += 2.0 * (k + 1);
            SolverConfig cfg;
            cfg.max_iterations = 200;
            cfg.abs_tolerance = 1e-13;
            cfg.step_tolerance = 1e-14;
            try {
                z[r] = safeguarded_newton(f, fp, lo, hi, z_warm[r], cfg).x;
            } catch (const std::exception&) {
                inner_failed = true;
                z[r] = 0.5 * (lo + hi);
            }
            z_warm[r] = z[r];
        }
    };

    std::vector<double> z(static_cast<std::size_t>(m));
    auto weight_sum_gap = [&](double log_delta) {
        thresholds(log_delta - std::log(a), z);
        double s = 0.0;
        for (double zz : z) s += m / a * norm_sf(zz);
        return s - m;
    };

    // sum of weights decreases in delta; bracket in log(delta) then Brent
    double lo = -5.0, hi = 5.0;
    for (int k = 0; k < 100 && weight_sum_gap(lo) < 0.0; ++k) lo -= 5.0;
    for (int k = 0; k < 100 && weight_sum_gap(hi) > 0.0; ++k) hi += 5.0;
    SolverConfig cfg;
    cfg.max_iterations = 300;
    cfg.abs_tolerance = 1e-10 * m;
    cfg.step_tolerance = 1e-13;
    WeightVector w;
    try {
        const RootResult root = brent_root(weight_sum_gap, lo, hi, cfg);
        inner_failed = false;
        weight_sum_gap(root.x);
        w.multiplier = std::exp(root.x);
        w.solver_path = "brent";
    } catch (const std::exception& e) {
        w.solver_path = std::string("partial: ") + e.what();
    }
    if (inner_failed) w.solver_path += "; inner threshold solve did not converge for some ranks";
    w.weights.resize(static_cast<std::size_t>(m));
    for (std::size_t r = 0; r < w.weights.size(); ++r) w.weights[r] = m / a * norm_sf(z[r]);
    normalize_weights(w);
    return w;
}

} // namespace covw
