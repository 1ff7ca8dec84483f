#include "covw/gcw.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace covw {

void GcwTest::validate() const {
    if (!std::isfinite(prior_mean) || !std::isfinite(covariate)) {
        throw ArgumentError("GcwTest: prior mean and covariate must be finite");
    }
    if (!(prior_sd >= 0.0) || !(covariate_noise_sd >= 0.0)) {
        throw ArgumentError("GcwTest: standard deviations must be nonnegative");
    }
    if (!(prior_sd * prior_sd + covariate_noise_sd * covariate_noise_sd > 0.0)) {
        throw ArgumentError("GcwTest: prior and covariate noise cannot both be zero");
    }
    if (!(density_ratio > 0.0) || !std::isfinite(density_ratio)) {
        throw ArgumentError("GcwTest: density ratio must be positive");
    }
}

GcwReparam gcw_reparameterize(const GcwTest& t) {
    const double s2 = t.prior_sd * t.prior_sd;
    const double n2 = t.covariate_noise_sd * t.covariate_noise_sd;
    const double total = s2 + n2;
    return {(t.prior_mean * n2 + t.covariate * s2) / total, s2 * n2 / total};
}

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
}

bool point_prior(const GcwTest& t) { return t.prior_sd <= kPointPriorSd; }

// log(s m f / alpha), the lambda-free part of the quadratic's log term
double log_scale(const GcwTest& t, const GcwReparam& r, double alpha, int m) {
    return 0.5 * std::log1p(r.excess_variance) + std::log(m * t.density_ratio / alpha);
}

struct Threshold {
    double u;
    double du_dlog_lambda;
};

std::optional<Threshold> threshold_at(const GcwTest& t, double log_lambda, double alpha, int m) {
    const GcwReparam r = gcw_reparameterize(t);
    const double L = log_lambda + log_scale(t, r, alpha, m);
    if (point_prior(t)) {
        if (!(r.mean > 0.0)) return std::nullopt;
        return Threshold{0.5 * r.mean + L / r.mean, 1.0 / r.mean};
    }
    const double k = r.excess_variance;
    const double s = std::sqrt(1.0 + k);
    const double disc = r.mean * r.mean + 2.0 * k * L;
    if (disc < 0.0) return std::nullopt;
    const double root = s * std::sqrt(disc);
    const double u = r.mean + root > 0.0 ? (r.mean * r.mean + 2.0 * (1.0 + k) * L) / (r.mean + root)
                                         : (root - r.mean) / k;
    const double slope = disc > 0.0 ? s / std::sqrt(disc) : std::numeric_limits<double>::infinity();
    return Threshold{u, slope};
}

// log of the feasibility bound; -inf when the test is feasible for every lambda
double log_lower_bound(const GcwTest& t, double alpha, int m) {
    const GcwReparam r = gcw_reparameterize(t);
    if (point_prior(t)) {
        return r.mean > 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    return -log_scale(t, r, alpha, m) - r.mean * r.mean / (2.0 * r.excess_variance);
}

struct SumAndSlope {
    double gap;
    double slope;
};

SumAndSlope weight_gap(std::span<const GcwTest> tests, double log_lambda, double alpha) {
    const int m = static_cast<int>(tests.size());
    const double pre = m / alpha;
    double s = 0.0, ds = 0.0;
    for (const auto& t : tests) {
        const auto th = threshold_at(t, log_lambda, alpha, m);
        if (!th) continue;
        s += pre * norm_sf(th->u);
        if (std::isfinite(th->du_dlog_lambda)) ds -= pre * norm_pdf(th->u) * th->du_dlog_lambda;
    }
    return {s - m, ds};
}

} // namespace

double lambda_lower_bound(const GcwTest& t, double alpha, int m) {
    t.validate();
    check_alpha(alpha);
    return std::exp(log_lower_bound(t, alpha, m));
}

std::optional<double> gcw_threshold(const GcwTest& t, double lambda, double alpha, int m) {
    t.validate();
    check_alpha(alpha);
    if (!(lambda > 0.0)) throw ArgumentError("gcw_threshold: lambda must be positive");
    const auto th = threshold_at(t, std::log(lambda), alpha, m);
    if (!th) return std::nullopt;
    return th->u;
}

std::vector<double> gcw_raw_weights(std::span<const GcwTest> tests, double lambda, double alpha) {
    check_alpha(alpha);
    const int m = static_cast<int>(tests.size());
    std::vector<double> w(tests.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        tests[i].validate();
        if (const auto th = threshold_at(tests[i], std::log(lambda), alpha, m)) w[i] = m / alpha * norm_sf(th->u);
    }
    return w;
}

WeightVector gcw_weights(std::span<const GcwTest> tests, double alpha) {
    check_alpha(alpha);
    if (tests.empty()) throw ArgumentError("gcw_weights: no tests");
    for (const auto& t : tests) t.validate();
    const int m = static_cast<int>(tests.size());
    auto gap = [&](double x) { return weight_gap(tests, x, alpha).gap; };
    auto slope = [&](double x) { return weight_gap(tests, x, alpha).slope; };
    SolverConfig cfg;
    cfg.max_iterations = 300;
    cfg.abs_tolerance = 1e-12 * m;
    cfg.step_tolerance = 1e-14;

    WeightVector out;
    double log_lambda = 0.0;
    if (gap(0.0) > 0.0) {
        // root above lambda = 1: grow the bracket by decades up to 1e6
        const double cap = std::log(1e6);
        double hi = std::log(10.0);
        while (hi < cap && gap(hi) > 0.0) hi = std::min(cap, hi + std::log(10.0));
        if (gap(hi) > 0.0) {
            log_lambda = hi;
            out.solver_path = "capped at lambda = 1e6";
        } else {
            try {
                log_lambda = safeguarded_newton(gap, slope, 0.0, hi, 0.0, cfg).x;
                out.solver_path = "newton";
            } catch (const std::runtime_error&) {
                log_lambda = brent_root(gap, 0.0, hi, cfg).x;
                out.solver_path = "brent";
            }
        }
    } else {
        // Below lambda = 1 the weight sum is decreasing between the points
        // where a test becomes feasible and jumps up at each of them. Walk
        // the feasibility bounds downward and take the first piece holding a
        // root, which is the largest root.
        std::vector<double> bounds;
        bounds.reserve(tests.size());
        for (const auto& t : tests) {
            const double b = log_lower_bound(t, alpha, m);
            if (std::isfinite(b) && b < 0.0) bounds.push_back(b);
        }
        std::sort(bounds.begin(), bounds.end(), std::greater<>());
        bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
        constexpr double nudge = 1e-9;
        double right = 0.0;
        bool found = false;
        double best = 0.0, best_gap = std::abs(gap(0.0));
        for (std::size_t k = 0; k <= bounds.size() && !found; ++k) {
            const double left = k < bounds.size() ? bounds[k] + nudge : -745.0;
            if (left < right) {
                const double g_left = gap(left);
                if (std::abs(g_left) < best_gap) {
                    best_gap = std::abs(g_left);
                    best = left;
                }
                if (g_left >= 0.0) {
                    log_lambda = brent_root(gap, left, right, cfg).x;
                    out.solver_path = k == 0 ? "brent" : "brent (below some feasibility bounds)";
                    found = true;
                }
            }
            if (k < bounds.size()) right = std::min(right, bounds[k] - nudge);
        }
        if (!found) {
            log_lambda = best;
            out.solver_path = "closest weight sum (no exact root)";
        }
    }

    out.multiplier = std::exp(log_lambda);
    out.weights.assign(tests.size(), 0.0);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        if (const auto th = threshold_at(tests[i], log_lambda, alpha, m)) out.weights[i] = m / alpha * norm_sf(th->u);
    }
    if (std::all_of(out.weights.begin(), out.weights.end(), [](double w) { return w == 0.0; })) {
        throw DegenerateInputError("gcw_weights: every test is infeasible");
    }
    normalize_weights(out);
    return out;
}

WeightVector bw_weights(std::span<const double> prior_means, std::span<const double> spreads, double alpha) {
    check_alpha(alpha);
    if (prior_means.size() != spreads.size() || prior_means.empty()) {
        throw ArgumentError("bw_weights: need equal, nonzero numbers of means and spreads");
    }
    for (std::size_t i = 0; i < spreads.size(); ++i) {
        if (!(spreads[i] > 1.0) || !std::isfinite(prior_means[i])) {
            throw ArgumentError("bw_weights: spreads must exceed 1 and means must be finite");
        }
    }
    const double m = static_cast<double>(prior_means.size());
    const double log_m_over_alpha = std::log(m / alpha);

    // Stationarity of sf((c - eta) / g) - lambda (m / alpha) sf(c) in c gives
    // (g^2 - 1) c^2 + 2 eta c - eta^2 - 2 g^2 log(lambda g m / alpha) = 0.
    auto weight = [&](std::size_t i, double log_lambda) {
        const double eta = prior_means[i], g2 = spreads[i] * spreads[i];
        const double a = g2 - 1.0, b = 2.0 * eta;
        const double q = -eta * eta - 2.0 * g2 * (log_lambda + std::log(spreads[i]) + log_m_over_alpha);
        const double disc = b * b - 4.0 * a * q;
        if (disc < 0.0) return 0.0;
        const double sq = std::sqrt(disc);
        const double c = b + sq > 0.0 ? -2.0 * q / (b + sq) : (sq - b) / (2.0 * a);
        return m / alpha * norm_sf(c);
    };
    auto total = [&](double log_lambda) {
        double s = 0.0;
        for (std::size_t i = 0; i < prior_means.size(); ++i) s += weight(i, log_lambda);
        return s;
    };
    // discriminant zero at log lambda = -eta^2 / (2 (g^2 - 1)) - log(g m / alpha)
    std::vector<double> bounds;
    for (std::size_t i = 0; i < prior_means.size(); ++i) {
        const double g2 = spreads[i] * spreads[i];
        bounds.push_back(-prior_means[i] * prior_means[i] / (2.0 * (g2 - 1.0)) - std::log(spreads[i]) -
                         log_m_over_alpha);
    }
    std::sort(bounds.begin(), bounds.end(), std::greater<>());

    auto bisect = [&](double lo, double hi) {
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (total(mid) > m ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };

    double log_lambda;
    if (total(0.0) > m) {
        double hi = 1.0;
        while (total(hi) > m && hi < 14.0) hi += 1.0;
        log_lambda = bisect(0.0, hi);
    } else {
        double right = 0.0;
        std::optional<double> root;
        for (std::size_t k = 0; k <= bounds.size() && !root; ++k) {
            const double left = k < bounds.size() ? bounds[k] + 1e-9 : -745.0;
            if (left < right && total(left) >= m) root = bisect(left, right);
            if (k < bounds.size()) right = std::min(right, bounds[k] - 1e-9);
        }
        if (!root) throw DegenerateInputError("bw_weights: no multiplier meets the weight constraint");
        log_lambda = *root;
    }

    WeightVector out;
    out.multiplier = std::exp(log_lambda);
    out.solver_path = "bisection";
    out.weights.resize(prior_means.size());
    for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] = weight(i, log_lambda);
    normalize_weights(out);
    return out;
}

void Gcw2Inputs::validate() const {
    if (covariate_density.empty() || covariate_density.size() != conditional_density.size()) {
        throw ArgumentError("Gcw2Inputs: density vectors must be nonempty and of equal length");
    }
    check_alpha(alpha);
    for (std::size_t i = 0; i < covariate_density.size(); ++i) {
        if (!(covariate_density[i] > 0.0) || !(conditional_density[i] > 0.0) ||
            !std::isfinite(covariate_density[i]) || !std::isfinite(conditional_density[i])) {
            throw ArgumentError("Gcw2Inputs: densities must be positive and finite");
        }
    }
}

WeightVector gcw2_weights(const Gcw2Inputs& in) {
    in.validate();
    const std::size_t m = in.covariate_density.size();
    const double E = in.mean_test_effect;
    if (!(E > 0.0) || !std::isfinite(E)) return uniform_weights(m, "uniform: mean test effect not positive");
    const double md = static_cast<double>(m);
    std::vector<double> offs(m);
    for (std::size_t i = 0; i < m; ++i) {
        offs[i] = 0.5 * E +
                  (std::log(md * in.covariate_density[i] / in.alpha) - std::log(in.conditional_density[i])) / E;
    }
    std::vector<double> sorted = offs;
    std::nth_element(sorted.begin(), sorted.begin() + m / 2, sorted.end());
    const double start = E * (norm_sf_inverse(std::min(in.alpha / md, 0.5)) - sorted[m / 2]);
    const auto sol = solve_sf_multiplier(offs, E, md / in.alpha, md, start);

    WeightVector out;
    out.multiplier = sol.delta;
    out.solver_path = sol.path;
    out.weights.resize(m);
    const double shift = std::log(sol.delta) / E;
    for (std::size_t i = 0; i < m; ++i) out.weights[i] = md / in.alpha * norm_sf(offs[i] + shift);
    normalize_weights(out);
    return out;
}

} // namespace covw
