#include "covw/weights.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <cmath>
#include <numeric>

namespace covw {

void normalize_weights(WeightVector& w) {
    const double total = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw DegenerateInputError("normalize_weights: weights sum to zero");
    }
    const double scale = static_cast<double>(w.weights.size()) / total;
    for (double& v : w.weights) v *= scale;
    w.normalized = true;
}

WeightVector uniform_weights(std::size_t m, std::string reason) {
    WeightVector w;
    w.weights.assign(m, 1.0);
    w.normalized = true;
    w.uniform_fallback = true;
    w.solver_path = std::move(reason);
    return w;
}

bool weights_are_normalized(std::span<const double> w, double tol) {
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        total += v;
    }
    const double m = static_cast<double>(w.size());
    return std::abs(total - m) <= tol * m;
}

MultiplierSolution solve_sf_multiplier(std::span<const double> offsets, double effect, double prefactor,
                                       double target, double log_delta_start) {
    const double inv = 1.0 / effect;
    auto f = [&](double x) {
        double s = 0.0;
        for (double o : offsets) s += norm_sf(o + x * inv);
        return prefactor * s - target;
    };
    auto fp = [&](double x) {
        double s = 0.0;
        for (double o : offsets) s += norm_pdf(o + x * inv);
        return -prefactor * inv * s;
    };

    MultiplierSolution out;
    try {
        double lo = log_delta_start;
        double flo = f(lo);
        // while the weights are too small, decrease delta
        for (int k = 0; k < 100 && flo < 0.0; ++k) {
            lo -= 0.5;
            flo = f(lo);
        }
        if (flo < 0.0) throw BracketError("no delta with enough weight mass");
        double hi = lo + 0.5;
        for (int k = 0; k < 200 && f(hi) >= 0.0; ++k) hi += 0.5;
        if (f(hi) >= 0.0) throw BracketError("weight sum never drops below the target");

        SolverConfig cfg;
        cfg.max_iterations = 200;
        cfg.abs_tolerance = 1e-11 * target;
        cfg.step_tolerance = 1e-15;
        const RootResult r = safeguarded_newton(f, fp, lo, hi, lo, cfg);
        out.delta = std::exp(r.x);
        out.path = "newton";
        out.residual = r.fx;
        if (!(out.delta > 0.0) || !std::isfinite(out.delta)) throw DomainError("delta out of range");
        return out;
    } catch (const std::exception&) {
        // fall through to the grid
    }

    auto g = [&](double delta) { return f(std::log(delta)); };
    const auto grid = open_grid(0.0, 1.0, 0.001);
    double delta = grid_search_root(g, grid);
    out.path = "grid";
    if (delta == grid.back()) {
        const auto wide = open_grid(0.0, 10.0, 0.01);
        delta = grid_search_root(g, wide);
        out.path = "grid-extended";
    }
    out.delta = delta;
    out.residual = g(delta);
    return out;
}

} // namespace covw
