#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace covw {

void SolverConfig::validate() const {
    if (max_iterations < 1 || !(abs_tolerance > 0.0) || !(step_tolerance > 0.0)) {
        throw ArgumentError("SolverConfig: all fields must be strictly positive");
    }
}

RootResult newton_raphson(const ScalarFn& f, const ScalarFn& fprime, double x0,
                          const SolverConfig& cfg) {
    cfg.validate();
    double x = x0;
    double fx = f(x);
    if (std::abs(fx) <= cfg.abs_tolerance) return {x, fx, 0};
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const double d = fprime(x);
        if (!(std::abs(d) >= 1e-300)) {
            throw SingularDerivativeError("newton_raphson: derivative vanished");
        }
        const double step = fx / d;
        x -= step;
        fx = f(x);
        if (!std::isfinite(x) || !std::isfinite(fx)) {
            throw NonConvergenceError("newton_raphson: iterate left the finite range", x);
        }
        if (std::abs(fx) <= cfg.abs_tolerance || std::abs(step) <= cfg.step_tolerance) {
            return {x, fx, it};
        }
    }
    throw NonConvergenceError("newton_raphson: iteration cap reached", x);
}

RootResult safeguarded_newton(const ScalarFn& f, const ScalarFn& fprime, double lo,
                              double hi, double x0, const SolverConfig& cfg) {
    cfg.validate();
    if (lo > hi) std::swap(lo, hi);
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return {lo, 0.0, 0};
    if (fhi == 0.0) return {hi, 0.0, 0};
    if (std::signbit(flo) == std::signbit(fhi)) {
        throw BracketError("safeguarded_newton: no sign change on the bracket");
    }
    double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const double fx = f(x);
        if (std::abs(fx) <= cfg.abs_tolerance) return {x, fx, it};
        if (std::signbit(fx) == std::signbit(flo)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        const double d = fprime(x);
        double next = (std::abs(d) >= 1e-300) ? x - fx / d : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= cfg.step_tolerance || hi - lo <= cfg.step_tolerance) {
            return {next, f(next), it};
        }
        x = next;
    }
    throw NonConvergenceError("safeguarded_newton: iteration cap reached", x);
}

double grid_search_root(const ScalarFn& f, std::span<const double> grid) {
    if (grid.empty()) throw ArgumentError("grid_search_root: empty grid");
    double best_x = grid.front();
    double best = std::numeric_limits<double>::infinity();
    for (double g : grid) {
        const double v = std::abs(f(g));
        if (v < best) {
            best = v;
            best_x = g;
        }
    }
    return best_x;
}

std::vector<double> open_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw ArgumentError("open_grid: empty range");
    std::vector<double> out;
    // integer counter avoids accumulated drift, so 0.330 is exactly 330 * 0.001
    for (long k = 1;; ++k) {
        const double v = lo + static_cast<double>(k) * step;
        if (v >= hi - 0.5 * step) break;
        out.push_back(v);
    }
    return out;
}

RootResult brent_root(const ScalarFn& f, double lo, double hi, const SolverConfig& cfg) {
    cfg.validate();
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return {a, 0.0, 0};
    if (fb == 0.0) return {b, 0.0, 0};
    if (std::signbit(fa) == std::signbit(fb)) {
        throw BracketError("brent_root: f(lo) and f(hi) have the same sign");
    }
    double c = a, fc = fa;
    double d = b - a, e = d;
    constexpr double eps = std::numeric_limits<double>::epsilon();

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        if (std::signbit(fb) == std::signbit(fc)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * eps * std::abs(b) + 0.5 * cfg.step_tolerance;
        const double half = 0.5 * (c - b);
        if (std::abs(fb) <= cfg.abs_tolerance || std::abs(half) <= tol) {
            return {b, fb, it};
        }
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            // inverse quadratic interpolation, or secant when only two points differ
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * half * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q; else p = -p;
            if (2.0 * p < std::min(3.0 * half * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (half > 0 ? tol : -tol);
        fb = f(b);
    }
    throw NonConvergenceError("brent_root: iteration cap reached", b);
}

} // namespace covw
