#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace covw {

namespace {

void check_inputs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("smoothing spline: x and y differ in length");
    if (x.size() < 4) throw ArgumentError("smoothing spline: at least four points required");
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) throw ArgumentError("smoothing spline: x must be strictly increasing");
    }
}

// Banded pieces of the Reinsch formulation. N = n - 2 interior knots.
// Q is n x N with three nonzeros per column, R is N x N tridiagonal.
struct Reinsch {
    std::size_t n = 0;
    std::vector<double> h;             // knot spacings, n - 1
    std::vector<double> r0, r1;        // R diagonal and first off-diagonal
    std::vector<double> b0, b1, b2;    // Q'Q bands

    explicit Reinsch(std::span<const double> x) : n(x.size()) {
        const std::size_t N = n - 2;
        h.resize(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];
        r0.assign(N, 0.0);
        r1.assign(N, 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            r0[k] = (h[k] + h[k + 1]) / 3.0;
            if (k + 1 < N) r1[k] = h[k + 1] / 6.0;
        }
        b0.assign(N, 0.0);
        b1.assign(N, 0.0);
        b2.assign(N, 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            const auto col = column(k);
            b0[k] = col[0] * col[0] + col[1] * col[1] + col[2] * col[2];
            if (k + 1 < N) {
                const auto nxt = column(k + 1);
                // column k covers rows k..k+2, column k+1 covers rows k+1..k+3
                b1[k] = col[1] * nxt[0] + col[2] * nxt[1];
            }
            if (k + 2 < N) {
                const auto nn = column(k + 2);
                b2[k] = col[2] * nn[0];
            }
        }
    }

    // nonzero entries of column k of Q, rows k, k+1, k+2
    std::array<double, 3> column(std::size_t k) const {
        return {1.0 / h[k], -1.0 / h[k] - 1.0 / h[k + 1], 1.0 / h[k + 1]};
    }

    std::vector<double> qt_times(std::span<const double> y) const {
        std::vector<double> out(n - 2);
        for (std::size_t k = 0; k < n - 2; ++k) {
            const auto c = column(k);
            out[k] = c[0] * y[k] + c[1] * y[k + 1] + c[2] * y[k + 2];
        }
        return out;
    }

    std::vector<double> q_times(std::span<const double> g) const {
        std::vector<double> out(n, 0.0);
        for (std::size_t k = 0; k < n - 2; ++k) {
            const auto c = column(k);
            out[k] += c[0] * g[k];
            out[k + 1] += c[1] * g[k];
            out[k + 2] += c[2] * g[k];
        }
        return out;
    }
};

// LDL' factorization of the symmetric pentadiagonal R + penalty * Q'Q.
struct BandLdl {
    std::vector<double> d, l1, l2;

    BandLdl(const Reinsch& rs, double penalty) {
        const std::size_t N = rs.n - 2;
        d.assign(N, 0.0);
        l1.assign(N, 0.0);
        l2.assign(N, 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            const double a0 = rs.r0[k] + penalty * rs.b0[k];
            const double a1 = rs.r1[k] + penalty * rs.b1[k];
            const double a2 = penalty * rs.b2[k];
            double dk = a0;
            if (k >= 1) dk -= l1[k - 1] * l1[k - 1] * d[k - 1];
            if (k >= 2) dk -= l2[k - 2] * l2[k - 2] * d[k - 2];
            d[k] = dk;
            double num = a1;
            if (k >= 1) num -= l2[k - 1] * l1[k - 1] * d[k - 1];
            l1[k] = (k + 1 < N) ? num / dk : 0.0;
            l2[k] = (k + 2 < N) ? a2 / dk : 0.0;
        }
    }

    std::vector<double> solve(std::vector<double> b) const {
        const std::size_t N = d.size();
        for (std::size_t k = 0; k < N; ++k) {
            if (k >= 1) b[k] -= l1[k - 1] * b[k - 1];
            if (k >= 2) b[k] -= l2[k - 2] * b[k - 2];
        }
        for (std::size_t k = 0; k < N; ++k) b[k] /= d[k];
        for (std::size_t k = N; k-- > 0;) {
            if (k + 1 < N) b[k] -= l1[k] * b[k + 1];
            if (k + 2 < N) b[k] -= l2[k] * b[k + 2];
        }
        return b;
    }

    // trace(A^{-1} B) for pentadiagonal symmetric B, using only the band of
    // A^{-1} (Hutchinson and de Hoog recurrence).
    double trace_inverse_times(std::span<const double> b0, std::span<const double> b1,
                               std::span<const double> b2) const {
        const std::size_t N = d.size();
        std::vector<double> s0(N + 2, 0.0), s1(N + 2, 0.0), s2(N + 2, 0.0);
        for (std::size_t k = N; k-- > 0;) {
            const double L1 = l1[k], L2 = l2[k];
            s2[k] = -L1 * s1[k + 1] - L2 * s0[k + 2];
            s1[k] = -L1 * s0[k + 1] - L2 * s1[k + 1];
            s0[k] = 1.0 / d[k] - L1 * s1[k] - L2 * s2[k];
        }
        double tr = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            tr += s0[k] * b0[k] + 2.0 * s1[k] * b1[k] + 2.0 * s2[k] * b2[k];
        }
        return tr;
    }
};

SplineFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxy / sxx;
    std::vector<double> values(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) values[i] = my + slope * (x[i] - mx);
    return SplineFit({x.begin(), x.end()}, std::move(values), std::vector<double>(x.size(), 0.0),
                     std::numeric_limits<double>::infinity(), 2.0);
}

} // namespace

SplineFit::SplineFit(std::vector<double> knots, std::vector<double> values,
                     std::vector<double> second_derivs, double penalty, double df)
    : knots_(std::move(knots)), values_(std::move(values)), gamma_(std::move(second_derivs)),
      penalty_(penalty), df_(df) {}

std::size_t SplineFit::segment(double x) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    std::size_t i = (it == knots_.begin()) ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(i, knots_.size() - 2);
}

std::array<double, 4> SplineFit::segment_coefficients(std::size_t i) const {
    const double h = knots_[i + 1] - knots_[i];
    const double g0 = gamma_[i], g1 = gamma_[i + 1];
    return {values_[i], (values_[i + 1] - values_[i]) / h - h * (2.0 * g0 + g1) / 6.0, 0.5 * g0,
            (g1 - g0) / (6.0 * h)};
}

double SplineFit::operator()(double x) const {
    if (x < knots_.front()) {
        return values_.front() + derivative(knots_.front()) * (x - knots_.front());
    }
    if (x > knots_.back()) {
        return values_.back() + derivative(knots_.back()) * (x - knots_.back());
    }
    const std::size_t i = segment(x);
    const auto c = segment_coefficients(i);
    const double t = x - knots_[i];
    return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
}

double SplineFit::derivative(double x) const {
    const double xc = std::clamp(x, knots_.front(), knots_.back());
    const std::size_t i = segment(xc);
    const auto c = segment_coefficients(i);
    const double t = xc - knots_[i];
    return c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]);
}

double SplineFit::second_derivative(double x) const {
    if (x < knots_.front() || x > knots_.back()) return 0.0;
    const std::size_t i = segment(x);
    const auto c = segment_coefficients(i);
    return 2.0 * c[2] + 6.0 * c[3] * (x - knots_[i]);
}

double smoother_trace(std::span<const double> x, double penalty) {
    if (x.size() < 4) throw ArgumentError("smoother_trace: at least four points required");
    if (penalty <= 0.0) return static_cast<double>(x.size());
    const Reinsch rs(x);
    const BandLdl ldl(rs, penalty);
    return static_cast<double>(x.size()) - penalty * ldl.trace_inverse_times(rs.b0, rs.b1, rs.b2);
}

SplineFit fit_smoothing_spline_penalty(std::span<const double> x, std::span<const double> y,
                                       double penalty) {
    check_inputs(x, y);
    if (std::isinf(penalty)) return linear_fit(x, y);
    if (penalty < 0.0) throw ArgumentError("smoothing spline: negative penalty");
    const Reinsch rs(x);
    const BandLdl ldl(rs, penalty);
    std::vector<double> interior = ldl.solve(rs.qt_times(y));
    std::vector<double> values(y.begin(), y.end());
    if (penalty > 0.0) {
        const auto correction = rs.q_times(interior);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= penalty * correction[i];
    }
    std::vector<double> gamma(x.size(), 0.0);
    std::copy(interior.begin(), interior.end(), gamma.begin() + 1);
    const double df = penalty > 0.0
                          ? static_cast<double>(x.size()) -
                                penalty * ldl.trace_inverse_times(rs.b0, rs.b1, rs.b2)
                          : static_cast<double>(x.size());
    return SplineFit({x.begin(), x.end()}, std::move(values), std::move(gamma), penalty, df);
}

SplineFit fit_smoothing_spline(std::span<const double> x, std::span<const double> y,
                               double effective_df) {
    check_inputs(x, y);
    const double n = static_cast<double>(x.size());
    if (!(effective_df > 1.0) || effective_df > n + 1e-9) {
        throw ArgumentError("smoothing spline: effective df must lie in (1, n]");
    }
    if (effective_df >= n - 1e-9) return fit_smoothing_spline_penalty(x, y, 0.0);
    // trace(S) never drops below 2: the linear part is unpenalized
    if (effective_df <= 2.0 + 1e-9) return linear_fit(x, y);

    const Reinsch rs(x);
    auto df_at = [&](double log_pen) {
        const double pen = std::exp(log_pen);
        const BandLdl ldl(rs, pen);
        return n - pen * ldl.trace_inverse_times(rs.b0, rs.b1, rs.b2);
    };
    const double span_x = x.back() - x.front();
    const double mean_h = span_x / (n - 1.0);
    double lo = std::log(mean_h * mean_h * mean_h) - 5.0;
    double hi = lo + 10.0;
    // df decreases in the penalty; widen until the target is bracketed
    for (int i = 0; i < 200 && df_at(lo) < effective_df; ++i) lo -= 5.0;
    for (int i = 0; i < 200 && df_at(hi) > effective_df; ++i) hi += 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double v = df_at(mid);
        if (std::abs(v - effective_df) <= 1e-7) {
            lo = hi = mid;
            break;
        }
        (v > effective_df ? lo : hi) = mid;
    }
    return fit_smoothing_spline_penalty(x, y, std::exp(0.5 * (lo + hi)));
}

} // namespace covw
