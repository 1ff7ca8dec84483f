#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace covw {

namespace {

// residual sum of squares of z on [1, x] (x empty: on the intercept only)
double residual_ss(std::span<const double> z, std::span<const double> x) {
    const std::size_t n = z.size();
    double mz = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mz += z[i];
        if (!x.empty()) mx += x[i];
    }
    mz /= static_cast<double>(n);
    mx /= static_cast<double>(n);
    double szz = 0.0, sxz = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dz = z[i] - mz;
        szz += dz * dz;
        if (!x.empty()) {
            const double dx = x[i] - mx;
            sxz += dx * dz;
            sxx += dx * dx;
        }
    }
    if (!x.empty() && sxx > 0.0) szz -= sxz * sxz / sxx;
    return std::max(szz, 0.0);
}

BoxCoxResult box_cox_impl(std::span<const double> y, std::span<const double> x) {
    if (y.empty()) throw ArgumentError("box_cox: empty input");
    if (!x.empty() && x.size() != y.size()) throw ArgumentError("box_cox: regressor length mismatch");
    double sum_log = 0.0;
    std::vector<double> logs(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) throw DomainError("box_cox: every value must be positive");
        logs[i] = std::log(y[i]);
        sum_log += logs[i];
    }
    const double n = static_cast<double>(y.size());
    // transformed variance is zero for every lambda exactly when y is constant
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi) {
        throw DegenerateInputError("box_cox: constant input has zero variance");
    }

    std::vector<double> z(y.size());
    double best_ll = -std::numeric_limits<double>::infinity();
    double best_lambda = 1.0;
    for (int j = 0; j <= 400; ++j) {
        const double lambda = (j - 200) / 100.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            z[i] = lambda == 0.0 ? logs[i] : std::expm1(lambda * logs[i]) / lambda;
        }
        const double rss = residual_ss(z, x);
        if (!(rss > 0.0) || !std::isfinite(rss)) continue;
        const double ll = -0.5 * n * std::log(rss / n) + (lambda - 1.0) * sum_log;
        if (ll > best_ll) {
            best_ll = ll;
            best_lambda = lambda;
        }
    }
    if (!std::isfinite(best_ll)) throw DegenerateInputError("box_cox: likelihood undefined on the grid");

    BoxCoxResult out;
    out.lambda = best_lambda;
    out.transformed.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out.transformed[i] = box_cox_transform(y[i], best_lambda);
    return out;
}

} // namespace

double box_cox_transform(double y, double lambda) {
    if (!(y > 0.0)) throw DomainError("box_cox_transform: value must be positive");
    if (lambda == 0.0) return std::log(y);
    return std::expm1(lambda * std::log(y)) / lambda;
}

BoxCoxResult box_cox(std::span<const double> y) { return box_cox_impl(y, {}); }

BoxCoxResult box_cox(std::span<const double> y, std::span<const double> regressor) {
    if (regressor.empty()) throw ArgumentError("box_cox: empty regressor");
    return box_cox_impl(y, regressor);
}

} // namespace covw
