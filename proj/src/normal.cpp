#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace covw {

namespace {

std::atomic<bool> g_cdf_fault{false};

constexpr double kInvSqrt2 = 0.70710678118654752440;

} // namespace

namespace testing {
void set_cdf_fault(bool enabled) { g_cdf_fault.store(enabled, std::memory_order_relaxed); }
bool cdf_fault_enabled() { return g_cdf_fault.load(std::memory_order_relaxed); }
} // namespace testing

double norm_cdf(double x) {
    if (g_cdf_fault.load(std::memory_order_relaxed)) {
        // shifted location: small enough to look plausible, large enough that
        // uniformity and closed-form checks notice
        x += 0.05;
    }
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double norm_sf(double x) { return norm_cdf(-x); }

double norm_pdf(double x) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double log_norm_cdf(double x) {
    if (x > -30.0) return std::log(norm_cdf(x));
    // Mills ratio asymptotic series; erfc underflows below about -38
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log(series);
}

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("norm_quantile: p must lie strictly inside (0, 1)");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double norm_sf_inverse(double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("norm_sf_inverse: q must lie strictly inside (0, 1)");
    }
    return boost::math::quantile(
        boost::math::complement(boost::math::normal_distribution<double>{}, q));
}

} // namespace covw
