#include <catch_amalgamated.hpp>

#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace covw;
using Catch::Approx;

namespace {

// Phi(x) = 1/2 + phi(x) * sum x^(2n+1) / (2n+1)!!, summed in long double.
long double series_cdf(long double x) {
    long double term = x, sum = x;
    for (int n = 1; n < 400; ++n) {
        term *= x * x / (2.0L * n + 1.0L);
        sum += term;
        if (std::fabs(term) < 1e-30L * std::fabs(sum)) break;
    }
    const long double phi = std::exp(-0.5L * x * x) / std::sqrt(2.0L * std::numbers::pi_v<long double>);
    return 0.5L + phi * sum;
}

} // namespace

TEST_CASE("norm_cdf reference points and limits") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_cdf(INFINITY) == 1.0);
    CHECK(norm_cdf(-INFINITY) == 0.0);
    CHECK(norm_cdf(1.644854) == Approx(0.95).margin(1e-6));
    CHECK(norm_sf(1.0) == Approx(0.158655253931457).margin(1e-14));
}

TEST_CASE("norm_cdf agrees with a long-double series oracle") {
    for (double x = -5.0; x <= 5.0; x += 0.0625) {
        const long double ref = series_cdf(x);
        const double got = norm_cdf(x);
        // the series cancels for negative x, so compare relatively only where
        // the oracle itself keeps full precision
        if (x >= -2.0) CHECK(std::fabs(got - static_cast<double>(ref)) <= 2e-15 * static_cast<double>(ref));
        else CHECK(std::fabs(got - static_cast<double>(ref)) <= 1e-16);
    }
}

TEST_CASE("norm_cdf symmetry and monotonicity on random points") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-9.0, 9.0);
    for (int i = 0; i < 10000; ++i) {
        const double a = u(rng), b = u(rng);
        CHECK(std::abs(norm_cdf(a) + norm_cdf(-a) - 1.0) <= 1e-14);
        if (a < b) CHECK(norm_cdf(a) <= norm_cdf(b));
        else CHECK(norm_cdf(b) <= norm_cdf(a));
    }
}

TEST_CASE("norm_quantile accuracy, round trip and domain") {
    CHECK(norm_quantile(0.5) == Approx(0.0).margin(1e-15));
    CHECK(norm_quantile(0.975) == Approx(1.959964).margin(1e-5));
    CHECK_THROWS_AS(norm_quantile(1.0), DomainError);
    CHECK_THROWS_AS(norm_quantile(0.0), DomainError);
    CHECK_THROWS_AS(norm_quantile(-0.1), DomainError);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const double p = u(rng);
        if (p <= 0.0) continue;
        CHECK(std::abs(norm_cdf(norm_quantile(p)) - p) <= 1e-12);
    }
    for (double x = -6.0; x <= 6.0; x += 0.01) {
        CHECK(std::abs(norm_quantile(norm_cdf(x)) - x) <= 1e-8);
    }
    CHECK(norm_sf_inverse(0.05) == Approx(1.6448536269514722).margin(1e-12));
    CHECK(norm_sf(norm_sf_inverse(1e-12)) == Approx(1e-12).epsilon(1e-10));
}

TEST_CASE("log_norm_cdf stays finite deep in the lower tail") {
    CHECK(log_norm_cdf(-2.0) == Approx(std::log(norm_cdf(-2.0))).epsilon(1e-14));
    CHECK(log_norm_cdf(-29.9) == Approx(std::log(norm_cdf(-29.9))).epsilon(1e-12));
    const double deep = log_norm_cdf(-60.0);
    CHECK(std::isfinite(deep));
    CHECK(deep == Approx(-1805.013562).epsilon(1e-8));
}

TEST_CASE("newton_raphson examples") {
    const auto r = newton_raphson([](double x) { return x * x - 4.0; }, [](double x) { return 2.0 * x; }, 3.0);
    CHECK(r.x == Approx(2.0).margin(1e-9));

    const auto lin = newton_raphson([](double x) { return x - 1.0; }, [](double) { return 1.0; }, 0.0);
    CHECK(lin.x == 1.0);
    CHECK(lin.iterations == 1);

    const auto z = newton_raphson([](double x) { return norm_sf(x) - 0.05; },
                                  [](double x) { return -norm_pdf(x); }, 1.0);
    CHECK(z.x == Approx(1.644854).margin(1e-6));
}

TEST_CASE("newton_raphson failure modes") {
    CHECK_THROWS_AS(newton_raphson([](double x) { return x * x + 1.0; },
                                   [](double x) { return 2.0 * x; }, 0.0),
                    SingularDerivativeError);
    // x^2 + 1 has no real root; Newton wanders until the cap
    CHECK_THROWS_AS(newton_raphson([](double x) { return x * x + 1.0; },
                                   [](double x) { return 2.0 * x; }, 0.3),
                    NonConvergenceError);
    SolverConfig bad;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(newton_raphson([](double x) { return x; }, [](double) { return 1.0; }, 1.0, bad),
                    ArgumentError);
}

TEST_CASE("safeguarded_newton stays inside its bracket") {
    // plain Newton on atan diverges from x0 = 3
    CHECK_THROWS(newton_raphson([](double x) { return std::atan(x); },
                                [](double x) { return 1.0 / (1.0 + x * x); }, 3.0));
    const auto r = safeguarded_newton([](double x) { return std::atan(x); },
                                      [](double x) { return 1.0 / (1.0 + x * x); }, -10.0, 10.0, 3.0);
    CHECK(r.x == Approx(0.0).margin(1e-10));
    CHECK_THROWS_AS(safeguarded_newton([](double x) { return x * x + 1; }, [](double x) { return 2 * x; },
                                       -1.0, 1.0, 0.5),
                    BracketError);
}

TEST_CASE("grid_search_root examples") {
    std::vector<double> grid;
    for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);
    CHECK(grid_search_root([](double x) { return x - 0.5; }, grid) == Approx(0.5).margin(1e-15));

    const auto fine = open_grid(0.0, 1.0, 0.001);
    CHECK(fine.size() == 999);
    CHECK(grid_search_root([](double x) { return (x - 0.33) * (x - 0.33); }, fine) ==
          Approx(0.330).margin(1e-12));
    CHECK(grid_search_root([](double) { return 3.0; }, fine) == fine.front());
    CHECK_THROWS_AS(grid_search_root([](double x) { return x; }, std::vector<double>{}), ArgumentError);
}

TEST_CASE("brent_root examples") {
    CHECK(brent_root([](double x) { return x * x * x - x; }, 0.5, 2.0).x == Approx(1.0).margin(1e-9));
    CHECK(brent_root([](double x) { return x; }, -1.0, 1.0).x == Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), BracketError);
}

TEST_CASE("newton and brent agree on smooth monotone functions") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double c = u(rng);
        auto f = [c](double x) { return std::tanh(x - c) + 0.1 * (x - c); };
        auto fp = [c](double x) {
            const double t = std::tanh(x - c);
            return 1.0 - t * t + 0.1;
        };
        const double nr = newton_raphson(f, fp, c + 0.5).x;
        const double br = brent_root(f, -10.0, 10.0).x;
        CHECK(std::abs(nr - br) <= 1e-6);
    }
}

namespace {

// Dense oracle: g = (I + penalty Q R^{-1} Q')^{-1} y.
Eigen::VectorXd dense_smoother(const std::vector<double>& x, const std::vector<double>& y, double penalty,
                               double* trace) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n - 2), R = Eigen::MatrixXd::Zero(n - 2, n - 2);
    for (int k = 0; k < n - 2; ++k) {
        const double h0 = x[k + 1] - x[k], h1 = x[k + 2] - x[k + 1];
        Q(k, k) = 1 / h0;
        Q(k + 1, k) = -1 / h0 - 1 / h1;
        Q(k + 2, k) = 1 / h1;
        R(k, k) = (h0 + h1) / 3;
        if (k + 1 < n - 2) R(k, k + 1) = R(k + 1, k) = h1 / 6;
    }
    const Eigen::MatrixXd K = Q * R.inverse() * Q.transpose();
    const Eigen::MatrixXd S = (Eigen::MatrixXd::Identity(n, n) + penalty * K).inverse();
    if (trace) *trace = S.trace();
    return S * Eigen::Map<const Eigen::VectorXd>(y.data(), n);
}

double integrated_curvature(const SplineFit& s) {
    // exact for piecewise-linear second derivative: Simpson per segment
    double total = 0.0;
    const auto k = s.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        const double a = s.second_derivative(k[i]);
        const double b = s.second_derivative(k[i + 1] - 1e-12);
        const double m = s.second_derivative(0.5 * (k[i] + k[i + 1]));
        total += (k[i + 1] - k[i]) / 6.0 * (a * a + 4 * m * m + b * b);
    }
    return total;
}

} // namespace

TEST_CASE("smoothing spline reproduces linear data for any df") {
    std::vector<double> x{0.0, 0.7, 1.1, 2.5, 3.0, 4.2, 5.0};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 - 2.0 * v);
    for (double df : {1.5, 2.0, 2.5, 4.0, 7.0}) {
        const SplineFit s = fit_smoothing_spline(x, y, df);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(s.fitted()[i] - y[i]) <= 1e-8);
        CHECK(s(10.0) == Approx(3.0 - 20.0).margin(1e-7));
    }
}

TEST_CASE("smoothing spline interpolates when df equals n") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{0.3, -1.0, 2.0, 0.5, 0.9};
    const SplineFit s = fit_smoothing_spline(x, y, 5.0);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(s(x[i]) - y[i]) <= 1e-8);
}

TEST_CASE("smoothing spline matches a dense smoother-matrix oracle") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> x, y;
    double pos = 0.0;
    for (int i = 0; i < 30; ++i) {
        pos += 0.2 + 0.1 * (i % 3);
        x.push_back(pos);
        y.push_back(std::sin(pos) + noise(rng));
    }
    for (double df : {3.0, 5.5, 12.0, 25.0}) {
        const SplineFit s = fit_smoothing_spline(x, y, df);
        double trace = 0.0;
        const Eigen::VectorXd g = dense_smoother(x, y, s.penalty(), &trace);
        CHECK(std::abs(trace - df) <= 1e-3);
        CHECK(std::abs(smoother_trace(x, s.penalty()) - trace) <= 1e-8);
        for (int i = 0; i < 30; ++i) CHECK(std::abs(s.fitted()[i] - g(i)) <= 1e-8);
    }
}

TEST_CASE("penalized spline has smaller curvature than the interpolant") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i * 0.25);
        y.push_back(std::sin(x.back()) + noise(rng));
    }
    const SplineFit smooth = fit_smoothing_spline(x, y, 4.0);
    const SplineFit interp = fit_smoothing_spline(x, y, 40.0);
    CHECK(integrated_curvature(smooth) < integrated_curvature(interp));
}

TEST_CASE("spline is C2 at interior knots") {
    std::vector<double> x{0, 1, 2.5, 3, 4, 6, 7}, y{1, 3, 2, 5, 4, 4.5, 2};
    const SplineFit s = fit_smoothing_spline(x, y, 4.5);
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        const double e = 1e-7;
        CHECK(std::abs(s(x[i] + e) - s(x[i] - e)) <= 1e-6);
        CHECK(std::abs(s.derivative(x[i] + e) - s.derivative(x[i] - e)) <= 1e-5);
        CHECK(std::abs(s.second_derivative(x[i] + e) - s.second_derivative(x[i] - e)) <= 1e-5);
    }
    // linear beyond the boundary knots
    const double d1 = s(9.0) - s(8.0), d2 = s(10.0) - s(9.0);
    CHECK(d1 == Approx(d2).margin(1e-10));
}

TEST_CASE("spline argument errors") {
    std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(fit_smoothing_spline(three, three, 2.5), ArgumentError);
    std::vector<double> x{1, 2, 2, 3}, y{1, 2, 3, 4};
    CHECK_THROWS_AS(fit_smoothing_spline(x, y, 3.0), ArgumentError);
    std::vector<double> xs{1, 2, 3, 4};
    CHECK_THROWS_AS(fit_smoothing_spline(xs, y, 5.0), ArgumentError);
    CHECK_THROWS_AS(fit_smoothing_spline(xs, y, 1.0), ArgumentError);
}

TEST_CASE("box_cox examples") {
    std::mt19937_64 rng(21);
    std::lognormal_distribution<double> ln(0.5, 0.8);
    std::vector<double> y(10000);
    for (double& v : y) v = ln(rng);
    const BoxCoxResult r = box_cox(y);
    CHECK(std::abs(r.lambda) <= 0.2);
    CHECK(r.transformed[0] == Approx(box_cox_transform(y[0], r.lambda)));

    std::vector<double> constant(50, 3.0);
    CHECK_THROWS_AS(box_cox(constant), DegenerateInputError);
    std::vector<double> bad{1.0, 0.0, 2.0};
    CHECK_THROWS_AS(box_cox(bad), DomainError);

    for (double v : {0.1, 1.0, 2.5, 40.0}) CHECK(box_cox_transform(v, 1.0) == Approx(v - 1.0).margin(1e-12));
    CHECK(box_cox_transform(5.0, 0.0) == Approx(std::log(5.0)));
}

TEST_CASE("box_cox with a regressor recovers a square-root relationship") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::uniform_real_distribution<double> u(1.0, 5.0);
    std::vector<double> x(5000), y(5000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = u(rng);
        const double root = 1.0 + x[i] + noise(rng);
        y[i] = root * root;
    }
    const BoxCoxResult r = box_cox(y, x);
    CHECK(std::abs(r.lambda - 0.5) <= 0.1);
}
