#include <catch_amalgamated.hpp>

#include "covw/errors.hpp"
#include "covw/gcw.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace covw;

namespace {

GcwTest make_test(double eta, double sigma, double nu, double x, double f = 1.0) {
    GcwTest t;
    t.prior_mean = eta;
    t.prior_sd = sigma;
    t.covariate_noise_sd = nu;
    t.covariate = x;
    t.density_ratio = f;
    return t;
}

std::vector<GcwTest> random_tests(std::mt19937_64& rng, int m) {
    std::uniform_real_distribution<double> eta(0.0, 3.0), sd(0.3, 2.0), x(-1.0, 4.0);
    std::vector<GcwTest> out;
    for (int i = 0; i < m; ++i) out.push_back(make_test(eta(rng), sd(rng), sd(rng), x(rng)));
    return out;
}

double objective(const GcwReparam& r, double f, double lambda, double alpha, int m, double u) {
    const double s = std::sqrt(1.0 + r.excess_variance);
    return norm_sf((u - r.mean) / s) / f - lambda * m / alpha * norm_sf(u);
}

} // namespace

TEST_CASE("single test and identical tests get unit weights") {
    const std::vector<GcwTest> one{make_test(2.0, 1.0, 1.0, 1.5)};
    CHECK(gcw_weights(one, 0.05).weights[0] == Catch::Approx(1.0).margin(1e-12));
    const std::vector<GcwTest> same(50, make_test(2.0, 1.0, 0.5, 2.5));
    for (double w : gcw_weights(same, 0.05).weights) CHECK(std::abs(w - 1.0) <= 1e-9);
}

TEST_CASE("reparameterization boundaries") {
    auto r = gcw_reparameterize(make_test(1.0, 0.7, 0.0, 2.3));
    CHECK(r.mean == 2.3);
    CHECK(r.excess_variance == 0.0);
    r = gcw_reparameterize(make_test(1.0, 0.0, 0.9, 2.3));
    CHECK(r.mean == 1.0);
    CHECK(r.excess_variance == 0.0);
    r = gcw_reparameterize(make_test(1.7, 0.8, 1.3, 1.7));
    CHECK(r.mean == Catch::Approx(1.7).epsilon(1e-15));
    const double s2 = 0.64, n2 = 1.69;
    CHECK(r.excess_variance == Catch::Approx(s2 * n2 / (s2 + n2)).epsilon(1e-15));
}

TEST_CASE("feasibility bound is where the discriminant vanishes") {
    std::mt19937_64 rng(1);
    const int m = 1000;
    const double alpha = 0.05;
    for (const auto& t : random_tests(rng, 2000)) {
        const double l = lambda_lower_bound(t, alpha, m);
        const auto r = gcw_reparameterize(t);
        const double L = std::log(l * std::sqrt(1.0 + r.excess_variance) * m * t.density_ratio / alpha);
        const double disc = r.mean * r.mean + 2.0 * r.excess_variance * L;
        CHECK(std::abs(disc) <= 1e-10 * std::max(1.0, r.mean * r.mean));
        if (l > 1e-300) CHECK_FALSE(gcw_threshold(t, l * (1.0 - 1e-6), alpha, m).has_value());
    }
}

TEST_CASE("every test is feasible at lambda = 1") {
    std::mt19937_64 rng(2);
    for (const auto& t : random_tests(rng, 10000)) CHECK(gcw_threshold(t, 1.0, 0.05, 100).has_value());
}

TEST_CASE("the larger root beats the smaller one on the objective") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> loglam(-3.0, 2.0);
    const int m = 500;
    const double alpha = 0.05;
    int checked = 0;
    for (const auto& t : random_tests(rng, 10000)) {
        const double lambda = std::exp(loglam(rng));
        const auto u2 = gcw_threshold(t, lambda, alpha, m);
        if (!u2) continue;
        const auto r = gcw_reparameterize(t);
        const double s = std::sqrt(1.0 + r.excess_variance);
        const double L = std::log(lambda * s * m / alpha);
        const double disc = r.mean * r.mean + 2.0 * r.excess_variance * L;
        const double u1 = (-r.mean - s * std::sqrt(disc)) / r.excess_variance;
        CHECK(objective(r, 1.0, lambda, alpha, m, *u2) >= objective(r, 1.0, lambda, alpha, m, u1) - 1e-15);
        ++checked;
    }
    CHECK(checked > 5000);
}

TEST_CASE("point prior limit matches the closed form") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> eta(0.5, 3.5), f(0.5, 2.0);
    const int m = 200;
    const double alpha = 0.05;
    std::vector<GcwTest> tests;
    for (int i = 0; i < m; ++i) tests.push_back(make_test(eta(rng), 1e-4, 1.0, 0.0, f(rng)));
    const auto w = gcw_weights(tests, alpha);

    // closed form sf(eta/2 + log(lambda m f / alpha) / eta), lambda by bisection
    auto closed = [&](double log_lambda) {
        std::vector<double> out;
        for (const auto& t : tests) {
            const double e = t.prior_mean;
            out.push_back(m / alpha * norm_sf(0.5 * e + (log_lambda + std::log(m * t.density_ratio / alpha)) / e));
        }
        return out;
    };
    double lo = -50.0, hi = 50.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto v = closed(mid);
        (std::accumulate(v.begin(), v.end(), 0.0) > m ? lo : hi) = mid;
    }
    const auto ref = closed(0.5 * (lo + hi));
    for (int i = 0; i < m; ++i) {
        if (ref[i] < 1e-8) continue;
        CHECK(std::abs(w.weights[i] / ref[i] - 1.0) <= 1e-3);
    }
}

TEST_CASE("GCW equals Bayes weights after reparameterization") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> um(2, 300);
    std::uniform_real_distribution<double> ua(0.01, 0.2);
    for (int rep = 0; rep < 100; ++rep) {
        const auto tests = random_tests(rng, um(rng));
        const double alpha = ua(rng);
        std::vector<double> means, spreads;
        for (const auto& t : tests) {
            const auto r = gcw_reparameterize(t);
            means.push_back(r.mean);
            spreads.push_back(std::sqrt(1.0 + r.excess_variance));
        }
        const auto g = gcw_weights(tests, alpha);
        const auto b = bw_weights(means, spreads, alpha);
        for (std::size_t i = 0; i < tests.size(); ++i) {
            CAPTURE(rep, i, g.solver_path);
            CHECK(std::abs(g.weights[i] - b.weights[i]) <= 1e-6);
        }
    }
}

TEST_CASE("Bayes weight basics") {
    const std::vector<double> means(10, 2.0), spreads(10, 1.5);
    for (double w : bw_weights(means, spreads, 0.05).weights) CHECK(std::abs(w - 1.0) <= 1e-9);
    const std::vector<double> two_means{1.0, 3.0}, two_spreads{std::sqrt(2.0), std::sqrt(2.0)};
    // brute-force maxima of the two-test power over w1 in (0, 2)
    const auto strict = bw_weights(two_means, two_spreads, 0.01);
    CHECK(strict.weights[1] > strict.weights[0]);
    CHECK(std::abs(strict.weights[0] - 0.638796) <= 1e-5);
    // at alpha = .05 the weaker test already gains more from extra weight
    const auto loose = bw_weights(two_means, two_spreads, 0.05);
    CHECK(std::abs(loose.weights[0] - 1.023578) <= 1e-5);
    CHECK_THROWS_AS(bw_weights(two_means, std::vector<double>{1.0, 2.0}, 0.05), ArgumentError);
}

TEST_CASE("constraint and nonnegativity on random GCW inputs") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> um(1, 500);
    for (int rep = 0; rep < 200; ++rep) {
        const auto w = gcw_weights(random_tests(rng, um(rng)), 0.05);
        CHECK(weights_are_normalized(w.weights));
    }
}

TEST_CASE("a common density ratio factor is absorbed by the multiplier") {
    std::mt19937_64 rng(7);
    auto tests = random_tests(rng, 150);
    const auto base = gcw_weights(tests, 0.05);
    for (double c : {1e-3, 0.2, 7.0}) {
        auto scaled = tests;
        for (auto& t : scaled) t.density_ratio *= c;
        const auto w = gcw_weights(scaled, 0.05);
        CAPTURE(c, w.solver_path);
        for (std::size_t i = 0; i < tests.size(); ++i) CHECK(std::abs(w.weights[i] - base.weights[i]) <= 1e-6);
    }
}

TEST_CASE("small density ratios push the multiplier above one") {
    std::vector<GcwTest> tests;
    for (int i = 0; i < 40; ++i) tests.push_back(make_test(1.0 + 0.05 * i, 0.8, 1.0, 0.5 + 0.1 * i, 1e-4));
    const auto w = gcw_weights(tests, 0.05);
    CHECK(w.multiplier > 1.0);
    CHECK(w.solver_path == "newton");
    CHECK(weights_are_normalized(w.weights));
}

TEST_CASE("all tests infeasible is degenerate") {
    const std::vector<GcwTest> tests(5, make_test(-1.0, 0.0, 1.0, 0.0));
    CHECK_THROWS_AS(gcw_weights(tests, 0.05), DegenerateInputError);
}

TEST_CASE("GCW input validation") {
    CHECK_THROWS_AS(gcw_weights(std::vector<GcwTest>{make_test(1.0, 0.0, 0.0, 0.0)}, 0.05), ArgumentError);
    CHECK_THROWS_AS(gcw_weights(std::vector<GcwTest>{make_test(1.0, 1.0, 1.0, 0.0, 0.0)}, 0.05), ArgumentError);
    CHECK_THROWS_AS(gcw_weights(std::vector<GcwTest>{make_test(1.0, 1.0, 1.0, 0.0)}, 1.0), ArgumentError);
    CHECK_THROWS_AS(gcw_weights(std::vector<GcwTest>{}, 0.05), ArgumentError);
}

TEST_CASE("GCW2 weights") {
    Gcw2Inputs in;
    in.mean_test_effect = 2.0;
    SECTION("proportional densities give uniform weights") {
        for (int i = 0; i < 30; ++i) {
            const double x = -2.0 + 0.15 * i;
            in.covariate_density.push_back(3.0 * norm_pdf(x));
            in.conditional_density.push_back(norm_pdf(x));
        }
        for (double w : gcw2_weights(in).weights) CHECK(std::abs(w - 1.0) <= 1e-9);
    }
    SECTION("single test") {
        in.covariate_density = {0.3};
        in.conditional_density = {0.1};
        CHECK(gcw2_weights(in).weights[0] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("weights increase with the covariate when the alternative density sits higher") {
        for (int i = 0; i < 200; ++i) {
            const double x = -3.0 + 0.03 * i;
            in.covariate_density.push_back(norm_pdf(x));
            in.conditional_density.push_back(norm_pdf(x - 1.0));
        }
        const auto w = gcw2_weights(in);
        CHECK(weights_are_normalized(w.weights));
        for (std::size_t i = 1; i < w.size(); ++i) CHECK(w.weights[i] > w.weights[i - 1]);
    }
    SECTION("nonpositive effect falls back to uniform") {
        in.mean_test_effect = -0.5;
        in.covariate_density = {0.3, 0.2};
        in.conditional_density = {0.1, 0.4};
        CHECK(gcw2_weights(in).uniform_fallback);
    }
    SECTION("invalid densities") {
        in.covariate_density = {0.3, 0.0};
        in.conditional_density = {0.1, 0.4};
        CHECK_THROWS_AS(gcw2_weights(in), ArgumentError);
    }
}

TEST_CASE("GCW2 constraint on random inputs") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(1e-4, 1.0), ue(0.2, 4.0);
    for (int rep = 0; rep < 200; ++rep) {
        Gcw2Inputs in;
        in.mean_test_effect = ue(rng);
        const int m = 1 + static_cast<int>(rng() % 400);
        for (int i = 0; i < m; ++i) {
            in.covariate_density.push_back(ud(rng));
            in.conditional_density.push_back(ud(rng));
        }
        CHECK(weights_are_normalized(gcw2_weights(in).weights));
    }
}
