#include <catch_amalgamated.hpp>

#include "covw/crw.hpp"
#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace covw;
using Catch::Approx;

namespace {

CrwInputs inputs(std::vector<double> probs, double effect, double alpha = 0.05, int m1 = -1) {
    CrwInputs in;
    in.m = static_cast<int>(probs.size());
    in.rank_probs = std::move(probs);
    in.mean_test_effect = effect;
    in.alpha = alpha;
    in.m1 = m1 < 0 ? in.m : m1;
    return in;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<double> random_probs(std::mt19937_64& rng, int m) {
    std::gamma_distribution<double> g(0.5, 1.0);
    std::vector<double> p(static_cast<std::size_t>(m));
    for (double& v : p) v = g(rng);
    const double s = sum(p);
    for (double& v : p) v /= s;
    return p;
}

McConfig small_mc(std::int64_t r = 4000) {
    McConfig mc;
    mc.replications = r;
    mc.seed = 5;
    mc.threads = 1;
    return mc;
}

} // namespace

TEST_CASE("single test always gets weight one") {
    for (auto f : {crw_weights_continuous, crw_weights_binary}) {
        const auto w = f(inputs({1.0}, 2.0, 0.05, 1));
        REQUIRE(w.size() == 1);
        CHECK(w.weights[0] == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("uniform rank probabilities give unit weights") {
    const auto w = crw_weights_continuous(inputs(std::vector<double>(100, 0.01), 2.0));
    for (double v : w.weights) CHECK(std::abs(v - 1.0) <= 1e-6);
    const auto b = crw_weights_binary(inputs(std::vector<double>(100, 0.01), 2.0, 0.05, 100));
    for (double v : b.weights) CHECK(std::abs(v - 1.0) <= 1e-6);
}

TEST_CASE("closed-form delta for uniform rank probabilities") {
    const int m = 100;
    const double alpha = 0.05, E = 2.0, P = 1.0 / m;
    const auto sol = solve_delta(inputs(std::vector<double>(m, P), E, alpha), WeightFormula::continuous);
    const double expected = alpha * P * std::exp(E * (norm_sf_inverse(alpha / m) - E / 2.0));
    CHECK(sol.delta == Approx(expected).epsilon(1e-8));
    CHECK(sol.path == "newton");
}

TEST_CASE("weights follow rank probabilities in a 90 percent null world") {
    const int m = 10000;
    const auto pop = TestPopulation::make(m, 9000, EffectPrior::point_mass(2.0));
    const auto probs = rank_prob_normal_approx(pop, 2.0, FocalKind::alternative, small_mc()).probabilities;
    const auto w = crw_weights_continuous(inputs(probs, 2.0));
    CHECK(sum(w.weights) == Approx(m).epsilon(1e-9));
    const double top = *std::max_element(w.weights.begin(), w.weights.begin() + 100);
    CHECK(top == *std::max_element(w.weights.begin(), w.weights.end()));
    CHECK(top > 5.0);
    CHECK(w.weights.back() < 1e-3);
    // monotone coupling: order by probability, weights must not increase
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(w.weights[idx[i]] <= w.weights[idx[i - 1]] + 1e-12);
}

TEST_CASE("constraint holds on random inputs for both formulas") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> um(1, 400);
    std::uniform_real_distribution<double> ue(0.2, 4.0), ua(0.001, 0.2);
    for (int i = 0; i < 200; ++i) {
        const int m = um(rng);
        auto in = inputs(random_probs(rng, m), ue(rng), ua(rng));
        in.m1 = std::uniform_int_distribution<int>(1, m)(rng);
        for (auto f : {crw_weights_continuous, crw_weights_binary}) {
            const auto w = f(in);
            CHECK(weights_are_normalized(w.weights));
        }
    }
}

TEST_CASE("fewer alternatives shrink every raw binary weight") {
    std::mt19937_64 rng(4);
    auto in = inputs(random_probs(rng, 200), 2.5, 0.05, 40);
    const double delta = solve_delta(in, WeightFormula::binary).delta;
    const auto before = crw_raw_weights(in, WeightFormula::binary, delta);
    in.m1 = 20;
    const auto after = crw_raw_weights(in, WeightFormula::binary, delta);
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] > 1e-300) CHECK(after[i] < before[i]);
    }
}

TEST_CASE("binary weights equal continuous weights on rescaled probabilities") {
    std::mt19937_64 rng(6);
    auto bin = inputs(random_probs(rng, 150), 1.8, 0.05, 30);
    auto cont = bin;
    for (double& p : cont.rank_probs) p *= static_cast<double>(bin.m1) / bin.m;
    const double delta = 0.37;
    const auto a = crw_raw_weights(bin, WeightFormula::binary, delta);
    const auto b = crw_raw_weights(cont, WeightFormula::continuous, delta);
    // the probability floor applies before rescaling, so floored entries are excluded
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (cont.rank_probs[i] < rank_prob_floor(cont.m)) continue;
        CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(a[i], b[i]) + 1e-290);
    }
    const auto wa = crw_weights_binary(bin), wb = crw_weights_continuous(cont);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(wa.weights[i] - wb.weights[i]) <= 1e-6);
}

TEST_CASE("raising one rank probability lowers every other normalized weight at fixed delta") {
    std::mt19937_64 rng(10);
    auto in = inputs(random_probs(rng, 80), 2.0);
    const double delta = solve_delta(in, WeightFormula::continuous).delta;
    auto normalized = [&](const CrwInputs& x) {
        auto raw = crw_raw_weights(x, WeightFormula::continuous, delta);
        const double s = sum(raw);
        for (double& v : raw) v *= x.m / s;
        return raw;
    };
    const auto before = normalized(in);
    in.rank_probs[7] *= 1.5;
    const auto after = normalized(in);
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (i == 7) CHECK(after[i] > before[i]);
        else if (before[i] > 1e-200) CHECK(after[i] < before[i]);
    }
}

TEST_CASE("two-tailed weights at alpha equal one-tailed weights at alpha/2") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ue(0.5, 3.5), ua(0.01, 0.2);
    for (int i = 0; i < 100; ++i) {
        auto two = inputs(random_probs(rng, 120), ue(rng), ua(rng));
        two.tails = Tails::two;
        auto one = two;
        one.tails = Tails::one;
        one.alpha = two.alpha / 2.0;
        const auto a = crw_weights_continuous(two), b = crw_weights_continuous(one);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.weights[k] - b.weights[k]) <= 1e-9);
    }
}

TEST_CASE("nonpositive mean effect falls back to flagged uniform weights") {
    const auto w = crw_weights_continuous(inputs({0.5, 0.3, 0.2}, 0.0));
    CHECK(w.uniform_fallback);
    CHECK(w.weights == std::vector<double>{1.0, 1.0, 1.0});
    const auto n = crw_weights_binary(inputs({0.5, 0.3, 0.2}, -1.0, 0.05, 1));
    CHECK(n.uniform_fallback);
}

TEST_CASE("zero rank probabilities are floored, not fatal") {
    std::vector<double> p(50, 0.0);
    p[0] = 0.6;
    p[1] = 0.4;
    const auto w = crw_weights_continuous(inputs(p, 3.0));
    CHECK(weights_are_normalized(w.weights));
    CHECK(w.weights[0] > w.weights[10]);
    CHECK(w.weights[10] == w.weights[40]);
}

TEST_CASE("grid fallback when the Newton bracket cannot be built") {
    std::vector<double> offs(20);
    for (std::size_t i = 0; i < offs.size(); ++i) offs[i] = 3.0 + 0.1 * i;
    const double prefactor = 20.0 / 0.05;
    const auto good = solve_sf_multiplier(offs, 2.0, prefactor, 20.0, 0.0);
    CHECK(good.path == "newton");
    // a start 200 log-units too high defeats the 100-step nudging loop
    const auto fallback = solve_sf_multiplier(offs, 2.0, prefactor, 20.0, 400.0);
    CHECK(fallback.path.rfind("grid", 0) == 0);
    // the grid resolves delta to its 0.001 spacing, nothing finer
    CHECK(std::abs(fallback.delta - good.delta) <= 0.001);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(crw_weights_continuous(inputs({0.5, 0.5}, 2.0, 1.5)), ArgumentError);
    auto bad = inputs({0.5, 0.5}, 2.0);
    bad.m = 3;
    CHECK_THROWS_AS(crw_weights_continuous(bad), ArgumentError);
    CHECK_THROWS_AS(crw_weights_binary(inputs({0.5, 0.5}, 2.0, 0.05, 0)), ArgumentError);
    CHECK_THROWS_AS(crw_weights_continuous(inputs({0.5, -0.1}, 2.0)), ArgumentError);
}

TEST_CASE("exact weights with a point-mass prior reproduce the closed form") {
    const int m = 120;
    const auto pop = TestPopulation::make(m, 90, EffectPrior::point_mass(2.0));
    auto by_effect = [&](double e) { return rank_prob_normal_approx(pop, e, FocalKind::alternative, small_mc()); };
    ExactCrwOptions opt;
    const auto exact = crw_weights_exact(pop, by_effect, opt);
    const auto probs = by_effect(2.0).probabilities;
    const auto bin = crw_weights_binary(inputs(probs, 2.0, 0.05, 30));
    const auto cont = crw_weights_continuous(inputs(probs, 2.0, 0.05));
    for (int i = 0; i < m; ++i) {
        CHECK(std::abs(exact.weights[i] - bin.weights[i]) <= 1e-6);
        CHECK(std::abs(exact.weights[i] - cont.weights[i]) <= 1e-6);
    }
}

TEST_CASE("exact and approximate weights agree for a uniform prior", "[!mayfail]") {
    const int m = 100;
    const auto prior = EffectPrior::uniform(1.5, 2.5);
    const auto pop = TestPopulation::make(m, 80, prior);
    auto by_effect = [&](double e) { return rank_prob_normal_approx(pop, e, FocalKind::alternative, small_mc(20000)); };
    ExactCrwOptions opt;
    const auto exact = crw_weights_exact(pop, by_effect, opt);
    const auto approx = crw_weights_continuous(inputs(by_effect(prior_mean(prior)).probabilities, 2.0));
    CHECK(weights_are_normalized(exact.weights));
    for (int i = 0; i < m; ++i) {
        CAPTURE(i, exact.weights[i], approx.weights[i]);
        CHECK(std::abs(exact.weights[i] / approx.weights[i] - 1.0) <= 0.05);
    }
    for (int i = 1; i < m; ++i) {
        const bool a = exact.weights[i] <= exact.weights[i - 1];
        const bool b = approx.weights[i] <= approx.weights[i - 1];
        CAPTURE(i);
        CHECK(a == b);
    }
}

TEST_CASE("exact weights reject priors with nonpositive nodes") {
    const auto pop = TestPopulation::make(10, 5, EffectPrior::normal(0.0, 1.0));
    auto by_effect = [&](double e) { return rank_prob_normal_approx(pop, e, FocalKind::alternative, small_mc(100)); };
    CHECK_THROWS_AS(crw_weights_exact(pop, by_effect, {}), ArgumentError);
}
