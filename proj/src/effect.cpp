#include "covw/effect.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace covw {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
} // namespace

EffectPrior EffectPrior::point_mass(double effect) {
    if (!std::isfinite(effect)) throw ArgumentError("PointMass: effect must be finite");
    return EffectPrior(PointMass{effect});
}

EffectPrior EffectPrior::uniform(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ArgumentError("Uniform prior requires finite lo < hi");
    }
    return EffectPrior(UniformEffect{lo, hi});
}

EffectPrior EffectPrior::exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ArgumentError("Exponential prior requires rate > 0");
    return EffectPrior(ExponentialEffect{rate});
}

EffectPrior EffectPrior::normal(double mean, double sd) {
    if (!std::isfinite(mean) || !(sd > 0.0) || !std::isfinite(sd)) {
        throw ArgumentError("Normal prior requires finite mean and sd > 0");
    }
    return EffectPrior(NormalEffect{mean, sd});
}

std::string EffectPrior::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const PointMass& p) { os << "point(" << p.effect << ")"; },
                   [&](const UniformEffect& u) { os << "uniform(" << u.lo << "," << u.hi << ")"; },
                   [&](const ExponentialEffect& e) { os << "exponential(" << e.rate << ")"; },
                   [&](const NormalEffect& n) { os << "normal(" << n.mean << "," << n.sd << ")"; },
               },
               v_);
    return os.str();
}

TestPopulation TestPopulation::make(int m, int m0, EffectPrior prior) {
    TestPopulation p{m, m0, m - m0, prior};
    p.validate();
    return p;
}

void TestPopulation::validate() const {
    if (m < 1) throw ArgumentError("TestPopulation: m must be at least 1");
    if (m0 < 0 || m1 < 0 || m0 + m1 != m) throw ArgumentError("TestPopulation: m0 + m1 must equal m");
}

double null_exceedance(double t) { return norm_sf(t); }

double alt_exceedance(const EffectPrior& prior, double t) {
    const double v = std::visit(
        overloaded{
            [&](const PointMass& p) { return norm_sf(t - p.effect); },
            [&](const UniformEffect& u) {
                // integral of Phi(e - t) over [lo, hi], divided by the width;
                // below the midpoint the complement avoids cancellation near 1
                if (t < 0.5 * (u.lo + u.hi)) {
                    const double hi = t - u.lo, lo = t - u.hi;
                    const double below = hi * norm_cdf(hi) - lo * norm_cdf(lo) + norm_pdf(hi) - norm_pdf(lo);
                    return 1.0 - below / (u.hi - u.lo);
                }
                const double b = u.hi - t, a = u.lo - t;
                const double num = b * norm_cdf(b) - a * norm_cdf(a) + norm_pdf(b) - norm_pdf(a);
                return num / (u.hi - u.lo);
            },
            [&](const ExponentialEffect& e) {
                const double r = e.rate;
                const double log_tail = 0.5 * r * r - r * t + log_norm_cdf(t - r);
                return norm_sf(t) + std::exp(log_tail);
            },
            [&](const NormalEffect& n) {
                return norm_sf((t - n.mean) / std::sqrt(n.sd * n.sd + 1.0));
            },
        },
        prior.variant());
    return std::clamp(v, 0.0, 1.0);
}

double prior_mean(const EffectPrior& prior) {
    return std::visit(overloaded{
                          [](const PointMass& p) { return p.effect; },
                          [](const UniformEffect& u) { return 0.5 * (u.lo + u.hi); },
                          [](const ExponentialEffect& e) { return 1.0 / e.rate; },
                          [](const NormalEffect& n) { return n.mean; },
                      },
                      prior.variant());
}

double sample_effect(const EffectPrior& prior, std::mt19937_64& rng) {
    return std::visit(
        overloaded{
            [](const PointMass& p) { return p.effect; },
            [&](const UniformEffect& u) { return std::uniform_real_distribution<double>(u.lo, u.hi)(rng); },
            [&](const ExponentialEffect& e) { return std::exponential_distribution<double>(e.rate)(rng); },
            [&](const NormalEffect& n) { return std::normal_distribution<double>(n.mean, n.sd)(rng); },
        },
        prior.variant());
}

} // namespace covw
