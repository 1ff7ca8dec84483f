#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>

namespace covw {

struct PointMass {
    double effect;
};
struct UniformEffect {
    double lo;
    double hi;
};
struct ExponentialEffect {
    double rate;
};
struct NormalEffect {
    double mean;
    double sd;
};

// Distribution of alternative effect sizes. Construct through the factories,
// which enforce the parameter invariants.
class EffectPrior {
public:
    using Variant = std::variant<PointMass, UniformEffect, ExponentialEffect, NormalEffect>;

    static EffectPrior point_mass(double effect);
    static EffectPrior uniform(double lo, double hi);
    static EffectPrior exponential(double rate);
    static EffectPrior normal(double mean, double sd);

    const Variant& variant() const { return v_; }
    std::string describe() const;

private:
    explicit EffectPrior(Variant v) : v_(v) {}
    Variant v_;
};

struct TestPopulation {
    int m = 1;
    int m0 = 1;
    int m1 = 0;
    EffectPrior alt_prior = EffectPrior::point_mass(0.0);

    static TestPopulation make(int m, int m0, EffectPrior prior);
    void validate() const;
};

// P(X > t) for a unit-variance null statistic.
double null_exceedance(double t);

// P(Y > t) with Y | effect ~ N(effect, 1) and effect ~ prior.
double alt_exceedance(const EffectPrior& prior, double t);

double prior_mean(const EffectPrior& prior);

double sample_effect(const EffectPrior& prior, std::mt19937_64& rng);

} // namespace covw
