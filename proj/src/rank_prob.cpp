#include "covw/rank_prob.hpp"

#include "covw/errors.hpp"
#include "covw/math.hpp"
#include "covw/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace covw {

void McConfig::validate() const {
    if (replications < 1) throw ArgumentError("McConfig: replications must be at least 1");
}

namespace {

constexpr std::int64_t kDrawsPerBlock = 1024;

struct TrialCounts {
    int nulls;
    int alts;
};

TrialCounts trial_counts(const TestPopulation& pop, double focal_effect, FocalKind focal) {
    pop.validate();
    if (focal == FocalKind::null) {
        if (pop.m0 < 1) throw ArgumentError("rank probability: null focal test needs m0 >= 1");
        if (focal_effect != 0.0) throw ArgumentError("rank probability: a null focal test has effect 0");
        return {pop.m0 - 1, pop.m1};
    }
    if (pop.m1 < 1) throw ArgumentError("rank probability: alternative focal test needs m1 >= 1");
    if (!std::isfinite(focal_effect)) throw ArgumentError("rank probability: focal effect must be finite");
    return {pop.m0, pop.m1 - 1};
}

// Per-block accumulator over ranks, touched range tracked so that clearing
// stays proportional to the work done.
struct BlockSums {
    std::vector<double> sum, sum_sq;
    std::size_t lo = 0, hi = 0;

    explicit BlockSums(std::size_t m) : sum(m, 0.0), sum_sq(m, 0.0), lo(m), hi(0) {}
    void add(std::size_t rank, double p) {
        const std::size_t i = rank - 1;
        sum[i] += p;
        sum_sq[i] += p * p;
        lo = std::min(lo, i);
        hi = std::max(hi, i + 1);
    }
    void clear() {
        for (std::size_t i = lo; i < hi; ++i) sum[i] = sum_sq[i] = 0.0;
        lo = sum.size();
        hi = 0;
    }
};

// Runs draw(j, sums) for every MC draw, accumulating in a fixed block order so
// the result is identical for any worker count.
template <class DrawFn>
RankDistribution accumulate_draws(std::size_t m, const McConfig& mc, DrawFn&& draw) {
    mc.validate();
    const std::int64_t R = mc.replications;
    const std::size_t blocks = static_cast<std::size_t>((R + kDrawsPerBlock - 1) / kDrawsPerBlock);
    std::vector<double> total(m, 0.0), total_sq(m, 0.0);

    auto run_block = [&](std::size_t b, BlockSums& acc) {
        const std::int64_t begin = static_cast<std::int64_t>(b) * kDrawsPerBlock;
        const std::int64_t end = std::min(R, begin + kDrawsPerBlock);
        for (std::int64_t j = begin; j < end; ++j) draw(j, acc);
    };
    auto fold = [&](BlockSums& acc) {
        for (std::size_t i = acc.lo; i < acc.hi; ++i) {
            total[i] += acc.sum[i];
            total_sq[i] += acc.sum_sq[i];
        }
    };

    const unsigned threads = resolve_threads(mc.threads);
    if (threads <= 1 || blocks == 1) {
        BlockSums acc(m);
        for (std::size_t b = 0; b < blocks; ++b) {
            run_block(b, acc);
            fold(acc);
            acc.clear();
        }
    } else {
        std::vector<BlockSums> partial;
        partial.reserve(blocks);
        for (std::size_t b = 0; b < blocks; ++b) partial.emplace_back(m);
        parallel_for(blocks, threads, [&](std::size_t b) { run_block(b, partial[b]); });
        for (auto& acc : partial) fold(acc);
    }

    RankDistribution out;
    out.probabilities.resize(m);
    out.standard_errors.resize(m);
    const double n = static_cast<double>(R);
    for (std::size_t i = 0; i < m; ++i) {
        const double mean = total[i] / n;
        out.probabilities[i] = mean;
        const double var = R > 1 ? std::max(0.0, (total_sq[i] - n * mean * mean) / (n - 1.0)) : 0.0;
        out.standard_errors[i] = std::sqrt(var / n);
    }
    return out;
}

// Stratified draw of the focal statistic from its own sampling density.
double focal_statistic(const McConfig& mc, std::int64_t j, double focal_effect) {
    const double u = (static_cast<double>(j) + counter_uniform(mc.seed, static_cast<std::uint64_t>(j))) /
                     static_cast<double>(mc.replications);
    return norm_quantile(std::clamp(u, 1e-300, 1.0 - 1e-16)) + focal_effect;
}

// Normal approximation of 1 + Bin(n0, q0) + Bin(n1, q1) spread over ranks.
void add_normal_rank_mass(std::size_t m, const TrialCounts& tc, double q0, double q1,
                          BlockSums& acc) {
    const double mu = tc.nulls * q0 + tc.alts * q1 + 1.0;
    const double var = tc.nulls * q0 * (1.0 - q0) + tc.alts * q1 * (1.0 - q1);
    const double M = static_cast<double>(m);
    if (!(var > 1e-14)) {
        acc.add(static_cast<std::size_t>(std::clamp(std::round(mu), 1.0, M)), 1.0);
        return;
    }
    const double sd = std::sqrt(var);
    const auto klo = static_cast<std::size_t>(std::clamp(std::floor(mu - 9.0 * sd), 1.0, M));
    const auto khi = static_cast<std::size_t>(std::clamp(std::ceil(mu + 9.0 * sd), 1.0, M));
    if (klo == khi) {
        acc.add(klo, 1.0);
        return;
    }
    // mass beyond the window (below 1e-18) is lumped into its end ranks
    double prev = 0.0;
    for (std::size_t k = klo; k < khi; ++k) {
        const double c = norm_cdf((static_cast<double>(k) + 0.5 - mu) / sd);
        acc.add(k, c - prev);
        prev = c;
    }
    acc.add(khi, 1.0 - prev);
}

struct PmfWindow {
    int start = 0;
    std::vector<double> p;
};

PmfWindow binomial_window(int n, double q) {
    if (n == 0 || q <= 0.0) return {0, {1.0}};
    if (q >= 1.0) return {n, {1.0}};
    const int mode = std::clamp(static_cast<int>(std::floor((n + 1) * q)), 0, n);
    const double ratio = q / (1.0 - q);
    std::vector<double> up{1.0};
    for (int k = mode; k < n; ++k) {
        const double next = up.back() * ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
        if (next < 1e-18) break;
        up.push_back(next);
    }
    std::vector<double> down;
    double cur = 1.0;
    for (int k = mode; k > 0; --k) {
        cur = cur / ratio * static_cast<double>(k) / static_cast<double>(n - k + 1);
        if (cur < 1e-18) break;
        down.push_back(cur);
    }
    PmfWindow w;
    w.start = mode - static_cast<int>(down.size());
    w.p.assign(down.rbegin(), down.rend());
    w.p.insert(w.p.end(), up.begin(), up.end());
    const double total = std::accumulate(w.p.begin(), w.p.end(), 0.0);
    for (double& v : w.p) v /= total;
    return w;
}

void finish(RankDistribution& d, const TestPopulation& pop, double effect, FocalKind focal) {
    d.focal_effect = effect;
    d.focal = focal;
    d.population = pop;
    const double s = std::accumulate(d.probabilities.begin(), d.probabilities.end(), 0.0);
    if (s > 0.0) {
        for (double& p : d.probabilities) p /= s;
    }
}

} // namespace

RankDistribution rank_prob_normal_approx(const TestPopulation& pop, double focal_effect,
                                         FocalKind focal, const McConfig& mc) {
    const TrialCounts tc = trial_counts(pop, focal_effect, focal);
    const auto m = static_cast<std::size_t>(pop.m);
    auto out = accumulate_draws(m, mc, [&](std::int64_t j, BlockSums& acc) {
        const double t = focal_statistic(mc, j, focal_effect);
        const double q0 = null_exceedance(t);
        const double q1 = tc.alts > 0 ? alt_exceedance(pop.alt_prior, t) : 0.0;
        add_normal_rank_mass(m, tc, q0, q1, acc);
    });
    finish(out, pop, focal_effect, focal);
    return out;
}

RankDistribution rank_prob_exact_mc(const TestPopulation& pop, double focal_effect,
                                    FocalKind focal, const McConfig& mc) {
    if (pop.m > kExactConvolutionLimit) return rank_prob_normal_approx(pop, focal_effect, focal, mc);
    const TrialCounts tc = trial_counts(pop, focal_effect, focal);
    const auto m = static_cast<std::size_t>(pop.m);
    auto out = accumulate_draws(m, mc, [&](std::int64_t j, BlockSums& acc) {
        const double t = focal_statistic(mc, j, focal_effect);
        const PmfWindow w0 = binomial_window(tc.nulls, null_exceedance(t));
        const PmfWindow w1 =
            binomial_window(tc.alts, tc.alts > 0 ? alt_exceedance(pop.alt_prior, t) : 0.0);
        for (std::size_t a = 0; a < w0.p.size(); ++a) {
            for (std::size_t b = 0; b < w1.p.size(); ++b) {
                const auto count = static_cast<std::size_t>(w0.start + w1.start) + a + b;
                acc.add(count + 1, w0.p[a] * w1.p[b]);
            }
        }
    });
    finish(out, pop, focal_effect, focal);
    return out;
}

RankDistribution rank_prob_all_null(int m) {
    if (m < 1) throw ArgumentError("rank_prob_all_null: m must be at least 1");
    RankDistribution d;
    d.probabilities.assign(static_cast<std::size_t>(m), 1.0 / m);
    d.standard_errors.assign(static_cast<std::size_t>(m), 0.0);
    d.population = TestPopulation::make(m, m, EffectPrior::point_mass(0.0));
    return d;
}

RankDistribution rank_prob_bruteforce(const TestPopulation& pop, double focal_effect,
                                      FocalKind focal, std::int64_t samples, std::uint64_t seed,
                                      unsigned threads) {
    const TrialCounts tc = trial_counts(pop, focal_effect, focal);
    if (samples < 1) throw ArgumentError("rank_prob_bruteforce: samples must be positive");
    const auto m = static_cast<std::size_t>(pop.m);
    constexpr std::int64_t per_block = 8192;
    const auto blocks = static_cast<std::size_t>((samples + per_block - 1) / per_block);
    std::vector<std::vector<std::int64_t>> counts(blocks);

    parallel_for(blocks, threads, [&](std::size_t b) {
        std::mt19937_64 rng(mix_seed(seed, b));
        std::normal_distribution<double> noise;
        auto& c = counts[b];
        c.assign(m, 0);
        const std::int64_t begin = static_cast<std::int64_t>(b) * per_block;
        const std::int64_t end = std::min(samples, begin + per_block);
        for (std::int64_t s = begin; s < end; ++s) {
            const double t = focal_effect + noise(rng);
            std::size_t above = 0;
            for (int i = 0; i < tc.nulls; ++i) above += noise(rng) > t;
            for (int i = 0; i < tc.alts; ++i) above += sample_effect(pop.alt_prior, rng) + noise(rng) > t;
            ++c[above];
        }
    });

    RankDistribution out;
    out.probabilities.assign(m, 0.0);
    out.standard_errors.assign(m, 0.0);
    std::vector<std::int64_t> total(m, 0);
    for (const auto& c : counts) {
        for (std::size_t k = 0; k < m; ++k) total[k] += c[k];
    }
    const double n = static_cast<double>(samples);
    for (std::size_t k = 0; k < m; ++k) {
        const double p = static_cast<double>(total[k]) / n;
        out.probabilities[k] = p;
        out.standard_errors[k] = std::sqrt(p * (1.0 - p) / n);
    }
    out.focal_effect = focal_effect;
    out.focal = focal;
    out.population = pop;
    return out;
}

RankDistribution smooth_rank_distribution(const RankDistribution& dist, double df) {
    const std::size_t m = dist.size();
    if (m < 4) return dist;
    std::vector<double> x(m);
    std::iota(x.begin(), x.end(), 1.0);
    const double eff = std::clamp(df, 2.0, static_cast<double>(m));
    const SplineFit fit = fit_smoothing_spline(x, dist.probabilities, eff);
    RankDistribution out = dist;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out.probabilities[i] = std::max(fit.fitted()[i], 0.0);
        total += out.probabilities[i];
    }
    if (total > 0.0) {
        for (double& p : out.probabilities) p /= total;
    } else {
        out.probabilities = dist.probabilities;
    }
    return out;
}

} // namespace covw
