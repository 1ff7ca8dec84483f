#include "covw/sim.hpp"

#include "covw/crw.hpp"
#include "covw/dcw.hpp"
#include "covw/errors.hpp"
#include "covw/format.hpp"
#include "covw/math.hpp"
#include "covw/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace covw {

std::vector<double> gen_correlated_stats(int m, double rho, int block_size, std::span<const double> effects,
                                         std::mt19937_64& rng) {
    if (m < 1) throw ArgumentError("gen_correlated_stats: m must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("gen_correlated_stats: rho must lie in [0, 1)");
    if (!effects.empty() && effects.size() != static_cast<std::size_t>(m)) {
        throw ArgumentError("gen_correlated_stats: effects length must equal m");
    }
    std::normal_distribution<double> z;
    std::vector<double> out(static_cast<std::size_t>(m));
    if (rho == 0.0) {
        for (auto& v : out) v = z(rng);
    } else {
        if (block_size < 1 || m % block_size != 0) {
            throw ArgumentError("gen_correlated_stats: block size must divide m");
        }
        const double shared = std::sqrt(rho);
        const double own = std::sqrt(1.0 - rho);
        for (int start = 0; start < m; start += block_size) {
            const double common = z(rng);
            for (int i = start; i < start + block_size; ++i) {
                out[static_cast<std::size_t>(i)] = shared * common + own * z(rng);
            }
        }
    }
    if (!effects.empty()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += effects[i];
    }
    return out;
}

std::vector<double> gen_correlated_stats(int m, double rho, int block_size, std::span<const double> effects,
                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return gen_correlated_stats(m, rho, block_size, effects, rng);
}

void SimScenario::validate() const {
    if (m < 2) throw ArgumentError("SimScenario: m must be at least 2");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw ArgumentError("SimScenario: pi0 must lie in [0, 1]");
    if (effect_grid.empty()) throw ArgumentError("SimScenario: empty effect grid");
    for (double e : effect_grid) {
        if (!std::isfinite(e) || e < 0.0) throw ArgumentError("SimScenario: effects must be finite and >= 0");
    }
    if (!(cv >= 0.0)) throw ArgumentError("SimScenario: cv must be nonnegative");
    if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("SimScenario: rho must lie in [0, 1)");
    if (rho > 0.0 && (block_size < 1 || m % block_size != 0)) {
        throw ArgumentError("SimScenario: block size must divide m when rho > 0");
    }
    if (replications < 1) throw ArgumentError("SimScenario: replications must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("SimScenario: alpha must lie in (0, 1)");
    if (methods.empty()) throw ArgumentError("SimScenario: no methods");
    analysis.validate();
}

const MetricRow& SimMetrics::at(double effect, Method method) const {
    for (const auto& r : rows) {
        if (r.effect == effect && r.method == method) return r;
    }
    throw ArgumentError("SimMetrics: no row for the requested effect and method");
}

namespace {

int alternative_count(const SimScenario& s) {
    return static_cast<int>(std::lround((1.0 - s.pi0) * s.m));
}

} // namespace

SimDataset simulate_dataset(const SimScenario& s, double covariate_effect, std::mt19937_64& rng) {
    const auto m = static_cast<std::size_t>(s.m);
    SimDataset d;
    d.m1 = alternative_count(s);
    d.alternative.assign(m, false);
    for (int i = 0; i < d.m1; ++i) d.alternative[static_cast<std::size_t>(i)] = true;
    std::shuffle(d.alternative.begin(), d.alternative.end(), rng);

    std::normal_distribution<double> z;
    d.test_effects.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (!d.alternative[i]) continue;
        d.test_effects[i] = s.cv > 0.0 ? covariate_effect + s.cv * covariate_effect * z(rng) : covariate_effect;
    }
    const auto stats = gen_correlated_stats(s.m, s.rho, s.block_size, d.test_effects, rng);
    d.tests.pvalues.resize(m);
    d.tests.covariates.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        d.tests.pvalues[i] = norm_sf(stats[i]);
        d.tests.covariates[i] = (d.alternative[i] ? covariate_effect : 0.0) + z(rng);
    }
    return d;
}

namespace {

struct Outcome {
    double tp = 0.0, fp = 0.0, rejections = 0.0;
};

// CRW weights by covariate rank from the true population parameters.
WeightVector oracle_crw_weights(const SimScenario& s, double effect, bool binary) {
    const int m1 = alternative_count(s);
    if (m1 == 0 || !(effect > 0.0)) return uniform_weights(static_cast<std::size_t>(s.m), "uniform: no signal");
    const auto pop = TestPopulation::make(s.m, s.m - m1, EffectPrior::point_mass(effect));
    McConfig mc;
    mc.replications = s.analysis.mc_replications;
    mc.seed = s.analysis.seed;
    mc.threads = s.threads;
    const auto dist = rank_prob_exact_mc(pop, effect, FocalKind::alternative, mc);
    CrwInputs in;
    in.rank_probs = dist.probabilities;
    in.mean_test_effect = effect;
    in.alpha = s.alpha;
    in.m = s.m;
    in.m1 = m1;
    return binary ? crw_weights_binary(in) : crw_weights_continuous(in);
}

bool is_crw(Method m) { return m == Method::crw_continuous || m == Method::crw_binary; }

std::vector<bool> decide(const SimScenario& s, std::span<const double> p, std::span<const double> w) {
    return s.mode == ErrorMode::fdr ? weighted_bh(p, w, s.alpha).rejected : weighted_bonferroni(p, w, s.alpha);
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
    MeanSe r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

} // namespace

SimMetrics simulate_metrics(const SimScenario& s) {
    s.validate();
    SimMetrics out;
    const std::size_t n_methods = s.methods.size();
    const auto reps = static_cast<std::size_t>(s.replications);
    AnalysisOptions opt = s.analysis;
    opt.alpha = s.alpha;
    opt.mode = s.mode;
    opt.threads = 1;
    if (s.crw_source == CrwSource::oracle) opt.known_m1 = alternative_count(s);

    for (std::size_t ei = 0; ei < s.effect_grid.size(); ++ei) {
        const double effect = s.effect_grid[ei];
        std::vector<std::optional<WeightVector>> oracle(n_methods);
        if (s.crw_source == CrwSource::oracle) {
            for (std::size_t k = 0; k < n_methods; ++k) {
                if (is_crw(s.methods[k])) {
                    oracle[k] = oracle_crw_weights(s, effect, s.methods[k] == Method::crw_binary);
                }
            }
        }
        std::vector<Outcome> outcomes(reps * n_methods);
        std::vector<int> m1s(reps);
        const std::uint64_t point_seed = mix_seed(s.seed, ei);
        parallel_for(reps, s.threads, [&](std::size_t r) {
            std::mt19937_64 rng(mix_seed(point_seed, r));
            const SimDataset d = simulate_dataset(s, effect, rng);
            m1s[r] = d.m1;
            std::vector<std::size_t> perm;
            for (std::size_t k = 0; k < n_methods; ++k) {
                std::vector<bool> rejected;
                if (oracle[k]) {
                    if (perm.empty()) perm = order_by_covariate(d.tests.pvalues, d.tests.covariates);
                    std::vector<double> w(perm.size());
                    for (std::size_t rank = 0; rank < perm.size(); ++rank) w[perm[rank]] = oracle[k]->weights[rank];
                    rejected = decide(s, d.tests.pvalues, w);
                } else {
                    rejected = run_analysis(d.tests, s.methods[k], opt).rejected;
                }
                Outcome& o = outcomes[r * n_methods + k];
                for (std::size_t i = 0; i < rejected.size(); ++i) {
                    if (!rejected[i]) continue;
                    o.rejections += 1.0;
                    (d.alternative[i] ? o.tp : o.fp) += 1.0;
                }
            }
        });

        for (std::size_t k = 0; k < n_methods; ++k) {
            std::vector<double> power, fdp, any_false, rej;
            for (std::size_t r = 0; r < reps; ++r) {
                const Outcome& o = outcomes[r * n_methods + k];
                if (m1s[r] > 0) power.push_back(o.tp / m1s[r]);
                fdp.push_back(o.rejections > 0.0 ? o.fp / o.rejections : 0.0);
                any_false.push_back(o.fp > 0.0 ? 1.0 : 0.0);
                rej.push_back(o.rejections);
            }
            MetricRow row;
            row.effect = effect;
            row.method = s.methods[k];
            row.replications = s.replications;
            row.power_defined = !power.empty();
            const auto pw = mean_se(power);
            const auto fd = mean_se(fdp);
            const auto fw = mean_se(any_false);
            row.power = pw.mean;
            row.power_se = pw.se;
            row.fdr = fd.mean;
            row.fdr_se = fd.se;
            row.fwer = fw.mean;
            row.fwer_se = fw.se;
            row.mean_rejections = mean_se(rej).mean;
            out.rows.push_back(row);
        }
    }
    return out;
}

void write_metrics_csv(std::ostream& out, const SimScenario& s, const SimMetrics& metrics) {
    out << "m,pi0,rho,cv,alpha,mode,crw_source,replications,effect,method,metric,value,se\n";
    for (const auto& r : metrics.rows) {
        const std::string prefix = std::to_string(s.m) + ',' + format_double(s.pi0) + ',' + format_double(s.rho) +
                                   ',' + format_double(s.cv) + ',' + format_double(s.alpha) + ',' +
                                   (s.mode == ErrorMode::fdr ? "fdr" : "fwer") + ',' +
                                   (s.crw_source == CrwSource::oracle ? "oracle" : "estimated") + ',' +
                                   std::to_string(r.replications) + ',' + format_double(r.effect) + ',' +
                                   std::string(method_name(r.method)) + ',';
        if (r.power_defined) {
            out << prefix << "power," << format_double(r.power) << ',' << format_double(r.power_se) << '\n';
        } else {
            out << prefix << "power,NA,NA\n";
        }
        out << prefix << "fdr," << format_double(r.fdr) << ',' << format_double(r.fdr_se) << '\n';
        out << prefix << "fwer," << format_double(r.fwer) << ',' << format_double(r.fwer_se) << '\n';
        out << prefix << "mean_rejections," << format_double(r.mean_rejections) << ",NA\n";
    }
}

std::vector<DilutionRow> group_dilution_demo(int m, std::span<const double> pi0_grid, double effect, int n_groups,
                                             int replications, std::uint64_t seed) {
    if (replications < 1) throw ArgumentError("group_dilution_demo: replications must be positive");
    const auto sizes = group_sizes(static_cast<std::size_t>(m), n_groups);
    std::vector<DilutionRow> rows;
    for (std::size_t gi = 0; gi < pi0_grid.size(); ++gi) {
        const double pi0 = pi0_grid[gi];
        if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw ArgumentError("group_dilution_demo: pi0 must lie in [0, 1]");
        const int m1 = static_cast<int>(std::lround((1.0 - pi0) * m));
        std::vector<double> share(static_cast<std::size_t>(replications)), mean_eff(share.size());
        for (int r = 0; r < replications; ++r) {
            std::mt19937_64 rng(mix_seed(mix_seed(seed, gi), static_cast<std::uint64_t>(r)));
            std::normal_distribution<double> z;
            std::vector<double> cov(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) cov[static_cast<std::size_t>(i)] = (i < m1 ? effect : 0.0) + z(rng);
            std::vector<std::size_t> order(cov.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cov[a] > cov[b]; });
            std::size_t alts = 0;
            for (std::size_t k = 0; k < sizes[0]; ++k) alts += order[k] < static_cast<std::size_t>(m1);
            share[static_cast<std::size_t>(r)] = static_cast<double>(alts) / static_cast<double>(sizes[0]);
            mean_eff[static_cast<std::size_t>(r)] = effect * share[static_cast<std::size_t>(r)];
        }
        DilutionRow row;
        row.pi0 = pi0;
        const auto a = mean_se(share);
        const auto b = mean_se(mean_eff);
        row.best_group_alt_proportion = a.mean;
        row.proportion_se = a.se;
        row.best_group_mean_effect = b.mean;
        row.mean_effect_se = b.se;
        rows.push_back(row);
    }
    return rows;
}

namespace {

// Average of rank distributions over covariate effects
// shift + scale * z_j, with per-draw Monte-Carlo seeds shared across calls.
std::vector<double> mixed_rank_curve(int m, int m0, double others_effect, double shift, double scale,
                                     int replications, int inner_draws, std::uint64_t seed, unsigned threads) {
    const auto pop = TestPopulation::make(m, m0, EffectPrior::point_mass(others_effect));
    std::vector<std::vector<double>> parts(static_cast<std::size_t>(inner_draws));
    parallel_for(parts.size(), threads, [&](std::size_t j) {
        const double zj = norm_quantile(counter_uniform(seed, j));
        McConfig mc;
        mc.replications = replications;
        mc.seed = mix_seed(seed, j);
        mc.threads = 1;
        parts[j] = rank_prob_normal_approx(pop, shift + scale * zj, FocalKind::alternative, mc).probabilities;
    });
    std::vector<double> curve(static_cast<std::size_t>(m), 0.0);
    for (const auto& p : parts) {
        for (std::size_t k = 0; k < curve.size(); ++k) curve[k] += p[k];
    }
    for (double& v : curve) v /= inner_draws;
    return curve;
}

} // namespace

std::vector<EffectRelationshipCurve> effect_relationship_sim(int m, int m0, double test_effect,
                                                             std::span<const double> rho_grid, int replications,
                                                             int inner_draws, std::uint64_t seed, unsigned threads) {
    if (replications < 1 || inner_draws < 2) {
        throw ArgumentError("effect_relationship_sim: need replications >= 1 and inner_draws >= 2");
    }
    if (m0 >= m) throw ArgumentError("effect_relationship_sim: need at least one alternative");
    const auto direct =
        mixed_rank_curve(m, m0, test_effect, test_effect, 0.0, replications, inner_draws, seed, threads);
    std::vector<EffectRelationshipCurve> out;
    for (double rho : rho_grid) {
        if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("effect_relationship_sim: rho must lie in [0, 1)");
        EffectRelationshipCurve c;
        c.rho = rho;
        c.test_effect = test_effect;
        const double scale = std::sqrt(1.0 - rho * rho);
        c.probabilities = mixed_rank_curve(m, m0, rho * test_effect, rho * test_effect, scale, replications,
                                           inner_draws, seed, threads);
        c.direct = direct;
        for (std::size_t k = 0; k < direct.size(); ++k) {
            c.max_deviation = std::max(c.max_deviation, std::abs(c.probabilities[k] - direct[k]));
        }
        std::vector<double> drawn(static_cast<std::size_t>(inner_draws));
        for (std::size_t j = 0; j < drawn.size(); ++j) {
            drawn[j] = rho * test_effect + scale * norm_quantile(counter_uniform(seed, j));
        }
        const auto ms = mean_se(drawn);
        c.drawn_mean = ms.mean;
        c.drawn_mean_se = ms.se;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace covw
