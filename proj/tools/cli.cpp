#include "cli.hpp"

#include "covw/errors.hpp"
#include "covw/format.hpp"
#include "covw/math.hpp"
#include "covw/parallel.hpp"
#include "covw/pipeline.hpp"
#include "covw/rank_prob.hpp"
#include "covw/sim.hpp"
#include "covw/validate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace covw::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad files, flags or scenario contents; always exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

TestCollection read_tests(const fs::path& path, Tails tails) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError("input file is empty");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(trim(header[i]), i);
    std::vector<std::string> missing;
    for (const char* required : {"pvalue", "covariate"}) {
        if (!column.count(required)) missing.emplace_back(required);
    }
    if (!missing.empty()) {
        std::string msg = "input is missing required column(s):";
        for (const auto& m : missing) msg += " " + m;
        throw InputError(msg);
    }
    const std::size_t p_col = column["pvalue"], x_col = column["covariate"];
    const std::optional<std::size_t> id_col =
        column.count("id") ? std::optional<std::size_t>(column["id"]) : std::nullopt;

    TestCollection tests;
    tests.tails = tails;
    std::vector<std::size_t> bad_p, bad_x, bad_width;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            bad_width.push_back(line_no);
            continue;
        }
        const auto p = parse_double(fields[p_col]);
        const auto x = parse_double(fields[x_col]);
        if (!p || !(*p >= 0.0 && *p <= 1.0)) bad_p.push_back(line_no);
        if (!x || !std::isfinite(*x)) bad_x.push_back(line_no);
        tests.pvalues.push_back(p.value_or(0.0));
        tests.covariates.push_back(x.value_or(0.0));
        tests.labels.push_back(id_col ? trim(fields[*id_col]) : std::to_string(tests.pvalues.size()));
    }

    auto list_lines = [](const std::vector<std::size_t>& lines) {
        std::string s;
        const std::size_t shown = std::min<std::size_t>(lines.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) s += (i ? ", " : "") + std::to_string(lines[i]);
        if (lines.size() > shown) s += " and " + std::to_string(lines.size() - shown) + " more";
        return s;
    };
    std::string problems;
    if (!bad_width.empty()) problems += "\n  wrong number of fields on line(s) " + list_lines(bad_width);
    if (!bad_p.empty()) problems += "\n  pvalue missing or outside [0, 1] on line(s) " + list_lines(bad_p);
    if (!bad_x.empty()) problems += "\n  covariate missing or not finite on line(s) " + list_lines(bad_x);
    if (!problems.empty()) throw InputError("invalid input rows:" + problems);
    if (tests.size() < 2) throw InputError("input needs at least two tests");
    return tests;
}

fs::path prepare_output_dir(const std::string& dir) {
    if (dir.empty()) throw InputError("--output-dir is required");
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw InputError("cannot create output directory " + dir);
    return p;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

json diagnostic_to_json(const DiagnosticValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

ErrorMode parse_mode(const std::string& s) { return s == "fwer" ? ErrorMode::fwer : ErrorMode::fdr; }

Method method_from_tag(const std::string& tag) {
    const auto m = parse_method(tag);
    if (!m) throw InputError("unknown method " + tag);
    return *m;
}

const std::vector<std::string>& method_tags() {
    static const std::vector<std::string> tags{"crw-cont", "crw-bin", "gcw", "gcw2", "dcw", "bh", "bonferroni", "bw"};
    return tags;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string input, output_dir, method = "crw-cont", mode = "fdr";
    double alpha = 0.05;
    int tails = 1;
    std::uint64_t seed = 20240601;
    unsigned threads = 0;
    std::int64_t mc_reps = 20000;
    int groups = 0, max_groups = 10, bins = 20;
    bool boxcox = false;
    std::optional<int> known_m1;
};

void write_analysis(const fs::path& dir, const TestCollection& tests, const AnalysisResult& res,
                    const AnalyzeArgs& a) {
    const std::size_t m = tests.size();
    {
        auto out = open_output(dir / "weights.csv");
        out << "id,pvalue,covariate,covariate_rank,weight,adjusted_p,rejected\n";
        for (std::size_t i = 0; i < m; ++i) {
            out << csv_field(tests.labels[i]) << ',' << format_double(tests.pvalues[i]) << ','
                << format_double(tests.covariates[i]) << ',' << res.covariate_rank[i] << ','
                << format_double(res.weights.weights[i]) << ',' << format_double(res.adjusted_pvalues[i]) << ','
                << (res.rejected[i] ? 1 : 0) << '\n';
        }
    }
    {
        std::vector<double> by_rank(m);
        for (std::size_t i = 0; i < m; ++i) by_rank[res.covariate_rank[i] - 1] = res.weights.weights[i];
        auto out = open_output(dir / "plotdata_weights.csv");
        out << "covariate_rank,weight\n";
        for (std::size_t r = 0; r < m; ++r) out << r + 1 << ',' << format_double(by_rank[r]) << '\n';
    }
    if (!res.rank_probabilities.empty()) {
        auto out = open_output(dir / "plotdata_rank_probability.csv");
        out << (res.method == Method::dcw ? "group" : "covariate_rank") << ",probability\n";
        for (std::size_t k = 0; k < res.rank_probabilities.size(); ++k) {
            out << k + 1 << ',' << format_double(res.rank_probabilities[k]) << '\n';
        }
    }

    json j;
    j["schema_version"] = 1;
    j["method"] = std::string(method_tag(res.method));
    j["method_name"] = std::string(method_name(res.method));
    j["alpha"] = res.alpha;
    j["mode"] = a.mode;
    j["tails"] = a.tails;
    j["m"] = m;
    j["rejections"] = res.rejections;
    j["null_estimate"] = {{"pi0", res.null_estimate.pi0},
                          {"m0", res.null_estimate.m0},
                          {"m1", res.null_estimate.m1},
                          {"fallback", res.null_estimate.fallback}};
    if (res.effects && res.effects->defined) {
        const auto& e = *res.effects;
        json ej = {{"mean_test_effect", e.mean_test_effect},
                   {"median_test_effect", e.median_test_effect},
                   {"test_effect_sd", e.test_effect_sd},
                   {"predicted_mean_covariate_effect", e.predicted_mean_covariate_effect},
                   {"predicted_median_covariate_effect", e.predicted_median_covariate_effect},
                   {"regression", {{"slope", e.regression_slope},
                                   {"intercept", e.regression_intercept},
                                   {"r_squared", e.r_squared}}},
                   {"reverse_regression", {{"slope", e.reverse_slope}, {"intercept", e.reverse_intercept}}}};
        if (e.boxcox_lambda) ej["boxcox_lambda"] = *e.boxcox_lambda;
        j["effects"] = ej;
    } else {
        j["effects"] = nullptr;
    }
    j["weights"] = {{"multiplier", res.weights.multiplier},
                    {"solver_path", res.weights.solver_path},
                    {"uniform_fallback", res.weights.uniform_fallback},
                    {"min", *std::min_element(res.weights.weights.begin(), res.weights.weights.end())},
                    {"max", *std::max_element(res.weights.weights.begin(), res.weights.weights.end())}};
    json diag = json::object();
    for (const auto& [k, v] : res.diagnostics) diag[k] = diagnostic_to_json(v);
    j["diagnostics"] = diag;
    j["options"] = {{"seed", a.seed},
                    {"mc_replications", a.mc_reps},
                    {"groups", a.groups},
                    {"max_groups", a.max_groups},
                    {"bins", a.bins},
                    {"boxcox", a.boxcox}};
    if (a.known_m1) j["options"]["known_m1"] = *a.known_m1;
    auto out = open_output(dir / "diagnostics.json");
    out << j.dump(2) << '\n';
}

int do_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const auto dir = prepare_output_dir(a.output_dir);
    const auto tests = read_tests(a.input, a.tails == 2 ? Tails::two : Tails::one);
    AnalysisOptions opt;
    opt.alpha = a.alpha;
    opt.mode = parse_mode(a.mode);
    opt.use_boxcox = a.boxcox;
    opt.mc_replications = a.mc_reps;
    opt.seed = a.seed;
    opt.threads = resolve_threads(a.threads);
    opt.groups = a.groups;
    opt.max_groups = a.max_groups;
    opt.bins = a.bins;
    opt.known_m1 = a.known_m1;
    const auto res = run_analysis(tests, method_from_tag(a.method), opt);
    write_analysis(dir, tests, res, a);
    out << method_name(res.method) << ": " << res.rejections << " of " << tests.size() << " tests rejected at alpha "
        << a.alpha << " (" << a.mode << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, output_dir, figure = "power";
    std::optional<int> m, block_size, replications, groups, m0;
    std::optional<double> pi0, cv, rho, alpha;
    std::optional<std::vector<double>> effects, pi0_grid, rho_grid;
    std::optional<std::vector<std::string>> methods;
    std::optional<std::string> mode, crw_source;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> mc_reps;
    int inner_draws = 5000;
    unsigned threads = 0;
};

template <class T>
T json_get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario field '") + key + "': " + e.what());
    }
}

SimScenario scenario_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("scenario must be a JSON object");
    SimScenario s;
    for (const auto& [key, value] : j.items()) {
        if (key == "m") s.m = json_get<int>(j, "m");
        else if (key == "pi0") s.pi0 = json_get<double>(j, "pi0");
        else if (key == "effects") s.effect_grid = json_get<std::vector<double>>(j, "effects");
        else if (key == "cv") s.cv = json_get<double>(j, "cv");
        else if (key == "rho") s.rho = json_get<double>(j, "rho");
        else if (key == "block_size") s.block_size = json_get<int>(j, "block_size");
        else if (key == "replications") s.replications = json_get<int>(j, "replications");
        else if (key == "alpha") s.alpha = json_get<double>(j, "alpha");
        else if (key == "seed") s.seed = json_get<std::uint64_t>(j, "seed");
        else if (key == "mode") s.mode = parse_mode(json_get<std::string>(j, "mode"));
        else if (key == "crw_source") {
            const auto src = json_get<std::string>(j, "crw_source");
            if (src != "oracle" && src != "estimated") throw InputError("crw_source must be oracle or estimated");
            s.crw_source = src == "oracle" ? CrwSource::oracle : CrwSource::estimated;
        } else if (key == "methods") {
            s.methods.clear();
            for (const auto& tag : json_get<std::vector<std::string>>(j, "methods")) {
                s.methods.push_back(method_from_tag(tag));
            }
        } else if (key == "mc_replications") s.analysis.mc_replications = json_get<std::int64_t>(j, "mc_replications");
        else if (key == "groups") s.analysis.groups = json_get<int>(j, "groups");
        else throw InputError("unknown scenario field '" + key + "'");
        (void)value;
    }
    return s;
}

SimScenario build_scenario(const SimulateArgs& a) {
    SimScenario s = a.config.empty() ? SimScenario{} : scenario_from_json(a.config);
    if (a.m) s.m = *a.m;
    if (a.pi0) s.pi0 = *a.pi0;
    if (a.effects) s.effect_grid = *a.effects;
    if (a.cv) s.cv = *a.cv;
    if (a.rho) s.rho = *a.rho;
    if (a.block_size) s.block_size = *a.block_size;
    if (a.replications) s.replications = *a.replications;
    if (a.alpha) s.alpha = *a.alpha;
    if (a.seed) s.seed = *a.seed;
    if (a.mode) s.mode = parse_mode(*a.mode);
    if (a.crw_source) s.crw_source = *a.crw_source == "oracle" ? CrwSource::oracle : CrwSource::estimated;
    if (a.methods) {
        s.methods.clear();
        for (const auto& tag : *a.methods) s.methods.push_back(method_from_tag(tag));
    }
    if (a.mc_reps) s.analysis.mc_replications = *a.mc_reps;
    if (a.groups) s.analysis.groups = *a.groups;
    s.threads = resolve_threads(a.threads);
    s.validate();
    return s;
}

void write_wide(const fs::path& path, const SimScenario& s, const SimMetrics& metrics, const char* metric) {
    auto out = open_output(path);
    out << "effect";
    for (Method m : s.methods) out << ',' << method_name(m) << ',' << method_name(m) << "_se";
    out << '\n';
    for (double e : s.effect_grid) {
        out << format_double(e);
        for (Method m : s.methods) {
            const auto& r = metrics.at(e, m);
            const std::string what = metric;
            if (what == "power" && !r.power_defined) {
                out << ",NA,NA";
            } else if (what == "power") {
                out << ',' << format_double(r.power) << ',' << format_double(r.power_se);
            } else if (what == "fdr") {
                out << ',' << format_double(r.fdr) << ',' << format_double(r.fdr_se);
            } else {
                out << ',' << format_double(r.fwer) << ',' << format_double(r.fwer_se);
            }
        }
        out << '\n';
    }
}

int do_simulate(const SimulateArgs& a, std::ostream& out) {
    const SimScenario s = build_scenario(a);
    const auto dir = prepare_output_dir(a.output_dir);
    if (a.figure == "power") {
        const auto metrics = simulate_metrics(s);
        {
            auto f = open_output(dir / "metrics.csv");
            write_metrics_csv(f, s, metrics);
        }
        write_wide(dir / "plotdata_power.csv", s, metrics, "power");
        write_wide(dir / "plotdata_fdr.csv", s, metrics, "fdr");
        write_wide(dir / "plotdata_fwer.csv", s, metrics, "fwer");
        out << "wrote " << metrics.rows.size() << " metric rows to " << dir.string() << '\n';
    } else if (a.figure == "dilution") {
        const std::vector<double> grid = a.pi0_grid.value_or(std::vector<double>{0.5, 0.9, 0.99});
        const int groups = s.analysis.groups > 0 ? s.analysis.groups : 10;
        const auto rows = group_dilution_demo(s.m, grid, s.effect_grid.front(), groups, s.replications, s.seed);
        auto f = open_output(dir / "plotdata_group_dilution.csv");
        f << "pi0,top_group_alt_proportion,proportion_se,top_group_mean_effect,mean_effect_se\n";
        for (const auto& r : rows) {
            f << format_double(r.pi0) << ',' << format_double(r.best_group_alt_proportion) << ','
              << format_double(r.proportion_se) << ',' << format_double(r.best_group_mean_effect) << ','
              << format_double(r.mean_effect_se) << '\n';
        }
        out << "wrote " << rows.size() << " dilution rows to " << dir.string() << '\n';
    } else {
        const std::vector<double> grid = a.rho_grid.value_or(std::vector<double>{0.0, 0.5, 0.9});
        const int m0 = a.m0.value_or(static_cast<int>(std::lround(s.pi0 * s.m)));
        const auto curves = effect_relationship_sim(s.m, m0, s.effect_grid.front(), grid, s.replications,
                                                    a.inner_draws, s.seed, s.threads);
        auto f = open_output(dir / "plotdata_effect_relationship.csv");
        f << "rho,covariate_rank,probability,direct\n";
        for (const auto& c : curves) {
            for (std::size_t k = 0; k < c.probabilities.size(); ++k) {
                f << format_double(c.rho) << ',' << k + 1 << ',' << format_double(c.probabilities[k]) << ','
                  << format_double(c.direct[k]) << '\n';
            }
        }
        out << "wrote " << curves.size() << " curves to " << dir.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- rankprob

struct RankprobArgs {
    int m = 100, m0 = 100;
    std::string prior = "point:0", focal, output_dir;
    double focal_effect = 0.0;
    std::int64_t mc_reps = 100000, bruteforce = 0;
    std::uint64_t seed = 20240601;
    unsigned threads = 0;
};

// "point:E", "uniform:LO,HI", "normal:MEAN,SD" or "exponential:RATE"
EffectPrior parse_prior(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InputError("prior must look like kind:params, got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    std::vector<double> params;
    for (const auto& field : split_csv_line(text.substr(colon + 1))) {
        const auto v = parse_double(field);
        if (!v) throw InputError("prior parameter '" + field + "' is not a number");
        params.push_back(*v);
    }
    auto need = [&](std::size_t n) {
        if (params.size() != n) {
            throw InputError("prior '" + kind + "' takes " + std::to_string(n) + " parameter(s)");
        }
    };
    if (kind == "point") {
        need(1);
        return EffectPrior::point_mass(params[0]);
    }
    if (kind == "uniform") {
        need(2);
        return EffectPrior::uniform(params[0], params[1]);
    }
    if (kind == "normal") {
        need(2);
        return EffectPrior::normal(params[0], params[1]);
    }
    if (kind == "exponential") {
        need(1);
        return EffectPrior::exponential(params[0]);
    }
    throw InputError("unknown prior kind '" + kind + "'");
}

int do_rankprob(const RankprobArgs& a, std::ostream& out) {
    const auto pop = TestPopulation::make(a.m, a.m0, parse_prior(a.prior));
    FocalKind focal = pop.m1 > 0 ? FocalKind::alternative : FocalKind::null;
    if (a.focal == "null") focal = FocalKind::null;
    if (a.focal == "alternative") focal = FocalKind::alternative;
    McConfig mc;
    mc.replications = a.mc_reps;
    mc.seed = a.seed;
    mc.threads = resolve_threads(a.threads);
    const auto exact = rank_prob_exact_mc(pop, a.focal_effect, focal, mc);
    const auto approx = rank_prob_normal_approx(pop, a.focal_effect, focal, mc);
    std::optional<RankDistribution> brute;
    if (a.bruteforce > 0) {
        brute = rank_prob_bruteforce(pop, a.focal_effect, focal, a.bruteforce, mix_seed(a.seed, 1), mc.threads);
    }

    std::ostringstream csv;
    csv << "k,exact_mc,exact_mc_se,normal_approx,normal_approx_se,abs_deviation";
    if (brute) csv << ",bruteforce,bruteforce_abs_deviation";
    csv << '\n';
    for (std::size_t k = 0; k < exact.size(); ++k) {
        csv << k + 1 << ',' << format_double(exact.probabilities[k]) << ',' << format_double(exact.standard_errors[k])
            << ',' << format_double(approx.probabilities[k]) << ',' << format_double(approx.standard_errors[k])
            << ',' << format_double(std::abs(exact.probabilities[k] - approx.probabilities[k]));
        if (brute) {
            csv << ',' << format_double(brute->probabilities[k]) << ','
                << format_double(std::abs(exact.probabilities[k] - brute->probabilities[k]));
        }
        csv << '\n';
    }
    if (a.output_dir.empty()) {
        out << csv.str();
    } else {
        const auto dir = prepare_output_dir(a.output_dir);
        auto f = open_output(dir / "rankprob.csv");
        f << csv.str();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
    std::uint64_t seed = 20240601;
    unsigned threads = 0;
    std::vector<int> criteria;
    bool inject_cdf_fault = false;
};

int do_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
    for (int id : a.criteria) {
        if (id < 1 || id > kCriterionCount) throw InputError("criterion ids run from 1 to 10");
    }
    ValidationOptions opt;
    opt.seed = a.seed;
    opt.threads = a.threads;
    testing::set_cdf_fault(a.inject_cdf_fault);
    std::vector<CriterionReport> reports;
    try {
        reports = run_validation(opt, a.criteria);
    } catch (...) {
        testing::set_cdf_fault(false);
        throw;
    }
    testing::set_cdf_fault(false);
    print_report(out, reports);
    for (const auto& r : reports) err << "criterion " << r.id << ": " << r.seconds << " s\n";
    const auto passed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.passed; });
    out << passed << " of " << reports.size() << " criteria passed\n";
    return all_passed(reports) ? kExitOk : kExitValidationFailed;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Covariate-weighted multiple testing"};
    app.name("covw");
    app.require_subcommand(1);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Weight and test a CSV of p-values and covariates");
    analyze->add_option("--input", an.input, "CSV with pvalue, covariate and optional id columns")->required();
    analyze->add_option("--output-dir", an.output_dir, "Directory for weights.csv, diagnostics.json and plot data")
        ->required();
    analyze->add_option("--method", an.method)->check(CLI::IsMember(method_tags()))->capture_default_str();
    analyze->add_option("--alpha", an.alpha)->capture_default_str();
    analyze->add_option("--tails", an.tails)->check(CLI::IsMember({1, 2}))->capture_default_str();
    analyze->add_option("--seed", an.seed)->capture_default_str();
    analyze->add_option("--mode", an.mode)->check(CLI::IsMember({"fwer", "fdr"}))->capture_default_str();
    analyze->add_option("--threads", an.threads, "Worker cap, 0 = all cores")->capture_default_str();
    analyze->add_option("--mc-reps", an.mc_reps, "Rank-probability Monte Carlo draws")->capture_default_str();
    analyze->add_option("--groups", an.groups, "DCW group count, 0 = search")->capture_default_str();
    analyze->add_option("--max-groups", an.max_groups, "Largest DCW group count searched")->capture_default_str();
    analyze->add_option("--bins", an.bins, "DCW bins per group")->capture_default_str();
    analyze->add_flag("--boxcox", an.boxcox, "Box-Cox transform positive covariates before regression");
    analyze->add_option("--known-m1", an.known_m1, "Use this alternative count instead of the Storey estimate");

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario and write metrics and plot data");
    simulate->add_option("--config", sm.config, "Scenario JSON; flags override its fields");
    simulate->add_option("--output-dir", sm.output_dir)->required();
    simulate->add_option("--figure", sm.figure)
        ->check(CLI::IsMember({"power", "dilution", "effect-relationship"}))
        ->capture_default_str();
    simulate->add_option("--m", sm.m);
    simulate->add_option("--m0", sm.m0, "Null count for the effect-relationship figure");
    simulate->add_option("--pi0", sm.pi0);
    simulate->add_option("--effects", sm.effects, "Mean covariate effect grid")->delimiter(',');
    simulate->add_option("--cv", sm.cv);
    simulate->add_option("--rho", sm.rho);
    simulate->add_option("--block-size", sm.block_size);
    simulate->add_option("--reps", sm.replications);
    simulate->add_option("--alpha", sm.alpha);
    simulate->add_option("--seed", sm.seed);
    simulate->add_option("--mode", sm.mode)->check(CLI::IsMember({"fwer", "fdr"}));
    simulate->add_option("--methods", sm.methods)->delimiter(',')->check(CLI::IsMember(method_tags()));
    simulate->add_option("--crw-source", sm.crw_source)->check(CLI::IsMember({"oracle", "estimated"}));
    simulate->add_option("--mc-reps", sm.mc_reps);
    simulate->add_option("--groups", sm.groups);
    simulate->add_option("--pi0-grid", sm.pi0_grid, "Null proportions for the dilution figure")->delimiter(',');
    simulate->add_option("--rho-grid", sm.rho_grid, "Correlations for the effect-relationship figure")
        ->delimiter(',');
    simulate->add_option("--inner-draws", sm.inner_draws, "Monte Carlo draws per covariate effect draw");
    simulate->add_option("--threads", sm.threads, "Worker cap, 0 = all cores");

    RankprobArgs rp;
    auto* rankprob = app.add_subcommand("rankprob", "Tabulate covariate rank probabilities");
    rankprob->add_option("--m", rp.m)->capture_default_str();
    rankprob->add_option("--m0", rp.m0)->capture_default_str();
    rankprob->add_option("--prior", rp.prior, "point:E | uniform:LO,HI | normal:MEAN,SD | exponential:RATE")
        ->capture_default_str();
    rankprob->add_option("--focal-effect", rp.focal_effect)->capture_default_str();
    rankprob->add_option("--focal", rp.focal, "null or alternative (default: alternative when m0 < m)")
        ->check(CLI::IsMember({"null", "alternative"}));
    rankprob->add_option("--mc-reps", rp.mc_reps)->capture_default_str();
    rankprob->add_option("--bruteforce", rp.bruteforce, "Brute-force samples, 0 = skip")->capture_default_str();
    rankprob->add_option("--seed", rp.seed)->capture_default_str();
    rankprob->add_option("--threads", rp.threads, "Worker cap, 0 = all cores");
    rankprob->add_option("--output-dir", rp.output_dir, "Write rankprob.csv here instead of stdout");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Run the acceptance checks and print a pass/fail table");
    validate->add_option("--seed", va.seed)->capture_default_str();
    validate->add_option("--threads", va.threads, "Worker cap, 0 = all cores");
    validate->add_option("--criteria", va.criteria, "Subset of criterion ids")->delimiter(',');
    validate->add_flag("--inject-cdf-fault", va.inject_cdf_fault)->group("");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*analyze) return do_analyze(an, out);
        if (*simulate) return do_simulate(sm, out);
        if (*rankprob) return do_rankprob(rp, out);
        return do_validate(va, out, err);
    } catch (const std::exception& e) {
        // bad input files, flags, scenarios and degenerate data all land here
        err << "error: " << e.what() << '\n';
    }
    return kExitUsage;
}

} // namespace covw::cli
