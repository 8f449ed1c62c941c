// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
// Tolerances are fixed here and never loosened to make a run pass.

#include "oracles.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hsbench;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;
    std::vector<std::string> failures;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (failures.size() < 5) failures.push_back(what);
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }
bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- 1

void pas_analytic(Check& c) {
    const auto t0 = Clock::now();
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    double worst = 0;
    for (double h : grid) {
        c.expect(pas_test({0.5}, {h}).value == 0.5 && pas_test({h}, {0.5}).value == 0.5, "pi_h = 0.5 gives exactly 0.5");
        for (double a : grid) {
            const double s = pas_test({h}, {a}).value;
            c.expect(s >= 0 && s <= 1, "bounds");
            c.expect(s == pas_test({a}, {h}).value, "symmetry");
            // 3-way identities against the binary score.
            const auto hp = directional_posterior({h}, Direction::positive);
            const auto ap = directional_posterior({a}, Direction::positive);
            const auto an = directional_posterior({a}, Direction::negative);
            const auto hu = directional_posterior({h}, Direction::none);
            const auto au = directional_posterior({a}, Direction::none);
            const double same = pas_directional(hp, ap).value;
            const double opposite = pas_directional(hp, an).value;
            const double unsigned_ = pas_directional(hu, au).value;
            worst = std::max({worst, std::abs(same - s), std::abs(opposite - (1 - h) * (1 - a)),
                              std::abs(unsigned_ - (h * a / 2 + (1 - h) * (1 - a)))});
            c.expect(std::abs(same - s) <= 1e-12, "same sign reduces to binary");
            c.expect(std::abs(opposite - (1 - h) * (1 - a)) <= 1e-12, "opposite signs keep only null agreement");
            c.expect(std::abs(unsigned_ - (h * a / 2 + (1 - h) * (1 - a))) <= 1e-12, "unsigned split");
            c.expect(same - opposite >= -1e-15, "agreeing sign never scores below disagreeing sign");
        }
    }
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 1.0, "runtime < 1 s");
    c.detail << "101x101 grid, max identity error " << num(worst) << ", " << num(elapsed) << " s";
}

// ---------------------------------------------------------------- 2

void bayes_factor_oracles(Check& c) {
    const auto t0 = Clock::now();
    double worst_binom = 0;
    for (int n = 1; n <= 20; ++n) {
        for (int k = 0; k <= n; ++k) {
            for (double p0 : {0.5, 0.2, 0.75}) {
                const double lib = std::exp(binomial_log_bf(k, n, p0));
                const double err = std::max(std::abs(lib / oracle::binomial_bf_beta(k, n, p0) - 1),
                                            std::abs(lib / oracle::binomial_bf_quadrature(k, n, p0) - 1));
                worst_binom = std::max(worst_binom, err);
            }
        }
    }
    c.expect(worst_binom <= 1e-12, "Beta-Binomial BF to machine precision");

    double worst_chi = 0;
    for (double chi2 : {0.5, 3.84, 10.0, 40.0}) {
        for (double df : {1.0, 2.0, 4.0}) {
            for (double n : {20.0, 100.0, 1000.0}) {
                const double hand = std::exp(chi2 / 2) * std::pow(n, -df / 2);
                worst_chi = std::max(worst_chi, std::abs(std::exp(chi_square_log_bf(chi2, df, n)) / hand - 1));
            }
        }
    }
    c.expect(worst_chi <= 1e-9, "BIC chi-square BF");

    double worst_jzs = 0;
    std::uint64_t seed = 1;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        for (double n : {10.0, 50.0, 200.0}) {
            const double lib = std::exp(evidence_detail::t_route(t, {DesignKind::one_sample, n, 0, 1}, kDefaultScaleT));
            const double mc = oracle::jzs_bf_monte_carlo(t, n, n - 1, kDefaultScaleT, 1000000, seed++);
            const double err = std::abs(lib / mc - 1);
            worst_jzs = std::max(worst_jzs, err);
            c.expect(err < 0.01, "JZS vs Monte Carlo at t=" + num(t) + " n=" + num(n) + ": " + num(lib) + " vs " + num(mc));
        }
    }
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 120, "runtime < 2 min");
    c.detail << "binomial rel err " << num(worst_binom) << ", chi2 rel err " << num(worst_chi) << ", JZS vs 1e6-draw MC max rel err "
             << num(worst_jzs) << ", " << num(elapsed) << " s";
}

// ---------------------------------------------------------------- 3

void effect_conversions(Check& c) {
    const SampleDesign two50{DesignKind::independent, 50, 50, 2};
    double worst = 0;
    auto near = [&](double got, double want, const std::string& what) {
        worst = std::max(worst, std::abs(got - want));
        c.expect(close_abs(got, want, 1e-10), what + ": " + num(got));
    };
    near(d_from_t(4.5, two50), 0.9, "t=4.5, n=50,50");
    near(d_from_r(0.6), 1.5, "r=0.6");
    near(d_from_table({12, 24, 7, 14}), 0.0, "OR=1");
    near(d_from_r(rank_biserial(30 * 40 / 2.0, 30, 40)), 0.0, "U = n1 n2 / 2");
    near(d_from_proportion(0.7, 0.5), 0.8, "proportion 0.7 vs 0.5");
    near(d_from_r(std::tanh(std::atanh(0.6))), 1.5, "Fisher z -> r -> d");
    near(d_from_log_odds_ratio(std::log(9.0)), std::log(9.0) * std::sqrt(3.0) / std::numbers::pi, "log OR scaling");
    // F <-> t^2 on reported records, independent and paired.
    for (const char* test : {"t-test", "paired t-test"}) {
        for (double t : {0.7, 2.5, 6.1}) {
            Json raw = {{"a", {{"mean", 2.0}, {"n", 30}}}, {"b", {{"mean", 1.0}, {"n", 30}}}};
            Json jt = {{"finding_id", "F"}, {"test_name", test}, {"statistic", "t(58) = " + parser_detail::format_number(t)}, {"raw_data", raw}};
            Json jf = {{"finding_id", "F"}, {"test_name", std::string(test) + " as ANOVA"},
                       {"statistic", "F(1, 58) = " + parser_detail::format_number(t * t)}, {"raw_data", raw}};
            near(cohen_d(parse_ground_truth_record(jf)).d, cohen_d(parse_ground_truth_record(jt)).d, std::string("F = t^2, ") + test);
        }
    }
    // Recomputed data: two-group ANOVA against pooled t.
    SampleVector a{{3.1, 4.7, 5.2, 6.0, 4.4}, "a"}, b{{2.2, 3.9, 3.0, 4.1}, "b"};
    std::vector<SampleVector> g = {a, b};
    near(cohen_d(anova_oneway(g)).d, cohen_d(t_test(a, &b, TTestMode::independent_pooled)).d, "recomputed F = t^2");
    c.detail << "max abs error " << num(worst);
}

// ---------------------------------------------------------------- 4

void aggregation(Check& c) {
    std::vector<double> ex = {0.9, 0.7};
    const double f = fisher_combine(ex);
    c.expect(close_abs(f, 0.8209, 1e-4), "Fisher-z (0.9, 0.7) = " + num(f));

    std::mt19937_64 eng(77);
    std::uniform_real_distribution<double> u(0.001, 0.999), wd(0.1, 3);
    int props = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t n = 1 + rep % 7;
        std::vector<double> s(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = u(eng);
            w[i] = wd(eng);
        }
        std::vector<double> flat(n, s[0]);
        c.expect(close_abs(fisher_combine(flat, w), s[0], 1e-12), "idempotence");
        auto ps = s, pw = w;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), eng);
        for (std::size_t i = 0; i < n; ++i) {
            ps[i] = s[perm[i]];
            pw[i] = w[perm[i]];
        }
        c.expect(close_abs(fisher_combine(ps, pw), fisher_combine(s, w), 1e-12), "order invariance");
        auto up = s;
        up[rep % n] = std::min(0.9995, up[rep % n] + 0.005);
        c.expect(fisher_combine(up, w) > fisher_combine(s, w), "monotonicity");
        props += 3;
    }

    std::uniform_real_distribution<double> score(0, 1);
    std::uniform_int_distribution<int> count(0, 4);
    int trees = 0;
    double worst = 0;
    while (trees < 100) {
        ScoreTree tree;
        std::vector<oracle::Study> ref;
        const int studies = 1 + count(eng);
        for (int s = 0; s < studies; ++s) {
            StudyNode st;
            oracle::Study os;
            for (int fi = count(eng); fi > 0; --fi) {
                FindingNode fn;
                fn.weight = wd(eng);
                oracle::Finding of{fn.weight, {}};
                for (int ti = count(eng); ti > 0; --ti) {
                    const double sc = score(eng), w = wd(eng);
                    fn.tests.push_back({"t", sc, w});
                    of.leaves.push_back({sc, w});
                }
                st.findings.push_back(fn);
                os.push_back(of);
            }
            tree.studies.push_back(st);
            ref.push_back(os);
        }
        const double want = oracle::benchmark(ref);
        if (std::isnan(want)) continue;
        const double got = *benchmark_pas(tree).benchmark;
        worst = std::max(worst, std::abs(got - want));
        c.expect(close_abs(got, want, 1e-12), "tree " + std::to_string(trees));
        ++trees;
    }
    c.detail << "Fisher-z example " << num(f) << ", " << props << " property checks, 100 random trees max error " << num(worst);
}

// ---------------------------------------------------------------- 5

void global_validity_fixtures(Check& c) {
    std::vector<ValidityStudy> one = {{"S", {{"F", {{1.96, 1.0, 0.0, 0.0}}}}}};
    const auto g1 = global_validity(one);
    const auto& f = g1.studies.at(0).findings.at(0);
    c.expect(close_abs(f.p, 0.0500, 1e-4), "finding p = " + num(f.p));
    c.expect(close_abs(f.z_star, 1.6449, 1e-4), "Z* = " + num(f.z_star));

    std::vector<ValidityStudy> perfect;
    for (int s = 0; s < 4; ++s) {
        ValidityStudy st{"S" + std::to_string(s), {}};
        for (int fi = 0; fi < 3; ++fi) st.findings.push_back({"F" + std::to_string(fi), {{0.4, 0.15, 0.4, 0.12}, {-0.2, 0.2, -0.2, 0.1}}});
        perfect.push_back(st);
    }
    const auto gp = global_validity(perfect);
    c.expect(gp.p_global && *gp.p_global > 0.99, "perfect match p_global = " + num(gp.p_global.value_or(-1)));

    std::vector<ValidityStudy> shifted;
    for (int s = 0; s < 2; ++s) shifted.push_back({"S" + std::to_string(s), {{"F", {{1.5, 0.02, 0.5, 0.02}, {1.0, 0.02, 0.0, 0.02}}}}});
    const auto gs = global_validity(shifted);
    c.expect(gs.p_global && *gs.p_global < 1e-6, "shifted p_global = " + num(gs.p_global.value_or(-1)));
    c.detail << "p = " << num(f.p) << ", Z* = " << num(f.z_star) << ", perfect p_global = " << num(gp.p_global.value_or(-1))
             << ", shifted p_global = " << num(gs.p_global.value_or(-1));
}

// ---------------------------------------------------------------- 6

void bootstrap_checks(Check& c) {
    c.expect(kDefaultBootstrapReplicates == 200, "B = 200 default");
    std::mt19937_64 eng(5150);
    std::vector<double> data(100);
    for (auto& x : data) x = static_cast<double>(eng() & 1);
    const std::vector<std::size_t> sizes = {data.size()};
    auto mean_of = [&](std::size_t, const std::vector<std::size_t>& idx) {
        double s = 0;
        for (auto i : idx) s += data[i];
        return s / static_cast<double>(idx.size());
    };
    const auto a = bootstrap_se(sizes, mean_of, kDefaultBootstrapReplicates, 2718, 1);
    const auto b = bootstrap_se(sizes, mean_of, kDefaultBootstrapReplicates, 2718, 1);
    const auto p = bootstrap_se(sizes, mean_of, kDefaultBootstrapReplicates, 2718, 4);
    c.expect(a.replicates == 200, "replicate count");
    c.expect(close_rel(a.study_se[0], 0.05, 0.15), "SE " + num(a.study_se[0]) + " within 15% of 0.05");
    c.expect(a.study_se[0] == b.study_se[0] && a.study_se[0] == p.study_se[0], "bit-identical across runs and jobs");

    // Study-level bootstrap through the full scoring path.
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto t = test_support::synth_fixture("null_behavior", 8);
    std::vector<StudyRun> runs = {{&bundle, &t}};
    const auto s1 = bootstrap_study_pas(runs, {}, 30, 99, 1);
    const auto s3 = bootstrap_study_pas(runs, {}, 30, 99, 3);
    c.expect(s1.study_se == s3.study_se && s1.total_se == s3.total_se, "study bootstrap identical at jobs 1 and 3");
    c.detail << "Bernoulli mean SE " << num(a.study_se[0]) << " (target 0.05), study SE " << num(s1.study_se[0]) << " at jobs 1 and 3";
}

// ---------------------------------------------------------------- 7

void sensitivity(Check& c) {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto good = test_support::synth_fixture("human_matched", 21);
    const auto bad = test_support::synth_fixture("null_behavior", 21);
    std::vector<AgentRuns> agents = {{"near-human", {&good}}, {"null", {&bad}}};
    const auto rep = sensitivity_sweep({&bundle}, agents, {0.5, 0.7071, 1.0}, {}, 2, 0.7071);
    double max_delta = 0;
    for (const auto& row : rep.rows) {
        c.expect(row.spearman_rho == 1.0, "rho at r=" + num(row.r) + " is " + num(row.spearman_rho));
        max_delta = std::max(max_delta, row.max_delta_pas);
    }
    c.expect(!rep.degenerate_ranking, "ranking not degenerate");
    c.expect(max_delta < 0.05, "max delta PAS " + num(max_delta));
    c.detail << "rho = 1 at r in {0.5, 0.7071, 1.0}, max dPAS " << num(max_delta);
}

// ---------------------------------------------------------------- 8

void end_to_end(Check& c) {
    const auto t0 = Clock::now();
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto matched = evaluate(bundle, test_support::synth_fixture("human_matched", 1));
    const auto null = evaluate(bundle, test_support::synth_fixture("null_behavior", 1));
    const auto gradient = evaluate(test_support::fixture_bundle("gradient_study"), test_support::synth_fixture("gradient_matched", 2));
    const double pm = matched.study_pas.value_or(-1), pn = null.study_pas.value_or(2);
    const double ecs = gradient.ecs_findings.at(0).value.value_or(-2);
    c.expect(pm >= 0.95, "matched PAS " + num(pm));
    c.expect(pn <= 0.3, "null PAS " + num(pn));
    c.expect(ecs >= 0.9, "gradient ECS " + num(ecs));
    for (const auto* r : {&matched, &null, &gradient}) c.expect(r->tests.size() + r->exclusions.size() > 0, "coverage");
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 60, "runtime < 1 min");
    c.detail << "matched PAS " << num(pm) << ", null PAS " << num(pn) << ", ECS " << num(ecs) << " at n=500/condition, " << num(elapsed) << " s";
}

// ---------------------------------------------------------------- 9

void estimator_variance(Check& c) {
    std::mt19937_64 eng(31337);
    std::normal_distribution<double> z(0, 1);
    const int n = 100000;
    double s1 = 0, s2 = 0, h1 = 0, h2 = 0;
    for (int i = 0; i < n; ++i) {
        const double l = z(eng);
        const double s = sigmoid(l), h = l > 0 ? 1.0 : 0.0;
        s1 += s;
        s2 += s * s;
        h1 += h;
        h2 += h * h;
    }
    const double var_s = s2 / n - (s1 / n) * (s1 / n);
    const double var_h = h2 / n - (h1 / n) * (h1 / n);
    c.expect(var_s < 0.25, "sigmoid variance below 0.25");
    c.expect(var_s < var_h, "sigmoid variance below simulated hard-threshold variance");
    c.expect(var_s >= 0.0625 / 2 && var_s <= 0.0625 * 2, "within a factor 2 of 0.0625");
    c.detail << "Var(sigmoid(L)) = " << num(var_s) << ", hard threshold " << num(var_h) << ", delta method 0.0625";
}

// ---------------------------------------------------------------- 10

void parser_corpus(Check& c) {
    int parsed = 0, total = 0;
    for (const auto& e : test_support::fixture_json("corpus/statistics.json")) {
        ++total;
        try {
            const auto s = parse_statistic(e.at("text").get<std::string>());
            const bool ok = to_string(s.family) == e.at("family").get<std::string>() && s.value == e.at("value").get<double>() &&
                            to_string(s.relation) == e.at("relation").get<std::string>() && s.dfs == e.at("dfs").get<std::vector<double>>() &&
                            (e.at("n_total").is_null() ? !s.n_total : s.n_total == e.at("n_total").get<long>());
            c.expect(ok, "typed mismatch: " + e.at("text").get<std::string>());
            parsed += ok;
        } catch (const Error& err) {
            c.expect(false, err.what());
        }
    }
    for (const auto& e : test_support::fixture_json("corpus/p_values.json")) {
        ++total;
        try {
            const auto p = parse_p_value(e.at("text").get<std::string>());
            const bool ok = e.at("value").is_null() ? (!p.value && p.qualitative == Qualitative::not_significant)
                                                    : (p.value == e.at("value").get<double>() && to_string(p.relation) == e.at("relation").get<std::string>());
            c.expect(ok, "typed mismatch: " + e.at("text").get<std::string>());
            parsed += ok;
        } catch (const Error& err) {
            c.expect(false, err.what());
        }
    }

    std::mt19937_64 eng(4242);
    std::uniform_int_distribution<int> fam(0, 6), rel(0, 2), coin(0, 1);
    std::uniform_int_distribution<long> df(1, 100000);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int trips = 0;
    for (int i = 0; i < 10000; ++i) {
        ReportedStatistic s;
        s.family = static_cast<Family>(fam(eng));
        s.relation = static_cast<Relation>(rel(eng));
        const double x = unit(eng);
        switch (s.family) {
        case Family::t:
        case Family::z: s.value = std::ldexp(x - 0.5, static_cast<int>(df(eng) % 12)); break;
        case Family::r: s.value = 2 * x - 1; break;
        case Family::binomial_prop: s.value = x; break;
        default: s.value = std::ldexp(x, static_cast<int>(df(eng) % 12)); break;
        }
        const std::size_t need = parser_detail::required_dfs(s.family);
        if (need && coin(eng)) {
            for (std::size_t k = 0; k < need; ++k) s.dfs.push_back(static_cast<double>(df(eng)) / (coin(eng) ? 1.0 : 4.0));
        }
        if (s.family == Family::chi_square && coin(eng)) s.n_total = df(eng);
        try {
            const bool ok = parse_statistic(render_statistic(s)).same_as(s);
            c.expect(ok, "round trip: " + render_statistic(s));
            trips += ok;
        } catch (const Error& err) {
            c.expect(false, err.what());
        }
    }
    c.detail << parsed << "/" << total << " corpus strings, " << trips << "/10000 round trips";
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void(Check&)> run;
    };
    const std::vector<Criterion> criteria = {
        {"PAS analytic suite", pas_analytic},
        {"Bayes-factor oracles", bayes_factor_oracles},
        {"effect-size conversions", effect_conversions},
        {"aggregation", aggregation},
        {"global validity", global_validity_fixtures},
        {"bootstrap", bootstrap_checks},
        {"prior sensitivity", sensitivity},
        {"end-to-end scoring", end_to_end},
        {"estimator variance", estimator_variance},
        {"parser corpus and round trip", parser_corpus},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].run(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::printf("%s [%zu] %s: %s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].name, c.detail.str().c_str());
        for (const auto& f : c.failures) std::printf("      %s\n", f.c_str());
        std::fflush(stdout);
        failed += !c.ok;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
