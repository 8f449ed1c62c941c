#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace hsbench;
using Catch::Approx;

namespace {

TestSpec spec_of(const std::string& stat, const std::string& test_name, Json raw = nullptr, std::optional<long> n = std::nullopt) {
    Json j = {{"finding_id", "F"}, {"test_name", test_name}, {"statistic", stat}};
    if (!raw.is_null()) j["raw_data"] = raw;
    return parse_ground_truth_record(j, {"rec", n});
}

const SampleDesign two50{DesignKind::independent, 50, 50, 2};

} // namespace

TEST_CASE("conversion hand cases") {
    CHECK(d_from_t(4.5, two50) == Approx(0.9).epsilon(1e-12));
    CHECK(d_from_r(0.6) == Approx(1.5).epsilon(1e-12));
    CHECK(d_from_table({10, 20, 5, 10}) == Approx(0.0).margin(1e-14));
    CHECK(rank_biserial(50 * 40 / 2.0, 50, 40) == 0.0);
    CHECK(d_from_proportion(0.7, 0.5) == Approx(0.8).epsilon(1e-12));
    CHECK(d_from_t(3.0, {DesignKind::paired, 9, 0, 1}) == Approx(1.0).epsilon(1e-12));
    CHECK(d_from_log_odds_ratio(std::numbers::pi / std::sqrt(3.0)) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("standard errors") {
    CHECK(effect_se(0.0, two50) == Approx(0.2).epsilon(1e-12));
    CHECK(effect_se(0.0, {DesignKind::paired, 100, 0, 1}) == Approx(0.1).epsilon(1e-12));
    CHECK(effect_se(0.8, two50) == Approx(std::sqrt(0.04 + 0.0032)).epsilon(1e-12));
    CHECK(effect_se(0.8, two50) == Approx(0.2079).margin(1e-4));
    CHECK(effect_se(0.0, {DesignKind::correlation, 101, 0, 1}) == Approx(0.2).epsilon(1e-12));

    EffectSize table;
    table.design = {DesignKind::contingency, 40, 0, 2};
    table.cells = {10, 10, 10, 10};
    CHECK(effect_se(table) == Approx(std::sqrt(3.0) / std::numbers::pi * std::sqrt(0.4)).epsilon(1e-12));

    EffectSize prop;
    prop.design = {DesignKind::binomial, 100, 0, 1};
    prop.d = d_from_proportion(0.7, 0.5);
    CHECK(effect_se(prop) == Approx(2 * std::sqrt(0.21 / 100) / 0.5).epsilon(1e-12));
    // Boundary proportions fall back to the shrunk estimate.
    prop.d = d_from_proportion(1.0, 0.5);
    CHECK(effect_se(prop) == Approx(2 * std::sqrt((100.5 / 101) * (0.5 / 101) / 100) / 0.5).epsilon(1e-12));
    CHECK_THROWS_AS(effect_se(0.0, {DesignKind::anova, 30, 0, 3}), Error);
}

TEST_CASE("Haldane correction applies only when a cell is empty") {
    CHECK(haldane_cells({1, 2, 3, 4}) == std::vector<double>{1, 2, 3, 4});
    CHECK(haldane_cells({0, 2, 3, 4}) == std::vector<double>{0.5, 2.5, 3.5, 4.5});
    CHECK(std::isfinite(d_from_table({20, 0, 0, 20})));
    CHECK(d_from_table({20, 0, 0, 20}) == Approx(std::log(20.5 * 20.5 / 0.25) * std::sqrt(3.0) / std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("cohen_d from reported statistics") {
    SECTION("D.2 record") {
        const auto gt = test_support::fixture_json("bundles/d2_example/ground_truth.json");
        const auto spec = parse_ground_truth_record(gt["studies"][0]["sub_studies"][0]["human_data"]["statistical_results"][0]);
        const auto e = cohen_d(spec);
        CHECK(e.d == Approx(0.9).epsilon(1e-12));
        CHECK(e.se == Approx(std::sqrt(0.04 + 0.81 / 200)).epsilon(1e-12));
        CHECK(e.direction == Direction::positive);
    }
    SECTION("F with df1 = 1 matches the t route") {
        Json raw = {{"a", {{"mean", 0.0}, {"n", 35}}}, {"b", {{"mean", 1.0}, {"n", 35}}}};
        const auto f = cohen_d(spec_of("F(1, 68) = 6.38", "ANOVA", raw));
        const auto t = cohen_d(spec_of("t(68) = -" + parser_detail::format_number(std::sqrt(6.38)), "t-test", raw));
        CHECK(f.d == Approx(t.d).epsilon(1e-12));
        CHECK(f.d < 0);
    }
    SECTION("F with df1 > 1 has no conversion") {
        try {
            cohen_d(spec_of("F(2, 57) = 4.1", "ANOVA"));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::unsupported_conversion);
        }
    }
    SECTION("correlation families") {
        CHECK(cohen_d(spec_of("r(98) = 0.6", "correlation")).d == Approx(1.5).epsilon(1e-12));
        CHECK(cohen_d(spec_of("z = " + parser_detail::format_number(std::atanh(0.6)), "correlation", nullptr, 100)).d ==
              Approx(1.5).epsilon(1e-12));
        Json raw = {{"a", {{"mean", 2.0}, {"n", 20}}}, {"b", {{"mean", 1.0}, {"n", 20}}}};
        CHECK(cohen_d(spec_of("U = 200", "Mann-Whitney", raw)).d == Approx(0.0).margin(1e-15));
        try {
            cohen_d(spec_of("r(10) = 1", "correlation"));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::undefined_effect);
        }
    }
    SECTION("chi-square uses 2x2 group counts") {
        Json raw = {{"treat", {{"n", 20}, {"k", 15}}}, {"ctrl", {{"n", 20}, {"k", 5}}}};
        const auto e = cohen_d(spec_of("χ2(1, N = 40) = 10", "chi-square", raw));
        CHECK(e.d == Approx(std::log(15.0 * 15 / 25) * std::sqrt(3.0) / std::numbers::pi).epsilon(1e-12));
        CHECK(e.d > 0);
        CHECK_THROWS_AS(cohen_d(spec_of("χ2(1, N = 40) = 10", "chi-square")), Error);
    }
    SECTION("binomial proportion") {
        Json j = {{"finding_id", "F"}, {"test_name", "binomial"}, {"statistic", "prop = 0.7"}, {"p0", 0.5}};
        const auto e = cohen_d(parse_ground_truth_record(j, {"rec", 100}));
        CHECK(e.d == Approx(0.8).epsilon(1e-12));
    }
}

TEST_CASE("cohen_d from recomputed outcomes") {
    SampleVector a{{2, 3, 4, 5}, "a"}, b{{1, 2, 3, 4}, "b"};
    const auto t = t_test(a, &b, TTestMode::independent_pooled);
    const auto e = cohen_d(t);
    // Pooled sd sqrt(5/3), mean gap 1.
    CHECK(e.d == Approx(1 / std::sqrt(5.0 / 3)).epsilon(1e-12));
    std::vector<SampleVector> g = {a, b};
    CHECK(cohen_d(anova_oneway(g)).d == Approx(e.d).epsilon(1e-12));

    SampleVector hi{{2, 2}, ""}, lo{{1, 1}, ""};
    auto inf = t_test(hi, &lo, TTestMode::independent_pooled);
    CHECK_THROWS_AS(cohen_d(inf), Error);

    CHECK(cohen_d(binomial_test(70, 100, 0.5)).d == Approx(0.8).epsilon(1e-12));
    CHECK(cohen_d(chi_square({{10, 10}, {10, 10}})).d == Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(cohen_d(chi_square({{1, 2, 3}, {3, 2, 1}})), Error);
}

TEST_CASE("d is odd in signed statistics and increasing in r") {
    for (double t : {0.3, 1.7, 4.2, 9.0}) {
        CHECK(d_from_t(-t, two50) == -d_from_t(t, two50));
        CHECK(d_from_r(-t / 10) == -d_from_r(t / 10));
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (double r = -0.99; r < 0.99; r += 0.01) {
        const double d = d_from_r(r);
        CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("recovered d converges to the simulated standardized difference") {
    std::mt19937_64 eng(99);
    for (double delta : {0.0, 0.5, 1.2}) {
        std::normal_distribution<double> x(delta, 1.0), y(0.0, 1.0);
        SampleVector a, b;
        for (int i = 0; i < 10000; ++i) {
            a.values.push_back(x(eng));
            b.values.push_back(y(eng));
        }
        CHECK(cohen_d(t_test(a, &b, TTestMode::independent_pooled)).d == Approx(delta).margin(0.05));
    }
}
