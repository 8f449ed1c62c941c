#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace hsbench;
using Catch::Approx;

namespace {

std::size_t covered(const EvaluationReport& r) { return r.tests.size() + r.exclusions.size(); }

ReportSummary summary(std::string model, std::string method, std::string domain, std::optional<double> pas, std::optional<double> se = std::nullopt) {
    ReportSummary s;
    s.model = std::move(model);
    s.method = std::move(method);
    s.study_id = "S";
    s.domain = std::move(domain);
    s.pas = pas;
    s.bootstrap_se = se;
    return s;
}

} // namespace

TEST_CASE("matched and null transcripts bracket the score") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto matched = evaluate(bundle, test_support::synth_fixture("human_matched", 1));
    REQUIRE(matched.study_pas.has_value());
    CHECK(*matched.study_pas >= 0.95);
    CHECK(covered(matched) == bundle.test_count());
    CHECK(matched.exclusions.empty());
    CHECK(matched.compliance.refusal_rate == 0);
    for (const auto& t : matched.tests) CHECK(t.directional);

    const auto null = evaluate(bundle, test_support::synth_fixture("null_behavior", 1));
    REQUIRE(null.study_pas.has_value());
    CHECK(*null.study_pas <= 0.3);
    CHECK(covered(null) == bundle.test_count());
}

TEST_CASE("an all-refusal transcript is excluded everywhere") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto r = evaluate(bundle, test_support::synth_fixture("all_refuse", 1));
    CHECK_FALSE(r.study_pas.has_value());
    CHECK(r.tests.empty());
    CHECK(r.exclusions.size() == bundle.test_count());
    CHECK(r.compliance.refusal_rate == 1.0);
    const auto j = report_to_json(r);
    CHECK(j.at("study_pas").is_null());

    AgentTranscript empty;
    const auto e = evaluate(bundle, empty);
    CHECK_FALSE(e.study_pas.has_value());
    CHECK(e.compliance.refusal_rate == 1.0);
    CHECK(covered(e) == bundle.test_count());
}

TEST_CASE("identical effects give high per-finding ECS") {
    const auto bundle = test_support::fixture_bundle("gradient_study");
    const auto r = evaluate(bundle, test_support::synth_fixture("gradient_matched", 2));
    REQUIRE(r.ecs_findings.size() == 1);
    CHECK(r.ecs_findings[0].pairs == 3);
    REQUIRE(r.ecs_findings[0].value.has_value());
    CHECK(*r.ecs_findings[0].value >= 0.9);
    REQUIRE(r.ecs_global.has_value());
    CHECK(*r.ecs_global == Approx(*r.ecs_findings[0].value).epsilon(1e-12));
}

TEST_CASE("evaluation is deterministic") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto t = test_support::synth_fixture("human_matched", 9);
    CHECK(report_to_json(evaluate(bundle, t)).dump() == report_to_json(evaluate(bundle, t)).dump());
}

TEST_CASE("binding mismatches become exclusions") {
    auto meta = test_support::fixture_json("bundles/effect_study/metadata.json");
    meta["findings"][0]["tests"][0]["binding"]["sub_study_id"] = "missing";
    const auto v = validate_bundle(test_support::fixture_json("bundles/effect_study/ground_truth.json"), meta);
    REQUIRE(v.ok());
    const auto r = evaluate(*v.bundle, test_support::synth_fixture("human_matched", 1));
    REQUIRE(r.exclusions.size() == 1);
    CHECK(r.exclusions[0].stage == "binding");
    CHECK(r.exclusions[0].code == ErrorCode::binding_mismatch);
    CHECK(r.study_pas.has_value());
    CHECK(covered(r) == 2);
}

TEST_CASE("normalized PAS is optional and bounded") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto t = test_support::synth_fixture("null_behavior", 4);
    CHECK_FALSE(evaluate(bundle, t).study_pas_normalized.has_value());
    EvaluateOptions o;
    o.normalized_pas = true;
    const auto r = evaluate(bundle, t, o);
    REQUIRE(r.study_pas_normalized.has_value());
    CHECK(*r.study_pas_normalized >= *r.study_pas - 1e-12);
    CHECK(*r.study_pas_normalized <= 1.0);
}

TEST_CASE("report JSON round-trips into a leaderboard summary") {
    const auto bundle = test_support::fixture_bundle("gradient_study");
    const auto r = evaluate(bundle, test_support::synth_fixture("gradient_matched", 2));
    auto j = report_to_json(r);
    CHECK(j.at("schema_version") == kReportSchemaVersion);
    const auto s = summary_from_json(j);
    CHECK(s.model == "synthetic");
    CHECK(s.domain == "social");
    CHECK(*s.pas == Approx(*r.study_pas).epsilon(1e-15));
    CHECK(s.effects.size() == r.effects.size());

    j["schema_version"] = "0.1";
    CHECK_THROWS_AS(summary_from_json(j), Error);
}

TEST_CASE("leaderboard") {
    SECTION("one report gives one row with the report's scalars") {
        const auto rows = leaderboard({summary("m", "A1", "cognition", 0.42)});
        REQUIRE(rows.size() == 1);
        CHECK(*rows[0].pas == 0.42);
        CHECK(rows[0].domain_pas.at("cognition") == 0.42);
        CHECK_FALSE(rows[0].ecs.has_value());
    }
    SECTION("ordering by PAS, NA last, stable on ties") {
        const auto rows = leaderboard({summary("low", "A1", "social", 0.30), summary("none", "A1", "social", std::nullopt),
                                       summary("high", "A1", "social", 0.40), summary("tie", "A1", "social", 0.30)});
        REQUIRE(rows.size() == 4);
        CHECK(rows[0].model == "high");
        CHECK(rows[1].model == "low");
        CHECK(rows[2].model == "tie");
        CHECK(rows[3].model == "none");
    }
    SECTION("cells average their studies and carry propagated SEs") {
        const auto rows = leaderboard({summary("m", "A1", "cognition", 0.3, 0.03), summary("m", "A1", "social", 0.5, 0.04)});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].studies == 2);
        CHECK(*rows[0].pas == Approx(0.4));
        CHECK(*rows[0].pas_se == Approx(0.025));
        // Equal study counts per domain: the mean of domain means is the benchmark.
        CHECK((rows[0].domain_pas.at("cognition") + rows[0].domain_pas.at("social")) / 2 == Approx(*rows[0].pas));
        const auto csv = leaderboard_csv(rows);
        CHECK(csv.find("model,method,studies,PAS,ECS,cognition,strategic,social\n") == 0);
        CHECK(csv.find("m,A1,2,0.4000 (0.0250),NA,0.3000,NA,0.5000") != std::string::npos);
    }
    CHECK(format_score(0.30412, 0.00781) == "0.3041 (0.0078)");
    CHECK(format_score(std::nullopt) == "NA");
}

TEST_CASE("study bootstrap is bit-identical across worker counts") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto t = test_support::synth_fixture("human_matched", 1);
    std::vector<StudyRun> runs = {{&bundle, &t}};
    const auto a = bootstrap_study_pas(runs, {}, 20, 5, 1);
    const auto b = bootstrap_study_pas(runs, {}, 20, 5, 3);
    REQUIRE(a.study_se.size() == 1);
    CHECK(a.study_se[0] == b.study_se[0]);
    CHECK(a.total_se == b.total_se);
    CHECK(a.study_se[0] >= 0);
}

TEST_CASE("sensitivity sweep ranks a matched agent above a null agent") {
    const auto bundle = test_support::fixture_bundle("effect_study");
    const auto good = test_support::synth_fixture("human_matched", 1);
    const auto bad = test_support::synth_fixture("null_behavior", 1);
    std::vector<AgentRuns> agents = {{"good", {&good}}, {"bad", {&bad}}};
    const auto rep = sensitivity_sweep({&bundle}, agents, {0.5, kDefaultScaleT, 1.0}, {}, 2);
    REQUIRE(rep.rows.size() == 3);
    for (const auto& row : rep.rows) CHECK(row.spearman_rho == Approx(1.0));
    const auto j = sensitivity_to_json(rep, {"good", "bad"});
    CHECK(j.at("rows").size() == 3);
}
