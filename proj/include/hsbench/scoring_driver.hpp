#pragma once

/**
 * @file scoring_driver.hpp
 *
 * @brief End-to-end evaluation of one agent transcript against one study bundle,
 * the report format, the model x method leaderboard and the prior-sensitivity sweep.
 *
 * Per test: the human posterior comes from the reported statistic at the human
 * sample size, the agent posterior from the recomputed test at the agent sample
 * size. A test is scored with the directional (+ / - / 0) dot product when both
 * sides carry a sign, and with the binary score otherwise. Anything that prevents
 * scoring lands in the exclusions ledger with the stage that failed.
 */

#include "aggregate.hpp"
#include "alignment.hpp"
#include "bundle_io.hpp"
#include "effect_size.hpp"
#include "evidence.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hsbench {

inline constexpr const char* kReportSchemaVersion = "1.0";

struct ScoredTest {
    std::string finding_id;
    std::string test_name;
    double weight = 1;
    double score = 0.5;
    bool directional = false;
    BayesFactor bf_human;
    BayesFactor bf_agent;
    DirectionalPosterior human;
    DirectionalPosterior agent;
    double agent_statistic = 0;
    std::vector<double> agent_dfs;
    double agent_n = 0;
    ComplianceReport compliance;
    std::optional<EffectSize> effect_human;
    std::optional<EffectSize> effect_agent;
};

struct Exclusion {
    std::string finding_id;
    std::string test_name;
    std::string stage;
    ErrorCode code = ErrorCode::empty_input;
    std::string reason;
};

struct FindingEcs {
    std::string finding_id;
    std::size_t pairs = 0;
    std::optional<double> value;
    bool zero_variance = false;
};

/// Effect pair as carried in reports: enough to pool ECS across studies later.
struct EffectRecord {
    std::string finding_id;
    std::string test_name;
    double d_human = 0;
    double se_human = 0;
    double d_agent = 0;
    double se_agent = 0;
    double weight = 1;
};

struct EvaluateOptions {
    PriorSpec prior;
    double fisher_epsilon = kFisherClamp;
    bool normalized_pas = false;
    /// Participant selection (with repeats) for bootstrap replicates; empty means everyone.
    std::vector<std::size_t> participant_order;
};

struct EvaluationReport {
    std::string schema_version = kReportSchemaVersion;
    std::string study_id;
    std::string domain;
    RunMetadata run;
    PriorSpec prior;
    ScoreTree tree;
    std::optional<double> study_pas;
    std::optional<double> study_pas_normalized;
    std::vector<ScoredTest> tests;
    std::vector<Exclusion> exclusions;
    /// Scored tests without a usable effect size (kept out of ECS and global validity only).
    std::vector<Exclusion> effect_exclusions;
    std::vector<EffectRecord> effects;
    std::vector<FindingEcs> ecs_findings;
    std::optional<double> ecs_global;
    bool ecs_global_degenerate = false;
    GlobalValidity validity;
    ComplianceReport compliance;
};

namespace driver_detail {

/// Trial-level roll-up: a trial is compliant when every item key and every Q-key a binding reads from its sub-study parses.
inline ComplianceReport roll_up(const StudyBundle& bundle, const AgentTranscript& t, const std::vector<std::size_t>& order) {
    std::map<std::string, std::set<std::string>> keys;
    for (const auto& f : bundle.findings) {
        for (const auto& bt : f.tests) {
            auto& k = keys[bt.binding.sub_study_id];
            if (bt.binding.selector == SelectorKind::question) k.insert(bt.binding.question);
            if (!bt.binding.pair_question.empty()) k.insert(bt.binding.pair_question);
        }
    }
    ComplianceReport rep;
    const std::size_t count = order.empty() ? t.participants.size() : order.size();
    for (std::size_t i = 0; i < count; ++i) {
        const auto& p = t.participants.at(order.empty() ? i : order[i]);
        for (const auto& trial : p.trials) {
            auto required = required_q_keys(trial.trial_info);
            if (auto it = keys.find(trial.sub_study_id); it != keys.end()) required.insert(it->second.begin(), it->second.end());
            const auto parsed = parse_response(trial.response_text);
            bool ok = true;
            for (const auto& q : required) {
                if (parsed.count(q)) ++rep.parsed_q;
                else ok = false;
            }
            rep.required_q += required.size();
            ++rep.total_trials;
            if (ok) ++rep.compliant_trials;
        }
    }
    rep.finish();
    return rep;
}

inline double self_dot(const DirectionalPosterior& p) {
    return p.p_pos * p.p_pos + p.p_neg * p.p_neg + p.p_null * p.p_null;
}

} // namespace driver_detail

/**
 * Scores a transcript against a validated bundle. Only schema problems in the
 * inputs abort; every per-test failure is recorded in `exclusions`.
 */
inline EvaluationReport evaluate(const StudyBundle& bundle, const AgentTranscript& transcript, const EvaluateOptions& opts = {}) {
    opts.prior.validate();
    EvaluationReport rep;
    rep.study_id = bundle.study_id;
    rep.domain = bundle.domain;
    rep.run = transcript.meta;
    rep.prior = opts.prior;
    rep.compliance = driver_detail::roll_up(bundle, transcript, opts.participant_order);

    StudyNode study{bundle.study_id, bundle.domain, {}, std::nullopt};
    StudyNode normalized = study;
    ValidityStudy validity_study{bundle.study_id, {}};
    std::vector<EffectPair> pairs;

    for (const auto& finding : bundle.findings) {
        FindingNode node{finding.finding_id, finding.weight, {}, std::nullopt};
        FindingNode norm_node = node;
        ValidityFinding vf{finding.finding_id, {}};
        std::vector<double> fh, fa;
        double test_weight_sum = 0;
        for (const auto& bt : finding.tests) test_weight_sum += bt.weight;

        for (const auto& bt : finding.tests) {
            auto exclude = [&](const char* stage, ErrorCode code, const std::string& why) {
                rep.exclusions.push_back({finding.finding_id, bt.test_name, stage, code, why});
            };
            if (!bt.spec) {
                exclude("human_record", bt.spec_issue ? bt.spec_issue->code : ErrorCode::missing_evidence,
                        bt.spec_issue ? bt.spec_issue->message : "no usable human record");
                continue;
            }
            TestSpec spec = *bt.spec;
            if (spec.design.kind == DesignKind::anova) spec.direction = Direction::none;

            ScoredTest st;
            st.finding_id = finding.finding_id;
            st.test_name = bt.test_name;
            st.weight = bt.weight;
            TestOutcome outcome;
            try {
                auto data = collect_test_data(transcript, bt.binding, opts.participant_order);
                st.compliance = data.report;
                outcome = run_bound_test(bt.binding, data);
            } catch (const Error& e) {
                exclude(e.code() == ErrorCode::binding_mismatch ? "binding" : "agent_test", e.code(), e.what());
                continue;
            }
            try {
                st.bf_human = bayes_factor(spec, opts.prior);
            } catch (const Error& e) {
                exclude("human_evidence", e.code(), e.what());
                continue;
            }
            try {
                st.bf_agent = bayes_factor(outcome, opts.prior);
            } catch (const Error& e) {
                exclude("agent_evidence", e.code(), e.what());
                continue;
            }
            const Direction agent_dir = outcome.direction;
            st.human = directional_posterior(posterior(st.bf_human), spec.direction);
            st.agent = directional_posterior(posterior(st.bf_agent), agent_dir);
            st.directional = spec.direction != Direction::none && agent_dir != Direction::none;
            st.score = st.directional ? pas_directional(st.human, st.agent).value : pas_test(posterior(st.bf_human), posterior(st.bf_agent)).value;
            st.agent_statistic = outcome.value;
            st.agent_dfs = outcome.dfs;
            st.agent_n = outcome.design.total();
            node.tests.push_back({bt.test_name, st.score, bt.weight});
            if (opts.normalized_pas) {
                const double ceiling = st.directional ? driver_detail::self_dot(st.human)
                                                      : st.human.p_null * st.human.p_null + (1 - st.human.p_null) * (1 - st.human.p_null);
                norm_node.tests.push_back({bt.test_name, std::min(1.0, st.score / ceiling), bt.weight});
            }

            try {
                st.effect_human = cohen_d(spec);
                st.effect_agent = cohen_d(outcome);
                const double w = finding.weight * bt.weight / test_weight_sum;
                pairs.push_back({*st.effect_human, *st.effect_agent, w});
                rep.effects.push_back({finding.finding_id, bt.test_name, st.effect_human->d, st.effect_human->se, st.effect_agent->d,
                                       st.effect_agent->se, w});
                fh.push_back(st.effect_human->d);
                fa.push_back(st.effect_agent->d);
                if (std::isfinite(st.effect_human->se) && std::isfinite(st.effect_agent->se) &&
                    st.effect_human->se * st.effect_human->se + st.effect_agent->se * st.effect_agent->se > 0) {
                    vf.tests.push_back({st.effect_agent->d, st.effect_agent->se, st.effect_human->d, st.effect_human->se});
                }
            } catch (const Error& e) {
                st.effect_human.reset();
                st.effect_agent.reset();
                rep.effect_exclusions.push_back({finding.finding_id, bt.test_name, "effect_size", e.code(), e.what()});
            }
            rep.tests.push_back(std::move(st));
        }

        FindingEcs fe{finding.finding_id, fh.size(), std::nullopt, false};
        if (fh.size() >= 2) {
            auto c = ecs_finding(fh, fa);
            fe.value = c.value;
            fe.zero_variance = c.zero_variance;
        }
        rep.ecs_findings.push_back(fe);
        study.findings.push_back(std::move(node));
        normalized.findings.push_back(std::move(norm_node));
        validity_study.findings.push_back(std::move(vf));
    }

    rep.tree.studies.push_back(std::move(study));
    try {
        rep.tree = benchmark_pas(std::move(rep.tree), opts.fisher_epsilon);
        rep.study_pas = rep.tree.studies.front().score;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::empty_input) throw;
    }
    if (opts.normalized_pas) {
        try {
            ScoreTree nt;
            nt.studies.push_back(std::move(normalized));
            rep.study_pas_normalized = benchmark_pas(std::move(nt), opts.fisher_epsilon).benchmark;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::empty_input) throw;
        }
    }
    if (pairs.size() >= 2) {
        try {
            rep.ecs_global = ecs_global(pairs);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::degenerate_input) throw;
            rep.ecs_global = 1.0;
            rep.ecs_global_degenerate = true;
        }
    }
    const ValidityStudy vs[] = {validity_study};
    rep.validity = global_validity(vs);
    return rep;
}

// ---------------------------------------------------------------- report JSON

namespace driver_detail {

inline Json opt_number(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

inline Json number(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline Json compliance_json(const ComplianceReport& c) {
    Json j = Json::object();
    j["total_trials"] = c.total_trials;
    j["compliant_trials"] = c.compliant_trials;
    j["required_q"] = c.required_q;
    j["parsed_q"] = c.parsed_q;
    j["refusal_rate"] = c.refusal_rate;
    return j;
}

inline Json posterior_json(const DirectionalPosterior& p) {
    return Json::array({p.p_pos, p.p_neg, p.p_null});
}

inline Json bf_json(const BayesFactor& bf) {
    Json j = Json::object();
    j["family"] = std::string(to_string(bf.family));
    j["log_bf10"] = bf.log_bf10;
    j["infinite"] = bf.infinite;
    return j;
}

inline Json exclusion_json(const Exclusion& e) {
    Json j = Json::object();
    j["finding_id"] = e.finding_id;
    j["test_name"] = e.test_name;
    j["stage"] = e.stage;
    j["code"] = std::string(to_string(e.code));
    j["reason"] = e.reason;
    return j;
}

} // namespace driver_detail

inline Json report_to_json(const EvaluationReport& r) {
    using namespace driver_detail;
    Json j = Json::object();
    j["schema_version"] = r.schema_version;
    j["study_id"] = r.study_id;
    j["domain"] = r.domain;
    Json run = Json::object();
    run["model"] = r.run.model;
    run["method"] = r.run.method;
    run["temperature"] = opt_number(r.run.temperature);
    run["seed"] = r.run.seed ? Json(*r.run.seed) : Json(nullptr);
    j["run"] = std::move(run);
    Json prior = Json::object();
    prior["r_t"] = r.prior.r_t;
    prior["r_anova"] = r.prior.r_anova;
    j["prior"] = std::move(prior);

    j["study_pas"] = opt_number(r.study_pas);
    j["pas_undefined"] = !r.study_pas.has_value();
    if (r.study_pas_normalized) j["study_pas_normalized"] = *r.study_pas_normalized;

    Json findings = Json::array();
    const StudyNode* study = r.tree.studies.empty() ? nullptr : &r.tree.studies.front();
    if (study) {
        for (std::size_t i = 0; i < study->findings.size(); ++i) {
            const auto& f = study->findings[i];
            Json fj = Json::object();
            fj["finding_id"] = f.id;
            fj["weight"] = f.weight;
            fj["pas"] = opt_number(f.score);
            const FindingEcs* ecs = i < r.ecs_findings.size() ? &r.ecs_findings[i] : nullptr;
            fj["ecs"] = ecs ? opt_number(ecs->value) : Json(nullptr);
            fj["ecs_zero_variance"] = ecs ? ecs->zero_variance : false;
            fj["effect_pairs"] = ecs ? ecs->pairs : 0;
            findings.push_back(std::move(fj));
        }
    }
    j["findings"] = std::move(findings);

    Json tests = Json::array();
    for (const auto& t : r.tests) {
        Json tj = Json::object();
        tj["finding_id"] = t.finding_id;
        tj["test_name"] = t.test_name;
        tj["weight"] = t.weight;
        tj["score"] = t.score;
        tj["directional"] = t.directional;
        tj["bf_human"] = bf_json(t.bf_human);
        tj["bf_agent"] = bf_json(t.bf_agent);
        tj["posterior_human"] = posterior_json(t.human);
        tj["posterior_agent"] = posterior_json(t.agent);
        tj["agent_statistic"] = number(t.agent_statistic);
        tj["agent_dfs"] = t.agent_dfs;
        tj["agent_n"] = t.agent_n;
        tj["d_human"] = t.effect_human ? number(t.effect_human->d) : Json(nullptr);
        tj["d_agent"] = t.effect_agent ? number(t.effect_agent->d) : Json(nullptr);
        tj["compliance"] = compliance_json(t.compliance);
        tests.push_back(std::move(tj));
    }
    j["tests"] = std::move(tests);

    Json effects = Json::array();
    for (const auto& e : r.effects) {
        Json ej = Json::object();
        ej["finding_id"] = e.finding_id;
        ej["test_name"] = e.test_name;
        ej["d_human"] = number(e.d_human);
        ej["se_human"] = number(e.se_human);
        ej["d_agent"] = number(e.d_agent);
        ej["se_agent"] = number(e.se_agent);
        ej["weight"] = e.weight;
        effects.push_back(std::move(ej));
    }
    j["effects"] = std::move(effects);
    j["ecs_global"] = opt_number(r.ecs_global);
    j["ecs_global_degenerate"] = r.ecs_global_degenerate;

    Json gv = Json::object();
    gv["p_global"] = opt_number(r.validity.p_global);
    gv["z_benchmark"] = number(r.validity.z_benchmark);
    Json gfind = Json::array();
    for (const auto& s : r.validity.studies) {
        for (const auto& f : s.findings) {
            Json fj = Json::object();
            fj["finding_id"] = f.id;
            fj["chi2"] = number(f.chi2);
            fj["df"] = f.df;
            fj["p"] = f.p;
            fj["z_star"] = number(f.z_star);
            gfind.push_back(std::move(fj));
        }
    }
    gv["findings"] = std::move(gfind);
    gv["skipped_findings"] = r.validity.skipped_findings;
    j["global_validity"] = std::move(gv);

    j["compliance"] = compliance_json(r.compliance);
    Json ex = Json::array();
    for (const auto& e : r.exclusions) ex.push_back(exclusion_json(e));
    j["exclusions"] = std::move(ex);
    Json eex = Json::array();
    for (const auto& e : r.effect_exclusions) eex.push_back(exclusion_json(e));
    j["effect_exclusions"] = std::move(eex);
    return j;
}

// ---------------------------------------------------------------- leaderboard

/// The slice of a report the leaderboard needs; also recoverable from report JSON.
struct ReportSummary {
    std::string model;
    std::string method;
    std::string study_id;
    std::string domain;
    std::optional<double> pas;
    std::vector<EffectRecord> effects;
    std::optional<double> bootstrap_se;
};

inline ReportSummary summarize(const EvaluationReport& r, std::optional<double> bootstrap_se = std::nullopt) {
    return {r.run.model, r.run.method, r.study_id, r.domain, r.study_pas, r.effects, bootstrap_se};
}

inline ReportSummary summary_from_json(const Json& j) {
    auto violation = [](const std::string& why) { return Error(ErrorCode::schema_violation, "report: " + why, "report"); };
    if (!j.is_object() || !j.contains("schema_version")) throw violation("missing schema_version");
    if (j.at("schema_version") != kReportSchemaVersion) throw violation("unsupported schema_version " + j.at("schema_version").dump());
    ReportSummary s;
    try {
        s.model = j.at("run").at("model").get<std::string>();
        s.method = j.at("run").at("method").get<std::string>();
        s.study_id = j.at("study_id").get<std::string>();
        s.domain = j.at("domain").get<std::string>();
        if (!j.at("study_pas").is_null()) s.pas = j.at("study_pas").get<double>();
        for (const auto& e : j.at("effects")) {
            EffectRecord r;
            r.finding_id = e.at("finding_id").get<std::string>();
            r.test_name = e.at("test_name").get<std::string>();
            if (e.at("d_human").is_null() || e.at("d_agent").is_null()) continue;
            r.d_human = e.at("d_human").get<double>();
            r.d_agent = e.at("d_agent").get<double>();
            r.se_human = e.at("se_human").is_null() ? 0.0 : e.at("se_human").get<double>();
            r.se_agent = e.at("se_agent").is_null() ? 0.0 : e.at("se_agent").get<double>();
            r.weight = e.at("weight").get<double>();
            s.effects.push_back(r);
        }
        if (j.contains("bootstrap") && j.at("bootstrap").contains("se") && !j.at("bootstrap").at("se").is_null()) {
            s.bootstrap_se = j.at("bootstrap").at("se").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw violation(e.what());
    }
    return s;
}

struct LeaderboardRow {
    std::string model;
    std::string method;
    std::size_t studies = 0;
    std::optional<double> pas;
    std::optional<double> pas_se;
    std::optional<double> ecs;
    std::map<std::string, double> domain_pas;
};

/**
 * One row per (model, method): mean study PAS, ECS pooled over every effect pair
 * of the cell, per-domain mean PAS and, when every report carries one, the
 * propagated bootstrap SE. Sorted by PAS then ECS, both descending; stable.
 */
inline std::vector<LeaderboardRow> leaderboard(const std::vector<ReportSummary>& reports) {
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const ReportSummary*>> cells;
    for (const auto& r : reports) {
        auto key = std::make_pair(r.model, r.method);
        if (!cells.count(key)) order.push_back(key);
        cells[key].push_back(&r);
    }
    std::vector<LeaderboardRow> rows;
    for (const auto& key : order) {
        const auto& cell = cells.at(key);
        LeaderboardRow row{key.first, key.second, cell.size(), std::nullopt, std::nullopt, std::nullopt, {}};
        double sum = 0;
        int scored = 0;
        std::map<std::string, std::pair<double, int>> dom;
        std::vector<EffectPair> pairs;
        std::vector<double> ses;
        bool all_se = true;
        for (const auto* r : cell) {
            if (r->pas) {
                sum += *r->pas;
                ++scored;
                dom[r->domain].first += *r->pas;
                dom[r->domain].second += 1;
            }
            if (r->bootstrap_se) ses.push_back(*r->bootstrap_se);
            else all_se = false;
            for (const auto& e : r->effects) {
                EffectPair p;
                p.human.d = e.d_human;
                p.agent.d = e.d_agent;
                p.weight = e.weight;
                pairs.push_back(p);
            }
        }
        if (scored) row.pas = sum / scored;
        if (all_se && !ses.empty()) row.pas_se = propagate_se(ses);
        for (const auto& [d, v] : dom) row.domain_pas[d] = v.first / v.second;
        if (pairs.size() >= 2) {
            try {
                row.ecs = ecs_global(pairs);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::degenerate_input) throw;
                row.ecs = 1.0;
            }
        }
        rows.push_back(std::move(row));
    }
    auto key_of = [](const std::optional<double>& v) { return v ? *v : -std::numeric_limits<double>::infinity(); };
    std::stable_sort(rows.begin(), rows.end(), [&](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (key_of(a.pas) != key_of(b.pas)) return key_of(a.pas) > key_of(b.pas);
        return key_of(a.ecs) > key_of(b.ecs);
    });
    return rows;
}

inline std::string format_score(const std::optional<double>& v, const std::optional<double>& se = std::nullopt) {
    if (!v) return "NA";
    char buf[64];
    if (se) std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", *v, *se);
    else std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

/// CSV with columns model, method, studies, PAS, ECS, cognition, strategic, social.
inline std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    std::string out = "model,method,studies,PAS,ECS,cognition,strategic,social\n";
    for (const auto& r : rows) {
        out += quote(r.model) + "," + quote(r.method) + "," + std::to_string(r.studies) + "," + quote(format_score(r.pas, r.pas_se)) + "," +
               format_score(r.ecs);
        for (const char* d : {"cognition", "strategic", "social"}) {
            auto it = r.domain_pas.find(d);
            out += "," + (it == r.domain_pas.end() ? std::string("NA") : format_score(it->second));
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------- bootstrap and sensitivity

/// One study's transcript for one agent.
struct StudyRun {
    const StudyBundle* bundle = nullptr;
    const AgentTranscript* transcript = nullptr;
};

/// Participant bootstrap of study PAS; undefined replicates are dropped from the SD.
inline BootstrapResult bootstrap_study_pas(const std::vector<StudyRun>& runs, const EvaluateOptions& base, int replicates, std::uint64_t seed,
                                           unsigned jobs = 1) {
    std::vector<std::size_t> sizes;
    for (const auto& r : runs) sizes.push_back(r.transcript->participants.size());
    auto scorer = [&](std::size_t k, const std::vector<std::size_t>& idx) {
        EvaluateOptions o = base;
        o.participant_order = idx;
        auto rep = evaluate(*runs[k].bundle, *runs[k].transcript, o);
        return rep.study_pas ? *rep.study_pas : std::numeric_limits<double>::quiet_NaN();
    };
    return bootstrap_se(sizes, scorer, replicates, seed, jobs);
}

/// An agent (model x method) with one transcript per bundle, in bundle order.
struct AgentRuns {
    std::string label;
    std::vector<const AgentTranscript*> transcripts;
};

/**
 * Re-scores every agent at each Cauchy scale r_t in `grid` (r_anova held fixed)
 * and compares benchmark PAS against the baseline scale.
 */
inline SensitivityReport sensitivity_sweep(const std::vector<const StudyBundle*>& bundles, const std::vector<AgentRuns>& agents,
                                           const std::vector<double>& grid, const EvaluateOptions& base = {}, unsigned jobs = 1,
                                           double baseline = kDefaultScaleT) {
    for (const auto& a : agents) {
        if (a.transcripts.size() != bundles.size()) throw Error(ErrorCode::length_mismatch, "agent '" + a.label + "' needs one transcript per bundle");
    }
    const std::size_t na = agents.size();
    auto flat = parallel_map(grid.size() * na, jobs, [&](std::size_t job) {
        const std::size_t gi = job / na, ai = job % na;
        EvaluateOptions o = base;
        o.prior.r_t = grid[gi];
        double sum = 0;
        int scored = 0;
        for (std::size_t b = 0; b < bundles.size(); ++b) {
            auto rep = evaluate(*bundles[b], *agents[ai].transcripts[b], o);
            if (rep.study_pas) {
                sum += *rep.study_pas;
                ++scored;
            }
        }
        return scored ? sum / scored : std::numeric_limits<double>::quiet_NaN();
    });
    std::vector<std::vector<double>> pas(grid.size(), std::vector<double>(na));
    for (std::size_t i = 0; i < flat.size(); ++i) pas[i / na][i % na] = flat[i];
    return sensitivity_report(grid, pas, baseline);
}

inline Json sensitivity_to_json(const SensitivityReport& s, const std::vector<std::string>& agents = {}) {
    Json j = Json::object();
    j["schema_version"] = kReportSchemaVersion;
    j["baseline"] = s.baseline;
    j["degenerate_ranking"] = s.degenerate_ranking;
    if (!agents.empty()) j["agents"] = agents;
    Json rows = Json::array();
    for (const auto& r : s.rows) {
        Json rj = Json::object();
        rj["r"] = r.r;
        rj["spearman_rho"] = driver_detail::number(r.spearman_rho);
        rj["mean_delta_pas"] = r.mean_delta_pas;
        rj["max_delta_pas"] = r.max_delta_pas;
        rows.push_back(std::move(rj));
    }
    j["rows"] = std::move(rows);
    return j;
}

} // namespace hsbench
