#pragma once

/**
 * @file bundle_io.hpp
 *
 * @brief Study bundles, agent transcripts, response parsing and the declarative
 * bindings that turn transcript responses into the data for one statistical test.
 *
 * A bundle directory holds two files:
 *
 *   ground_truth.json   studies[] -> sub_studies[] -> human_data.statistical_results[]
 *                       (finding_id, test_name, statistic, p_value, raw_data, claim, location)
 *   metadata.json       { study_id, domain, findings: [ { finding_id, weight?, tests: [
 *                           { test_name, weight?, binding } ] } ], materials? }
 *
 * A binding is a JSON object:
 *
 *   sub_study_id   trial_info.sub_study_id the test reads
 *   test           t_independent | t_paired | t_one_sample | anova | correlation | chi_square | binomial
 *   question       Q-key ("Q1"), or
 *   item_index     index into trial_info.items (its q_idx, else Q<index+1>), or
 *   item_field     item key naming a Q-key; every item carrying it is one observation
 *   pair_question  second Q-key for t_paired and correlation
 *   value_kind     numeric | choice | count
 *   options        choice labels (choice only)
 *   success        the option (or numeric value) counted as a success
 *   group_by       dotted trial_info key (looked up on the item first for item_field)
 *   groups         group labels in test order; the first minus the second gives the sign
 *   mu0, p0        one-sample mean and binomial null rate
 */

#include "core.hpp"
#include "stat_parser.hpp"
#include "stat_tests.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hsbench {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- bindings

enum class ValueKind { numeric, choice, count };
enum class BoundTestKind { t_independent, t_paired, t_one_sample, anova, correlation, chi_square, binomial };
enum class SelectorKind { question, item_index, item_field };

inline std::string_view to_string(ValueKind k) {
    switch (k) {
    case ValueKind::numeric: return "numeric";
    case ValueKind::choice: return "choice";
    case ValueKind::count: return "count";
    }
    return "?";
}

inline std::string_view to_string(BoundTestKind k) {
    switch (k) {
    case BoundTestKind::t_independent: return "t_independent";
    case BoundTestKind::t_paired: return "t_paired";
    case BoundTestKind::t_one_sample: return "t_one_sample";
    case BoundTestKind::anova: return "anova";
    case BoundTestKind::correlation: return "correlation";
    case BoundTestKind::chi_square: return "chi_square";
    case BoundTestKind::binomial: return "binomial";
    }
    return "?";
}

struct TestBinding {
    std::string sub_study_id;
    BoundTestKind test = BoundTestKind::t_independent;
    SelectorKind selector = SelectorKind::question;
    std::string question;
    int item_index = 0;
    std::string item_field;
    std::string pair_question;
    ValueKind value_kind = ValueKind::numeric;
    std::vector<std::string> options;
    std::optional<std::string> success;
    std::string group_by;
    std::vector<std::string> groups;
    double mu0 = 0;
    double p0 = 0.5;

    bool grouped() const {
        return test == BoundTestKind::t_independent || test == BoundTestKind::anova || test == BoundTestKind::chi_square;
    }
    bool needs_pair() const { return test == BoundTestKind::t_paired || test == BoundTestKind::correlation; }
};

struct ValidationIssue {
    ErrorCode code = ErrorCode::schema_violation;
    std::string path;
    std::string message;
};

namespace io_detail {

inline std::string q_key(const Json& v) {
    if (v.is_number_integer()) return "Q" + std::to_string(v.get<long long>());
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) return "Q" + s;
        return s;
    }
    return {};
}

/// Dotted lookup ("metadata.label"); nullptr when any step is absent.
inline const Json* lookup(const Json& obj, std::string_view dotted) {
    const Json* cur = &obj;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &cur->at(key);
        if (dot == std::string_view::npos) return cur;
        start = dot + 1;
    }
}

inline std::string label_of(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return parser_detail::format_number(v.get<double>());
    return v.dump();
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace io_detail

/// Parses a binding object; appends path-qualified problems to `issues`.
inline TestBinding parse_binding(const Json& j, const std::string& path, std::vector<ValidationIssue>& issues) {
    TestBinding b;
    auto bad = [&](const std::string& field, const std::string& why) {
        issues.push_back({ErrorCode::schema_violation, path + "." + field, why});
    };
    if (!j.is_object()) {
        issues.push_back({ErrorCode::schema_violation, path, "binding must be an object"});
        return b;
    }
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key)) return std::nullopt;
        if (!j.at(key).is_string()) {
            bad(key, "must be a string");
            return std::nullopt;
        }
        return j.at(key).get<std::string>();
    };

    if (auto s = str("sub_study_id")) b.sub_study_id = *s;
    else if (!j.contains("sub_study_id")) bad("sub_study_id", "required");

    static const std::map<std::string, BoundTestKind> tests = {
        {"t_independent", BoundTestKind::t_independent}, {"t_paired", BoundTestKind::t_paired},
        {"t_one_sample", BoundTestKind::t_one_sample},   {"anova", BoundTestKind::anova},
        {"correlation", BoundTestKind::correlation},     {"chi_square", BoundTestKind::chi_square},
        {"binomial", BoundTestKind::binomial}};
    if (auto s = str("test")) {
        auto it = tests.find(*s);
        if (it == tests.end()) bad("test", "unknown test '" + *s + "'");
        else b.test = it->second;
    } else if (!j.contains("test")) {
        bad("test", "required");
    }

    int selectors = 0;
    if (auto s = str("question")) {
        b.selector = SelectorKind::question;
        b.question = io_detail::q_key(Json(*s));
        ++selectors;
    }
    if (j.contains("item_index")) {
        if (!j.at("item_index").is_number_integer() || j.at("item_index").get<long long>() < 0) bad("item_index", "must be a non-negative integer");
        else b.item_index = static_cast<int>(j.at("item_index").get<long long>());
        b.selector = SelectorKind::item_index;
        ++selectors;
    }
    if (auto s = str("item_field")) {
        b.selector = SelectorKind::item_field;
        b.item_field = *s;
        ++selectors;
    }
    if (selectors != 1) bad("question", "exactly one of question, item_index, item_field is required");

    if (auto s = str("pair_question")) b.pair_question = io_detail::q_key(Json(*s));
    if (b.needs_pair()) {
        if (b.pair_question.empty()) bad("pair_question", std::string("required for ") + std::string(to_string(b.test)));
        if (b.selector != SelectorKind::question) bad("question", "paired bindings select by question");
    }

    if (auto s = str("value_kind")) {
        if (*s == "numeric") b.value_kind = ValueKind::numeric;
        else if (*s == "choice") b.value_kind = ValueKind::choice;
        else if (*s == "count") b.value_kind = ValueKind::count;
        else bad("value_kind", "must be numeric, choice or count");
    }
    if (j.contains("options")) {
        if (!j.at("options").is_array()) bad("options", "must be an array of strings");
        else {
            for (const auto& o : j.at("options")) {
                if (o.is_string()) b.options.push_back(o.get<std::string>());
                else bad("options", "must be an array of strings");
            }
        }
    }
    if (b.value_kind == ValueKind::choice && b.options.empty()) bad("options", "choice bindings need at least one option");
    if (j.contains("success")) b.success = io_detail::label_of(j.at("success"));
    if (b.success && b.value_kind == ValueKind::choice && !b.options.empty() &&
        std::none_of(b.options.begin(), b.options.end(), [&](const std::string& o) { return io_detail::lower(o) == io_detail::lower(*b.success); })) {
        bad("success", "must be one of the options");
    }
    if (b.test == BoundTestKind::binomial && !b.success) bad("success", "binomial bindings name the success value");
    if (b.value_kind == ValueKind::choice && (b.test == BoundTestKind::t_independent || b.test == BoundTestKind::t_paired ||
                                              b.test == BoundTestKind::t_one_sample || b.test == BoundTestKind::anova ||
                                              b.test == BoundTestKind::correlation)) {
        bad("value_kind", "mean-based tests need numeric values");
    }

    if (auto s = str("group_by")) b.group_by = *s;
    if (j.contains("groups")) {
        if (!j.at("groups").is_array()) bad("groups", "must be an array");
        else for (const auto& g : j.at("groups")) b.groups.push_back(io_detail::label_of(g));
    }
    if (b.grouped()) {
        if (b.group_by.empty()) bad("group_by", std::string("required for ") + std::string(to_string(b.test)));
        if (b.test == BoundTestKind::t_independent && b.groups.size() != 2) bad("groups", "t_independent compares exactly two groups");
        if (b.test != BoundTestKind::t_independent && !b.groups.empty() && b.groups.size() < 2) bad("groups", "need at least two groups");
    }
    if (j.contains("mu0")) {
        if (!j.at("mu0").is_number()) bad("mu0", "must be a number");
        else b.mu0 = j.at("mu0").get<double>();
    }
    if (j.contains("p0")) {
        if (!j.at("p0").is_number() || !(j.at("p0").get<double>() > 0 && j.at("p0").get<double>() < 1)) bad("p0", "must lie in (0, 1)");
        else b.p0 = j.at("p0").get<double>();
    }
    return b;
}

// ---------------------------------------------------------------- bundles

struct BoundTest {
    std::string test_name;
    double weight = 1;
    TestBinding binding;
    /// Empty when the human record cannot support a test; `spec_issue` says why.
    std::optional<TestSpec> spec;
    std::optional<ValidationIssue> spec_issue;
    std::string source_path;
};

struct FindingSpec {
    std::string finding_id;
    double weight = 1;
    std::vector<BoundTest> tests;
};

struct StudyBundle {
    std::string study_id;
    std::string domain;
    std::vector<FindingSpec> findings;
    Json materials;
    std::string root;

    std::size_t test_count() const {
        std::size_t n = 0;
        for (const auto& f : findings) n += f.tests.size();
        return n;
    }
};

struct BundleValidation {
    std::optional<StudyBundle> bundle;
    std::vector<ValidationIssue> errors;
    /// Records kept in the bundle but unscorable (MissingEvidence, unparseable statistics).
    std::vector<ValidationIssue> warnings;

    bool ok() const { return errors.empty(); }
};

namespace io_detail {

inline Json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_failure, "cannot read " + p.string(), p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::schema_violation, p.filename().string() + ": invalid JSON: " + e.what(), p.filename().string());
    }
}

struct GtRecord {
    Json record;
    RecordContext ctx;
};

} // namespace io_detail

/**
 * Validates ground truth and metadata already in memory. Collects every problem
 * instead of stopping at the first.
 */
inline BundleValidation validate_bundle(const Json& ground_truth, const Json& metadata, std::string root = {}) {
    using io_detail::GtRecord;
    BundleValidation out;
    auto err = [&](const std::string& path, const std::string& why) { out.errors.push_back({ErrorCode::schema_violation, path, why}); };

    // Ground truth records keyed by (finding_id, test_name).
    std::map<std::pair<std::string, std::string>, GtRecord> records;
    std::vector<std::pair<std::string, std::string>> record_order;
    if (!ground_truth.is_object() || !ground_truth.contains("studies") || !ground_truth.at("studies").is_array()) {
        err("ground_truth.json:studies", "required array");
    } else {
        const auto& studies = ground_truth.at("studies");
        for (std::size_t si = 0; si < studies.size(); ++si) {
            const std::string sp = "ground_truth.json:studies[" + std::to_string(si) + "]";
            const auto& st = studies[si];
            if (!st.is_object()) {
                err(sp, "must be an object");
                continue;
            }
            if (!st.contains("sub_studies")) continue;
            if (!st.at("sub_studies").is_array()) {
                err(sp + ".sub_studies", "must be an array");
                continue;
            }
            const auto& subs = st.at("sub_studies");
            for (std::size_t ui = 0; ui < subs.size(); ++ui) {
                const std::string up = sp + ".sub_studies[" + std::to_string(ui) + "]";
                const auto& sub = subs[ui];
                if (!sub.is_object()) {
                    err(up, "must be an object");
                    continue;
                }
                std::optional<long> participants;
                if (sub.contains("participants") && sub.at("participants").is_object() && sub.at("participants").contains("n")) {
                    const auto& n = sub.at("participants").at("n");
                    if (n.is_number_integer() && n.get<long long>() >= 0) participants = static_cast<long>(n.get<long long>());
                    else if (!n.is_null()) err(up + ".participants.n", "must be a non-negative integer");
                }
                const Json* results = io_detail::lookup(sub, "human_data.statistical_results");
                if (!results) continue;
                if (!results->is_array()) {
                    err(up + ".human_data.statistical_results", "must be an array");
                    continue;
                }
                for (std::size_t ri = 0; ri < results->size(); ++ri) {
                    const std::string rp = up + ".human_data.statistical_results[" + std::to_string(ri) + "]";
                    const auto& rec = (*results)[ri];
                    if (!rec.is_object() || !rec.contains("finding_id") || !rec.at("finding_id").is_string() || !rec.contains("test_name") ||
                        !rec.at("test_name").is_string()) {
                        err(rp, "record needs string finding_id and test_name");
                        continue;
                    }
                    auto key = std::make_pair(rec.at("finding_id").get<std::string>(), rec.at("test_name").get<std::string>());
                    if (records.count(key)) {
                        err(rp, "duplicate (finding_id, test_name) = (" + key.first + ", " + key.second + ")");
                        continue;
                    }
                    records.emplace(key, GtRecord{rec, RecordContext{rp, participants}});
                    record_order.push_back(key);
                }
            }
        }
    }

    StudyBundle bundle;
    bundle.root = std::move(root);
    std::set<std::pair<std::string, std::string>> bound;
    if (!metadata.is_object()) {
        err("metadata.json", "must be an object");
    } else {
        auto str_field = [&](const char* key, std::string& dst) {
            if (!metadata.contains(key) || !metadata.at(key).is_string() || metadata.at(key).get<std::string>().empty()) {
                err(std::string("metadata.json:") + key, "required non-empty string");
            } else {
                dst = metadata.at(key).get<std::string>();
            }
        };
        str_field("study_id", bundle.study_id);
        str_field("domain", bundle.domain);
        if (!bundle.domain.empty() && bundle.domain != "cognition" && bundle.domain != "strategic" && bundle.domain != "social") {
            err("metadata.json:domain", "must be cognition, strategic or social");
        }
        if (metadata.contains("materials")) bundle.materials = metadata.at("materials");

        if (!metadata.contains("findings") || !metadata.at("findings").is_array() || metadata.at("findings").empty()) {
            err("metadata.json:findings", "required non-empty array");
        } else {
            const auto& findings = metadata.at("findings");
            const double default_weight = 1.0 / static_cast<double>(findings.size());
            std::set<std::string> seen;
            for (std::size_t fi = 0; fi < findings.size(); ++fi) {
                const std::string fp = "metadata.json:findings[" + std::to_string(fi) + "]";
                const auto& f = findings[fi];
                if (!f.is_object() || !f.contains("finding_id") || !f.at("finding_id").is_string()) {
                    err(fp + ".finding_id", "required string");
                    continue;
                }
                FindingSpec fs;
                fs.finding_id = f.at("finding_id").get<std::string>();
                if (!seen.insert(fs.finding_id).second) err(fp + ".finding_id", "duplicate finding_id '" + fs.finding_id + "'");
                fs.weight = default_weight;
                if (f.contains("weight")) {
                    if (!f.at("weight").is_number() || !(f.at("weight").get<double>() > 0)) err(fp + ".weight", "must be a number > 0");
                    else fs.weight = f.at("weight").get<double>();
                }
                if (!f.contains("tests") || !f.at("tests").is_array()) {
                    err(fp + ".tests", "required array");
                    continue;
                }
                const auto& tests = f.at("tests");
                std::set<std::string> names;
                for (std::size_t ti = 0; ti < tests.size(); ++ti) {
                    const std::string tp = fp + ".tests[" + std::to_string(ti) + "]";
                    const auto& t = tests[ti];
                    if (!t.is_object() || !t.contains("test_name") || !t.at("test_name").is_string()) {
                        err(tp + ".test_name", "required string");
                        continue;
                    }
                    BoundTest bt;
                    bt.test_name = t.at("test_name").get<std::string>();
                    if (!names.insert(bt.test_name).second) err(tp + ".test_name", "duplicate test_name '" + bt.test_name + "' in finding");
                    if (t.contains("weight")) {
                        if (!t.at("weight").is_number() || !(t.at("weight").get<double>() > 0)) err(tp + ".weight", "must be a number > 0");
                        else bt.weight = t.at("weight").get<double>();
                    }
                    if (!t.contains("binding")) err(tp + ".binding", "every test needs exactly one binding");
                    else bt.binding = parse_binding(t.at("binding"), tp + ".binding", out.errors);

                    auto key = std::make_pair(fs.finding_id, bt.test_name);
                    auto it = records.find(key);
                    if (it == records.end()) {
                        err(tp, "no ground-truth record for (" + key.first + ", " + key.second + ")");
                        continue;
                    }
                    bound.insert(key);
                    bt.source_path = it->second.ctx.path;
                    try {
                        bt.spec = parse_ground_truth_record(it->second.record, it->second.ctx);
                        bt.spec->weight = bt.weight;
                        if (bt.spec->family == Family::binomial_prop && !it->second.record.contains("p0")) bt.spec->p0 = bt.binding.p0;
                    } catch (const Error& e) {
                        if (e.code() == ErrorCode::schema_violation) {
                            out.errors.push_back({e.code(), e.path().empty() ? bt.source_path : e.path(), e.what()});
                        } else {
                            bt.spec_issue = ValidationIssue{e.code(), bt.source_path, e.what()};
                            out.warnings.push_back(*bt.spec_issue);
                        }
                    }
                    fs.tests.push_back(std::move(bt));
                }
                bundle.findings.push_back(std::move(fs));
            }
        }
    }
    for (const auto& key : record_order) {
        if (!bound.count(key)) {
            err(records.at(key).ctx.path, "ground-truth test (" + key.first + ", " + key.second + ") has no binding in metadata.json");
        }
    }
    if (out.errors.empty()) out.bundle = std::move(bundle);
    return out;
}

/// Reads and validates a bundle directory. I/O problems throw IoFailure.
inline BundleValidation validate_bundle_dir(const std::filesystem::path& dir) {
    BundleValidation out;
    Json gt, meta;
    bool parsed = true;
    for (auto [name, dst] : {std::pair{"ground_truth.json", &gt}, std::pair{"metadata.json", &meta}}) {
        try {
            *dst = io_detail::read_json_file(dir / name);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::schema_violation) throw;
            out.errors.push_back({e.code(), e.path(), e.what()});
            parsed = false;
        }
    }
    if (!parsed) return out;
    return validate_bundle(gt, meta, dir.string());
}

/// Loads a bundle; throws SchemaViolation listing every problem when invalid.
inline StudyBundle load_bundle(const std::filesystem::path& dir) {
    auto v = validate_bundle_dir(dir);
    if (!v.ok()) {
        std::string msg = dir.string() + ": " + std::to_string(v.errors.size()) + " schema violation(s)";
        for (const auto& e : v.errors) msg += "\n  " + e.path + ": " + e.message;
        throw Error(ErrorCode::schema_violation, msg, v.errors.front().path);
    }
    return std::move(*v.bundle);
}

// ---------------------------------------------------------------- transcripts

struct Trial {
    std::string sub_study_id;
    std::string response_text;
    Json trial_info;
};

struct Participant {
    std::string id;
    std::vector<Trial> trials;
};

struct RunMetadata {
    std::string model;
    std::string method;
    std::optional<double> temperature;
    std::optional<std::uint64_t> seed;
    std::string study_id;
};

struct AgentTranscript {
    RunMetadata meta;
    std::vector<Participant> participants;
};

inline AgentTranscript parse_transcript(const Json& j) {
    auto violation = [](const std::string& path, const std::string& why) { return Error(ErrorCode::schema_violation, path + ": " + why, path); };
    if (!j.is_object()) throw violation("transcript", "must be an object");
    AgentTranscript t;
    if (j.contains("metadata")) {
        const auto& m = j.at("metadata");
        if (!m.is_object()) throw violation("metadata", "must be an object");
        auto s = [&](const char* key) -> std::string {
            if (!m.contains(key) || m.at(key).is_null()) return {};
            if (!m.at(key).is_string()) throw violation(std::string("metadata.") + key, "must be a string");
            return m.at(key).get<std::string>();
        };
        t.meta.model = s("model");
        t.meta.method = s("method");
        t.meta.study_id = s("study_id");
        if (m.contains("temperature") && !m.at("temperature").is_null()) {
            if (!m.at("temperature").is_number()) throw violation("metadata.temperature", "must be a number");
            t.meta.temperature = m.at("temperature").get<double>();
        }
        if (m.contains("seed") && !m.at("seed").is_null()) {
            if (!m.at("seed").is_number_unsigned()) throw violation("metadata.seed", "must be a non-negative integer");
            t.meta.seed = m.at("seed").get<std::uint64_t>();
        }
    }
    if (!j.contains("individual_data") || !j.at("individual_data").is_array()) throw violation("individual_data", "required array");
    const auto& people = j.at("individual_data");
    for (std::size_t pi = 0; pi < people.size(); ++pi) {
        const std::string pp = "individual_data[" + std::to_string(pi) + "]";
        const auto& p = people[pi];
        if (!p.is_object()) throw violation(pp, "must be an object");
        Participant part;
        part.id = p.contains("participant_id") ? io_detail::label_of(p.at("participant_id")) : std::to_string(pi);
        if (p.contains("responses")) {
            if (!p.at("responses").is_array()) throw violation(pp + ".responses", "must be an array");
            const auto& rs = p.at("responses");
            for (std::size_t ri = 0; ri < rs.size(); ++ri) {
                const std::string rp = pp + ".responses[" + std::to_string(ri) + "]";
                const auto& r = rs[ri];
                if (!r.is_object()) throw violation(rp, "must be an object");
                Trial trial;
                if (r.contains("response_text") && !r.at("response_text").is_null()) {
                    if (!r.at("response_text").is_string()) throw violation(rp + ".response_text", "must be a string");
                    trial.response_text = r.at("response_text").get<std::string>();
                }
                if (!r.contains("trial_info") || !r.at("trial_info").is_object()) throw violation(rp + ".trial_info", "required object");
                trial.trial_info = r.at("trial_info");
                if (!trial.trial_info.contains("sub_study_id") || !trial.trial_info.at("sub_study_id").is_string()) {
                    throw violation(rp + ".trial_info.sub_study_id", "required string");
                }
                trial.sub_study_id = trial.trial_info.at("sub_study_id").get<std::string>();
                part.trials.push_back(std::move(trial));
            }
        }
        t.participants.push_back(std::move(part));
    }
    return t;
}

inline AgentTranscript load_transcript(const std::filesystem::path& path) {
    return parse_transcript(io_detail::read_json_file(path));
}

inline Json transcript_to_json(const AgentTranscript& t) {
    Json meta = Json::object();
    meta["model"] = t.meta.model;
    meta["method"] = t.meta.method;
    if (t.meta.temperature) meta["temperature"] = *t.meta.temperature;
    if (t.meta.seed) meta["seed"] = *t.meta.seed;
    if (!t.meta.study_id.empty()) meta["study_id"] = t.meta.study_id;
    Json people = Json::array();
    for (const auto& p : t.participants) {
        Json responses = Json::array();
        for (const auto& tr : p.trials) {
            Json r = Json::object();
            r["response_text"] = tr.response_text;
            r["trial_info"] = tr.trial_info;
            responses.push_back(std::move(r));
        }
        Json pj = Json::object();
        pj["participant_id"] = p.id;
        pj["responses"] = std::move(responses);
        people.push_back(std::move(pj));
    }
    Json out = Json::object();
    out["metadata"] = std::move(meta);
    out["individual_data"] = std::move(people);
    return out;
}

// ---------------------------------------------------------------- responses

/// Q-key -> raw value for every "Qk=value" / "Qk.n=value" in the text; later duplicates win.
inline std::map<std::string, std::string> parse_response(std::string_view text) {
    static const std::regex pattern(R"((Q\d+(?:\.\d+)?)\s*=\s*([^,\n\s]+))");
    std::map<std::string, std::string> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
        out[(*it)[1].str()] = (*it)[2].str();
    }
    return out;
}

using CoercedValue = std::variant<double, std::string>;

/**
 * Numeric values lose currency symbols, percent signs and thousands separators;
 * choices match an option case-insensitively and return the option's spelling.
 * Throws CoercionFailure.
 */
inline CoercedValue coerce_value(std::string_view raw, ValueKind kind, const std::vector<std::string>& options = {}) {
    auto fail = [&] {
        return Error(ErrorCode::coercion_failure, "cannot read '" + std::string(raw) + "' as " + std::string(to_string(kind)));
    };
    if (kind == ValueKind::choice) {
        std::string r(raw);
        while (!r.empty() && (r.back() == '.' || r.back() == ';' || r.back() == ')')) r.pop_back();
        const std::string lr = io_detail::lower(r);
        for (const auto& o : options) {
            if (io_detail::lower(o) == lr) return o;
        }
        throw fail();
    }
    std::string cleaned;
    for (char c : raw) {
        if (c == '$' || c == '%' || c == ',' || c == '\'' || c == '"') continue;
        cleaned.push_back(c);
    }
    while (!cleaned.empty() && (cleaned.back() == '.' || cleaned.back() == ';')) cleaned.pop_back();
    auto v = parser_detail::to_double(cleaned);
    if (!v || !std::isfinite(*v)) throw fail();
    if (kind == ValueKind::count && (*v < 0 || std::floor(*v) != *v)) throw fail();
    return *v;
}

struct ComplianceReport {
    std::size_t total_trials = 0;
    std::size_t compliant_trials = 0;
    std::size_t required_q = 0;
    std::size_t parsed_q = 0;
    double refusal_rate = 0;

    std::size_t noncompliant_trials() const { return total_trials - compliant_trials; }

    void finish() { refusal_rate = total_trials == 0 ? 1.0 : static_cast<double>(noncompliant_trials()) / static_cast<double>(total_trials); }

    ComplianceReport& operator+=(const ComplianceReport& o) {
        total_trials += o.total_trials;
        compliant_trials += o.compliant_trials;
        required_q += o.required_q;
        parsed_q += o.parsed_q;
        finish();
        return *this;
    }
};

/// Q-keys a trial must answer: one per listed item (its q_idx, else Q<index+1>).
inline std::set<std::string> required_q_keys(const Json& trial_info) {
    std::set<std::string> out;
    if (!trial_info.contains("items") || !trial_info.at("items").is_array()) return out;
    const auto& items = trial_info.at("items");
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::string key;
        if (items[i].is_object() && items[i].contains("q_idx")) key = io_detail::q_key(items[i].at("q_idx"));
        if (key.empty()) key = "Q" + std::to_string(i + 1);
        out.insert(key);
    }
    return out;
}

struct Observation {
    std::string group;
    CoercedValue value;
    std::optional<double> pair;
};

struct CollectedData {
    std::vector<std::string> group_labels;
    /// Observations per group, in `group_labels` order.
    std::vector<std::vector<Observation>> groups;
    ComplianceReport report;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.size();
        return n;
    }
};

/**
 * Gathers the data for one binding. Every trial of the bound sub-study whose group
 * (if any) is among the binding's groups counts toward compliance; non-compliant
 * trials are dropped listwise. `participant_order` selects (and may repeat)
 * participants, as the bootstrap does; empty means all, in file order.
 */
inline CollectedData collect_test_data(const AgentTranscript& t, const TestBinding& b, const std::vector<std::size_t>& participant_order = {}) {
    CollectedData out;
    bool sub_study_seen = false;
    bool group_key_seen = false;
    std::map<std::string, std::size_t> group_index;
    for (const auto& g : b.groups) {
        if (!group_index.count(g)) {
            group_index.emplace(g, out.group_labels.size());
            out.group_labels.push_back(g);
            out.groups.emplace_back();
        }
    }
    const bool open_groups = b.group_by.empty() ? false : b.groups.empty();
    if (b.group_by.empty()) {
        out.group_labels = {""};
        out.groups.resize(1);
    }

    auto group_of = [&](const Json* item, const Json& info) -> std::optional<std::string> {
        const Json* v = nullptr;
        if (item) v = io_detail::lookup(*item, b.group_by);
        if (!v) v = io_detail::lookup(info, b.group_by);
        if (!v) return std::nullopt;
        group_key_seen = true;
        return io_detail::label_of(*v);
    };
    auto slot_for = [&](const std::string& label) -> std::optional<std::size_t> {
        auto it = group_index.find(label);
        if (it != group_index.end()) return it->second;
        if (!open_groups) return std::nullopt;
        group_index.emplace(label, out.group_labels.size());
        out.group_labels.push_back(label);
        out.groups.emplace_back();
        return out.group_labels.size() - 1;
    };

    const std::size_t count = participant_order.empty() ? t.participants.size() : participant_order.size();
    for (std::size_t pi = 0; pi < count; ++pi) {
        const Participant& p = t.participants.at(participant_order.empty() ? pi : participant_order[pi]);
        for (const auto& trial : p.trials) {
            if (trial.sub_study_id != b.sub_study_id) continue;
            sub_study_seen = true;
            const Json& info = trial.trial_info;

            // Observation sites: (Q-key, item pointer).
            std::vector<std::pair<std::string, const Json*>> sites;
            const Json* items = info.contains("items") && info.at("items").is_array() ? &info.at("items") : nullptr;
            switch (b.selector) {
            case SelectorKind::question: sites.emplace_back(b.question, nullptr); break;
            case SelectorKind::item_index: {
                std::string key = "Q" + std::to_string(b.item_index + 1);
                const Json* item = nullptr;
                if (items && static_cast<std::size_t>(b.item_index) < items->size()) {
                    item = &(*items)[static_cast<std::size_t>(b.item_index)];
                    if (item->is_object() && item->contains("q_idx")) key = io_detail::q_key(item->at("q_idx"));
                }
                sites.emplace_back(key, item);
                break;
            }
            case SelectorKind::item_field:
                if (items) {
                    for (const auto& item : *items) {
                        if (item.is_object() && item.contains(b.item_field)) sites.emplace_back(io_detail::q_key(item.at(b.item_field)), &item);
                    }
                }
                break;
            }

            // Group membership decides whether the trial belongs to this test at all.
            std::vector<std::pair<std::size_t, std::pair<std::string, const Json*>>> placed;
            for (const auto& site : sites) {
                std::size_t slot = 0;
                if (!b.group_by.empty()) {
                    auto label = group_of(site.second, info);
                    if (!label) continue;
                    auto s = slot_for(*label);
                    if (!s) continue;
                    slot = *s;
                }
                placed.emplace_back(slot, site);
            }
            if (placed.empty() && !(sites.empty() && b.group_by.empty())) continue;

            const auto parsed = parse_response(trial.response_text);
            std::set<std::string> required = required_q_keys(info);
            for (const auto& [slot, site] : placed) required.insert(site.first);
            if (b.needs_pair()) required.insert(b.pair_question);
            ++out.report.total_trials;
            out.report.required_q += required.size();
            bool compliant = !placed.empty();
            for (const auto& q : required) {
                if (parsed.count(q)) ++out.report.parsed_q;
                else compliant = false;
            }
            std::vector<std::pair<std::size_t, Observation>> obs;
            if (compliant) {
                try {
                    for (const auto& [slot, site] : placed) {
                        Observation o;
                        o.group = out.group_labels[slot];
                        o.value = coerce_value(parsed.at(site.first), b.value_kind, b.options);
                        if (b.needs_pair()) o.pair = std::get<double>(coerce_value(parsed.at(b.pair_question), ValueKind::numeric));
                        obs.emplace_back(slot, std::move(o));
                    }
                } catch (const Error&) {
                    compliant = false;
                }
            }
            if (!compliant) continue;
            ++out.report.compliant_trials;
            for (auto& [slot, o] : obs) out.groups[slot].push_back(std::move(o));
        }
    }
    if (!sub_study_seen) {
        throw Error(ErrorCode::binding_mismatch, "no trial has sub_study_id '" + b.sub_study_id + "'");
    }
    if (!b.group_by.empty() && !group_key_seen) {
        throw Error(ErrorCode::binding_mismatch, "group_by key '" + b.group_by + "' is absent from every trial_info of '" + b.sub_study_id + "'");
    }
    out.report.finish();
    return out;
}

namespace io_detail {

inline SampleVector numeric_vector(const std::vector<Observation>& obs, const std::string& label, bool pair = false) {
    SampleVector v;
    v.group_label = label;
    for (const auto& o : obs) v.values.push_back(pair ? o.pair.value_or(0.0) : std::get<double>(o.value));
    return v;
}

inline bool is_success(const CoercedValue& v, const TestBinding& b) {
    if (const auto* s = std::get_if<std::string>(&v)) return lower(*s) == lower(*b.success);
    const double x = std::get<double>(v);
    auto target = parser_detail::to_double(*b.success);
    return target ? x == *target : false;
}

} // namespace io_detail

/**
 * Runs the bound statistical test on collected data. Throws InsufficientData when
 * a group is too small, plus whatever the test itself raises.
 */
inline TestOutcome run_bound_test(const TestBinding& b, const CollectedData& data) {
    using namespace io_detail;
    auto need = [](std::size_t have, std::size_t want, const std::string& what) {
        if (have < want) throw Error(ErrorCode::insufficient_data, what + " has " + std::to_string(have) + " compliant observations, needs " + std::to_string(want));
    };
    switch (b.test) {
    case BoundTestKind::t_independent: {
        need(data.groups.size(), 2, "binding");
        auto a = numeric_vector(data.groups[0], data.group_labels[0]);
        auto c = numeric_vector(data.groups[1], data.group_labels[1]);
        need(a.values.size(), 2, "group '" + a.group_label + "'");
        need(c.values.size(), 2, "group '" + c.group_label + "'");
        return t_test(a, &c, TTestMode::independent_pooled);
    }
    case BoundTestKind::t_paired: {
        auto x = numeric_vector(data.groups[0], "x");
        auto y = numeric_vector(data.groups[0], "y", true);
        need(x.values.size(), 2, "paired sample");
        return t_test(x, &y, TTestMode::paired);
    }
    case BoundTestKind::t_one_sample: {
        auto x = numeric_vector(data.groups[0], "x");
        need(x.values.size(), 2, "sample");
        return t_test(x, nullptr, TTestMode::one_sample, b.mu0);
    }
    case BoundTestKind::anova: {
        std::vector<SampleVector> gs;
        for (std::size_t i = 0; i < data.groups.size(); ++i) {
            if (data.groups[i].empty() && b.groups.empty()) continue;
            gs.push_back(numeric_vector(data.groups[i], data.group_labels[i]));
            need(gs.back().values.size(), 1, "group '" + gs.back().group_label + "'");
        }
        need(gs.size(), 2, "anova");
        return anova_oneway(gs);
    }
    case BoundTestKind::correlation: {
        auto x = numeric_vector(data.groups[0], "x");
        auto y = numeric_vector(data.groups[0], "y", true);
        need(x.values.size(), 3, "correlation");
        return pearson(x, y);
    }
    case BoundTestKind::chi_square: {
        std::vector<std::string> cols;
        if (b.success) cols = {*b.success, "other"};
        else if (b.value_kind == ValueKind::choice) cols = b.options;
        else throw Error(ErrorCode::schema_violation, "numeric chi_square bindings name the success value");
        std::vector<std::vector<double>> table;
        for (const auto& g : data.groups) {
            std::vector<double> row(cols.size(), 0.0);
            for (const auto& o : g) {
                if (b.success) {
                    row[is_success(o.value, b) ? 0 : 1] += 1;
                } else {
                    const auto& s = std::get<std::string>(o.value);
                    row[static_cast<std::size_t>(std::find(cols.begin(), cols.end(), s) - cols.begin())] += 1;
                }
            }
            table.push_back(std::move(row));
        }
        need(table.size(), 2, "chi_square");
        return chi_square(table);
    }
    case BoundTestKind::binomial: {
        long k = 0, n = 0;
        for (const auto& g : data.groups) {
            for (const auto& o : g) {
                ++n;
                if (is_success(o.value, b)) ++k;
            }
        }
        need(static_cast<std::size_t>(n), 1, "binomial");
        return binomial_test(k, n, b.p0);
    }
    }
    throw Error(ErrorCode::unsupported_family, "unknown bound test");
}

// ---------------------------------------------------------------- synthetic transcripts

namespace io_detail {

/// Uniform in [0, 1) from the top 53 bits, so draws do not depend on the standard library.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(std::mt19937_64& eng) {
    double u1;
    do {
        u1 = uniform01(eng);
    } while (u1 <= 0);
    const double u2 = uniform01(eng);
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * 3.14159265358979323846 * u2);
}

inline std::string format_value(double v, int decimals) {
    char buf[64];
    std::to_chars_result r = decimals >= 0 ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals)
                                           : std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, r.ptr);
    // Rounding can leave "-0.00"; drop the sign so the text reads back as written.
    if (!s.empty() && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

} // namespace io_detail

inline constexpr const char* kRefusalText = "I'd rather not answer.";

/**
 * Builds a transcript from a distribution spec:
 *
 *   { "model", "method", "temperature", "study_id",
 *     "sub_studies": [ { "sub_study_id", "condition_key"?, "refusal_prob"?,
 *                        "conditions": [ { "label", "n", "questions": { "Q1": dist, ... } } ] } ] }
 *
 * with dist one of {"dist": "normal", "mean", "sd", "decimals"?},
 * {"dist": "offset", "of": "Q1", "mean", "sd", "decimals"?}, {"dist": "choice",
 * "options", "probs"} or {"dist": "bernoulli", "p"}. Each participant answers one
 * trial of one condition. Identical (spec, seed) give identical bytes.
 */
inline AgentTranscript synthesize_transcript(const Json& spec, std::uint64_t seed) {
    auto violation = [](const std::string& path, const std::string& why) { return Error(ErrorCode::schema_violation, "synth spec " + path + ": " + why, path); };
    if (!spec.is_object() || !spec.contains("sub_studies") || !spec.at("sub_studies").is_array()) throw violation("sub_studies", "required array");
    AgentTranscript t;
    t.meta.model = spec.value("model", std::string("synthetic"));
    t.meta.method = spec.value("method", std::string("A1"));
    t.meta.temperature = spec.value("temperature", 0.0);
    t.meta.seed = seed;
    t.meta.study_id = spec.value("study_id", std::string());

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x73796e74u};
    std::mt19937_64 eng(seq);
    std::size_t pid = 0;
    const auto& subs = spec.at("sub_studies");
    for (std::size_t si = 0; si < subs.size(); ++si) {
        const std::string sp = "sub_studies[" + std::to_string(si) + "]";
        const auto& sub = subs[si];
        if (!sub.is_object() || !sub.contains("sub_study_id") || !sub.at("sub_study_id").is_string()) throw violation(sp + ".sub_study_id", "required string");
        const std::string sub_id = sub.at("sub_study_id").get<std::string>();
        const std::string condition_key = sub.value("condition_key", std::string("condition"));
        const double refusal = sub.value("refusal_prob", 0.0);
        if (!(refusal >= 0 && refusal <= 1)) throw violation(sp + ".refusal_prob", "must lie in [0, 1]");
        if (!sub.contains("conditions") || !sub.at("conditions").is_array()) throw violation(sp + ".conditions", "required array");
        const auto& conds = sub.at("conditions");
        for (std::size_t ci = 0; ci < conds.size(); ++ci) {
            const std::string cp = sp + ".conditions[" + std::to_string(ci) + "]";
            const auto& cond = conds[ci];
            if (!cond.is_object() || !cond.contains("n") || !cond.at("n").is_number_unsigned()) throw violation(cp + ".n", "required non-negative integer");
            if (!cond.contains("questions") || !cond.at("questions").is_object()) throw violation(cp + ".questions", "required object");
            const std::string label = cond.contains("label") ? io_detail::label_of(cond.at("label")) : std::to_string(ci);
            const auto n = cond.at("n").get<std::uint64_t>();
            const auto& questions = cond.at("questions");
            for (std::uint64_t i = 0; i < n; ++i) {
                Trial trial;
                trial.sub_study_id = sub_id;
                trial.trial_info = Json::object();
                trial.trial_info["sub_study_id"] = sub_id;
                if (conds.size() > 1 || cond.contains("label")) trial.trial_info[condition_key] = label;
                Json items = Json::array();
                std::map<std::string, double> drawn;
                std::string text;
                for (auto it = questions.begin(); it != questions.end(); ++it) {
                    const std::string q = it.key();
                    const auto& d = it.value();
                    const std::string qp = cp + ".questions." + q;
                    const std::string kind = d.value("dist", std::string());
                    const int decimals = d.value("decimals", -1);
                    std::string value;
                    if (kind == "normal" || kind == "offset") {
                        double base = 0;
                        if (kind == "offset") {
                            const std::string of = d.value("of", std::string());
                            if (!drawn.count(of)) throw violation(qp + ".of", "must name an earlier normal question");
                            base = drawn.at(of);
                        }
                        double x = base + d.value("mean", 0.0) + d.value("sd", 1.0) * io_detail::standard_normal(eng);
                        value = io_detail::format_value(x, decimals);
                        drawn[q] = *parser_detail::to_double(value);
                    } else if (kind == "choice") {
                        if (!d.contains("options") || !d.at("options").is_array() || d.at("options").empty()) throw violation(qp + ".options", "required non-empty array");
                        const auto& opts = d.at("options");
                        std::vector<double> probs(opts.size(), 1.0 / static_cast<double>(opts.size()));
                        if (d.contains("probs")) {
                            if (!d.at("probs").is_array() || d.at("probs").size() != opts.size()) throw violation(qp + ".probs", "one probability per option");
                            for (std::size_t k = 0; k < opts.size(); ++k) probs[k] = d.at("probs")[k].get<double>();
                        }
                        const double u = io_detail::uniform01(eng);
                        double acc = 0;
                        std::size_t pick = opts.size() - 1;
                        for (std::size_t k = 0; k < opts.size(); ++k) {
                            acc += probs[k];
                            if (u < acc) {
                                pick = k;
                                break;
                            }
                        }
                        value = io_detail::label_of(opts[pick]);
                    } else if (kind == "bernoulli") {
                        value = io_detail::uniform01(eng) < d.value("p", 0.5) ? "1" : "0";
                    } else {
                        throw violation(qp + ".dist", "must be normal, offset, choice or bernoulli");
                    }
                    Json item = Json::object();
                    item["q_idx"] = q;
                    items.push_back(std::move(item));
                    if (!text.empty()) text += ", ";
                    text += q + "=" + value;
                }
                trial.trial_info["items"] = std::move(items);
                // The refusal draw comes last so refusals do not shift the answers of later participants.
                trial.response_text = io_detail::uniform01(eng) < refusal ? kRefusalText : text;
                char id[32];
                std::snprintf(id, sizeof(id), "P%04zu", ++pid);
                Participant p;
                p.id = id;
                p.trials.push_back(std::move(trial));
                t.participants.push_back(std::move(p));
            }
        }
    }
    return t;
}

} // namespace hsbench
