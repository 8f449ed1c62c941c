// hsbench: validate study bundles, score agent transcripts, and build
// leaderboards, bootstrap SEs and prior-sensitivity reports.
//
// Exit codes: 0 success, 1 schema violation, 2 I/O failure, 3 internal error,
// 64 usage error. Errors are printed to stderr as one JSON object per line.

#include "hsbench/hsbench.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hsbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 1;
constexpr int kExitIo = 2;
constexpr int kExitInternal = 3;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void error_record(std::string_view code, const std::string& message, const std::string& path = {}) {
    Json j = Json::object();
    j["error"] = code;
    j["message"] = message;
    if (!path.empty()) j["path"] = path;
    std::cerr << j.dump() << '\n';
}

int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::io_failure: return kExitIo;
    case ErrorCode::schema_violation:
    case ErrorCode::unrecognized_statistic:
    case ErrorCode::unrecognized_p_value:
    case ErrorCode::binding_mismatch:
    case ErrorCode::domain_error:
    case ErrorCode::missing_evidence: return kExitSchema;
    default: return kExitInternal;
    }
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path, path);
    out << text;
    if (!out) throw Error(ErrorCode::io_failure, "write failed for " + path, path);
}

/// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
    std::map<std::string, std::string> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_failure, "cannot read config " + path, path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::schema_violation, path + ":" + std::to_string(lineno) + ": expected key=value", path);
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

double to_number(const std::string& text, const std::string& what) {
    auto v = parser_detail::to_double(text);
    if (!v) throw UsageError(what + ": not a number: '" + text + "'");
    return *v;
}

std::uint64_t to_seed(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw UsageError(what + ": not a non-negative integer: '" + text + "'");
    return v;
}

std::vector<double> to_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(item, "grid"));
    if (out.empty()) throw UsageError("grid is empty");
    return out;
}

/// Settings resolved with precedence flags > environment > config file > defaults.
struct Settings {
    PriorSpec prior;
    double epsilon = kFisherClamp;
    int replicates = kDefaultBootstrapReplicates;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::vector<double> grid = {0.5, 0.6, kDefaultScaleT, 0.8, 0.9, 1.0};
    bool normalized = false;
};

struct CommonFlags {
    std::string config;
    std::string priors;
    std::optional<double> epsilon;
    std::optional<int> replicates;
    std::optional<std::string> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> grid;
};

void apply_priors(PriorSpec& p, const std::string& text) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("--priors expects key=value pairs, got '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "r_t") p.r_t = to_number(value, "r_t");
        else if (key == "r_anova") p.r_anova = to_number(value, "r_anova");
        else throw UsageError("unknown prior '" + key + "'");
    }
}

Settings resolve(const CommonFlags& f) {
    Settings s;
    for (const auto& [key, value] : read_config(f.config)) {
        if (key == "r_t") s.prior.r_t = to_number(value, key);
        else if (key == "r_anova") s.prior.r_anova = to_number(value, key);
        else if (key == "epsilon") s.epsilon = to_number(value, key);
        else if (key == "B") s.replicates = static_cast<int>(to_number(value, key));
        else if (key == "seed") s.seed = to_seed(value, key);
        else if (key == "jobs") s.jobs = static_cast<unsigned>(to_number(value, key));
        else if (key == "grid") s.grid = to_grid(value);
        else if (key == "normalized_pas") s.normalized = value == "true" || value == "1";
        else throw Error(ErrorCode::schema_violation, "unknown config key '" + key + "'", f.config);
    }
    if (const char* env = std::getenv("HSBENCH_SEED"); env && *env) s.seed = to_seed(env, "HSBENCH_SEED");
    if (const char* env = std::getenv("HSBENCH_JOBS"); env && *env) s.jobs = static_cast<unsigned>(to_number(env, "HSBENCH_JOBS"));
    if (!f.priors.empty()) apply_priors(s.prior, f.priors);
    if (f.epsilon) s.epsilon = *f.epsilon;
    if (f.replicates) s.replicates = *f.replicates;
    if (f.seed) s.seed = to_seed(*f.seed, "--seed");
    if (f.jobs) s.jobs = *f.jobs;
    if (f.grid) s.grid = to_grid(*f.grid);
    if (s.jobs == 0) s.jobs = default_jobs();
    s.prior.validate();
    return s;
}

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key=value settings file");
}

// ---------------------------------------------------------------- commands

int cmd_validate(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::io_failure, "not a directory: " + dir, dir);
    auto v = validate_bundle_dir(dir);
    Json out = Json::object();
    out["bundle"] = dir;
    out["valid"] = v.ok();
    Json errors = Json::array(), warnings = Json::array();
    for (const auto& e : v.errors) {
        errors.push_back({{"code", std::string(to_string(e.code))}, {"path", e.path}, {"message", e.message}});
        error_record(to_string(e.code), e.message, e.path);
    }
    for (const auto& w : v.warnings) warnings.push_back({{"code", std::string(to_string(w.code))}, {"path", w.path}, {"message", w.message}});
    out["errors"] = std::move(errors);
    out["warnings"] = std::move(warnings);
    if (v.bundle) {
        out["study_id"] = v.bundle->study_id;
        out["findings"] = v.bundle->findings.size();
        out["tests"] = v.bundle->test_count();
    }
    std::cout << out.dump(2) << '\n';
    return v.ok() ? kExitOk : kExitSchema;
}

int cmd_score(const std::string& bundle_dir, const std::string& transcript_path, const std::string& out_path, const Settings& s) {
    const auto bundle = load_bundle(bundle_dir);
    const auto transcript = load_transcript(transcript_path);
    EvaluateOptions opts;
    opts.prior = s.prior;
    opts.fisher_epsilon = s.epsilon;
    opts.normalized_pas = s.normalized;
    const auto report = evaluate(bundle, transcript, opts);
    write_output(out_path, report_to_json(report).dump(2) + "\n");
    return kExitOk;
}

int cmd_leaderboard(const std::string& dir, const std::string& out_path) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::io_failure, "not a directory: " + dir, dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ReportSummary> reports;
    for (const auto& f : files) reports.push_back(summary_from_json(io_detail::read_json_file(f)));
    if (reports.empty()) throw Error(ErrorCode::io_failure, "no report .json files in " + dir, dir);
    write_output(out_path, leaderboard_csv(leaderboard(reports)));
    return kExitOk;
}

struct LoadedRuns {
    std::vector<StudyBundle> bundles;
    std::vector<AgentTranscript> transcripts;
};

LoadedRuns load_runs(const std::vector<std::string>& bundle_dirs, const std::vector<std::string>& transcript_paths) {
    LoadedRuns r;
    for (const auto& b : bundle_dirs) r.bundles.push_back(load_bundle(b));
    for (const auto& t : transcript_paths) r.transcripts.push_back(load_transcript(t));
    return r;
}

/// The transcript for `bundle`: matched on metadata.study_id, or positional when a single bundle is given.
const AgentTranscript* match_transcript(const StudyBundle& bundle, const std::vector<const AgentTranscript*>& candidates, std::size_t bundles) {
    for (const auto* t : candidates) {
        if (t->meta.study_id == bundle.study_id) return t;
    }
    if (bundles == 1 && candidates.size() == 1) return candidates.front();
    return nullptr;
}

int cmd_bootstrap(const std::vector<std::string>& bundle_dirs, const std::vector<std::string>& transcript_paths, const std::string& out_path,
                  const Settings& s) {
    if (!s.seed) throw UsageError("bootstrap needs --seed (or HSBENCH_SEED / config seed)");
    if (bundle_dirs.size() != transcript_paths.size()) throw UsageError("bootstrap takes one --transcript per --bundle, in the same order");
    const auto runs = load_runs(bundle_dirs, transcript_paths);
    std::vector<StudyRun> study_runs;
    for (std::size_t i = 0; i < runs.bundles.size(); ++i) study_runs.push_back({&runs.bundles[i], &runs.transcripts[i]});
    EvaluateOptions opts;
    opts.prior = s.prior;
    opts.fisher_epsilon = s.epsilon;
    const auto res = bootstrap_study_pas(study_runs, opts, s.replicates, *s.seed, s.jobs);
    Json out = Json::object();
    out["schema_version"] = kReportSchemaVersion;
    out["B"] = res.replicates;
    out["seed"] = res.seed;
    Json studies = Json::array();
    for (std::size_t k = 0; k < res.study_se.size(); ++k) {
        Json sj = Json::object();
        sj["study_id"] = runs.bundles[k].study_id;
        sj["se"] = res.study_se[k];
        sj["dropped_replicates"] = res.dropped[k];
        studies.push_back(std::move(sj));
    }
    out["studies"] = std::move(studies);
    out["total_se"] = res.total_se;
    write_output(out_path, out.dump(2) + "\n");
    return kExitOk;
}

int cmd_sensitivity(const std::vector<std::string>& bundle_dirs, const std::vector<std::string>& transcript_paths, const std::string& out_path,
                    const Settings& s) {
    const auto runs = load_runs(bundle_dirs, transcript_paths);
    // Agents are (model, method) cells, in first-seen order.
    std::vector<std::string> labels;
    std::map<std::string, std::vector<const AgentTranscript*>> by_agent;
    for (const auto& t : runs.transcripts) {
        const std::string label = t.meta.model + "/" + t.meta.method;
        if (!by_agent.count(label)) labels.push_back(label);
        by_agent[label].push_back(&t);
    }
    std::vector<const StudyBundle*> bundles;
    for (const auto& b : runs.bundles) bundles.push_back(&b);
    std::vector<AgentRuns> agents;
    for (const auto& label : labels) {
        AgentRuns a{label, {}};
        for (const auto* b : bundles) {
            const auto* t = match_transcript(*b, by_agent.at(label), bundles.size());
            if (!t) throw UsageError("agent " + label + " has no transcript for study " + b->study_id);
            a.transcripts.push_back(t);
        }
        agents.push_back(std::move(a));
    }
    EvaluateOptions opts;
    opts.prior = s.prior;
    opts.fisher_epsilon = s.epsilon;
    const auto rep = sensitivity_sweep(bundles, agents, s.grid, opts, s.jobs);
    write_output(out_path, sensitivity_to_json(rep, labels).dump(2) + "\n");
    return kExitOk;
}

int cmd_parse(const std::optional<std::string>& stat, const std::optional<std::string>& p) {
    if (!stat && !p) throw UsageError("parse needs --stat and/or --p");
    Json out = Json::object();
    if (stat) {
        const auto s = parse_statistic(*stat);
        Json sj = Json::object();
        sj["family"] = std::string(to_string(s.family));
        sj["value"] = s.value;
        sj["relation"] = std::string(to_string(s.relation));
        sj["dfs"] = s.dfs;
        sj["n_total"] = s.n_total ? Json(*s.n_total) : Json(nullptr);
        sj["canonical"] = render_statistic(s);
        out["statistic"] = std::move(sj);
    }
    if (p) {
        const auto v = parse_p_value(*p);
        Json pj = Json::object();
        pj["relation"] = std::string(to_string(v.relation));
        pj["value"] = v.value ? Json(*v.value) : Json(nullptr);
        pj["qualitative"] = v.qualitative ? Json(*v.qualitative == Qualitative::not_significant ? "not_significant" : "marginal") : Json(nullptr);
        pj["canonical"] = render_p_value(v);
        out["p_value"] = std::move(pj);
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path, const Settings& s) {
    if (!s.seed) throw UsageError("synth needs --seed (or HSBENCH_SEED / config seed)");
    const auto spec = io_detail::read_json_file(spec_path);
    write_output(out_path, transcript_to_json(synthesize_transcript(spec, *s.seed)).dump(2) + "\n");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score agent transcripts against human study ground truth"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string bundle_dir, transcript, out_path, reports_dir, spec_path;
    std::vector<std::string> bundles, transcripts;
    std::optional<std::string> stat_text, p_text;

    auto* validate = app.add_subcommand("validate", "check a bundle directory");
    validate->add_option("bundle", bundle_dir, "bundle directory")->required();

    auto* score = app.add_subcommand("score", "score one transcript against one bundle");
    score->add_option("--bundle", bundle_dir, "bundle directory")->required();
    score->add_option("--transcript", transcript, "transcript JSON")->required();
    score->add_option("--priors", flags.priors, "r_t=0.7071,r_anova=0.5");
    score->add_option("--epsilon", flags.epsilon, "Fisher-z clamp");
    score->add_flag("--normalized-pas", "add the normalized PAS column");
    score->add_option("--out", out_path, "report path (default stdout)");
    add_common(score, flags);

    auto* board = app.add_subcommand("leaderboard", "aggregate reports into a model x method table");
    board->add_option("--reports", reports_dir, "directory of report JSON files")->required();
    board->add_option("--out", out_path, "CSV path (default stdout)");

    auto* boot = app.add_subcommand("bootstrap", "participant bootstrap SE of study PAS");
    boot->add_option("--B", flags.replicates, "replicates (default 200)");
    boot->add_option("--seed", flags.seed, "seed (required)");
    boot->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");
    boot->add_option("--bundle", bundles, "bundle directory (repeatable)")->required();
    boot->add_option("--transcript", transcripts, "transcript per bundle (repeatable)")->required();
    boot->add_option("--priors", flags.priors, "r_t=...,r_anova=...");
    boot->add_option("--out", out_path, "output path (default stdout)");
    add_common(boot, flags);

    auto* sens = app.add_subcommand("sensitivity", "re-score agents across Cauchy prior scales");
    sens->add_option("--grid", flags.grid, "comma-separated r_t values");
    sens->add_option("--bundle", bundles, "bundle directory (repeatable)")->required();
    sens->add_option("--transcript", transcripts, "agent transcripts (repeatable)")->required();
    sens->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");
    sens->add_option("--priors", flags.priors, "r_anova=... (r_t is swept)");
    sens->add_option("--out", out_path, "output path (default stdout)");
    add_common(sens, flags);

    auto* parse = app.add_subcommand("parse", "echo the typed parse of a statistic or p-value");
    parse->add_option("--stat", stat_text, "statistic text, e.g. \"t(23) = 4.66\"");
    parse->add_option("--p", p_text, "p-value text, e.g. \"p < .001\"");

    auto* synth = app.add_subcommand("synth", "synthesize a transcript from a distribution spec");
    synth->add_option("--spec", spec_path, "spec JSON")->required();
    synth->add_option("--seed", flags.seed, "seed (required)");
    synth->add_option("--out", out_path, "output path (default stdout)");
    add_common(synth, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_record("UsageError", e.what());
        return kExitUsage;
    }

    try {
        if (*validate) return cmd_validate(bundle_dir);
        if (*parse) return cmd_parse(stat_text, p_text);
        if (*board) return cmd_leaderboard(reports_dir, out_path);
        Settings s = resolve(flags);
        if (*score) {
            s.normalized = s.normalized || score->count("--normalized-pas") > 0;
            return cmd_score(bundle_dir, transcript, out_path, s);
        }
        if (*boot) return cmd_bootstrap(bundles, transcripts, out_path, s);
        if (*sens) return cmd_sensitivity(bundles, transcripts, out_path, s);
        if (*synth) return cmd_synth(spec_path, out_path, s);
    } catch (const UsageError& e) {
        error_record("UsageError", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        error_record(to_string(e.code()), e.what(), e.path());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        error_record("InternalError", e.what());
        return kExitInternal;
    }
    return kExitInternal;
}
