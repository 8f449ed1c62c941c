#pragma once

/**
 * @file stat_parser.hpp
 *
 * @brief Typed parsing of APA-style statistic strings ("t(23) = 4.66"),
 * p-value strings ("p < .001") and ground-truth result records.
 *
 * Statistic grammar, after normalisation (whitespace, `$`, `^`, braces removed;
 * χ / X / chi-square spellings folded to `chi2`; Unicode minus and ≤ ≥ folded to ASCII):
 *
 *     statistic := family [ "(" arg { "," arg } ")" ] relation number
 *     family    := t | F | chi2 | r | z | U | prop
 *     arg       := number            (a degree of freedom)
 *                | "N=" integer      (total sample size)
 *     relation  := "=" | "<" | ">" | "<=" | ">="
 *
 * Degrees of freedom are optional ("t < 1", "F = 56.2"); when present, t, chi2 and r
 * take exactly one and F exactly two.
 */

#include "core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace hsbench {

struct ReportedStatistic {
    Family family = Family::t;
    double value = 0;
    Relation relation = Relation::equals;
    std::vector<double> dfs;
    std::optional<long> n_total;
    std::string raw_text;

    /// Equality of the typed content; `raw_text` is provenance only.
    bool same_as(const ReportedStatistic& o) const {
        return family == o.family && value == o.value && relation == o.relation && dfs == o.dfs && n_total == o.n_total;
    }
};

enum class Qualitative { not_significant, marginal };

struct ReportedPValue {
    Relation relation = Relation::equals;
    std::optional<double> value;
    std::optional<Qualitative> qualitative;
    std::string raw_text;
};

struct GroupSummary {
    std::string label;
    double mean = 0;
    std::optional<double> sd;
    long n = 0;
    std::optional<long> k;
};

/**
 * One human-side statistical test, resolved from a ground-truth record.
 * `design` carries the human sample sizes used for the human posterior and effect size.
 */
struct TestSpec {
    std::string finding_id;
    std::string test_name;
    Family family = Family::t;
    std::optional<ReportedStatistic> statistic;
    std::optional<ReportedPValue> p;
    std::vector<GroupSummary> groups;
    Direction direction = Direction::none;
    double weight = 1.0;
    SampleDesign design;
    double p0 = 0.5;
    std::string claim;
    std::string location;
    std::vector<std::string> notes;
};

namespace parser_detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    if (from.empty()) return;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

inline std::string normalize(std::string_view text) {
    std::string s(text);
    replace_all(s, "\xE2\x88\x92", "-"); // U+2212 minus
    replace_all(s, "\xE2\x80\x93", "-"); // en dash
    replace_all(s, "\xE2\x89\xA4", "<="); // ≤
    replace_all(s, "\xE2\x89\xA5", ">="); // ≥
    replace_all(s, "\xC2\xB2", "2");      // superscript two
    replace_all(s, "\xCF\x87", "chi");    // χ
    replace_all(s, "\xCE\xA7", "chi");    // Χ
    replace_all(s, "\xC2\xA0", " ");      // nbsp
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '$' || c == '^' || c == '{' || c == '}') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    replace_all(out, "\\chi", "chi");
    replace_all(out, "chi-square", "chi2");
    replace_all(out, "chisquare", "chi2");
    replace_all(out, "chisq", "chi2");
    return out;
}

inline std::optional<double> to_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline Relation relation_from(std::string_view r) {
    if (r == "<" || r == "<=") return Relation::less_than;
    if (r == ">" || r == ">=") return Relation::greater_than;
    return Relation::equals;
}

inline std::string_view relation_symbol(Relation r) {
    switch (r) {
    case Relation::less_than: return "<";
    case Relation::greater_than: return ">";
    case Relation::equals: break;
    }
    return "=";
}

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::size_t required_dfs(Family f) {
    switch (f) {
    case Family::F: return 2;
    case Family::t:
    case Family::chi_square:
    case Family::r: return 1;
    default: return 0;
    }
}

} // namespace parser_detail

/**
 * Parse a reported test statistic. Throws `Error(unrecognized_statistic)` when no
 * grammar rule matches, which marks the record for manual curation.
 */
inline ReportedStatistic parse_statistic(std::string_view text) {
    using namespace parser_detail;
    auto fail = [&](const std::string& why) {
        return Error(ErrorCode::unrecognized_statistic, "'" + std::string(text) + "': " + why);
    };
    const std::string s = normalize(text);
    if (s.empty()) throw fail("empty statistic");

    static const std::regex rule(R"(^(t|f|chi2|x2|r|z|u|prop|proportion)(?:\(([^()]*)\))?(<=|>=|=|<|>)([-+]?(?:\d+\.?\d*|\.\d+)(?:e[-+]?\d+)?)$)");
    std::smatch m;
    if (!std::regex_match(s, m, rule)) throw fail("no grammar rule matches");

    ReportedStatistic out;
    out.raw_text = std::string(text);
    const std::string fam = m[1].str();
    if (fam == "t") out.family = Family::t;
    else if (fam == "f") out.family = Family::F;
    else if (fam == "chi2" || fam == "x2") out.family = Family::chi_square;
    else if (fam == "r") out.family = Family::r;
    else if (fam == "z") out.family = Family::z;
    else if (fam == "u") out.family = Family::U;
    else out.family = Family::binomial_prop;

    if (m[2].matched) {
        std::string args = m[2].str();
        std::size_t start = 0;
        while (start <= args.size()) {
            std::size_t comma = args.find(',', start);
            std::string_view arg(args.data() + start, (comma == std::string::npos ? args.size() : comma) - start);
            if (arg.empty()) throw fail("empty argument in parentheses");
            if (arg.substr(0, 2) == "n=") {
                auto n = to_double(arg.substr(2));
                if (!n || *n < 1 || std::floor(*n) != *n) throw fail("N must be a positive integer");
                if (out.n_total) throw fail("N given twice");
                out.n_total = static_cast<long>(*n);
            } else {
                if (arg.substr(0, 3) == "df=") arg.remove_prefix(3);
                auto df = to_double(arg);
                if (!df || *df < 0) throw fail("degrees of freedom must be non-negative numbers");
                out.dfs.push_back(*df);
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }

    if (!out.dfs.empty() && out.dfs.size() != required_dfs(out.family)) {
        throw fail("wrong number of degrees of freedom for family " + std::string(to_string(out.family)));
    }

    out.relation = relation_from(m[3].str());
    auto v = to_double(m[4].str());
    if (!v || !std::isfinite(*v)) throw fail("statistic value is not a finite number");
    out.value = *v;

    switch (out.family) {
    case Family::F:
    case Family::chi_square:
    case Family::U:
        if (out.value < 0) throw fail("statistic must be non-negative");
        break;
    case Family::r:
        if (std::abs(out.value) > 1) throw fail("correlation outside [-1, 1]");
        break;
    case Family::binomial_prop:
        if (out.value < 0 || out.value > 1) throw fail("proportion outside [0, 1]");
        break;
    default: break;
    }
    return out;
}

/// Canonical rendering; `parse_statistic(render_statistic(x))` reproduces `x` exactly.
inline std::string render_statistic(const ReportedStatistic& s) {
    using namespace parser_detail;
    std::string out;
    switch (s.family) {
    case Family::t: out = "t"; break;
    case Family::F: out = "F"; break;
    case Family::chi_square: out = "\xCF\x87" "2"; break;
    case Family::r: out = "r"; break;
    case Family::z: out = "z"; break;
    case Family::U: out = "U"; break;
    case Family::binomial_prop: out = "prop"; break;
    }
    if (!s.dfs.empty() || s.n_total) {
        out += "(";
        bool first = true;
        for (double df : s.dfs) {
            if (!first) out += ", ";
            out += format_number(df);
            first = false;
        }
        if (s.n_total) {
            if (!first) out += ", ";
            out += "N = " + std::to_string(*s.n_total);
        }
        out += ")";
    }
    out += " ";
    out += relation_symbol(s.relation);
    out += " ";
    out += format_number(s.value);
    return out;
}

/**
 * Parse a reported p-value. Accepts "p < .001", "p = 0.04", bare numbers, and the
 * qualitative forms "n.s." / "not significant" / "marginal".
 */
inline ReportedPValue parse_p_value(std::string_view text) {
    using namespace parser_detail;
    const std::string s = normalize(text);
    auto fail = [&](const std::string& why) {
        return Error(ErrorCode::unrecognized_p_value, "'" + std::string(text) + "': " + why);
    };
    if (s.empty()) throw fail("empty p-value");

    ReportedPValue out;
    out.raw_text = std::string(text);

    static const std::regex numeric(R"(^(?:p)?(<=|>=|=|<|>)?((?:\d+\.?\d*|\.\d+)(?:e[-+]?\d+)?)$)");
    std::smatch m;
    if (std::regex_match(s, m, numeric)) {
        auto v = to_double(m[2].str());
        if (!v || !(*v > 0) || *v > 1) throw fail("p must lie in (0, 1]");
        out.value = *v;
        out.relation = m[1].matched ? relation_from(m[1].str()) : Relation::equals;
        return out;
    }

    static const std::vector<std::string> not_significant = {"n.s.", "n.s", "ns", "notsignificant", "nonsignificant", "non-significant", "p>.05", "p>0.05"};
    if (std::find(not_significant.begin(), not_significant.end(), s) != not_significant.end()) {
        out.qualitative = Qualitative::not_significant;
        return out;
    }
    if (s.find("marginal") != std::string::npos) {
        out.qualitative = Qualitative::marginal;
        return out;
    }
    throw fail("no grammar rule matches");
}

inline std::string render_p_value(const ReportedPValue& p) {
    if (p.qualitative && !p.value) {
        return *p.qualitative == Qualitative::not_significant ? "n.s." : "marginal";
    }
    return std::string("p ") + std::string(parser_detail::relation_symbol(p.relation)) + " " + parser_detail::format_number(p.value.value_or(1.0));
}

namespace parser_detail {

inline bool contains(std::string_view hay, std::string_view needle) {
    std::string h(hay);
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
    return h.find(needle) != std::string::npos;
}

inline std::optional<Family> family_from_test_name(std::string_view name) {
    if (contains(name, "mann") || contains(name, "whitney")) return Family::U;
    if (contains(name, "chi")) return Family::chi_square;
    if (contains(name, "binomial") || contains(name, "proportion")) return Family::binomial_prop;
    if (contains(name, "anova") || contains(name, "f-test") || contains(name, "f test")) return Family::F;
    if (contains(name, "correl")) return Family::r;
    if (contains(name, "t-test") || contains(name, "t test") || contains(name, "ttest")) return Family::t;
    return std::nullopt;
}

template <class Json>
std::optional<double> number_at(const Json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (v.is_number()) return v.template get<double>();
    return std::nullopt;
}

} // namespace parser_detail

/**
 * Context a record inherits from its enclosing sub-study.
 */
struct RecordContext {
    std::string path;                      ///< JSON path of the record, for error messages.
    std::optional<long> participants_n;    ///< sub_studies[].participants.n
};

/**
 * Resolve one `statistical_results` entry of a ground-truth file into a TestSpec.
 *
 * Direction is the sign of a signed statistic; for unsigned families (or a zero
 * signed value) it is sign(mean of the first listed group − mean of the second).
 * Throws `SchemaViolation` naming the offending field and `MissingEvidence` when
 * neither the statistic nor the p-value (with group data) can support a test.
 */
template <class Json>
TestSpec parse_ground_truth_record(const Json& record, const RecordContext& ctx = {}) {
    using namespace parser_detail;
    const std::string& base = ctx.path;
    auto violation = [&](const std::string& field, const std::string& why) {
        return Error(ErrorCode::schema_violation, base + "." + field + ": " + why, base + "." + field);
    };
    if (!record.is_object()) throw Error(ErrorCode::schema_violation, base + ": record must be an object", base);

    auto string_field = [&](const char* key, bool required) -> std::string {
        if (!record.contains(key) || record.at(key).is_null()) {
            if (required) throw violation(key, "required string field missing");
            return {};
        }
        if (!record.at(key).is_string()) throw violation(key, "must be a string");
        return record.at(key).template get<std::string>();
    };

    TestSpec spec;
    spec.finding_id = string_field("finding_id", true);
    spec.test_name = string_field("test_name", true);
    spec.claim = string_field("claim", false);
    spec.location = string_field("location", false);
    if (spec.finding_id.empty()) throw violation("finding_id", "must be non-empty");

    if (record.contains("weight")) {
        if (!record.at("weight").is_number()) throw violation("weight", "must be a number");
        spec.weight = record.at("weight").template get<double>();
        if (!(spec.weight > 0)) throw violation("weight", "must be > 0");
    }
    if (record.contains("p0")) {
        if (!record.at("p0").is_number()) throw violation("p0", "must be a number");
        spec.p0 = record.at("p0").template get<double>();
        if (!(spec.p0 > 0 && spec.p0 < 1)) throw violation("p0", "must lie in (0,1)");
    }

    const std::string stat_text = string_field("statistic", false);
    const std::string p_text = string_field("p_value", false);
    std::optional<Error> stat_error;
    if (!stat_text.empty()) {
        try {
            spec.statistic = parse_statistic(stat_text);
        } catch (const Error& e) {
            stat_error = e;
        }
    }
    if (!p_text.empty()) {
        try {
            spec.p = parse_p_value(p_text);
        } catch (const Error& e) {
            spec.notes.push_back(e.what());
        }
    }

    bool has_raw = false;
    if (record.contains("raw_data") && !record.at("raw_data").is_null()) {
        const auto& raw = record.at("raw_data");
        if (!raw.is_object()) throw violation("raw_data", "must be an object");
        for (auto it = raw.begin(); it != raw.end(); ++it) {
            const auto& g = it.value();
            if (!g.is_object() || !(g.contains("n") || g.contains("mean"))) continue;
            const std::string gpath = "raw_data." + it.key();
            GroupSummary gs;
            gs.label = it.key();
            auto n = number_at(g, "n");
            if (!n || *n < 1 || std::floor(*n) != *n) throw violation(gpath + ".n", "must be a positive integer");
            gs.n = static_cast<long>(*n);
            if (auto k = number_at(g, "k")) {
                if (*k < 0 || *k > *n || std::floor(*k) != *k) throw violation(gpath + ".k", "must be an integer count in [0, n]");
                gs.k = static_cast<long>(*k);
            }
            if (auto mean = number_at(g, "mean")) {
                gs.mean = *mean;
            } else if (auto prop = number_at(g, "proportion")) {
                gs.mean = *prop;
            } else if (gs.k) {
                gs.mean = static_cast<double>(*gs.k) / gs.n;
            } else {
                throw violation(gpath + ".mean", "group needs a mean, proportion, or count k");
            }
            if (auto sd = number_at(g, "sd")) {
                if (*sd < 0) throw violation(gpath + ".sd", "must be non-negative");
                gs.sd = *sd;
            }
            spec.groups.push_back(gs);
        }
        has_raw = !spec.groups.empty() || !raw.empty();
    }

    const bool p_usable = spec.p && spec.p->value.has_value();
    if (!spec.statistic) {
        if (!p_usable || !has_raw) {
            if (stat_error) throw *stat_error;
            throw Error(ErrorCode::missing_evidence, base + ": neither a parseable statistic nor a numeric p-value with raw data", base);
        }
        auto fam = family_from_test_name(spec.test_name);
        if (!fam) throw Error(ErrorCode::missing_evidence, base + ": cannot infer test family from test_name '" + spec.test_name + "'", base);
        spec.family = *fam;
        if (stat_error) spec.notes.push_back(std::string("statistic ignored, using p-value: ") + stat_error->what());
    } else {
        spec.family = spec.statistic->family;
    }

    // Direction.
    const bool two_groups = spec.groups.size() >= 2;
    if (spec.family == Family::binomial_prop && spec.statistic) {
        spec.direction = direction_of(spec.statistic->value - spec.p0);
    } else if (is_signed(spec.family) && spec.statistic && spec.statistic->value != 0 && spec.statistic->relation == Relation::equals) {
        spec.direction = direction_of(spec.statistic->value);
    } else if (two_groups) {
        spec.direction = direction_of(spec.groups[0].mean - spec.groups[1].mean);
    } else if (is_signed(spec.family) && spec.statistic) {
        spec.direction = direction_of(spec.statistic->value);
    } else {
        spec.direction = Direction::none;
    }
    if (spec.family == Family::binomial_prop && !spec.statistic && !spec.groups.empty()) {
        spec.direction = direction_of(spec.groups[0].mean - spec.p0);
    }

    // Design: human sample sizes.
    const std::vector<double> no_dfs;
    const std::vector<double>& dfs = spec.statistic ? spec.statistic->dfs : no_dfs;
    std::optional<double> n_total;
    if (spec.statistic && spec.statistic->n_total) n_total = static_cast<double>(*spec.statistic->n_total);
    double group_sum = 0;
    for (const auto& g : spec.groups) group_sum += static_cast<double>(g.n);
    if (!n_total && group_sum > 0) n_total = group_sum;
    if (!n_total && ctx.participants_n && *ctx.participants_n > 0) n_total = static_cast<double>(*ctx.participants_n);

    auto need = [&](std::optional<double> v, const char* what) {
        if (!v || !(*v > 0)) {
            throw Error(ErrorCode::missing_evidence, base + ": cannot determine " + std::string(what), base);
        }
        return *v;
    };

    SampleDesign& d = spec.design;
    const bool paired = contains(spec.test_name, "paired") || contains(spec.test_name, "within") || contains(spec.test_name, "repeated");
    const bool one_sample = contains(spec.test_name, "one-sample") || contains(spec.test_name, "one sample");

    auto t_like_design = [&](std::optional<double> df_based_total) {
        if (paired || one_sample) {
            d.kind = paired ? DesignKind::paired : DesignKind::one_sample;
            std::optional<double> n;
            if (!spec.groups.empty()) n = static_cast<double>(spec.groups[0].n);
            else if (df_based_total) n = *df_based_total - 1; // df + 1
            else n = n_total;
            d.n1 = need(n, "sample size for single-sample design");
            d.n2 = 0;
            d.groups = 1;
        } else {
            d.kind = DesignKind::independent;
            d.groups = 2;
            if (two_groups) {
                d.n1 = static_cast<double>(spec.groups[0].n);
                d.n2 = static_cast<double>(spec.groups[1].n);
            } else {
                double total = need(df_based_total ? df_based_total : n_total, "total sample size");
                d.n1 = total / 2;
                d.n2 = total / 2;
            }
        }
    };

    switch (spec.family) {
    case Family::t:
        t_like_design(dfs.size() == 1 ? std::optional<double>(dfs[0] + 2) : std::nullopt);
        if ((paired || one_sample) && dfs.size() == 1 && spec.groups.empty()) d.n1 = dfs[0] + 1;
        break;
    case Family::F: {
        std::optional<double> df1;
        if (dfs.size() == 2) df1 = dfs[0];
        else if (spec.groups.size() >= 2) df1 = static_cast<double>(spec.groups.size() - 1);
        if (df1 && *df1 == 1) {
            t_like_design(dfs.size() == 2 ? std::optional<double>(dfs[1] + 2) : std::nullopt);
            if ((paired || one_sample) && dfs.size() == 2 && spec.groups.empty()) d.n1 = dfs[1] + 1;
        } else if (df1) {
            d.kind = DesignKind::anova;
            d.groups = static_cast<int>(*df1) + 1;
            std::optional<double> total = n_total;
            if (!total && dfs.size() == 2) total = dfs[0] + dfs[1] + 1;
            d.n1 = need(total, "total sample size for ANOVA");
            d.n2 = 0;
        } else {
            throw Error(ErrorCode::missing_evidence, base + ": F statistic without degrees of freedom or group data", base);
        }
        break;
    }
    case Family::chi_square:
        d.kind = DesignKind::contingency;
        d.n1 = need(n_total, "N for chi-square");
        d.groups = two_groups ? static_cast<int>(spec.groups.size()) : 2;
        break;
    case Family::r:
    case Family::z:
        d.kind = DesignKind::correlation;
        if (dfs.size() == 1) d.n1 = dfs[0] + 2;
        else d.n1 = need(n_total, "sample size for correlation");
        d.groups = 1;
        break;
    case Family::U:
        t_like_design(std::nullopt);
        d.kind = DesignKind::independent;
        break;
    case Family::binomial_prop:
        d.kind = DesignKind::binomial;
        d.n1 = need(n_total, "n for binomial proportion");
        d.groups = 1;
        break;
    }
    return spec;
}

} // namespace hsbench
