#pragma once

/**
 * @file effect_size.hpp
 *
 * @brief Recovery of a standardized Cohen's d, and its large-sample standard
 * error, from every supported statistic family.
 *
 * Conversions:
 *   - t, independent:         d = t * sqrt((n1 + n2) / (n1 * n2))
 *   - t, paired / one-sample: d = t / sqrt(n)
 *   - F with df1 = 1:         t = sqrt(F), then as t (sign from the direction)
 *   - r (Fisher z via r = tanh z, Mann-Whitney U via r_rb = 1 - 2U / (n1 n2)):
 *                             d = 2r / sqrt(1 - r^2)
 *   - 2x2 table:              d = ln(OR) * sqrt(3) / pi, Haldane +0.5 on every cell if any is 0
 *   - binomial proportion:    d = 2 (p - p0) / sqrt(p0 (1 - p0))
 *
 * Standard errors:
 *   - two-sample:             sqrt((n1 + n2) / (n1 n2) + d^2 / (2 (n1 + n2)))
 *   - paired / one-sample:    sqrt(1 / n + d^2 / (2 n))
 *   - correlation family:     sqrt((4 + d^2) / (n - 1))          (delta method on se(r) = (1 - r^2) / sqrt(n - 1))
 *   - 2x2 table:              sqrt(3) / pi * sqrt(sum of 1 / cell)  (Woolf, same Haldane cells)
 *   - binomial:               2 sqrt(q (1 - q) / n) / sqrt(p0 (1 - p0)), q = p-hat, or (k + 0.5) / (n + 1) when p-hat is 0 or 1
 */

#include "core.hpp"
#include "stat_parser.hpp"
#include "stat_tests.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace hsbench {

struct EffectSize {
    double d = 0;
    double se = 0;
    Direction direction = Direction::none;
    Family source_family = Family::t;
    SampleDesign design;
    /// 2x2 cells {a, b, c, d} actually used (after any Haldane correction).
    std::vector<double> cells;
    double p0 = 0.5;
};

inline double d_from_t(double t, const SampleDesign& design) {
    switch (design.kind) {
    case DesignKind::independent:
        return t * std::sqrt((design.n1 + design.n2) / (design.n1 * design.n2));
    case DesignKind::paired:
    case DesignKind::one_sample:
        return t / std::sqrt(design.n1);
    default:
        throw Error(ErrorCode::unsupported_conversion, "t conversion needs an independent, paired or one-sample design");
    }
}

inline double d_from_r(double r) {
    if (!(std::abs(r) < 1)) throw Error(ErrorCode::undefined_effect, "d is undefined for |r| >= 1");
    return 2 * r / std::sqrt(1 - r * r);
}

inline double r_from_fisher_z(double z) { return std::tanh(z); }

inline double rank_biserial(double u, double n1, double n2) { return 1 - 2 * u / (n1 * n2); }

inline double d_from_log_odds_ratio(double log_or) { return log_or * std::sqrt(3.0) / std::numbers::pi; }

/// Applies the Haldane correction when any cell is zero.
inline std::vector<double> haldane_cells(std::vector<double> cells) {
    if (cells.size() != 4) throw Error(ErrorCode::unsupported_conversion, "odds ratio needs a 2x2 table");
    bool any_zero = false;
    for (double c : cells) any_zero = any_zero || c == 0;
    if (any_zero) for (double& c : cells) c += 0.5;
    return cells;
}

inline double d_from_table(const std::vector<double>& cells) {
    auto c = haldane_cells(cells);
    return d_from_log_odds_ratio(std::log((c[0] * c[3]) / (c[1] * c[2])));
}

inline double d_from_proportion(double p, double p0) {
    return 2 * (p - p0) / std::sqrt(p0 * (1 - p0));
}

/// Two-sample and single-sample standard errors of d.
inline double effect_se(double d, const SampleDesign& design) {
    const double n1 = design.n1, n2 = design.n2;
    switch (design.kind) {
    case DesignKind::independent:
        return std::sqrt((n1 + n2) / (n1 * n2) + d * d / (2 * (n1 + n2)));
    case DesignKind::paired:
    case DesignKind::one_sample:
        return std::sqrt(1 / n1 + d * d / (2 * n1));
    case DesignKind::correlation:
        return std::sqrt((4 + d * d) / (n1 - 1));
    default:
        throw Error(ErrorCode::unsupported_conversion, std::string("no closed-form SE without cell data for design ") + std::string(to_string(design.kind)));
    }
}

/// Standard error of an EffectSize, using its cells / null rate where the family needs them.
inline double effect_se(const EffectSize& e) {
    switch (e.design.kind) {
    case DesignKind::contingency: {
        if (e.cells.size() != 4) throw Error(ErrorCode::unsupported_conversion, "odds-ratio SE needs 2x2 cells");
        double s = 0;
        for (double c : e.cells) s += 1 / c;
        return std::sqrt(3.0) / std::numbers::pi * std::sqrt(s);
    }
    case DesignKind::binomial: {
        const double n = e.design.n1;
        const double p0 = e.p0;
        double q = p0 + e.d * std::sqrt(p0 * (1 - p0)) / 2;
        if (q <= 0 || q >= 1) {
            const double k = std::round(std::clamp(q, 0.0, 1.0) * n);
            q = (k + 0.5) / (n + 1);
        }
        return 2 * std::sqrt(q * (1 - q) / n) / std::sqrt(p0 * (1 - p0));
    }
    default:
        return effect_se(e.d, e.design);
    }
}

namespace effect_detail {

inline EffectSize finish(double magnitude_or_signed, Direction direction, Family family, const SampleDesign& design,
                         std::vector<double> cells = {}, double p0 = 0.5) {
    EffectSize e;
    e.source_family = family;
    e.design = design;
    e.cells = std::move(cells);
    e.p0 = p0;
    // Reported statistics are often magnitudes; the recorded direction fixes the sign.
    e.d = direction == Direction::none ? magnitude_or_signed : std::abs(magnitude_or_signed) * sign_of(direction);
    e.direction = direction == Direction::none ? direction_of(e.d) : direction;
    if (e.d == 0) e.direction = Direction::none;
    e.se = effect_se(e);
    return e;
}

inline double t_from_f(double f, double df1) {
    if (df1 != 1) {
        throw Error(ErrorCode::unsupported_conversion, "F with df1 > 1 has no d conversion; excluded from ECS");
    }
    return std::sqrt(f);
}

inline std::vector<double> table_from_groups(const std::vector<GroupSummary>& groups) {
    if (groups.size() != 2) throw Error(ErrorCode::unsupported_conversion, "2x2 conversion needs exactly two groups");
    std::vector<double> cells;
    for (const auto& g : groups) {
        const double n = static_cast<double>(g.n);
        const double k = g.k ? static_cast<double>(*g.k) : std::round(g.mean * n);
        if (k < 0 || k > n) throw Error(ErrorCode::unsupported_conversion, "group proportion outside [0, 1]");
        cells.push_back(k);
        cells.push_back(n - k);
    }
    return cells;
}

} // namespace effect_detail

/**
 * Cohen's d for a human-side test. Throws `UnsupportedConversion` for families
 * without a rule (F with df1 > 1, chi-square without 2x2 group counts) and
 * `UndefinedEffect` for |r| = 1.
 */
inline EffectSize cohen_d(const TestSpec& spec) {
    using namespace effect_detail;
    const ResolvedStatistic stat = resolve_statistic(spec);
    const SampleDesign& design = spec.design;
    switch (spec.family) {
    case Family::t:
        return finish(d_from_t(stat.value, design), spec.direction, spec.family, design);
    case Family::F: {
        if (design.kind == DesignKind::anova) {
            throw Error(ErrorCode::unsupported_conversion, "F with df1 > 1 has no d conversion; excluded from ECS");
        }
        const double df1 = stat.dfs.empty() ? 1.0 : stat.dfs[0];
        return finish(d_from_t(t_from_f(stat.value, df1), design), spec.direction, spec.family, design);
    }
    case Family::r:
        return finish(d_from_r(stat.value), spec.direction, spec.family, design);
    case Family::z:
        return finish(d_from_r(r_from_fisher_z(stat.value)), spec.direction, spec.family, design);
    case Family::U: {
        SampleDesign corr{DesignKind::correlation, design.total(), 0, 1};
        return finish(d_from_r(rank_biserial(stat.value, design.n1, design.n2)), spec.direction, spec.family, corr);
    }
    case Family::chi_square: {
        auto cells = haldane_cells(table_from_groups(spec.groups));
        return finish(d_from_table(cells), spec.direction, spec.family, design, cells);
    }
    case Family::binomial_prop:
        return finish(d_from_proportion(stat.value, spec.p0), Direction::none, spec.family, design, {}, spec.p0);
    }
    throw Error(ErrorCode::unsupported_conversion, "unknown family");
}

/// Cohen's d for an agent-side recomputed test.
inline EffectSize cohen_d(const TestOutcome& outcome) {
    using namespace effect_detail;
    if (outcome.infinite_evidence) {
        throw Error(ErrorCode::undefined_effect, "infinite statistic has no finite effect size");
    }
    switch (outcome.family) {
    case Family::t:
        return finish(d_from_t(outcome.value, outcome.design), Direction::none, outcome.family, outcome.design);
    case Family::F: {
        const double df1 = outcome.dfs.empty() ? 0.0 : outcome.dfs[0];
        if (outcome.design.kind == DesignKind::anova) t_from_f(outcome.value, df1);
        const double t = t_from_f(outcome.value, df1) * (outcome.direction == Direction::negative ? -1.0 : 1.0);
        return finish(d_from_t(t, outcome.design), Direction::none, outcome.family, outcome.design);
    }
    case Family::r:
        return finish(d_from_r(outcome.value), Direction::none, outcome.family, outcome.design);
    case Family::z:
        return finish(d_from_r(r_from_fisher_z(outcome.value)), Direction::none, outcome.family, outcome.design);
    case Family::U: {
        SampleDesign corr{DesignKind::correlation, outcome.design.total(), 0, 1};
        return finish(d_from_r(rank_biserial(outcome.value, outcome.design.n1, outcome.design.n2)), Direction::none, outcome.family, corr);
    }
    case Family::chi_square: {
        if (outcome.table2x2.size() != 4) throw Error(ErrorCode::unsupported_conversion, "chi-square larger than 2x2 has no d conversion");
        auto cells = haldane_cells(outcome.table2x2);
        return finish(d_from_table(cells), Direction::none, outcome.family, outcome.design, cells);
    }
    case Family::binomial_prop:
        return finish(d_from_proportion(outcome.value, outcome.p0), Direction::none, outcome.family, outcome.design, {}, outcome.p0);
    }
    throw Error(ErrorCode::unsupported_conversion, "unknown family");
}

} // namespace hsbench
