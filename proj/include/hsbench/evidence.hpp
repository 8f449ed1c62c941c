#pragma once

/**
 * @file evidence.hpp
 *
 * @brief Bayes factors for every supported test family, the posterior
 * pi = BF / (1 + BF) under equal prior odds, and its 3-way directional split.
 *
 * Families:
 *   - t (and F with df1 = 1, r, Fisher z, Mann-Whitney U via their t-equivalents):
 *     JZS Bayes factor with a Cauchy(0, r_t) prior on the standardized effect,
 *     computed as the inverse-gamma g-mixture
 *         BF = ∫ (1 + N g)^(-1/2) (1 + t^2 / ((1 + N g) v))^(-(v+1)/2) / (1 + t^2 / v)^(-(v+1)/2) p(g) dg,
 *         g ~ InvGamma(1/2, r_t^2 / 2),
 *     with N = n1 n2 / (n1 + n2), v = n1 + n2 - 2 (independent) or N = n, v = n - 1
 *     (paired, one-sample). Correlations use N = n, v = n - 2.
 *   - F with df1 > 1: Zellner-Siow mixture over a single g for a one-way design,
 *         BF = ∫ (1 + g)^(df2/2) (1 + g (1 - R^2))^(-(N-1)/2) p(g) dg,
 *         R^2 = F df1 / (F df1 + df2), g ~ InvGamma(1/2, r_anova^2 (N / k) / 2),
 *     which for k = 2 balanced groups equals the JZS two-sample BF at r_t = sqrt(2) r_anova.
 *   - chi-square: BF = exp((chi^2 - df ln n) / 2)
 *   - binomial: Beta(1, 1) marginal over the point null, BF = [1 / (n + 1)] / [C(n, k) p0^k (1 - p0)^(n - k)]
 *
 * Integrals are evaluated on x = g / (1 + g) in (0, 1) with adaptive Gauss-Kronrod
 * quadrature to relative tolerance 1e-8, after factoring out the log-integrand maximum.
 */

#include "core.hpp"
#include "quadrature.hpp"
#include "stat_parser.hpp"
#include "stat_tests.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace hsbench {

inline constexpr double kDefaultScaleT = 0.70710678118654752440; // sqrt(2) / 2
inline constexpr double kDefaultScaleAnova = 0.5;
inline constexpr double kLogBfCeiling = 700.0;

struct PriorSpec {
    double r_t = kDefaultScaleT;
    double r_anova = kDefaultScaleAnova;

    void validate() const {
        auto check = [](double r, const char* what) {
            if (!(r >= 0.1 && r <= 5.0)) {
                throw Error(ErrorCode::domain_error, std::string(what) + " must lie in [0.1, 5], got " + std::to_string(r));
            }
        };
        check(r_t, "r_t");
        check(r_anova, "r_anova");
    }
};

/// BF10 held on the log scale; `infinite` marks evidence beyond exp(700) or from a zero-variance statistic.
struct BayesFactor {
    double log_bf10 = 0;
    bool infinite = false;
    Family family = Family::t;
    PriorSpec prior;

    double bf10() const { return infinite ? std::numeric_limits<double>::infinity() : std::exp(log_bf10); }
};

struct Posterior {
    double pi = 0.5;
};

struct DirectionalPosterior {
    double p_pos = 0;
    double p_neg = 0;
    double p_null = 1;
};

namespace evidence_detail {

inline constexpr double kQuadratureTolerance = 1e-8;

/// Log of the InvGamma(1/2, scale/2) density at g.
inline double log_inv_gamma_half(double g, double scale) {
    return 0.5 * std::log(scale / (2 * std::numbers::pi)) - 1.5 * std::log(g) - scale / (2 * g);
}

/**
 * log ∫_0^∞ exp(log_integrand(g)) dg via x = g / (1 + g). The integrand's mode is
 * located on a log-g grid and used both as the scaling constant and as a breakpoint.
 */
template <class LogFn>
double log_integral_over_g(LogFn&& log_integrand) {
    double best_log = -std::numeric_limits<double>::infinity();
    double best_g = 1.0;
    for (int i = 0; i <= 480; ++i) {
        const double g = std::exp(-36.0 + 0.15 * i);
        const double v = log_integrand(g) + std::log(g); // density in log g
        if (v > best_log) {
            best_log = v;
            best_g = g;
        }
    }
    if (!std::isfinite(best_log)) {
        throw Error(ErrorCode::integration_failure, "integrand vanishes everywhere on the search grid");
    }
    const double shift = log_integrand(best_g);
    auto f = [&](double x) {
        const double g = x / (1 - x);
        const double jac = -2 * std::log1p(-x);
        const double v = log_integrand(g) + jac - shift;
        return v < -745 ? 0.0 : std::exp(v);
    };
    std::vector<double> breaks = {0.0, 1.0};
    for (double factor : {1e-6, 1e-3, 1e-1, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6}) {
        const double g = best_g * factor;
        breaks.push_back(g / (1 + g));
    }
    auto res = quadrature::integrate(f, breaks, kQuadratureTolerance);
    if (!(res.value > 0)) {
        throw Error(ErrorCode::integration_failure, "non-positive marginal likelihood");
    }
    return shift + std::log(res.value);
}

inline BayesFactor finish(double log_bf, Family family, const PriorSpec& prior) {
    BayesFactor bf;
    bf.family = family;
    bf.prior = prior;
    if (log_bf > kLogBfCeiling || std::isinf(log_bf)) {
        bf.infinite = log_bf > 0;
        bf.log_bf10 = log_bf > 0 ? kLogBfCeiling : log_bf;
    } else {
        bf.log_bf10 = log_bf;
    }
    return bf;
}

inline BayesFactor infinite(Family family, const PriorSpec& prior) {
    BayesFactor bf;
    bf.family = family;
    bf.prior = prior;
    bf.infinite = true;
    bf.log_bf10 = kLogBfCeiling;
    return bf;
}

} // namespace evidence_detail

/**
 * log BF10 of the JZS t-test for effective sample size `n_eff` and `df` degrees of
 * freedom with Cauchy scale `r`.
 */
inline double jzs_log_bf(double t, double n_eff, double df, double r) {
    if (!(n_eff > 0) || !(df > 0)) throw Error(ErrorCode::domain_error, "JZS Bayes factor needs positive n and df");
    const double t2 = t * t;
    const double null_term = std::log1p(t2 / df);
    auto log_integrand = [&](double g) {
        const double a = 1 + n_eff * g;
        return -0.5 * std::log(a) - 0.5 * (df + 1) * (std::log1p(t2 / (a * df)) - null_term) + evidence_detail::log_inv_gamma_half(g, r * r);
    };
    return evidence_detail::log_integral_over_g(log_integrand);
}

/**
 * log BF10 of the one-way design g-mixture for an F(df1, df2) statistic from
 * `n_total` observations in `groups` cells.
 */
inline double anova_log_bf(double f, double df1, double df2, double n_total, int groups, double r) {
    if (!(df1 > 0) || !(df2 > 0) || !(n_total > 0) || groups < 2) throw Error(ErrorCode::domain_error, "ANOVA Bayes factor needs positive dfs and n");
    const double r2 = f * df1 / (f * df1 + df2);
    const double scale = r * r * n_total / groups;
    auto log_integrand = [&](double g) {
        return 0.5 * df2 * std::log1p(g) - 0.5 * (n_total - 1) * std::log1p(g * (1 - r2)) + evidence_detail::log_inv_gamma_half(g, scale);
    };
    return evidence_detail::log_integral_over_g(log_integrand);
}

inline double chi_square_log_bf(double chi2, double df, double n) {
    if (!(n > 0)) throw Error(ErrorCode::domain_error, "chi-square Bayes factor needs n > 0");
    return (chi2 - df * std::log(n)) / 2;
}

inline double binomial_log_bf(double k, double n, double p0) {
    if (!(n >= 1) || k < 0 || k > n) throw Error(ErrorCode::domain_error, "binomial Bayes factor needs 0 <= k <= n");
    const double log_choose = std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
    return -std::log(n + 1) - (log_choose + k * std::log(p0) + (n - k) * std::log1p(-p0));
}

namespace evidence_detail {

inline SampleDesign rescale(SampleDesign d, std::optional<double> n_override) {
    if (!n_override) return d;
    if (!(*n_override > 0)) throw Error(ErrorCode::domain_error, "sample size override must be positive");
    if (d.kind == DesignKind::independent && d.total() > 0) {
        const double f = *n_override / d.total();
        d.n1 *= f;
        d.n2 *= f;
    } else {
        d.n1 = *n_override;
    }
    return d;
}

inline double t_route(double t, const SampleDesign& d, double r) {
    switch (d.kind) {
    case DesignKind::independent:
        return jzs_log_bf(t, d.n1 * d.n2 / (d.n1 + d.n2), d.n1 + d.n2 - 2, r);
    case DesignKind::paired:
    case DesignKind::one_sample:
        return jzs_log_bf(t, d.n1, d.n1 - 1, r);
    case DesignKind::correlation:
        return jzs_log_bf(t, d.n1, d.n1 - 2, r);
    default:
        throw Error(ErrorCode::unsupported_family, "t-route needs a t-compatible design");
    }
}

inline double r_route(double r_value, const SampleDesign& d, const PriorSpec& prior) {
    const double nu = d.n1 - 2;
    if (!(nu > 0)) throw Error(ErrorCode::insufficient_data, "correlation needs n >= 3");
    if (std::abs(r_value) >= 1) return std::numeric_limits<double>::infinity();
    const double t = r_value * std::sqrt(nu / (1 - r_value * r_value));
    return t_route(t, d, prior.r_t);
}

struct BfInput {
    Family family;
    double value;
    std::vector<double> dfs;
    SampleDesign design;
    double p0 = 0.5;
};

inline double log_bf(const BfInput& in, const PriorSpec& prior) {
    const SampleDesign& d = in.design;
    switch (in.family) {
    case Family::t:
        if (std::isinf(in.value)) return std::numeric_limits<double>::infinity();
        return t_route(in.value, d, prior.r_t);
    case Family::F: {
        if (std::isinf(in.value)) return std::numeric_limits<double>::infinity();
        if (d.kind == DesignKind::anova) {
            const double df1 = static_cast<double>(d.groups - 1);
            const double df2 = in.dfs.size() == 2 ? in.dfs[1] : d.n1 - d.groups;
            return anova_log_bf(in.value, df1, df2, d.n1, d.groups, prior.r_anova);
        }
        return t_route(std::sqrt(in.value), d, prior.r_t);
    }
    case Family::chi_square: {
        const double df = in.dfs.empty() ? 1.0 : in.dfs[0];
        return chi_square_log_bf(in.value, df, d.n1);
    }
    case Family::r: {
        SampleDesign c = d;
        c.kind = DesignKind::correlation;
        return r_route(in.value, c, prior);
    }
    case Family::z: {
        SampleDesign c = d;
        c.kind = DesignKind::correlation;
        return r_route(std::tanh(in.value), c, prior);
    }
    case Family::U: {
        SampleDesign c{DesignKind::correlation, d.total(), 0, 1};
        return r_route(1 - 2 * in.value / (d.n1 * d.n2), c, prior);
    }
    case Family::binomial_prop: {
        const double n = d.n1;
        const double k = std::round(std::clamp(in.value, 0.0, 1.0) * n);
        return binomial_log_bf(k, n, in.p0);
    }
    }
    throw Error(ErrorCode::unsupported_family, "unknown family");
}

} // namespace evidence_detail

/**
 * Human-side Bayes factor from a ground-truth TestSpec, using the human sample
 * sizes in `spec.design` (or `n_override` as the total).
 */
inline BayesFactor bayes_factor(const TestSpec& spec, const PriorSpec& prior, std::optional<double> n_override = std::nullopt) {
    prior.validate();
    const ResolvedStatistic stat = resolve_statistic(spec);
    evidence_detail::BfInput in{spec.family, stat.value, stat.dfs, evidence_detail::rescale(spec.design, n_override), spec.p0};
    return evidence_detail::finish(evidence_detail::log_bf(in, prior), spec.family, prior);
}

/// Agent-side Bayes factor from a recomputed test, using the agent sample sizes.
inline BayesFactor bayes_factor(const TestOutcome& outcome, const PriorSpec& prior, std::optional<double> n_override = std::nullopt) {
    prior.validate();
    if (outcome.infinite_evidence) return evidence_detail::infinite(outcome.family, prior);
    const double value = outcome.family == Family::binomial_prop ? outcome.value : outcome.value;
    evidence_detail::BfInput in{outcome.family, value, outcome.dfs, evidence_detail::rescale(outcome.design, n_override), outcome.p0};
    return evidence_detail::finish(evidence_detail::log_bf(in, prior), outcome.family, prior);
}

/// pi = BF10 / (1 + BF10), evaluated as a logistic in log BF10.
inline Posterior posterior(const BayesFactor& bf) {
    if (bf.infinite) return {1.0};
    const double l = bf.log_bf10;
    const double pi = l >= 0 ? 1 / (1 + std::exp(-l)) : std::exp(l) / (1 + std::exp(l));
    return {pi};
}

/// Allocates all H1 mass to the observed sign; an unsigned effect splits it evenly.
inline DirectionalPosterior directional_posterior(Posterior p, Direction direction) {
    switch (direction) {
    case Direction::positive: return {p.pi, 0.0, 1 - p.pi};
    case Direction::negative: return {0.0, p.pi, 1 - p.pi};
    case Direction::none: break;
    }
    return {p.pi / 2, p.pi / 2, 1 - p.pi};
}

} // namespace hsbench
