#pragma once

/**
 * @file alignment.hpp
 *
 * @brief Probability Alignment Score (binary and directional) and the Effect
 * Consistency Score (Lin's concordance correlation, per finding and globally weighted).
 */

#include "core.hpp"
#include "effect_size.hpp"
#include "evidence.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace hsbench {

enum class Level { test, finding, study, benchmark };

inline const char* to_string(Level l) {
    switch (l) {
    case Level::test: return "test";
    case Level::finding: return "finding";
    case Level::study: return "study";
    case Level::benchmark: return "benchmark";
    }
    return "?";
}

struct AlignmentScore {
    double value = 0.5;
    Level level = Level::test;
};

struct EffectPair {
    EffectSize human;
    EffectSize agent;
    double weight = 1;
};

inline AlignmentScore pas_test(Posterior h, Posterior a) {
    if (!(h.pi >= 0 && h.pi <= 1 && a.pi >= 0 && a.pi <= 1)) throw Error(ErrorCode::domain_error, "posterior outside [0, 1]");
    return {h.pi * a.pi + (1 - h.pi) * (1 - a.pi), Level::test};
}

inline AlignmentScore pas_directional(const DirectionalPosterior& h, const DirectionalPosterior& a) {
    const double s = h.p_pos * a.p_pos + h.p_neg * a.p_neg + h.p_null * a.p_null;
    return {std::clamp(s, 0.0, 1.0), Level::test};
}

/// Concordance correlation; `zero_variance` is set (and value 0) when either side is constant.
struct Concordance {
    double value = 0;
    bool zero_variance = false;
};

inline Concordance ecs_finding(std::span<const double> h, std::span<const double> a) {
    if (h.size() != a.size()) throw Error(ErrorCode::length_mismatch, "ECS needs equal-length effect vectors");
    if (h.size() < 2) throw Error(ErrorCode::insufficient_data, "ECS needs at least two tests");
    const double m = static_cast<double>(h.size());
    double mh = 0, ma = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        mh += h[i];
        ma += a[i];
    }
    mh /= m;
    ma /= m;
    double vh = 0, va = 0, cov = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        vh += (h[i] - mh) * (h[i] - mh);
        va += (a[i] - ma) * (a[i] - ma);
        cov += (h[i] - mh) * (a[i] - ma);
    }
    vh /= m;
    va /= m;
    cov /= m;
    if (vh == 0 || va == 0) return {0.0, true};
    // rho * 2 sd_a sd_h collapses to 2 cov.
    return {2 * cov / (va + vh + (ma - mh) * (ma - mh)), false};
}

/**
 * Study-balanced weighted concordance over effect pairs. Throws DegenerateInput
 * when both weighted variances and the mean gap vanish; callers treat that as 1.
 */
inline double ecs_global(std::span<const EffectPair> pairs) {
    if (pairs.size() < 2) throw Error(ErrorCode::insufficient_data, "global ECS needs at least two effect pairs");
    double wsum = 0, mh = 0, ma = 0;
    for (const auto& p : pairs) {
        if (!(p.weight > 0)) throw Error(ErrorCode::domain_error, "effect pair weight must be positive");
        wsum += p.weight;
        mh += p.weight * p.human.d;
        ma += p.weight * p.agent.d;
    }
    mh /= wsum;
    ma /= wsum;
    double sh = 0, sa = 0, cross = 0;
    for (const auto& p : pairs) {
        const double uh = p.human.d - mh, ua = p.agent.d - ma;
        sh += p.weight * uh * uh;
        sa += p.weight * ua * ua;
        cross += p.weight * uh * ua;
    }
    // Weights are normalized so the mean-gap term is on the same scale as the moments.
    sh /= wsum;
    sa /= wsum;
    cross /= wsum;
    const double denom = sa + sh + (ma - mh) * (ma - mh);
    if (denom == 0) throw Error(ErrorCode::degenerate_input, "identical constant effects; concordance is 1 by convention");
    return 2 * cross / denom;
}

inline double sigmoid(double x) {
    return x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x));
}

} // namespace hsbench
