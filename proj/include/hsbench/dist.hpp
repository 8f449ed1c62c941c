#pragma once

/**
 * @file dist.hpp
 *
 * @brief Distribution functions (cdf, upper tail, quantile) for the families
 * every p-value and Stouffer conversion in hsbench relies on.
 */

#include "core.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace hsbench::dist {

enum class Kind { t, F, chi_square, normal, beta };

/**
 * A parameterised distribution. `a` and `b` are the degrees of freedom (t, chi_square
 * use only `a`; F uses both), or the shape parameters for beta. normal is the standard normal.
 */
struct Distribution {
    Kind kind;
    double a = 0;
    double b = 0;
};

inline Distribution normal() { return {Kind::normal}; }
inline Distribution student_t(double df) { return {Kind::t, df}; }
inline Distribution fisher_f(double df1, double df2) { return {Kind::F, df1, df2}; }
inline Distribution chi_squared(double df) { return {Kind::chi_square, df}; }
inline Distribution beta(double a, double b) { return {Kind::beta, a, b}; }

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0) || !std::isfinite(v)) {
        throw Error(ErrorCode::domain_error, std::string(what) + " must be positive and finite, got " + std::to_string(v));
    }
}

inline void validate(const Distribution& d) {
    switch (d.kind) {
    case Kind::normal: break;
    case Kind::t:
    case Kind::chi_square: require_positive(d.a, "degrees of freedom"); break;
    case Kind::F:
        require_positive(d.a, "numerator degrees of freedom");
        require_positive(d.b, "denominator degrees of freedom");
        break;
    case Kind::beta:
        require_positive(d.a, "beta shape a");
        require_positive(d.b, "beta shape b");
        break;
    }
}

template <class Fn>
decltype(auto) visit(const Distribution& d, Fn&& fn) {
    namespace bm = boost::math;
    validate(d);
    switch (d.kind) {
    case Kind::t: return fn(bm::students_t_distribution<double>(d.a));
    case Kind::F: return fn(bm::fisher_f_distribution<double>(d.a, d.b));
    case Kind::chi_square: return fn(bm::chi_squared_distribution<double>(d.a));
    case Kind::beta: return fn(bm::beta_distribution<double>(d.a, d.b));
    case Kind::normal: break;
    }
    return fn(bm::normal_distribution<double>(0.0, 1.0));
}

inline double clamp_support(const Distribution& d, double x, bool& below, bool& above) {
    below = above = false;
    if (std::isinf(x)) {
        (x < 0 ? below : above) = true;
        return x;
    }
    switch (d.kind) {
    case Kind::F:
    case Kind::chi_square:
        if (x <= 0) below = true;
        break;
    case Kind::beta:
        if (x <= 0) below = true;
        if (x >= 1) above = true;
        break;
    default: break;
    }
    return x;
}

} // namespace detail

/// Lower-tail probability P(X <= x). Infinite and out-of-support arguments saturate to 0 or 1.
inline double cdf(const Distribution& d, double x) {
    if (std::isnan(x)) {
        throw Error(ErrorCode::domain_error, "cdf argument is NaN");
    }
    bool below, above;
    detail::clamp_support(d, x, below, above);
    detail::validate(d);
    if (below) return 0.0;
    if (above) return 1.0;
    return detail::visit(d, [x](const auto& dist) { return boost::math::cdf(dist, x); });
}

/// Upper-tail probability P(X > x), computed directly so tiny p-values keep full precision.
inline double sf(const Distribution& d, double x) {
    if (std::isnan(x)) {
        throw Error(ErrorCode::domain_error, "sf argument is NaN");
    }
    bool below, above;
    detail::clamp_support(d, x, below, above);
    detail::validate(d);
    if (below) return 1.0;
    if (above) return 0.0;
    return detail::visit(d, [x](const auto& dist) { return boost::math::cdf(boost::math::complement(dist, x)); });
}

inline double quantile(const Distribution& d, double q) {
    if (!(q > 0 && q < 1)) {
        throw Error(ErrorCode::domain_error, "quantile probability must lie in (0,1), got " + std::to_string(q));
    }
    return detail::visit(d, [q](const auto& dist) { return boost::math::quantile(dist, q); });
}

/// Inverse of the upper tail: the x with P(X > x) = p.
inline double upper_quantile(const Distribution& d, double p) {
    if (!(p > 0 && p < 1)) {
        throw Error(ErrorCode::domain_error, "upper-tail probability must lie in (0,1), got " + std::to_string(p));
    }
    return detail::visit(d, [p](const auto& dist) { return boost::math::quantile(boost::math::complement(dist, p)); });
}

inline double normal_cdf(double x) { return cdf(normal(), x); }
inline double normal_sf(double x) { return sf(normal(), x); }
inline double normal_quantile(double q) { return quantile(normal(), q); }

/// Two-sided p-value of a t statistic.
inline double t_two_sided(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return std::min(1.0, 2.0 * sf(student_t(df), std::abs(t)));
}

} // namespace hsbench::dist
