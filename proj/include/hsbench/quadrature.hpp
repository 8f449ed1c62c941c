#pragma once

/**
 * @file quadrature.hpp
 *
 * @brief Globally adaptive Gauss-Kronrod (7/15) integration over a finite interval.
 */

#include "core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

namespace hsbench::quadrature {

struct Result {
    double value = 0;
    double abs_error = 0;
    int intervals = 0;
};

namespace detail {

// Kronrod abscissae on [-1, 1] (non-negative half); odd indices are the Gauss points.
inline constexpr std::array<double, 8> xk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
};

template <class Fn>
Piece gk15(Fn& f, double a, double b) {
    const double center = 0.5 * (a + b), half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * wk[7];
    double gauss = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xk[j];
        const double f1 = f(center - dx), f2 = f(center + dx);
        kronrod += wk[j] * (f1 + f2);
        if (j % 2 == 1) gauss += wg[j / 2] * (f1 + f2);
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

} // namespace detail

/**
 * Integrate `f` over [breaks.front(), breaks.back()], starting from the supplied
 * partition and bisecting the worst interval until the summed error estimate is
 * below `rel_tol * |integral|`. Throws IntegrationFailure if `max_intervals` is hit first.
 */
template <class Fn>
Result integrate(Fn&& f, std::vector<double> breaks, double rel_tol, int max_intervals = 4000) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.size() < 2) throw Error(ErrorCode::integration_failure, "integration range is empty");

    std::priority_queue<detail::Piece> heap;
    double total = 0, error = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        auto p = detail::gk15(f, breaks[i], breaks[i + 1]);
        total += p.value;
        error += p.error;
        heap.push(p);
    }
    int count = static_cast<int>(heap.size());
    while (error > rel_tol * std::abs(total) && error > 1e-300) {
        if (count >= max_intervals) {
            throw Error(ErrorCode::integration_failure, "tolerance " + std::to_string(rel_tol) + " not reached, achieved relative error " +
                                                            std::to_string(error / std::abs(total)));
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::gk15(f, worst.a, mid);
        auto right = detail::gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
    }
    // Recompute sums from the final partition to shed accumulated rounding.
    total = 0;
    error = 0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    return {total, error, count};
}

} // namespace hsbench::quadrature
