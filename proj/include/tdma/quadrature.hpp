// SPDX-License-Identifier: Apache-2.0
//
// Adaptive Gauss-Kronrod integration (G7-K15 panels) and bracketed root
// finding for monotone functions.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tdma/errors.hpp"

namespace tdma::quad {

namespace detail {
// K15 abscissae/weights with embedded G7 (positive half; node 0 first).
inline constexpr double kNodes[8] = {
    0.000000000000000, 0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759, 0.991455371120813,
};
inline constexpr double kWeightK[8] = {
    0.209482141084728, 0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979, 0.022935322010529,
};
inline constexpr double kWeightG[8] = {
    0.417959183673469, 0.0, 0.381830050505119, 0.0,
    0.279705391489277, 0.0, 0.129484966168870, 0.0,
};
}  // namespace detail

template <class F>
double gk15(F&& f, double a, double b, double& err) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double f0 = f(mid);
    double k15 = detail::kWeightK[0] * f0;
    double g7 = detail::kWeightG[0] * f0;
    for (int i = 1; i < 8; ++i) {
        const double dx = half * detail::kNodes[i];
        const double fi = f(mid + dx) + f(mid - dx);
        k15 += detail::kWeightK[i] * fi;
        g7 += detail::kWeightG[i] * fi;
    }
    k15 *= half;
    g7 *= half;
    err = std::abs(k15 - g7);
    return k15;
}

// Integrates f over [a, b] by bisecting panels until every panel's embedded
// error estimate is below rel_tol * |panel value| (or abs_tol).
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-8, double abs_tol = 1e-14) {
    if (!(b > a)) return 0.0;
    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack{{a, b, 0}};
    double total = 0.0;
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        double err = 0.0;
        const double v = gk15(f, p.a, p.b, err);
        if (err <= rel_tol * std::abs(v) + abs_tol || p.depth >= 48) {
            total += v;
            continue;
        }
        const double mid = 0.5 * (p.a + p.b);
        stack.push_back({mid, p.b, p.depth + 1});
        stack.push_back({p.a, mid, p.depth + 1});
    }
    return total;
}

// Root of a monotone function on [lo, hi] with g(lo) and g(hi) of opposite
// sign; plain bisection to the requested relative width.
template <class G>
double bisect(G&& g, double lo, double hi, double rel_tol = 1e-13, int max_iter = 200) {
    double glo = g(lo);
    if (glo == 0.0) return lo;
    const bool increasing = glo < 0.0;
    for (int i = 0; i < max_iter && hi - lo > rel_tol * std::abs(hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == increasing)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace tdma::quad
