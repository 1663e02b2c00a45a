// SPDX-License-Identifier: Apache-2.0
//
// Adaptive modulation tables built from square M-QAM constellations under a
// symbol-error-probability target. Rates are log2(M) bits/s/Hz; powers are
// the minimum received SNR meeting the SEP target, noise-normalized.
#pragma once

#include <cmath>
#include <vector>

#include "tdma/costreward.hpp"
#include "tdma/errors.hpp"

namespace tdma::amc {

struct QamSpec {
    std::vector<int> constellations;  // perfect squares >= 4, e.g. {4, 16, 64}
    double sep_target = 1e-3;
    double noise_floor = 1.0;  // N0*B in Watts; unit conversion only
};

namespace detail {

inline int isqrt_exact(int m) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    return r * r == m ? r : 0;
}

// Gaussian tail probability; erfc keeps full double accuracy in the far tail.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace detail

// Symbol error probability of square M-QAM at the given received SNR:
// 1 - (1 - P_sqrt)^2 with P_sqrt = 2(1 - 1/sqrt(M)) Q(sqrt(3 snr / (M-1))).
inline double qam_sep(int m, double snr) {
    const int root = detail::isqrt_exact(m);
    if (root < 2) throw ConfigError("qam_sep: M must be a perfect square >= 4");
    if (snr < 0.0) throw ConfigError("qam_sep: snr must be non-negative");
    const double p_half =
        2.0 * (1.0 - 1.0 / root) * detail::q_function(std::sqrt(3.0 / (m - 1) * snr));
    // 1 - (1 - p)^2 in cancellation-free form.
    return p_half * (2.0 - p_half);
}

// Minimum received SNR achieving the SEP target; qam_sep is strictly
// decreasing in snr so the root is unique.
inline double min_snr_for_sep(int m, double sep) {
    const double at_zero = qam_sep(m, 0.0);
    if (!(sep > 0.0) || !(sep < at_zero))
        throw ConfigError("min_snr_for_sep: sep outside the achievable range (0, " +
                          std::to_string(at_zero) + ")");
    double lo = 0.0, hi = 1.0;
    while (qam_sep(m, hi) > sep) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (qam_sep(m, mid) > sep)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// One mode per constellation: (log2 M, min SNR). The resulting table must
// have strictly increasing incremental slopes; combinations violating that
// are rejected rather than repaired.
inline costreward::AmcTable build_mode_table(const QamSpec& spec) {
    if (spec.constellations.empty()) throw ConfigError("build_mode_table: no constellations");
    costreward::AmcTable table;
    for (int m : spec.constellations)
        table.modes.push_back({std::log2(static_cast<double>(m)), min_snr_for_sep(m, spec.sep_target)});
    costreward::validate(table);
    return table;
}

}  // namespace tdma::amc
