// SPDX-License-Identifier: Apache-2.0
//
// Power minimization under a weighted sum average-rate constraint: per-state
// allocation reads the water level off the state's convex envelope, and the
// level itself comes from a one-dimensional bisection over a fixed sample.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tdma/channel.hpp"
#include "tdma/costreward.hpp"
#include "tdma/errors.hpp"
#include "tdma/parallel.hpp"

namespace tdma::wsum {

using costreward::ContinuousEnvelope;
using costreward::Envelope;
using costreward::PwlEnvelope;
using costreward::UserProfile;
using costreward::WaterfillPoint;

struct AllocationLeg {
    int user;
    double tau;
    double rate;  // bits/s/Hz while transmitting
};

// Per-state rate/time assignment. At most two legs are ever active; a finite
// mode table may assign both legs to one user (two modes). No legs means all
// users defer. Idle time is simply left unassigned: a zero-rate filler leg
// would cost zero power, so the two conventions coincide.
struct Allocation {
    std::vector<AllocationLeg> legs;

    double tau_total() const {
        double t = 0.0;
        for (const auto& l : legs) t += l.tau;
        return t;
    }
    double weighted_rate(std::span<const UserProfile> profiles) const {
        double r = 0.0;
        for (const auto& l : legs) r += profiles[l.user].w * l.tau * l.rate;
        return r;
    }
    int active_users() const {
        int n = 0;
        for (std::size_t i = 0; i < legs.size(); ++i) {
            bool dup = false;
            for (std::size_t j = 0; j < i; ++j) dup |= legs[j].user == legs[i].user;
            if (!dup && legs[i].tau > 0.0) ++n;
        }
        return n;
    }
};

namespace detail {

inline void push_leg(Allocation& a, int user, double tau, double rate) {
    if (tau > 0.0 && rate > 0.0) a.legs.push_back({user, tau, rate});
}

}  // namespace detail

// Maps a water level to the per-state allocation, given the state's envelope.
// Ties share the block: the upper operating point gets tau0.
inline Allocation allocate_from_envelope(const ContinuousEnvelope& env, double lambda,
                                         double tau0) {
    Allocation a;
    const auto wp = envelope_rate_at_level(env, lambda);
    using R = WaterfillPoint::Regime;
    if (wp.regime == R::Interior) {
        const auto& piece = env.active[static_cast<std::size_t>(wp.index)];
        detail::push_leg(a, piece.user, 1.0, wp.rate_reward / piece.w);
    } else if (wp.regime == R::OnTangent) {
        const auto& t = env.tangents[static_cast<std::size_t>(wp.index)];
        const auto& lo = env.active[static_cast<std::size_t>(wp.index)];
        const auto& hi = env.active[static_cast<std::size_t>(wp.index) + 1];
        detail::push_leg(a, hi.user, tau0, t.r_b / hi.w);
        detail::push_leg(a, lo.user, 1.0 - tau0, t.r_a / lo.w);
    }
    return a;
}

inline Allocation allocate_from_envelope(const PwlEnvelope& env,
                                         std::span<const UserProfile> profiles, double lambda,
                                         double tau0) {
    Allocation a;
    const auto wp = envelope_rate_at_level(env, lambda);
    using R = WaterfillPoint::Regime;
    // Leg rates come straight from the owning mode so they are exact table
    // entries rather than r/w round trips.
    auto mode_rate = [&](const PwlEnvelope::Corner& c) {
        return profiles[c.user].table().modes[static_cast<std::size_t>(c.mode) - 1].rho;
    };
    if (wp.regime == R::Interior) {
        const auto& c = env.corners[static_cast<std::size_t>(wp.index)];
        detail::push_leg(a, c.user, 1.0, mode_rate(c));
    } else if (wp.regime == R::OnTangent) {
        const auto& up = env.corners[static_cast<std::size_t>(wp.index)];
        detail::push_leg(a, up.user, tau0, mode_rate(up));
        if (wp.index > 0) {
            const auto& lo = env.corners[static_cast<std::size_t>(wp.index) - 1];
            detail::push_leg(a, lo.user, 1.0 - tau0, mode_rate(lo));
        }
        // index 0: the lower operating point is the idle origin.
    }
    return a;
}

inline bool homogeneous_infinite(std::span<const UserProfile> profiles) {
    bool any_inf = false, any_amc = false;
    for (const auto& u : profiles) (u.is_infinite() ? any_inf : any_amc) = true;
    if (any_inf && any_amc)
        throw ConfigError("profiles must share one codebook kind (all infinite or all mode tables)");
    return any_inf;
}

// Builds the state's envelope and applies the water-filling classification.
inline Allocation allocate_state(std::span<const UserProfile> profiles,
                                 std::span<const double> gains, double lambda, double tau0) {
    const auto eff = costreward::substitute_zero_mu(profiles);
    if (homogeneous_infinite(eff))
        return allocate_from_envelope(costreward::build_envelope_continuous(eff, gains), lambda,
                                      tau0);
    return allocate_from_envelope(costreward::build_envelope_amc(eff, gains), eff, lambda, tau0);
}

// Block transmit power per user: tau_k times the power needed for rate_k.
inline std::vector<double> state_power(std::span<const UserProfile> profiles,
                                       std::span<const double> gains, const Allocation& alloc) {
    std::vector<double> power(profiles.size(), 0.0);
    for (const auto& leg : alloc.legs) {
        const auto& u = profiles[leg.user];
        double p;
        if (u.is_infinite()) {
            p = (std::exp2(leg.rate) - 1.0) / gains[leg.user];
        } else {
            p = costreward::amc_upsilon(u.table(), gains[leg.user], leg.rate);
            if (!std::isfinite(p))
                throw InfeasibleError("allocation rate exceeds the user's highest mode");
        }
        power[leg.user] += leg.tau * p;
    }
    return power;
}

struct WsumSolution {
    double lambda_star = 0.0;
    double tau0 = 0.5;
    double avg_rate = 0.0;               // weighted sum E[sum_k w_k tau_k r_k]
    std::vector<double> avg_user_rate;   // per-user E[tau_k r_k]
    std::vector<double> avg_power;       // per-user average block power
    double objective = 0.0;              // mu' * avg_power with the configured weights
    int iterations = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

struct SolveOptions {
    double tau0 = 0.5;   // tie-share default; replaced when a tie must meet the target exactly
    double tol = 1e-4;   // relative rate tolerance
    int max_iter = 200;
};

namespace detail {

// Flattened per-state envelopes for the bisection hot loop.
struct FlatEnvelopes {
    bool infinite = true;
    std::vector<std::uint32_t> offset;  // per state, into the piece arrays
    // continuous pieces: (w, d) with slope_after; PWL corners: (r) with slope-in
    std::vector<double> w, d, slope, r;

    double rate_upper(std::size_t state, double lambda) const {
        const std::uint32_t lo = offset[state], hi = offset[state + 1];
        if (infinite) {
            std::uint32_t j = lo;
            while (j + 1 < hi && lambda >= slope[j]) ++j;  // slope_after of last piece is +inf
            return lambda > d[j] ? w[j] * std::log2(lambda / d[j]) : 0.0;
        }
        double best = 0.0;
        for (std::uint32_t j = lo; j < hi && slope[j] <= lambda; ++j) best = r[j];
        return best;
    }
    // Ties (slope == lambda) resolve to the lower operating point.
    double rate_lower(std::size_t state, double lambda) const {
        const std::uint32_t lo = offset[state], hi = offset[state + 1];
        if (infinite) {
            std::uint32_t j = lo;
            while (j + 1 < hi && lambda > slope[j]) ++j;
            return lambda > d[j] ? w[j] * std::log2(lambda / d[j]) : 0.0;
        }
        double best = 0.0;
        for (std::uint32_t j = lo; j < hi && slope[j] < lambda; ++j) best = r[j];
        return best;
    }
};

inline FlatEnvelopes flatten(const std::vector<Envelope>& envs) {
    FlatEnvelopes flat;
    flat.infinite = std::holds_alternative<ContinuousEnvelope>(envs.front());
    flat.offset.reserve(envs.size() + 1);
    flat.offset.push_back(0);
    for (const auto& env : envs) {
        if (flat.infinite) {
            const auto& e = std::get<ContinuousEnvelope>(env);
            for (std::size_t m = 0; m < e.active.size(); ++m) {
                flat.w.push_back(e.active[m].w);
                flat.d.push_back(e.active[m].d);
                flat.slope.push_back(m + 1 < e.active.size()
                                         ? e.tangents[m].slope
                                         : std::numeric_limits<double>::infinity());
            }
        } else {
            const auto& e = std::get<PwlEnvelope>(env);
            for (std::size_t m = 0; m < e.corners.size(); ++m) {
                flat.r.push_back(e.corners[m].r);
                flat.slope.push_back(e.slopes[m]);
            }
        }
        flat.offset.push_back(static_cast<std::uint32_t>(flat.slope.size()));
    }
    return flat;
}

}  // namespace detail

// Bisects the water level over the fixed sample until the average weighted
// rate meets the target. With mode tables the rate is a step function of the
// level; when no level lands inside the tolerance band, the bracket collapses
// onto the jump and the tie fraction tau0 splits it to meet the target exactly.
inline WsumSolution solve(std::span<const UserProfile> profiles,
                          const channel::SampleSet& sample, double target_rate,
                          SolveOptions opts = {}) {
    if (!(target_rate > 0.0)) throw ConfigError("solve: target rate must be positive");
    if (profiles.size() != sample.users())
        throw ConfigError("solve: profile count does not match sample user count");
    const auto eff = costreward::substitute_zero_mu(profiles);
    const bool infinite = homogeneous_infinite(eff);
    const std::size_t n = sample.count();

    std::vector<Envelope> envs(n);
    indexed_apply(n, [&](std::size_t i) {
        if (infinite)
            envs[i] = costreward::build_envelope_continuous(eff, sample.state(i));
        else
            envs[i] = costreward::build_envelope_amc(eff, sample.state(i));
    });
    const auto flat = detail::flatten(envs);

    if (!infinite) {
        const double max_rate = indexed_sum(n, [&](std::size_t i) {
            return flat.r[flat.offset[i + 1] - 1];
        }) / static_cast<double>(n);
        if (target_rate > max_rate * (1.0 - 1e-12))
            throw InfeasibleError("target rate " + std::to_string(target_rate) +
                                  " exceeds the mode-limited maximum " + std::to_string(max_rate));
    }

    int iterations = 0;
    auto avg_rate_upper = [&](double lambda) {
        ++iterations;
        return indexed_sum(n, [&](std::size_t i) { return flat.rate_upper(i, lambda); }) /
               static_cast<double>(n);
    };
    auto avg_rate_lower = [&](double lambda) {
        return indexed_sum(n, [&](std::size_t i) { return flat.rate_lower(i, lambda); }) /
               static_cast<double>(n);
    };

    double lo = 0.0, hi = 1.0;
    while (avg_rate_upper(hi) < target_rate) {
        lo = hi;
        hi *= 2.0;
        if (hi > 0x1p60)
            throw InfeasibleError("water level exceeded 2^60 before reaching the target rate");
    }

    double lambda = hi, tau0 = opts.tau0;
    bool converged = false, collapsed = false;
    while (iterations < opts.max_iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            collapsed = true;  // adjacent floats: any rate jump sits exactly at hi
            break;
        }
        const double r = avg_rate_upper(mid);
        if (std::abs(r - target_rate) <= opts.tol * target_rate) {
            lambda = mid;
            converged = true;
            break;
        }
        if (r >= target_rate)
            hi = mid;
        else
            lo = mid;
    }
    if (!converged) {
        // The bracket collapsed onto a rate jump: share the tied operating
        // points so the sample average hits the target exactly.
        lambda = hi;
        const double r_lo = avg_rate_lower(lambda);
        const double r_hi = avg_rate_upper(lambda);
        if (collapsed && r_lo <= target_rate && target_rate <= r_hi && r_hi > r_lo) {
            tau0 = (target_rate - r_lo) / (r_hi - r_lo);
            converged = true;
        } else {
            throw ConvergenceError("level search stalled: bracket [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "], rates [" + std::to_string(r_lo) +
                                   ", " + std::to_string(r_hi) + "], target " +
                                   std::to_string(target_rate));
        }
    }

    const std::size_t k = profiles.size();
    auto sums = indexed_vector_sum(n, 2 * k, [&](std::size_t i, double* acc) {
        Allocation a;
        if (infinite)
            a = allocate_from_envelope(std::get<ContinuousEnvelope>(envs[i]), lambda, tau0);
        else
            a = allocate_from_envelope(std::get<PwlEnvelope>(envs[i]), eff, lambda, tau0);
        for (const auto& leg : a.legs) {
            const auto& u = eff[leg.user];
            const double p = u.is_infinite()
                                 ? (std::exp2(leg.rate) - 1.0) / sample.gain(i, leg.user)
                                 : costreward::amc_upsilon(u.table(), sample.gain(i, leg.user),
                                                           leg.rate);
            acc[leg.user] += leg.tau * p;
            acc[k + leg.user] += leg.tau * leg.rate;
        }
    });

    WsumSolution sol;
    sol.lambda_star = lambda;
    sol.tau0 = tau0;
    sol.avg_power.assign(k, 0.0);
    sol.avg_user_rate.assign(k, 0.0);
    sol.avg_rate = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        sol.avg_power[j] = sums[j] / static_cast<double>(n);
        sol.avg_user_rate[j] = sums[k + j] / static_cast<double>(n);
        sol.avg_rate += eff[j].w * sol.avg_user_rate[j];
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < k; ++j) sol.objective += profiles[j].mu * sol.avg_power[j];
    sol.iterations = iterations;
    sol.samples = n;
    sol.seed = sample.seed();
    return sol;
}

}  // namespace tdma::wsum
