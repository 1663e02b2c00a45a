// SPDX-License-Identifier: Apache-2.0
//
// Power minimization under individual average-rate constraints. Per block,
// every user is scored by a channel-quality indicator built from its own
// Lagrange level; the single best user transmits at its level-optimal rate.
// The level vector is the fixed point of cyclic one-dimensional root solves,
// swept either Gauss-Seidel (default) or Jacobi. For independent Rayleigh
// fading a quadrature route evaluates the same rates and powers in closed
// integral form, giving a sample-free oracle.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tdma/channel.hpp"
#include "tdma/costreward.hpp"
#include "tdma/errors.hpp"
#include "tdma/parallel.hpp"
#include "tdma/quadrature.hpp"
#include "tdma/wsum.hpp"

namespace tdma::indiv {

using costreward::AmcTable;
using costreward::kLn2;
using costreward::UserProfile;
using wsum::Allocation;

// Level-optimal rate and channel-quality indicator for one user at one gain.
// phi is never positive; phi == 0 means the user would defer.
struct QualityIndicator {
    double r_min = 0.0;
    double phi = 0.0;
};

inline QualityIndicator quality_indicator(const UserProfile& u, double h, double lambda_k) {
    QualityIndicator q;
    if (u.is_infinite()) {
        const double d = kLn2 * u.mu / h;
        if (lambda_k <= d) return q;
        q.r_min = std::log2(lambda_k / d);
        q.phi = u.mu / h * (std::exp2(q.r_min) - 1.0) - lambda_k * q.r_min;
    } else {
        const auto& t = u.table();
        std::size_t best = 0;
        for (std::size_t l = 1; l <= t.modes.size(); ++l) {
            if (u.mu * t.gamma(l) / h <= lambda_k)
                best = l;
            else
                break;
        }
        if (best == 0) return q;
        q.r_min = t.modes[best - 1].rho;
        q.phi = u.mu * t.modes[best - 1].p / h - lambda_k * q.r_min;
    }
    return q;
}

struct GreedyOptions {
    // Shares used when several users tie for the best channel (normalized;
    // empty means equal split among the tied users).
    std::vector<double> tie_shares;
    // Share of the upper mode when a user's level sits exactly on a mode
    // boundary (the winner then time-shares two adjacent modes).
    double mode_tie_share = 0.5;
};

namespace detail {

// Winner's allocation legs, honoring an exact mode-boundary tie.
inline void append_winner_legs(Allocation& a, const UserProfile& u, int user, double h,
                               double lambda_k, double tau, double mode_tie_share) {
    if (u.is_infinite()) {
        const auto q = quality_indicator(u, h, lambda_k);
        if (q.r_min > 0.0) a.legs.push_back({user, tau, q.r_min});
        return;
    }
    const auto& t = u.table();
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t l = 1; l <= t.modes.size(); ++l) {
        const double edge = u.mu * t.gamma(l) / h;
        if (edge <= lambda_k) {
            best = l;
            tied = edge == lambda_k;
        } else {
            break;
        }
    }
    if (best == 0) return;
    if (tied && mode_tie_share < 1.0) {
        if (mode_tie_share > 0.0)
            a.legs.push_back({user, tau * mode_tie_share, t.modes[best - 1].rho});
        if (best >= 2)
            a.legs.push_back({user, tau * (1.0 - mode_tie_share), t.modes[best - 2].rho});
        // best == 1: the lower operating point is idle.
    } else {
        a.legs.push_back({user, tau, t.modes[best - 1].rho});
    }
}

}  // namespace detail

// Greedy per-state allocation: the user with the strictly smallest indicator
// gets the whole block; exact indicator ties split it per tie_shares. A
// winning indicator of zero means every user defers.
inline Allocation greedy_allocate_state(std::span<const UserProfile> profiles,
                                        std::span<const double> gains,
                                        std::span<const double> lambda,
                                        const GreedyOptions& opts = {}) {
    const std::size_t k = profiles.size();
    Allocation a;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> phi(k);
    for (std::size_t i = 0; i < k; ++i) {
        phi[i] = quality_indicator(profiles[i], gains[i], lambda[i]).phi;
        best = std::min(best, phi[i]);
    }
    if (best >= 0.0) return a;  // all users defer
    std::vector<std::size_t> winners;
    for (std::size_t i = 0; i < k; ++i)
        if (phi[i] == best) winners.push_back(i);
    double total_share = 0.0;
    if (!opts.tie_shares.empty())
        for (std::size_t j = 0; j < winners.size(); ++j) total_share += opts.tie_shares[winners[j]];
    for (std::size_t j = 0; j < winners.size(); ++j) {
        const std::size_t i = winners[j];
        const double tau = opts.tie_shares.empty()
                               ? 1.0 / static_cast<double>(winners.size())
                               : opts.tie_shares[i] / total_share;
        detail::append_winner_legs(a, profiles[i], static_cast<int>(i), gains[i], lambda[i], tau,
                                   opts.mode_tie_share);
    }
    return a;
}

namespace detail {

// Monte Carlo evaluator over a fixed sample with cached per-state logs.
class Evaluator {
  public:
    Evaluator(std::span<const UserProfile> profiles, const channel::SampleSet& sample)
        : profiles_(profiles.begin(), profiles.end()), sample_(&sample) {
        const std::size_t n = sample.count(), k = profiles.size();
        log2h_.resize(n * k);
        invh_.resize(n * k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                const double h = sample.gain(i, j);
                if (!(h > 0.0)) throw ConfigError("sample gains must be positive");
                log2h_[i * k + j] = std::log2(h);
                invh_[i * k + j] = 1.0 / h;
            }
    }

    std::size_t users() const { return profiles_.size(); }
    std::size_t count() const { return sample_->count(); }
    const channel::SampleSet& sample() const { return *sample_; }
    const std::vector<UserProfile>& profiles() const { return profiles_; }

    QualityIndicator indicator(std::size_t state, std::size_t user, double lambda_k) const {
        const std::size_t k = profiles_.size();
        const auto& u = profiles_[user];
        QualityIndicator q;
        if (u.is_infinite()) {
            const double a = std::log2(lambda_k / (kLn2 * u.mu));
            const double r = a + log2h_[state * k + user];
            if (r <= 0.0) return q;
            q.r_min = r;
            q.phi = lambda_k / kLn2 - u.mu * invh_[state * k + user] - lambda_k * r;
        } else {
            q = quality_indicator(u, sample_->gain(state, user), lambda_k);
        }
        return q;
    }

    // min over i != k of phi_i at the given levels, cached per state.
    std::vector<double> rival_floor(std::size_t user, std::span<const double> lambda) const {
        const std::size_t n = count(), k = users();
        std::vector<double> floor(n, std::numeric_limits<double>::infinity());
        for (std::size_t j = 0; j < k; ++j) {
            if (j == user) continue;
            for (std::size_t i = 0; i < n; ++i)
                floor[i] = std::min(floor[i], indicator(i, j, lambda[j]).phi);
        }
        if (k == 1) std::fill(floor.begin(), floor.end(), 0.0);
        return floor;
    }

    // E[tau_k r_k] for user k at level lambda_k against a fixed rival floor.
    // `upper` controls how an exact mode-boundary tie counts (full upper mode
    // vs. lower); the two values bracket what time-sharing can deliver.
    double user_rate(std::size_t user, double lambda_k, std::span<const double> floor,
                     bool upper = true) const {
        const std::size_t n = count(), k = users();
        const auto& u = profiles_[user];
        double sum;
        if (u.is_infinite()) {
            const double a = std::log2(lambda_k / (kLn2 * u.mu));
            const double lam_ln = lambda_k / kLn2;
            sum = indexed_sum(n, [&](std::size_t i) {
                const double r = a + log2h_[i * k + user];
                if (r <= 0.0) return 0.0;
                const double phi = lam_ln - u.mu * invh_[i * k + user] - lambda_k * r;
                return phi < floor[i] ? r : 0.0;
            });
        } else {
            const auto& t = u.table();
            const std::size_t m = t.modes.size();
            std::vector<double> gam(m);
            for (std::size_t l = 1; l <= m; ++l) gam[l - 1] = t.gamma(l);
            sum = indexed_sum(n, [&](std::size_t i) {
                const double h = sample_->gain(i, user);
                std::size_t best = 0;
                for (std::size_t l = 0; l < m; ++l) {
                    const double edge = u.mu * gam[l] / h;
                    if (edge < lambda_k || (edge == lambda_k && upper))
                        best = l + 1;
                    else if (edge > lambda_k)
                        break;
                }
                if (best == 0) return 0.0;
                const double rho = t.modes[best - 1].rho;
                const double phi = u.mu * t.modes[best - 1].p / h - lambda_k * rho;
                return phi < floor[i] ? rho : 0.0;
            });
        }
        return sum / static_cast<double>(count());
    }

  private:
    std::vector<UserProfile> profiles_;
    const channel::SampleSet* sample_;
    std::vector<double> log2h_, invh_;
};

struct ComponentRoot {
    double lambda = 0.0;
    double rate_upper = 0.0;  // achieved rate counting an exact tie as the upper mode
    double rate_lower = 0.0;  // counting it as the lower mode
};

// Bisection on lambda_k with the other levels fixed. The map is monotone
// non-decreasing; with mode tables it is a step function, in which case the
// bracket collapses onto the jump and both one-sided rates are reported.
inline ComponentRoot component_root(const Evaluator& ev, std::size_t user,
                                    std::span<const double> lambda, double target, double tol,
                                    std::span<const double> floor) {
    double center = lambda[user] > 0.0 ? lambda[user] : 1.0;
    double lo = center / 0x1p20, hi = center * 0x1p20;
    int guard = 0;
    while (ev.user_rate(user, lo, floor) > target) {
        lo /= 0x1p10;
        if (++guard > 30) break;  // target met even as the level vanishes
    }
    guard = 0;
    while (ev.user_rate(user, hi, floor) < target) {
        hi *= 0x1p10;
        if (++guard > 30)
            throw InfeasibleError("user " + std::to_string(user) +
                                  ": rate target unreachable at any level (mode ceiling)");
    }
    ComponentRoot root;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double r = ev.user_rate(user, mid, floor);
        if (std::abs(r - target) <= tol * target) {
            root.lambda = mid;
            root.rate_upper = root.rate_lower = r;
            return root;
        }
        if (r >= target)
            hi = mid;
        else
            lo = mid;
    }
    root.lambda = hi;
    root.rate_upper = ev.user_rate(user, hi, floor, true);
    root.rate_lower = ev.user_rate(user, hi, floor, false);
    return root;
}

}  // namespace detail

// One cyclic update: the level for user k that restores its rate target with
// the other levels held fixed.
inline double update_lambda_component(std::size_t user, std::span<const UserProfile> profiles,
                                      const channel::SampleSet& sample,
                                      std::span<const double> lambda, double target,
                                      double tol = 1e-5) {
    if (!(target > 0.0)) throw ConfigError("update_lambda_component: target must be positive");
    detail::Evaluator ev(profiles, sample);
    const auto floor = ev.rival_floor(user, lambda);
    return detail::component_root(ev, user, lambda, target, tol, floor).lambda;
}

struct IndivSolution {
    std::vector<double> lambda;
    std::vector<double> avg_rate;
    std::vector<double> avg_power;
    std::vector<double> mode_tie_share;  // per user; 0.5 unless a boundary tie was split
    int iterations = 0;                  // completed sweeps
    // Every user's rate is within tol of its target, or within one sample
    // atom (the largest single-state rate contribution), the resolution limit
    // of the fixed sample.
    bool converged = false;
    std::vector<std::vector<double>> lambda_trace;  // levels after each sweep, incl. initial
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

struct SolveOptions {
    // Relative rate tolerance per user. On a fixed sample the achievable
    // per-user rates are granular (one state's rate / sample count), so the
    // default stays an order of magnitude above that floor at 1e5 states.
    double tol = 1e-4;
    int max_outer = 100;
    enum class Sweep { GaussSeidel, Jacobi } sweep = Sweep::GaussSeidel;
    // Starting levels. Default: per-user single-user levels, scaled up until
    // every user is over-served, so the sweep sequence decreases monotonically
    // toward the fixed point.
    std::optional<std::vector<double>> lambda0;
};

namespace detail {

// Rates and powers for all users at the given levels, with exact-tie
// splitting: indicator ties share the block equally and an exact mode
// boundary time-shares adjacent modes per mode_tie_share.
inline void evaluate_solution(const Evaluator& ev, std::span<const double> lambda,
                              std::span<const double> mode_tie_share, std::vector<double>& rates,
                              std::vector<double>& powers) {
    const std::size_t n = ev.count(), k = ev.users();
    const auto& profiles = ev.profiles();
    auto sums = indexed_vector_sum(n, 2 * k, [&](std::size_t i, double* acc) {
        GreedyOptions g;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j)
            best = std::min(best, ev.indicator(i, j, lambda[j]).phi);
        if (best >= 0.0) return;
        std::size_t tied = 0;
        for (std::size_t j = 0; j < k; ++j)
            if (ev.indicator(i, j, lambda[j]).phi == best) ++tied;
        for (std::size_t j = 0; j < k; ++j) {
            if (ev.indicator(i, j, lambda[j]).phi != best) continue;
            Allocation a;
            append_winner_legs(a, profiles[j], static_cast<int>(j), ev.sample().gain(i, j),
                               lambda[j], 1.0 / static_cast<double>(tied), mode_tie_share[j]);
            for (const auto& leg : a.legs) {
                const auto& u = profiles[j];
                const double h = ev.sample().gain(i, j);
                const double p = u.is_infinite() ? (std::exp2(leg.rate) - 1.0) / h
                                                 : costreward::amc_upsilon(u.table(), h, leg.rate);
                acc[j] += leg.tau * leg.rate;
                acc[k + j] += leg.tau * p;
            }
        }
    });
    rates.assign(k, 0.0);
    powers.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        rates[j] = sums[j] / static_cast<double>(n);
        powers[j] = sums[k + j] / static_cast<double>(n);
    }
}

// Largest single-state rate a user can contribute at its level; rate targets
// on a fixed sample are only achievable up to this atom.
inline double rate_atom(const Evaluator& ev, std::size_t user, double lambda_k) {
    double atom = 0.0;
    for (std::size_t i = 0; i < ev.count(); ++i)
        atom = std::max(atom, ev.indicator(i, user, lambda_k).r_min);
    return atom / static_cast<double>(ev.count());
}

inline std::vector<double> initial_levels(const Evaluator& ev, std::span<const double> targets,
                                          double tol) {
    const std::size_t k = ev.users();
    std::vector<double> lambda(k, 1.0);
    const std::vector<double> zero_floor(ev.count(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        // Single-user level: the target met as if the user always transmits.
        lambda[j] = component_root(ev, j, lambda, targets[j], tol, zero_floor).lambda;
    }
    // Competition only removes service, so these levels under-serve. Lifting
    // the deficient components until every user is over-served gives a start
    // from which the sweep sequence decreases monotonically. (Lifting all
    // components together would not work: the level-log term eventually hands
    // every block to one user.)
    std::vector<double> rates, powers;
    std::vector<double> shares(k, 0.5);
    for (int step = 0; step < 200; ++step) {
        evaluate_solution(ev, lambda, shares, rates, powers);
        bool above = true;
        for (std::size_t j = 0; j < k; ++j) {
            if (rates[j] < targets[j] * (1.0 - 1e-12)) {
                lambda[j] *= 2.0;
                above = false;
            }
        }
        if (above) return lambda;
    }
    throw InfeasibleError("could not over-serve every rate target from any level vector");
}

}  // namespace detail

// Feasibility guard for mode tables: each target below its user's rate
// ceiling and the total below the best single-user ceiling.
inline void check_amc_feasible(std::span<const UserProfile> profiles,
                               std::span<const double> targets) {
    double total = 0.0, best_cap = 0.0;
    for (std::size_t j = 0; j < profiles.size(); ++j) {
        if (profiles[j].is_infinite()) return;
        const double cap = profiles[j].table().max_rate();
        if (targets[j] >= cap)
            throw InfeasibleError("user " + std::to_string(j) + " target " +
                                  std::to_string(targets[j]) + " >= mode ceiling " +
                                  std::to_string(cap));
        total += targets[j];
        best_cap = std::max(best_cap, cap);
    }
    if (total >= best_cap)
        throw InfeasibleError("total target " + std::to_string(total) +
                              " >= best single-user ceiling " + std::to_string(best_cap));
}

inline IndivSolution solve(std::span<const UserProfile> profiles,
                           const channel::SampleSet& sample, std::span<const double> targets,
                           SolveOptions opts = {}) {
    const std::size_t k = profiles.size();
    if (k != sample.users()) throw ConfigError("solve: profile count mismatch");
    if (targets.size() != k) throw ConfigError("solve: target count mismatch");
    for (double t : targets)
        if (!(t > 0.0)) throw ConfigError("solve: targets must be positive");
    check_amc_feasible(profiles, targets);

    detail::Evaluator ev(profiles, sample);
    IndivSolution sol;
    sol.samples = sample.count();
    sol.seed = sample.seed();
    sol.mode_tie_share.assign(k, 0.5);
    sol.lambda = opts.lambda0 ? *opts.lambda0 : detail::initial_levels(ev, targets, opts.tol);
    sol.lambda_trace.push_back(sol.lambda);

    const double inner_tol = opts.tol * 0.25;
    std::vector<double> rates, powers;

    // Mode tables can leave a user stuck on a rate jump; when the jump is an
    // exact mode-boundary tie, time-sharing the two modes meets the target
    // without disturbing the other users.
    auto resolve_mode_ties = [&]() {
        for (std::size_t j = 0; j < k; ++j) {
            if (std::abs(rates[j] - targets[j]) <= opts.tol * targets[j]) continue;
            const auto floor = ev.rival_floor(j, sol.lambda);
            const auto root =
                detail::component_root(ev, j, sol.lambda, targets[j], inner_tol, floor);
            sol.lambda[j] = root.lambda;
            if (root.rate_lower <= targets[j] && targets[j] <= root.rate_upper &&
                root.rate_upper > root.rate_lower)
                sol.mode_tie_share[j] =
                    (targets[j] - root.rate_lower) / (root.rate_upper - root.rate_lower);
        }
        detail::evaluate_solution(ev, sol.lambda, sol.mode_tie_share, rates, powers);
        bool ok = true;
        for (std::size_t j = 0; j < k; ++j)
            ok &= std::abs(rates[j] - targets[j]) <= opts.tol * targets[j];
        return ok;
    };

    for (int sweep = 0; sweep < opts.max_outer; ++sweep) {
        if (opts.sweep == SolveOptions::Sweep::Jacobi) {
            std::vector<double> next = sol.lambda;
            for (std::size_t j = 0; j < k; ++j) {
                const auto floor = ev.rival_floor(j, sol.lambda);
                next[j] = detail::component_root(ev, j, sol.lambda, targets[j], inner_tol, floor)
                              .lambda;
            }
            sol.lambda = std::move(next);
        } else {
            for (std::size_t j = 0; j < k; ++j) {
                const auto floor = ev.rival_floor(j, sol.lambda);
                sol.lambda[j] =
                    detail::component_root(ev, j, sol.lambda, targets[j], inner_tol, floor).lambda;
            }
        }
        sol.lambda_trace.push_back(sol.lambda);
        sol.iterations = sweep + 1;
        detail::evaluate_solution(ev, sol.lambda, sol.mode_tie_share, rates, powers);
        bool ok = true;
        for (std::size_t j = 0; j < k; ++j)
            ok &= std::abs(rates[j] - targets[j]) <= opts.tol * targets[j];
        // An exact mode-boundary split is preferred; failing that, accept a
        // gap no larger than one sample atom (the sample's resolution limit).
        if (!ok) ok = resolve_mode_ties();
        if (!ok) {
            ok = true;
            for (std::size_t j = 0; j < k; ++j) {
                const double gap = std::abs(rates[j] - targets[j]);
                ok &= gap <= opts.tol * targets[j] ||
                      gap <= detail::rate_atom(ev, j, sol.lambda[j]);
            }
        }
        if (ok) {
            sol.converged = true;
            break;
        }
    }

    sol.avg_rate = rates;
    sol.avg_power = powers;
    return sol;
}

// ---------------------------------------------------------------------------
// Quadrature route for independent Rayleigh fading
// ---------------------------------------------------------------------------

struct QuadratureResult {
    std::vector<double> rates;
    std::vector<double> powers;
};

namespace detail {

inline double rayleigh_mean(const channel::GainDistribution& dist) {
    const auto* r = std::get_if<channel::RayleighPower>(&dist);
    if (!r) throw ConfigError("quadrature route requires Rayleigh power-gain models");
    return r->mean_gain;
}

// phi for an infinite-codebook user as a function of its own gain (z >= threshold).
inline double phi_of_gain(const UserProfile& u, double lambda_k, double z) {
    const double t = kLn2 * u.mu / lambda_k;
    if (z <= t) return 0.0;
    return lambda_k / kLn2 - u.mu / z - lambda_k * std::log2(z / t);
}

// Gain at which the user's indicator equals c (c <= 0); +inf if unreachable.
inline double gain_at_phi(const UserProfile& u, double lambda_k, double c) {
    if (c >= 0.0) return kLn2 * u.mu / lambda_k;
    if (u.is_infinite()) {
        const double t = kLn2 * u.mu / lambda_k;
        double lo = t, hi = 2.0 * t;
        int guard = 0;
        while (phi_of_gain(u, lambda_k, hi) > c) {
            hi *= 2.0;
            if (++guard > 200) return std::numeric_limits<double>::infinity();
        }
        return quad::bisect([&](double x) { return phi_of_gain(u, lambda_k, x) - c; }, lo, hi,
                            1e-13);
    }
    const auto& t = u.table();
    const std::size_t m = t.modes.size();
    if (m == 0 || c < -lambda_k * t.modes.back().rho)
        return std::numeric_limits<double>::infinity();
    // Hyperbolic pieces between mode-boundary gains; closed-form inversion.
    for (std::size_t l = 1; l <= m; ++l) {
        const double lo_gain = u.mu * t.gamma(l) / lambda_k;
        const double hi_gain =
            l < m ? u.mu * t.gamma(l + 1) / lambda_k : std::numeric_limits<double>::infinity();
        const double x = u.mu * t.modes[l - 1].p / (c + lambda_k * t.modes[l - 1].rho);
        if (x >= lo_gain && x <= hi_gain) return x;
    }
    return std::numeric_limits<double>::infinity();
}

inline QualityIndicator indicator_of_gain(const UserProfile& u, double lambda_k, double z) {
    return quality_indicator(u, z, lambda_k);
}

}  // namespace detail

// Per-user average rate and power at the given levels, computed by adaptive
// quadrature over each user's gain density weighted by the probability that
// every rival's indicator is worse.
inline QuadratureResult independent_quadrature(std::span<const UserProfile> profiles,
                                               const channel::ChannelModel& model,
                                               std::span<const double> lambda,
                                               double rel_tol = 1e-8) {
    const std::size_t k = profiles.size();
    if (model.users.size() != k || lambda.size() != k)
        throw ConfigError("independent_quadrature: size mismatch");
    QuadratureResult out;
    out.rates.assign(k, 0.0);
    out.powers.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const double mean = detail::rayleigh_mean(model.users[j]);
        const auto& u = profiles[j];
        auto win_prob = [&](double z) {
            const double c = detail::indicator_of_gain(u, lambda[j], z).phi;
            double prod = 1.0;
            for (std::size_t i = 0; i < k; ++i) {
                if (i == j) continue;
                const double s = detail::gain_at_phi(profiles[i], lambda[i], c);
                prod *= std::isfinite(s)
                            ? channel::rayleigh_cdf(detail::rayleigh_mean(model.users[i]), s)
                            : 1.0;
                if (prod == 0.0) break;
            }
            return prod;
        };
        auto pdf = [&](double z) { return std::exp(-z / mean) / mean; };

        if (u.is_infinite()) {
            const double t = kLn2 * u.mu / lambda[j];
            const double z_max = t + mean * 34.0;
            out.rates[j] = quad::integrate(
                [&](double z) { return std::log2(z / t) * win_prob(z) * pdf(z); }, t, z_max,
                rel_tol);
            out.powers[j] = quad::integrate(
                [&](double z) { return (1.0 / t - 1.0 / z) * win_prob(z) * pdf(z); }, t, z_max,
                rel_tol);
        } else {
            const auto& table = u.table();
            const std::size_t m = table.modes.size();
            double rate = 0.0, power = 0.0;
            for (std::size_t l = 1; l <= m; ++l) {
                const double lo = u.mu * table.gamma(l) / lambda[j];
                const double hi =
                    l < m ? u.mu * table.gamma(l + 1) / lambda[j] : lo + mean * 34.0;
                if (!(hi > lo)) continue;
                const double rho = table.modes[l - 1].rho;
                const double p = table.modes[l - 1].p;
                rate += rho * quad::integrate([&](double z) { return win_prob(z) * pdf(z); }, lo,
                                              hi, rel_tol);
                power += p * quad::integrate([&](double z) { return win_prob(z) * pdf(z) / z; },
                                             lo, hi, rel_tol);
            }
            out.rates[j] = rate;
            out.powers[j] = power;
        }
    }
    return out;
}

// Fixed point of the cyclic updates with rates evaluated by quadrature
// instead of a sample; the sample-free counterpart of solve().
inline IndivSolution solve_quadrature(std::span<const UserProfile> profiles,
                                      const channel::ChannelModel& model,
                                      std::span<const double> targets, SolveOptions opts = {}) {
    const std::size_t k = profiles.size();
    IndivSolution sol;
    sol.mode_tie_share.assign(k, 0.5);

    auto rate_of = [&](std::size_t j, std::span<const double> lam) {
        return independent_quadrature(profiles, model, lam, 1e-9).rates[j];
    };
    auto component = [&](std::size_t j, std::vector<double> lam, double target) {
        double lo = lam[j] / 0x1p20, hi = lam[j] * 0x1p20;
        auto rate_at = [&](double x) {
            lam[j] = x;
            return rate_of(j, lam);
        };
        int guard = 0;
        while (rate_at(lo) > target && ++guard < 30) lo /= 0x1p10;
        guard = 0;
        while (rate_at(hi) < target) {
            hi *= 0x1p10;
            if (++guard > 30) throw InfeasibleError("quadrature route: target unreachable");
        }
        return quad::bisect([&](double x) { return rate_at(x) - target; }, lo, hi, 1e-11);
    };

    std::vector<double> lambda(k, 1.0);
    for (std::size_t j = 0; j < k; ++j) {
        // Single-user initialization, then scale up until over-served.
        std::vector<double> solo(k, 1e-9);
        solo[j] = 1.0;
        lambda[j] = component(j, solo, targets[j]);
    }
    for (int step = 0; step < 70; ++step) {
        bool above = true;
        for (std::size_t j = 0; j < k; ++j)
            above &= rate_of(j, lambda) >= targets[j] * (1.0 - 1e-12);
        if (above) break;
        for (auto& l : lambda) l *= 2.0;
    }
    if (opts.lambda0) lambda = *opts.lambda0;
    sol.lambda_trace.push_back(lambda);

    for (int sweep = 0; sweep < opts.max_outer; ++sweep) {
        if (opts.sweep == SolveOptions::Sweep::Jacobi) {
            std::vector<double> next = lambda;
            for (std::size_t j = 0; j < k; ++j) next[j] = component(j, lambda, targets[j]);
            lambda = std::move(next);
        } else {
            for (std::size_t j = 0; j < k; ++j) lambda[j] = component(j, lambda, targets[j]);
        }
        sol.lambda_trace.push_back(lambda);
        sol.iterations = sweep + 1;
        const auto q = independent_quadrature(profiles, model, lambda, 1e-9);
        bool ok = true;
        for (std::size_t j = 0; j < k; ++j)
            ok &= std::abs(q.rates[j] - targets[j]) <= opts.tol * targets[j];
        if (ok) {
            sol.converged = true;
            sol.avg_rate = q.rates;
            sol.avg_power = q.powers;
            break;
        }
    }
    if (!sol.converged) {
        const auto q = independent_quadrature(profiles, model, lambda, 1e-9);
        sol.avg_rate = q.rates;
        sol.avg_power = q.powers;
    }
    sol.lambda = lambda;
    return sol;
}

}  // namespace tdma::indiv
