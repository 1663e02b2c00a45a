// SPDX-License-Identifier: Apache-2.0
//
// Study drivers: power-region boundary tracing, the two equal-time baseline
// policies and dB power-savings tables, frequency-selective allocation via
// uniform bins, and discrete-slot time quantization.
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
#include "tdma/indiv.hpp"
#include "tdma/wsum.hpp"

namespace tdma::experiments {

using costreward::UserProfile;
using wsum::Allocation;

struct WeightedSumConstraint {
    double target = 1.0;  // weighted sum average rate, per-Hz units
};
struct IndividualConstraint {
    std::vector<double> targets;  // per-user average rates
};
using Constraint = std::variant<WeightedSumConstraint, IndividualConstraint>;

enum class PolicyId { Optimal, EqualTimeWaterfill, EqualTimeFixedPower };

// One boundary point: cost-weight direction, resulting average powers and
// per-user average rates.
struct RegionPoint {
    std::vector<double> mu;  // normalized, sums to 1
    std::vector<double> pbar;
    std::vector<double> achieved_rates;
};

struct SolveTolerances {
    double wsum_tol = 1e-4;
    double indiv_tol = 1e-5;
};

namespace detail {

struct ConstraintSolution {
    std::vector<double> pbar, rates;
};

inline ConstraintSolution solve_constraint(std::span<const UserProfile> profiles,
                                           const channel::SampleSet& sample,
                                           const Constraint& constraint,
                                           const SolveTolerances& tols) {
    ConstraintSolution out;
    if (const auto* ws = std::get_if<WeightedSumConstraint>(&constraint)) {
        wsum::SolveOptions opts;
        opts.tol = tols.wsum_tol;
        const auto sol = wsum::solve(profiles, sample, ws->target, opts);
        out.pbar = sol.avg_power;
        out.rates = sol.avg_user_rate;
    } else {
        const auto& ind = std::get<IndividualConstraint>(constraint);
        indiv::SolveOptions opts;
        opts.tol = tols.indiv_tol;
        const auto sol = indiv::solve(profiles, sample, ind.targets, opts);
        if (!sol.converged)
            throw ConvergenceError("individual-constraint solve did not converge");
        out.pbar = sol.avg_power;
        out.rates = sol.avg_rate;
    }
    return out;
}

// Per-user baseline targets: an individual constraint carries them directly;
// a weighted-sum constraint splits evenly across users in reward units.
inline std::vector<double> baseline_targets(std::span<const UserProfile> profiles,
                                            const Constraint& constraint) {
    if (const auto* ind = std::get_if<IndividualConstraint>(&constraint)) return ind->targets;
    const double total = std::get<WeightedSumConstraint>(constraint).target;
    std::vector<double> t(profiles.size());
    for (std::size_t j = 0; j < profiles.size(); ++j)
        t[j] = total / (static_cast<double>(profiles.size()) * profiles[j].w);
    return t;
}

// Bisection over a monotone non-decreasing map that may be a step function:
// f(x, upper) evaluates with an exact boundary tie counted toward the upper
// (true) or lower (false) branch. When the target falls inside a jump, theta
// gives the upper-branch share that meets it exactly.
struct StepRoot {
    double x = 0.0;
    double theta = 1.0;
    bool converged = false;
};

template <class F>
StepRoot step_bisect(F&& f, double target, double tol, const std::string& what) {
    StepRoot root;
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (f(hi, true) < target) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 80) throw InfeasibleError(what + ": target unreachable");
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double v = f(mid, true);
        if (std::abs(v - target) <= tol * target) {
            root.x = mid;
            root.converged = true;
            return root;
        }
        if (v >= target)
            hi = mid;
        else
            lo = mid;
    }
    const double v_lo = f(hi, false), v_hi = f(hi, true);
    if (v_lo <= target && target <= v_hi && v_hi > v_lo) {
        root.x = hi;
        root.theta = (target - v_lo) / (v_hi - v_lo);
        root.converged = true;
        return root;
    }
    throw ConvergenceError(what + ": level search stalled");
}

}  // namespace detail

// Sweeps normalized cost directions mu = (t, 1-t) over a cosine-spaced grid
// with small end guards (extreme points are approached, never hit), solving
// the constrained problem per direction. Output is sorted by rising P1.
inline std::vector<RegionPoint> trace_region(std::span<const UserProfile> profiles,
                                             const channel::SampleSet& sample,
                                             const Constraint& constraint, int directions = 33,
                                             SolveTolerances tols = {}, double end_guard = 1e-3) {
    if (profiles.size() != 2) throw ConfigError("trace_region: implemented for two users");
    if (directions < 2) throw ConfigError("trace_region: need at least two directions");
    std::vector<RegionPoint> points;
    std::vector<UserProfile> work(profiles.begin(), profiles.end());
    for (int i = 0; i < directions; ++i) {
        const double u = static_cast<double>(i) / (directions - 1);
        const double t = end_guard + (1.0 - 2.0 * end_guard) * 0.5 * (1.0 - std::cos(M_PI * u));
        work[0].mu = t;
        work[1].mu = 1.0 - t;
        const auto sol = detail::solve_constraint(work, sample, constraint, tols);
        points.push_back({{t, 1.0 - t}, sol.pbar, sol.rates});
    }
    std::sort(points.begin(), points.end(),
              [](const RegionPoint& a, const RegionPoint& b) { return a.pbar[0] < b.pbar[0]; });
    return points;
}

struct BaselineResult {
    std::vector<double> pbar;
    std::vector<double> rates;
    std::vector<double> level;  // per-user water level (A) or power budget (B)
};

// Baseline policy A: every user gets a fixed 1/K time slice and water-fills
// its own rate across fading states to meet its target.
inline BaselineResult equal_time_waterfill(std::span<const UserProfile> profiles,
                                           const channel::SampleSet& sample,
                                           std::span<const double> targets, double tol = 1e-6) {
    const std::size_t k = profiles.size();
    const std::size_t n = sample.count();
    const double slice = 1.0 / static_cast<double>(k);
    BaselineResult out;
    out.pbar.assign(k, 0.0);
    out.rates.assign(k, 0.0);
    out.level.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& u = profiles[j];
        if (u.is_infinite()) {
            auto rate_at = [&](double lam, bool) {
                return slice * indexed_sum(n, [&](std::size_t i) {
                           const double r = std::log2(lam * sample.gain(i, j) / costreward::kLn2);
                           return r > 0.0 ? r : 0.0;
                       }) / static_cast<double>(n);
            };
            const auto root = detail::step_bisect(rate_at, targets[j], tol, "equal-time waterfill");
            out.level[j] = root.x;
            out.rates[j] = rate_at(root.x, true);
            out.pbar[j] = slice * indexed_sum(n, [&](std::size_t i) {
                              const double h = sample.gain(i, j);
                              const double r = std::log2(root.x * h / costreward::kLn2);
                              return r > 0.0 ? (std::exp2(r) - 1.0) / h : 0.0;
                          }) / static_cast<double>(n);
        } else {
            const auto& table = u.table();
            const std::size_t m = table.modes.size();
            std::vector<double> gam(m);
            for (std::size_t l = 1; l <= m; ++l) gam[l - 1] = table.gamma(l);
            auto pick = [&](double lam, double h, bool upper) {
                std::size_t best = 0;
                for (std::size_t l = 0; l < m; ++l) {
                    const double edge = gam[l] / h;
                    if (edge < lam || (edge == lam && upper))
                        best = l + 1;
                    else if (edge > lam)
                        break;
                }
                return best;
            };
            auto rate_at = [&](double lam, bool upper) {
                return slice * indexed_sum(n, [&](std::size_t i) {
                           const std::size_t b = pick(lam, sample.gain(i, j), upper);
                           return b ? table.modes[b - 1].rho : 0.0;
                       }) / static_cast<double>(n);
            };
            const auto root = detail::step_bisect(rate_at, targets[j], tol, "equal-time waterfill");
            out.level[j] = root.x;
            out.rates[j] =
                root.theta * rate_at(root.x, true) + (1.0 - root.theta) * rate_at(root.x, false);
            auto power_at = [&](bool upper) {
                return slice * indexed_sum(n, [&](std::size_t i) {
                           const double h = sample.gain(i, j);
                           const std::size_t b = pick(root.x, h, upper);
                           return b ? table.modes[b - 1].p / h : 0.0;
                       }) / static_cast<double>(n);
            };
            out.pbar[j] = root.theta * power_at(true) + (1.0 - root.theta) * power_at(false);
        }
    }
    return out;
}

// Baseline policy B: every user gets a fixed 1/K time slice and transmits at
// a constant power level; with a mode table it sends the highest mode the
// level affords per state, else idles. The level is consumed whenever the
// user transmits (that is what makes the policy blunt).
inline BaselineResult equal_time_fixed_power(std::span<const UserProfile> profiles,
                                             const channel::SampleSet& sample,
                                             std::span<const double> targets, double tol = 1e-6) {
    const std::size_t k = profiles.size();
    const std::size_t n = sample.count();
    const double slice = 1.0 / static_cast<double>(k);
    BaselineResult out;
    out.pbar.assign(k, 0.0);
    out.rates.assign(k, 0.0);
    out.level.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& u = profiles[j];
        if (u.is_infinite()) {
            auto rate_at = [&](double p, bool) {
                return slice * indexed_sum(n, [&](std::size_t i) {
                           return std::log2(1.0 + p * sample.gain(i, j));
                       }) / static_cast<double>(n);
            };
            const auto root = detail::step_bisect(rate_at, targets[j], tol, "equal-time fixed power");
            out.level[j] = root.x;
            out.rates[j] = rate_at(root.x, true);
            out.pbar[j] = slice * root.x;
        } else {
            const auto& table = u.table();
            const std::size_t m = table.modes.size();
            auto pick = [&](double budget, double h, bool upper) {
                std::size_t best = 0;
                for (std::size_t l = 0; l < m; ++l) {
                    const double need = table.modes[l].p / h;
                    if (need < budget || (need == budget && upper))
                        best = l + 1;
                    else if (need > budget)
                        break;
                }
                return best;
            };
            auto rate_at = [&](double budget, bool upper) {
                return slice * indexed_sum(n, [&](std::size_t i) {
                           const std::size_t b = pick(budget, sample.gain(i, j), upper);
                           return b ? table.modes[b - 1].rho : 0.0;
                       }) / static_cast<double>(n);
            };
            const auto root = detail::step_bisect(rate_at, targets[j], tol, "equal-time fixed power");
            out.level[j] = root.x;
            out.rates[j] =
                root.theta * rate_at(root.x, true) + (1.0 - root.theta) * rate_at(root.x, false);
            // The constant level is spent on every transmitting block.
            auto power_at = [&](bool upper) {
                return slice * root.x * indexed_sum(n, [&](std::size_t i) {
                           return pick(root.x, sample.gain(i, j), upper) ? 1.0 : 0.0;
                       }) / static_cast<double>(n);
            };
            out.pbar[j] = root.theta * power_at(true) + (1.0 - root.theta) * power_at(false);
        }
    }
    return out;
}

struct SavingsRow {
    double ratio;         // mu_1 / mu_2
    double db_vs_a;       // 10 log10(mu' p_A / mu' p_opt)
    double db_vs_b;       // 10 log10(mu' p_B / mu' p_opt)
};

// dB power savings of the optimal policy over both baselines across a grid of
// cost-weight ratios. Baselines do not depend on mu and are computed once.
inline std::vector<SavingsRow> power_savings(std::span<const UserProfile> profiles,
                                             const channel::SampleSet& sample,
                                             const Constraint& constraint,
                                             std::span<const double> ratio_grid,
                                             SolveTolerances tols = {}) {
    if (profiles.size() != 2) throw ConfigError("power_savings: implemented for two users");
    const auto targets = detail::baseline_targets(profiles, constraint);
    const auto base_a = equal_time_waterfill(profiles, sample, targets);
    const auto base_b = equal_time_fixed_power(profiles, sample, targets);
    std::vector<UserProfile> work(profiles.begin(), profiles.end());
    std::vector<SavingsRow> rows;
    for (double ratio : ratio_grid) {
        work[0].mu = ratio / (1.0 + ratio);
        work[1].mu = 1.0 / (1.0 + ratio);
        const auto opt = detail::solve_constraint(work, sample, constraint, tols);
        const double obj = work[0].mu * opt.pbar[0] + work[1].mu * opt.pbar[1];
        const double obj_a = work[0].mu * base_a.pbar[0] + work[1].mu * base_a.pbar[1];
        const double obj_b = work[0].mu * base_b.pbar[0] + work[1].mu * base_b.pbar[1];
        rows.push_back({ratio, 10.0 * std::log10(obj_a / obj), 10.0 * std::log10(obj_b / obj)});
    }
    return rows;
}

// Per-block gain spectra on a uniform frequency grid: blocks x bins x users.
struct SpectralSample {
    std::size_t users = 0, bins = 0, blocks = 0;
    std::vector<double> gains;

    double gain(std::size_t block, std::size_t bin, std::size_t user) const {
        return gains[(block * bins + bin) * users + user];
    }
};

using FreqSelectiveSolution = std::variant<wsum::WsumSolution, indiv::IndivSolution>;

// Treats every (bin, state) pair as an independent flat-fading realization:
// the expectation over blocks combined with the uniform bin average is the
// arithmetic mean over the expanded sample, so the flat solvers apply as-is.
inline FreqSelectiveSolution allocate_freq_selective(std::span<const UserProfile> profiles,
                                                     const SpectralSample& spectra,
                                                     const Constraint& constraint,
                                                     SolveTolerances tols = {}) {
    if (spectra.users != profiles.size() || spectra.blocks == 0 || spectra.bins == 0)
        throw ConfigError("allocate_freq_selective: bad spectra shape");
    for (double g : spectra.gains)
        if (!(g > 0.0)) throw ConfigError("allocate_freq_selective: gains must be positive");
    channel::SampleSet expanded(spectra.users, spectra.blocks * spectra.bins, 0, spectra.gains);
    if (const auto* ws = std::get_if<WeightedSumConstraint>(&constraint)) {
        wsum::SolveOptions opts;
        opts.tol = tols.wsum_tol;
        return wsum::solve(profiles, expanded, ws->target, opts);
    }
    indiv::SolveOptions opts;
    opts.tol = tols.indiv_tol;
    return indiv::solve(profiles, expanded, std::get<IndividualConstraint>(constraint).targets,
                        opts);
}

// Rounds each leg's time fraction to a multiple of 1/slots by largest-
// remainder apportionment; the total never grows past the original share.
inline Allocation quantize_time(const Allocation& alloc, int slots) {
    if (slots < 1) throw ConfigError("quantize_time: slots must be at least 1");
    if (alloc.legs.empty()) return alloc;
    const double s = static_cast<double>(slots);
    long total_units = std::lround(alloc.tau_total() * s);
    if (total_units > slots) total_units = slots;
    std::vector<long> units(alloc.legs.size());
    std::vector<double> rem(alloc.legs.size());
    long used = 0;
    for (std::size_t i = 0; i < alloc.legs.size(); ++i) {
        const double exact = alloc.legs[i].tau * s;
        units[i] = static_cast<long>(std::floor(exact));
        rem[i] = exact - static_cast<double>(units[i]);
        used += units[i];
    }
    for (long extra = total_units - used; extra > 0; --extra) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < alloc.legs.size(); ++i)
            if (rem[i] > rem[best]) best = i;
        ++units[best];
        rem[best] = -1.0;
    }
    Allocation out;
    for (std::size_t i = 0; i < alloc.legs.size(); ++i)
        if (units[i] > 0)
            out.legs.push_back(
                {alloc.legs[i].user, static_cast<double>(units[i]) / s, alloc.legs[i].rate});
    return out;
}

}  // namespace tdma::experiments
