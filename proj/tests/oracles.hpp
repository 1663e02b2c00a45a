// SPDX-License-Identifier: Apache-2.0
//
// Independent oracles used by the tests: brute-force grid minimizers for the
// per-state problems, an O(n^2) gift-wrap lower hull, a dense-grid convex
// envelope, single-user closed forms, and a Kolmogorov-Smirnov statistic.
// These deliberately avoid the library's solution paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "tdma/channel.hpp"
#include "tdma/costreward.hpp"

namespace oracles {

inline constexpr double kLn2 = 0.6931471805599453;

struct Point {
    double x, y;
    int user = -1, mode = 0;
};

// Gift-wrapping lower hull anchored at (0, 0): repeatedly pick the point of
// minimal slope from the current corner, scanning every remaining point.
inline std::vector<Point> gift_wrap_lower_hull(std::vector<Point> pts) {
    std::vector<Point> hull;
    Point cur{0.0, 0.0, -1, 0};
    while (true) {
        double best_slope = 0.0;
        int best = -1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].x <= cur.x) continue;
            const double s = (pts[i].y - cur.y) / (pts[i].x - cur.x);
            bool better = best < 0;
            if (!better) {
                const double tol = 1e-15 * std::max(std::abs(s), std::abs(best_slope));
                if (s < best_slope - tol)
                    better = true;
                else if (std::abs(s - best_slope) <= tol &&
                         pts[i].x > pts[static_cast<std::size_t>(best)].x)
                    better = true;  // equal slopes keep the farther point
            }
            if (better) {
                best_slope = s;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) break;
        cur = pts[static_cast<std::size_t>(best)];
        hull.push_back(cur);
    }
    return hull;
}

// Piecewise-linear lower envelope of min_k f_k sampled on a dense grid:
// monotone-chain hull over the sampled points, then linear interpolation.
class GridEnvelope {
  public:
    GridEnvelope(std::span<const tdma::costreward::UserProfile> profiles,
                 std::span<const double> gains, double r_max, std::size_t points = 25001) {
        xs_.reserve(points + 1);
        ys_.reserve(points + 1);
        std::vector<double> hx, hy;
        hx.push_back(0.0);
        hy.push_back(0.0);
        for (std::size_t i = 1; i <= points; ++i) {
            const double x = r_max * static_cast<double>(i) / static_cast<double>(points);
            double y = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < profiles.size(); ++k)
                y = std::min(y, profiles[k].mu / gains[k] *
                                    (std::exp2(x / profiles[k].w) - 1.0));
            while (hx.size() >= 2) {
                const std::size_t n = hx.size();
                const double cross = (hx[n - 1] - hx[n - 2]) * (y - hy[n - 2]) -
                                     (hy[n - 1] - hy[n - 2]) * (x - hx[n - 2]);
                if (cross <= 0.0) {
                    hx.pop_back();
                    hy.pop_back();
                } else {
                    break;
                }
            }
            hx.push_back(x);
            hy.push_back(y);
        }
        xs_ = std::move(hx);
        ys_ = std::move(hy);
    }

    double eval(double x) const {
        if (x <= 0.0) return 0.0;
        const auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
        if (it == xs_.end()) return std::numeric_limits<double>::infinity();
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
        if (i == 0) return ys_.front();
        const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
        return ys_[i - 1] + t * (ys_[i] - ys_[i - 1]);
    }

  private:
    std::vector<double> xs_, ys_;
};

// Brute-force minimum of the two-user per-state cost at total rate-reward R:
// tau on a grid, user 1's share of the reward on a grid, user 2 takes the
// rest. Optionally refines around the best cell.
inline double wsum_grid_cost(const tdma::costreward::UserProfile& u1,
                             const tdma::costreward::UserProfile& u2, double h1, double h2,
                             double total_reward, int grid = 401, int refine_passes = 0) {
    auto cost1 = [&](double reward) {
        return u1.mu / h1 * (std::exp2(reward / u1.w) - 1.0);
    };
    auto cost2 = [&](double reward) {
        return u2.mu / h2 * (std::exp2(reward / u2.w) - 1.0);
    };
    double best = std::numeric_limits<double>::infinity();
    double best_tau = 1.0, best_x = total_reward;
    auto scan = [&](double tau_lo, double tau_hi, double x_lo, double x_hi) {
        for (int a = 0; a < grid; ++a) {
            const double tau = tau_lo + (tau_hi - tau_lo) * a / (grid - 1);
            for (int b = 0; b < grid; ++b) {
                const double x1 = x_lo + (x_hi - x_lo) * b / (grid - 1);  // tau*R1 share
                const double x2 = total_reward - x1;
                if (x2 < -1e-12) continue;
                double c = 0.0;
                if (tau > 0.0 && x1 > 0.0)
                    c += tau * cost1(x1 / tau);
                else if (x1 > 1e-12)
                    continue;  // reward without time
                if (tau < 1.0 && x2 > 0.0)
                    c += (1.0 - tau) * cost2(x2 / (1.0 - tau));
                else if (tau >= 1.0 && x2 > 1e-12)
                    continue;
                if (c < best) {
                    best = c;
                    best_tau = tau;
                    best_x = x1;
                }
            }
        }
    };
    scan(0.0, 1.0, 0.0, total_reward);
    double span_tau = 1.0 / (grid - 1), span_x = total_reward / (grid - 1);
    for (int pass = 0; pass < refine_passes; ++pass) {
        const double tl = std::max(0.0, best_tau - span_tau);
        const double th = std::min(1.0, best_tau + span_tau);
        const double xl = std::max(0.0, best_x - span_x);
        const double xh = std::min(total_reward, best_x + span_x);
        scan(tl, th, xl, xh);
        span_tau = (th - tl) / (grid - 1);
        span_x = (xh - xl) / (grid - 1);
    }
    return best;
}

// Exact minimum for mode tables: enumerate every pair of operating points
// (including the idle origin) and time-share to hit the reward exactly.
inline double amc_pair_cost(std::span<const tdma::costreward::UserProfile> profiles,
                            std::span<const double> gains, double total_reward) {
    std::vector<Point> pts{{0.0, 0.0}};
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        const auto& t = std::get<tdma::costreward::AmcTable>(profiles[k].codebook);
        for (const auto& m : t.modes)
            pts.push_back({profiles[k].w * m.rho, profiles[k].mu * m.p / gains[k]});
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (!(pts[i].x <= total_reward && total_reward <= pts[j].x)) continue;
            const double span = pts[j].x - pts[i].x;
            const double tau_j = span > 0.0 ? (total_reward - pts[i].x) / span : 1.0;
            best = std::min(best, (1.0 - tau_j) * pts[i].y + tau_j * pts[j].y);
        }
    return best;
}

// Brute-force per-state minimum of the level-adjusted greedy objective
// (either codebook kind), plus the winning user.
struct GreedyOracle {
    double cost;
    int user;
};

inline GreedyOracle greedy_grid(std::span<const tdma::costreward::UserProfile> profiles,
                                std::span<const double> gains, std::span<const double> lambda,
                                int grid = 401, int refine_passes = 0) {
    GreedyOracle out{0.0, -1};
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        double m = 0.0;  // r = 0 is always available
        if (profiles[k].is_infinite()) {
            auto value = [&](double r) {
                return profiles[k].mu / gains[k] * (std::exp2(r) - 1.0) - lambda[k] * r;
            };
            // Rate range sized to bracket the level-optimal rate comfortably.
            const double peak = lambda[k] * gains[k] / (kLn2 * profiles[k].mu);
            double lo = 0.0;
            double hi = std::max(2.0, std::log2(std::max(2.0, peak)) + 3.0);
            double best_r = 0.0;
            for (int pass = 0; pass <= refine_passes; ++pass) {
                for (int i = (pass == 0 ? 1 : 0); i < grid; ++i) {
                    const double r = lo + (hi - lo) * i / (grid - 1);
                    const double v = value(r);
                    if (v < m) {
                        m = v;
                        best_r = r;
                    }
                }
                const double span = (hi - lo) / (grid - 1);
                lo = std::max(0.0, best_r - span);
                hi = best_r + span;
            }
        } else {
            const auto& t = std::get<tdma::costreward::AmcTable>(profiles[k].codebook);
            for (const auto& mode : t.modes)
                m = std::min(m, profiles[k].mu * mode.p / gains[k] - lambda[k] * mode.rho);
        }
        if (m < out.cost) {
            out.cost = m;
            out.user = static_cast<int>(k);
        }
    }
    return out;
}

// Single-user water-filling over an exponential gain density: closed forms
// via the exponential integral E1.
inline double e1(double x) { return -std::expint(-x); }

inline double single_user_rate(double lambda, double mu, double mean_gain) {
    const double t = kLn2 * mu / lambda;
    return e1(t / mean_gain) / kLn2;
}

inline double single_user_power(double lambda, double mu, double mean_gain) {
    const double t = kLn2 * mu / lambda;
    return std::exp(-t / mean_gain) / t - e1(t / mean_gain) / mean_gain;
}

inline double ks_statistic(std::vector<double> sample, double mean_gain) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = tdma::channel::rayleigh_cdf(mean_gain, sample[i]);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

}  // namespace oracles
