// SPDX-License-Identifier: Apache-2.0
//
// Per-fading-state power-cost vs rate-reward curves and their convex
// envelope. With capacity-achieving codebooks each user contributes an
// exponential curve and the envelope alternates curve pieces with common
// tangent segments; with finite mode tables each user contributes a convex
// piecewise-linear curve and the envelope is the lower convex hull of the
// mode points.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tdma/errors.hpp"

namespace tdma::costreward {

inline constexpr double kLn2 = 0.6931471805599453;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// User profiles and mode tables
// ---------------------------------------------------------------------------

struct Infinite {};

struct AmcMode {
    double rho;  // rate in bits/s/Hz
    double p;    // minimum received power, noise-normalized
};

// Rate-power operating points, strictly increasing in both coordinates with
// strictly increasing incremental slopes (mode 0 = (0,0) is implicit).
struct AmcTable {
    std::vector<AmcMode> modes;

    // Incremental power per rate of mode l (1-based).
    double gamma(std::size_t l) const {
        const double r0 = l >= 2 ? modes[l - 2].rho : 0.0;
        const double p0 = l >= 2 ? modes[l - 2].p : 0.0;
        return (modes[l - 1].p - p0) / (modes[l - 1].rho - r0);
    }
    double max_rate() const { return modes.empty() ? 0.0 : modes.back().rho; }
};

inline void validate(const AmcTable& table) {
    double prev_rho = 0.0, prev_p = 0.0, prev_gamma = 0.0;
    for (std::size_t l = 0; l < table.modes.size(); ++l) {
        const auto& m = table.modes[l];
        if (!(m.rho > prev_rho) || !(m.p > prev_p))
            throw ConfigError("mode table: rates and powers must be strictly increasing");
        const double g = (m.p - prev_p) / (m.rho - prev_rho);
        if (l > 0 && !(g > prev_gamma))
            throw ConfigError("mode table: incremental slopes must be strictly increasing");
        prev_rho = m.rho;
        prev_p = m.p;
        prev_gamma = g;
    }
}

using Codebook = std::variant<Infinite, AmcTable>;

struct UserProfile {
    double w = 1.0;   // rate-reward weight, > 0
    double mu = 1.0;  // power-cost weight, >= 0
    Codebook codebook = Infinite{};

    bool is_infinite() const { return std::holds_alternative<Infinite>(codebook); }
    const AmcTable& table() const { return std::get<AmcTable>(codebook); }
};

inline void validate(const UserProfile& u) {
    if (!(u.w > 0.0) || !std::isfinite(u.w)) throw ConfigError("user weight w must be positive");
    if (!(u.mu >= 0.0) || !std::isfinite(u.mu)) throw ConfigError("cost weight mu must be non-negative");
    if (const auto* t = std::get_if<AmcTable>(&u.codebook)) validate(*t);
}

// Zero cost weights are excluded from envelope construction; substituting a
// small positive weight approaches the same extreme point.
inline std::vector<UserProfile> substitute_zero_mu(std::span<const UserProfile> profiles,
                                                   double eps = 1e-9) {
    std::vector<UserProfile> out(profiles.begin(), profiles.end());
    for (auto& u : out)
        if (u.mu == 0.0) u.mu = eps;
    return out;
}

// ---------------------------------------------------------------------------
// Cost curves
// ---------------------------------------------------------------------------

// Power cost of delivering rate-reward x with a capacity-achieving codebook:
// (mu/h) * (2^(x/w) - 1).
inline double power_cost(double mu, double w, double h, double x) {
    return mu / h * (std::exp2(x / w) - 1.0);
}

// d/dx of power_cost; equals ln2*mu/(w*h) at x = 0.
inline double power_cost_deriv(double mu, double w, double h, double x) {
    return kLn2 * mu / (w * h) * std::exp2(x / w);
}

// Rate-reward at which the curve's derivative equals `slope` (slope must be
// at least the initial derivative).
inline double power_cost_rate_at_slope(double mu, double w, double h, double slope) {
    return w * std::log2(slope * w * h / (kLn2 * mu));
}

// Initial derivative of the cost curve; the ordering key mu/(w*h) times ln2.
inline double initial_slope(double mu, double w, double h) { return kLn2 * mu / (w * h); }

// Transmit power needed for rate r over gain h with a finite mode table:
// linear interpolation between adjacent modes, +inf past the top mode.
inline double amc_upsilon(const AmcTable& table, double h, double r) {
    if (r <= 0.0) return 0.0;
    if (table.modes.empty() || r > table.modes.back().rho) return kInf;
    double rho0 = 0.0, p0 = 0.0;
    for (const auto& m : table.modes) {
        if (r <= m.rho) {
            const double g = (m.p - p0) / (m.rho - rho0);
            return (p0 + g * (r - rho0)) / h;
        }
        rho0 = m.rho;
        p0 = m.p;
    }
    return kInf;
}

// ---------------------------------------------------------------------------
// Common tangent between two exponential cost curves
// ---------------------------------------------------------------------------

struct Tangent {
    double slope;  // s, shared first derivative of both curves at the touch points
    double r_a;    // touch point on the low-w curve
    double r_b;    // touch point on the high-w curve
};

// Count of tangent-root bracket failures (extreme parameter regimes); the
// envelope builder falls back to a direct pointwise comparison when this fires.
inline std::atomic<std::uint64_t>& tangent_bracket_failures() {
    static std::atomic<std::uint64_t> n{0};
    return n;
}

namespace detail {

// Residual whose unique root above xi gives the common-tangent slope of the
// two curves; strictly increasing there.
inline double tangent_residual(double x, double w1, double d1, double w2, double d2) {
    return x * (w2 * std::log2(x / d2) - w1 * std::log2(x / d1) - (w2 - w1) / kLn2) +
           (w2 * d2 - w1 * d1) / kLn2;
}

}  // namespace detail

// Common tangent of the curves of `lo` (smaller w) and `hi` (larger w) at
// gains h_lo, h_hi. Requires w_lo < w_hi and mu_lo/(w_lo*h_lo) <
// mu_hi/(w_hi*h_hi); under these the curves cross once and a unique tangent
// with positive touch points exists.
inline Tangent tangent_slope(const UserProfile& lo, const UserProfile& hi, double h_lo,
                             double h_hi) {
    const double w1 = lo.w, w2 = hi.w;
    const double d1 = initial_slope(lo.mu, w1, h_lo);
    const double d2 = initial_slope(hi.mu, w2, h_hi);
    if (!(w1 < w2)) throw ConfigError("tangent_slope: requires w_lo < w_hi");
    if (!(d1 < d2)) throw ConfigError("tangent_slope: requires mu/(w h) ordered ascending");

    // The residual is decreasing below xi and increasing above it; it is
    // negative at max(xi, d2), so the upper root brackets from there.
    const double log2_xi = (w2 * std::log2(d2) - w1 * std::log2(d1)) / (w2 - w1);
    const double xi = std::exp2(log2_xi);
    double lhs = std::max(xi, d2) * (1.0 + 1e-12);
    auto g = [&](double x) { return detail::tangent_residual(x, w1, d1, w2, d2); };
    if (!(g(lhs) < 0.0)) {
        // Degenerate spacing (d1 ~ d2): the tangent collapses toward the
        // common initial slope.
        tangent_bracket_failures().fetch_add(1, std::memory_order_relaxed);
        throw BracketError("tangent_slope: no bracket above xi");
    }
    double rhs = lhs * 2.0;
    int guard = 0;
    while (g(rhs) <= 0.0) {
        rhs *= 4.0;
        if (++guard > 40) {
            tangent_bracket_failures().fetch_add(1, std::memory_order_relaxed);
            throw BracketError("tangent_slope: residual stayed negative during expansion");
        }
    }
    while (rhs - lhs > 1e-13 * rhs) {
        const double mid = 0.5 * (lhs + rhs);
        if (g(mid) < 0.0)
            lhs = mid;
        else
            rhs = mid;
    }
    const double s = 0.5 * (lhs + rhs);
    Tangent t;
    t.slope = s;
    t.r_a = std::max(0.0, w1 * std::log2(s / d1));
    t.r_b = std::max(0.0, w2 * std::log2(s / d2));
    return t;
}

// ---------------------------------------------------------------------------
// Envelope representations
// ---------------------------------------------------------------------------

// Envelope for capacity-achieving codebooks: active users ordered by w, with
// common tangent segments between consecutive curve pieces.
struct ContinuousEnvelope {
    struct Piece {
        int user;           // index into the profile span
        double w;
        double d;           // initial derivative ln2*mu/(w*h)
        double mu_over_h;
    };
    std::vector<Piece> active;      // size K0
    std::vector<Tangent> tangents;  // size K0-1, strictly increasing slopes

    double curve(std::size_t m, double x) const {
        return active[m].mu_over_h * (std::exp2(x / active[m].w) - 1.0);
    }
};

// Envelope for finite mode tables: corner points of the lower convex hull,
// anchored at the implicit origin corner, with strictly increasing slopes.
struct PwlEnvelope {
    struct Corner {
        double r;   // rate-reward w_k * rho
        double c;   // cost mu_k * p / h_k
        int user;
        int mode;   // 1-based mode index in that user's table
    };
    std::vector<Corner> corners;
    std::vector<double> slopes;  // slopes[i] = slope into corners[i]

    double max_rate_reward() const { return corners.empty() ? 0.0 : corners.back().r; }
};

using Envelope = std::variant<ContinuousEnvelope, PwlEnvelope>;

// ---------------------------------------------------------------------------
// Envelope construction
// ---------------------------------------------------------------------------

// Builds the continuous envelope: dominated curves are discarded (a curve is
// dominated when another user has a weakly larger w and weakly smaller
// mu/(w h)), then the chain of minimal common-tangent slopes is followed.
inline ContinuousEnvelope build_envelope_continuous(std::span<const UserProfile> profiles,
                                                    std::span<const double> gains) {
    const std::size_t n = profiles.size();
    if (n == 0) throw ConfigError("build_envelope_continuous: empty profile list");
    if (gains.size() != n) throw ConfigError("build_envelope_continuous: gain/profile size mismatch");
    std::vector<double> ratio(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!profiles[k].is_infinite())
            throw ConfigError("build_envelope_continuous: all users must have infinite codebooks");
        if (!(profiles[k].mu > 0.0))
            throw ConfigError("build_envelope_continuous: mu must be positive (substitute eps for 0)");
        if (!(gains[k] > 0.0) || !std::isfinite(gains[k]))
            throw ConfigError("build_envelope_continuous: gains must be positive and finite");
        ratio[k] = profiles[k].mu / (profiles[k].w * gains[k]);
    }

    std::vector<int> alive;
    for (std::size_t k = 0; k < n; ++k) {
        bool dominated = false;
        for (std::size_t i = 0; i < n && !dominated; ++i) {
            if (i == k) continue;
            if (profiles[k].w <= profiles[i].w && ratio[k] >= ratio[i]) {
                // Exact duplicates keep the lower index.
                if (profiles[k].w == profiles[i].w && ratio[k] == ratio[i] && k < i) continue;
                dominated = true;
            }
        }
        if (!dominated) alive.push_back(static_cast<int>(k));
    }
    std::sort(alive.begin(), alive.end(),
              [&](int a, int b) { return profiles[a].w < profiles[b].w; });

    ContinuousEnvelope env;
    std::size_t pos = 0;
    while (true) {
        const int head = alive[pos];
        env.active.push_back({head, profiles[head].w,
                              initial_slope(profiles[head].mu, profiles[head].w, gains[head]),
                              profiles[head].mu / gains[head]});
        if (pos + 1 >= alive.size()) break;
        double best_slope = kInf;
        std::size_t best_pos = 0;
        Tangent best_tangent{};
        for (std::size_t i = pos + 1; i < alive.size(); ++i) {
            const int cand = alive[i];
            Tangent t;
            try {
                t = tangent_slope(profiles[head], profiles[cand], gains[head], gains[cand]);
            } catch (const BracketError&) {
                continue;  // treated as non-tangent; the candidate is skipped
            }
            // Equal slopes within 1e-12 relative keep the earlier candidate.
            if (t.slope < best_slope * (1.0 - 1e-12)) {
                best_slope = t.slope;
                best_pos = i;
                best_tangent = t;
            }
        }
        if (best_pos == 0) break;  // no usable tangent: head closes the envelope
        env.tangents.push_back(best_tangent);
        pos = best_pos;
    }
    return env;
}

namespace detail {

inline double cross(double x0, double y0, double x1, double y1, double x2, double y2) {
    return (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
}

}  // namespace detail

// Builds the piecewise-linear envelope: the lower convex hull of the padded
// point set {(0,0)} U {(w_k*rho_{k,l}, mu_k*p_{k,l}/h_k)} via monotone chain.
// Coincident rate-rewards keep the cheaper point (ties: lower user index).
inline PwlEnvelope build_envelope_amc(std::span<const UserProfile> profiles,
                                      std::span<const double> gains) {
    const std::size_t n = profiles.size();
    if (n == 0) throw ConfigError("build_envelope_amc: empty profile list");
    if (gains.size() != n) throw ConfigError("build_envelope_amc: gain/profile size mismatch");

    struct Point {
        double r, c;
        int user, mode;
    };
    std::vector<Point> pts;
    for (std::size_t k = 0; k < n; ++k) {
        if (profiles[k].is_infinite())
            throw ConfigError("build_envelope_amc: all users must have mode tables");
        if (!(gains[k] > 0.0) || !std::isfinite(gains[k]))
            throw ConfigError("build_envelope_amc: gains must be positive and finite");
        const auto& table = profiles[k].table();
        for (std::size_t l = 0; l < table.modes.size(); ++l)
            pts.push_back({profiles[k].w * table.modes[l].rho,
                           profiles[k].mu * table.modes[l].p / gains[k], static_cast<int>(k),
                           static_cast<int>(l + 1)});
    }
    if (pts.empty()) throw ConfigError("build_envelope_amc: all mode tables are empty");

    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        if (a.r != b.r) return a.r < b.r;
        if (a.c != b.c) return a.c < b.c;
        return a.user < b.user;
    });

    std::vector<Point> hull{{0.0, 0.0, -1, 0}};
    for (const auto& p : pts) {
        if (p.r == hull.back().r) continue;  // same rate-reward: cheaper point already kept
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            if (detail::cross(a.r, a.c, b.r, b.c, p.r, p.c) <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }

    PwlEnvelope env;
    for (std::size_t i = 1; i < hull.size(); ++i) {
        env.corners.push_back({hull[i].r, hull[i].c, hull[i].user, hull[i].mode});
        env.slopes.push_back((hull[i].c - hull[i - 1].c) / (hull[i].r - hull[i - 1].r));
    }
    return env;
}

// ---------------------------------------------------------------------------
// Envelope evaluation and water-level classification
// ---------------------------------------------------------------------------

inline double envelope_eval(const ContinuousEnvelope& env, double r) {
    if (r <= 0.0) return 0.0;
    const std::size_t k0 = env.active.size();
    for (std::size_t m = 0; m + 1 < k0; ++m) {
        const auto& t = env.tangents[m];
        if (r <= t.r_a) return env.curve(m, r);
        if (r < t.r_b) return env.curve(m, t.r_a) + t.slope * (r - t.r_a);
    }
    return env.curve(k0 - 1, r);
}

inline double envelope_eval(const PwlEnvelope& env, double r) {
    if (r <= 0.0) return 0.0;
    if (env.corners.empty() || r > env.corners.back().r) return kInf;
    double r0 = 0.0, c0 = 0.0;
    for (std::size_t i = 0; i < env.corners.size(); ++i) {
        if (r <= env.corners[i].r)
            return c0 + env.slopes[i] * (r - r0);
        r0 = env.corners[i].r;
        c0 = env.corners[i].c;
    }
    return kInf;
}

inline double envelope_eval(const Envelope& env, double r) {
    return std::visit([&](const auto& e) { return envelope_eval(e, r); }, env);
}

// Classification of a water level against the envelope's slopes.
struct WaterfillPoint {
    enum class Regime { BelowAll, Interior, OnTangent };
    Regime regime = Regime::BelowAll;
    // Interior: active-piece index (continuous) or corner index (PWL).
    // OnTangent: tangent segment index (continuous) or upper-corner index (PWL).
    int index = -1;
    double rate_reward = 0.0;  // Interior only: selected total rate-reward
};

// Continuous case: the level selects the piece whose slope range brackets it;
// the selected rate-reward inverts that curve's derivative (clamped at 0).
// Exact equality with a tangent slope is the time-sharing tie.
inline WaterfillPoint envelope_rate_at_level(const ContinuousEnvelope& env, double lambda) {
    WaterfillPoint wp;
    const std::size_t k0 = env.active.size();
    std::size_t m = 0;
    for (; m + 1 < k0; ++m) {
        if (lambda == env.tangents[m].slope) {
            wp.regime = WaterfillPoint::Regime::OnTangent;
            wp.index = static_cast<int>(m);
            return wp;
        }
        if (lambda < env.tangents[m].slope) break;
    }
    const auto& piece = env.active[m];
    if (lambda <= piece.d) return wp;  // BelowAll: even the first curve costs more than the level
    wp.regime = WaterfillPoint::Regime::Interior;
    wp.index = static_cast<int>(m);
    wp.rate_reward = piece.w * std::log2(lambda / piece.d);
    return wp;
}

// PWL case: the corner with the largest slope not exceeding the level; exact
// slope equality is the corner-pair tie.
inline WaterfillPoint envelope_rate_at_level(const PwlEnvelope& env, double lambda) {
    WaterfillPoint wp;
    const auto it = std::lower_bound(env.slopes.begin(), env.slopes.end(), lambda);
    if (it != env.slopes.end() && *it == lambda) {
        wp.regime = WaterfillPoint::Regime::OnTangent;
        wp.index = static_cast<int>(it - env.slopes.begin());
        return wp;
    }
    const auto idx = static_cast<std::ptrdiff_t>(it - env.slopes.begin()) - 1;
    if (idx < 0) return wp;  // BelowAll
    wp.regime = WaterfillPoint::Regime::Interior;
    wp.index = static_cast<int>(idx);
    wp.rate_reward = env.corners[static_cast<std::size_t>(idx)].r;
    return wp;
}

inline WaterfillPoint envelope_rate_at_level(const Envelope& env, double lambda) {
    return std::visit([&](const auto& e) { return envelope_rate_at_level(e, lambda); }, env);
}

}  // namespace tdma::costreward
