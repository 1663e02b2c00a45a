// SPDX-License-Identifier: Apache-2.0
//
// JSON views of solutions, envelopes and mode tables, plus CSV formatting.
// Serialization is deterministic (sorted keys, shortest round-trip doubles).
#pragma once

#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tdma/amc.hpp"
#include "tdma/costreward.hpp"
#include "tdma/experiments.hpp"
#include "tdma/indiv.hpp"
#include "tdma/wsum.hpp"

namespace tdma::io {

using nlohmann::json;

inline json to_json(const costreward::AmcTable& table) {
    json arr = json::array();
    for (const auto& m : table.modes) arr.push_back({{"rho", m.rho}, {"p", m.p}});
    return arr;
}

inline costreward::AmcTable amc_table_from_json(const json& arr) {
    costreward::AmcTable table;
    if (!arr.is_array()) throw ConfigError("mode table: expected an array of {rho, p}");
    for (const auto& m : arr) {
        if (!m.contains("rho") || !m.contains("p"))
            throw ConfigError("mode table: every entry needs rho and p");
        table.modes.push_back({m.at("rho").get<double>(), m.at("p").get<double>()});
    }
    costreward::validate(table);
    return table;
}

inline json to_json(const costreward::ContinuousEnvelope& env) {
    json users = json::array(), segments = json::array();
    for (const auto& piece : env.active) users.push_back(piece.user);
    for (const auto& t : env.tangents)
        segments.push_back({{"slope", t.slope}, {"r_a", t.r_a}, {"r_b", t.r_b}});
    return {{"kind", "continuous"}, {"active_users", users}, {"tangent_segments", segments}};
}

inline json to_json(const costreward::PwlEnvelope& env) {
    json corners = json::array();
    for (std::size_t i = 0; i < env.corners.size(); ++i)
        corners.push_back({{"r", env.corners[i].r},
                           {"c", env.corners[i].c},
                           {"user", env.corners[i].user},
                           {"mode", env.corners[i].mode},
                           {"slope", env.slopes[i]}});
    return {{"kind", "piecewise_linear"}, {"corners", corners}};
}

inline json to_json(const costreward::Envelope& env) {
    return std::visit([](const auto& e) { return to_json(e); }, env);
}

inline json to_json(const wsum::WsumSolution& sol) {
    return {{"kind", "weighted_sum"},
            {"lambda", sol.lambda_star},
            {"tau0", sol.tau0},
            {"avg_rate", sol.avg_rate},
            {"avg_user_rate", sol.avg_user_rate},
            {"avg_power", sol.avg_power},
            {"objective", sol.objective},
            {"iterations", sol.iterations},
            {"samples", sol.samples},
            {"seed", sol.seed}};
}

inline json to_json(const indiv::IndivSolution& sol) {
    return {{"kind", "individual"},
            {"lambda", sol.lambda},
            {"avg_rate", sol.avg_rate},
            {"avg_power", sol.avg_power},
            {"mode_tie_share", sol.mode_tie_share},
            {"iterations", sol.iterations},
            {"converged", sol.converged},
            {"lambda_trace", sol.lambda_trace},
            {"samples", sol.samples},
            {"seed", sol.seed}};
}

inline std::string fmt12(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string region_csv(const std::vector<experiments::RegionPoint>& points) {
    std::string out = "mu1,mu2,p1,p2,r1,r2\n";
    for (const auto& p : points) {
        out += fmt12(p.mu[0]) + ',' + fmt12(p.mu[1]) + ',' + fmt12(p.pbar[0]) + ',' +
               fmt12(p.pbar[1]) + ',' + fmt12(p.achieved_rates[0]) + ',' +
               fmt12(p.achieved_rates[1]) + '\n';
    }
    return out;
}

inline std::string savings_csv(const std::vector<experiments::SavingsRow>& rows) {
    std::string out = "ratio,dB_vs_A,dB_vs_B\n";
    for (const auto& r : rows)
        out += fmt12(r.ratio) + ',' + fmt12(r.db_vs_a) + ',' + fmt12(r.db_vs_b) + '\n';
    return out;
}

}  // namespace tdma::io
