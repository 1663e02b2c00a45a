// SPDX-License-Identifier: Apache-2.0
//
// Config parsing and the command implementations behind the CLI. Commands
// return payload strings so runs are byte-reproducible and testable without a
// process boundary. Physical units (Hz, bits/s, dB) are converted here; the
// library works in noise-normalized per-Hz units throughout.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tdma/amc.hpp"
#include "tdma/channel.hpp"
#include "tdma/costreward.hpp"
#include "tdma/errors.hpp"
#include "tdma/experiments.hpp"
#include "tdma/indiv.hpp"
#include "tdma/json_io.hpp"
#include "tdma/wsum.hpp"

namespace tdma::cli {

using nlohmann::json;

struct Config {
    std::vector<costreward::UserProfile> profiles;
    channel::ChannelModel model;
    experiments::Constraint constraint;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    double tolerance = 1e-4;
    double tau0 = 0.5;
    std::optional<double> bandwidth_hz;  // enables bits/s rate inputs
};

namespace detail {

inline double require_number(const json& node, const std::string& path) {
    if (!node.is_number()) throw ConfigError(path + ": expected a number");
    return node.get<double>();
}

inline channel::GainDistribution parse_channel(const json& node, const std::string& path) {
    if (!node.is_object() || !node.contains("type"))
        throw ConfigError(path + ": expected an object with a \"type\" field");
    const std::string type = node.at("type").get<std::string>();
    if (type == "rayleigh") {
        double mean;
        if (node.contains("mean_gain"))
            mean = require_number(node.at("mean_gain"), path + ".mean_gain");
        else if (node.contains("snr_db"))
            mean = std::pow(10.0, require_number(node.at("snr_db"), path + ".snr_db") / 10.0);
        else
            throw ConfigError(path + ": rayleigh needs mean_gain or snr_db");
        return channel::RayleighPower{mean};
    }
    if (type == "constant")
        return channel::Constant{require_number(node.at("gain"), path + ".gain")};
    if (type == "discrete") {
        channel::Discrete d;
        for (const auto& pt : node.at("points"))
            d.points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
        return d;
    }
    throw ConfigError(path + ".type: unknown channel type \"" + type + "\"");
}

inline costreward::Codebook parse_codebook(const json& node, const std::string& path) {
    if (node.is_string()) {
        if (node.get<std::string>() == "infinite") return costreward::Infinite{};
        throw ConfigError(path + ": unknown codebook \"" + node.get<std::string>() + "\"");
    }
    if (node.is_object() && node.contains("modes"))
        return io::amc_table_from_json(node.at("modes"));
    if (node.is_object() && node.contains("qam")) {
        const auto& q = node.at("qam");
        amc::QamSpec spec;
        for (const auto& m : q.at("m")) spec.constellations.push_back(m.get<int>());
        spec.sep_target = require_number(q.at("sep"), path + ".qam.sep");
        return amc::build_mode_table(spec);
    }
    throw ConfigError(path + ": codebook must be \"infinite\", {modes: [...]}, or {qam: {...}}");
}

}  // namespace detail

inline Config parse_config(const json& doc) {
    Config cfg;
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
    if (!doc.contains("users") || !doc.at("users").is_array() || doc.at("users").empty())
        throw ConfigError("config.users: expected a non-empty array");
    if (doc.contains("bandwidth_hz"))
        cfg.bandwidth_hz = detail::require_number(doc.at("bandwidth_hz"), "config.bandwidth_hz");
    const double band = cfg.bandwidth_hz.value_or(1.0);

    std::size_t idx = 0;
    for (const auto& u : doc.at("users")) {
        const std::string path = "config.users[" + std::to_string(idx++) + "]";
        costreward::UserProfile p;
        p.w = u.contains("w") ? detail::require_number(u.at("w"), path + ".w") : 1.0;
        p.mu = u.contains("mu") ? detail::require_number(u.at("mu"), path + ".mu") : 1.0;
        p.codebook = u.contains("codebook") ? detail::parse_codebook(u.at("codebook"), path + ".codebook")
                                            : costreward::Codebook{costreward::Infinite{}};
        costreward::validate(p);
        cfg.profiles.push_back(std::move(p));
        if (!u.contains("channel")) throw ConfigError(path + ": missing channel");
        cfg.model.users.push_back(detail::parse_channel(u.at("channel"), path + ".channel"));
    }
    channel::validate(cfg.model);

    if (!doc.contains("constraint")) throw ConfigError("config.constraint: missing");
    const auto& c = doc.at("constraint");
    const std::string ctype = c.at("type").get<std::string>();
    if (ctype == "weighted_sum") {
        double rate;
        if (c.contains("rate"))
            rate = detail::require_number(c.at("rate"), "config.constraint.rate");
        else if (c.contains("rate_bits_per_sec"))
            rate = detail::require_number(c.at("rate_bits_per_sec"),
                                          "config.constraint.rate_bits_per_sec") / band;
        else
            throw ConfigError("config.constraint: weighted_sum needs rate or rate_bits_per_sec");
        cfg.constraint = experiments::WeightedSumConstraint{rate};
    } else if (ctype == "individual") {
        experiments::IndividualConstraint ind;
        const char* key = c.contains("rates") ? "rates" : "rates_bits_per_sec";
        if (!c.contains(key)) throw ConfigError("config.constraint: individual needs rates");
        for (const auto& r : c.at(key))
            ind.targets.push_back(r.get<double>() / (c.contains("rates") ? 1.0 : band));
        if (ind.targets.size() != cfg.profiles.size())
            throw ConfigError("config.constraint.rates: need one target per user");
        cfg.constraint = std::move(ind);
    } else {
        throw ConfigError("config.constraint.type: expected weighted_sum or individual");
    }

    if (doc.contains("samples")) cfg.samples = doc.at("samples").get<std::size_t>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("tolerance"))
        cfg.tolerance = detail::require_number(doc.at("tolerance"), "config.tolerance");
    if (doc.contains("tau0")) cfg.tau0 = detail::require_number(doc.at("tau0"), "config.tau0");
    if (cfg.samples < 1) throw ConfigError("config.samples: must be at least 1");
    return cfg;
}

inline Config parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

// Envelope inspection at explicit gains: structure plus a dense (R, J(R))
// sampling for plotting.
inline std::string run_envelope(const Config& cfg, const std::vector<double>& gains) {
    if (gains.size() != cfg.profiles.size())
        throw ConfigError("envelope: need one gain per configured user");
    for (double g : gains)
        if (!(g > 0.0)) throw ConfigError("envelope: gains must be positive");
    const auto eff = costreward::substitute_zero_mu(cfg.profiles);
    costreward::Envelope env;
    double r_max;
    if (wsum::homogeneous_infinite(eff)) {
        auto e = costreward::build_envelope_continuous(eff, gains);
        r_max = e.tangents.empty() ? 4.0 * e.active.front().w
                                   : 2.0 * e.tangents.back().r_b;
        env = std::move(e);
    } else {
        auto e = costreward::build_envelope_amc(eff, gains);
        r_max = e.max_rate_reward();
        env = std::move(e);
    }
    json out = io::to_json(env);
    json samples = json::array();
    const int points = 201;
    for (int i = 0; i < points; ++i) {
        const double r = r_max * i / (points - 1);
        samples.push_back({r, costreward::envelope_eval(env, r)});
    }
    out["gains"] = gains;
    out["samples"] = samples;
    return out.dump(2) + "\n";
}

inline std::string run_solve(const Config& cfg) {
    const auto sample = channel::sample_states(cfg.model, cfg.samples, cfg.seed);
    json out;
    if (const auto* ws = std::get_if<experiments::WeightedSumConstraint>(&cfg.constraint)) {
        wsum::SolveOptions opts;
        opts.tol = cfg.tolerance;
        opts.tau0 = cfg.tau0;
        out = io::to_json(wsum::solve(cfg.profiles, sample, ws->target, opts));
    } else {
        indiv::SolveOptions opts;
        opts.tol = cfg.tolerance;
        const auto sol = indiv::solve(
            cfg.profiles, sample, std::get<experiments::IndividualConstraint>(cfg.constraint).targets,
            opts);
        if (!sol.converged)
            throw ConvergenceError("individual solve left a rate target unmet after " +
                                   std::to_string(sol.iterations) + " sweeps");
        out = io::to_json(sol);
    }
    out["tolerance"] = cfg.tolerance;
    return out.dump(2) + "\n";
}

struct CommandFiles {
    std::string csv;
    std::string manifest;
};

inline json manifest_base(const Config& cfg, const std::string& command) {
    json m{{"command", command},
           {"seed", cfg.seed},
           {"samples", cfg.samples},
           {"tolerance", cfg.tolerance},
           {"generator", rng::kGeneratorId}};
    return m;
}

inline CommandFiles run_region(const Config& cfg, int directions) {
    const auto sample = channel::sample_states(cfg.model, cfg.samples, cfg.seed);
    experiments::SolveTolerances tols;
    tols.wsum_tol = cfg.tolerance;
    const auto points =
        experiments::trace_region(cfg.profiles, sample, cfg.constraint, directions, tols);
    json manifest = manifest_base(cfg, "region");
    manifest["directions"] = directions;
    return {io::region_csv(points), manifest.dump(2) + "\n"};
}

inline CommandFiles run_compare(const Config& cfg, const std::vector<double>& ratios) {
    const auto sample = channel::sample_states(cfg.model, cfg.samples, cfg.seed);
    experiments::SolveTolerances tols;
    tols.wsum_tol = cfg.tolerance;
    const auto rows = experiments::power_savings(cfg.profiles, sample, cfg.constraint, ratios, tols);
    json manifest = manifest_base(cfg, "compare");
    manifest["ratios"] = ratios;
    return {io::savings_csv(rows), manifest.dump(2) + "\n"};
}

inline std::string run_modes(const amc::QamSpec& spec) {
    return io::to_json(amc::build_mode_table(spec)).dump(2) + "\n";
}

}  // namespace tdma::cli
