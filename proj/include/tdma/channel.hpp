// SPDX-License-Identifier: Apache-2.0
//
// Block-fading channel models, seeded sample generation and Monte Carlo
// expectation over fading states. All gains are channel power gains in
// linear scale, noise-normalized so the AWGN variance is 1.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tdma/errors.hpp"
#include "tdma/parallel.hpp"
#include "tdma/rng.hpp"

namespace tdma::channel {

// Joint channel power gains for one fading block.
struct FadingState {
    std::vector<double> gains;
};

// Power gain is exponentially distributed with the given mean. This is the
// power-gain view of Rayleigh amplitude fading; the mean equals the SNR when
// the noise floor is normalized to 1.
struct RayleighPower {
    double mean_gain = 1.0;
};

// Finite set of (gain, probability) atoms.
struct Discrete {
    std::vector<std::pair<double, double>> points;
};

struct Constant {
    double gain = 1.0;
};

using GainDistribution = std::variant<RayleighPower, Discrete, Constant>;

// Per-user gain distributions; users fade independently of each other.
struct ChannelModel {
    std::vector<GainDistribution> users;

    std::size_t user_count() const { return users.size(); }
};

inline void validate(const ChannelModel& model) {
    if (model.users.empty()) throw ConfigError("channel model has no users");
    for (std::size_t k = 0; k < model.users.size(); ++k) {
        const auto& dist = model.users[k];
        if (const auto* r = std::get_if<RayleighPower>(&dist)) {
            if (!(r->mean_gain > 0.0) || !std::isfinite(r->mean_gain))
                throw ConfigError("user " + std::to_string(k) + ": mean_gain must be positive");
        } else if (const auto* d = std::get_if<Discrete>(&dist)) {
            if (d->points.empty())
                throw ConfigError("user " + std::to_string(k) + ": discrete model has no atoms");
            double total = 0.0;
            for (const auto& [gain, prob] : d->points) {
                if (!(gain > 0.0) || !std::isfinite(gain))
                    throw ConfigError("user " + std::to_string(k) + ": discrete gains must be positive");
                if (prob < 0.0)
                    throw ConfigError("user " + std::to_string(k) + ": negative probability");
                total += prob;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw ConfigError("user " + std::to_string(k) + ": probabilities sum to " +
                                  std::to_string(total) + ", expected 1");
        } else if (const auto* c = std::get_if<Constant>(&dist)) {
            if (!(c->gain > 0.0) || !std::isfinite(c->gain))
                throw ConfigError("user " + std::to_string(k) + ": constant gain must be positive");
        }
    }
}

// Immutable set of i.i.d. fading states, stored row-major (count x users).
// Regenerating with the same (model, count, seed) yields identical bits.
class SampleSet {
  public:
    SampleSet(std::size_t users, std::size_t count, std::uint64_t seed, std::vector<double> gains)
        : users_(users), count_(count), seed_(seed), gains_(std::move(gains)) {}

    std::size_t users() const { return users_; }
    std::size_t count() const { return count_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> state(std::size_t i) const {
        return {gains_.data() + i * users_, users_};
    }
    double gain(std::size_t i, std::size_t k) const { return gains_[i * users_ + k]; }
    const std::vector<double>& raw() const { return gains_; }

  private:
    std::size_t users_;
    std::size_t count_;
    std::uint64_t seed_;
    std::vector<double> gains_;
};

inline double draw_gain(const GainDistribution& dist, rng::Xoshiro256pp& stream) {
    if (const auto* r = std::get_if<RayleighPower>(&dist))
        return -r->mean_gain * std::log(stream.uniform_open());
    if (const auto* d = std::get_if<Discrete>(&dist)) {
        const double u = stream.uniform_open();
        double cum = 0.0;
        for (const auto& [gain, prob] : d->points) {
            cum += prob;
            if (u < cum) return gain;
        }
        return d->points.back().first;
    }
    return std::get<Constant>(dist).gain;
}

inline SampleSet sample_states(const ChannelModel& model, std::size_t count, std::uint64_t seed) {
    validate(model);
    if (count < 1) throw ConfigError("sample count must be at least 1");
    const std::size_t users = model.user_count();
    std::vector<double> gains(count * users);
    for (std::size_t k = 0; k < users; ++k) {
        auto stream = rng::user_stream(seed, k);
        for (std::size_t i = 0; i < count; ++i) gains[i * users + k] = draw_gain(model.users[k], stream);
    }
    return SampleSet(users, count, seed, std::move(gains));
}

// P(gain <= z) for an exponentially distributed power gain with the given mean.
inline double rayleigh_cdf(double mean_gain, double z) {
    if (!(mean_gain > 0.0)) throw ConfigError("rayleigh_cdf: mean_gain must be positive");
    if (z <= 0.0) return 0.0;
    const double c = 1.0 - std::exp(-z / mean_gain);
    return c < 0.0 ? 0.0 : (c > 1.0 ? 1.0 : c);
}

// Arithmetic mean of f over all states, reduced in a fixed pairwise order.
template <class F>
double expect(const SampleSet& sample, F&& f) {
    if (sample.count() == 0) throw ConfigError("expect: empty sample");
    const double total = indexed_sum(sample.count(), [&](std::size_t i) { return f(sample.state(i)); });
    return total / static_cast<double>(sample.count());
}

// Debug dump: one row per state, one column per user gain.
inline std::string to_csv(const SampleSet& sample) {
    std::string out;
    for (std::size_t k = 0; k < sample.users(); ++k) {
        if (k) out += ',';
        out += "h" + std::to_string(k + 1);
    }
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < sample.count(); ++i) {
        for (std::size_t k = 0; k < sample.users(); ++k) {
            std::snprintf(buf, sizeof buf, "%.12g", sample.gain(i, k));
            if (k) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace tdma::channel
