// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tdma/channel.hpp"
#include "tdma/indiv.hpp"

using namespace tdma;
using namespace tdma::costreward;
using namespace tdma::indiv;

namespace {

UserProfile inf_user(double mu) { return {1.0, mu, Infinite{}}; }

UserProfile amc_user(double mu, std::vector<AmcMode> modes) {
    return {1.0, mu, AmcTable{std::move(modes)}};
}

// Sample whose two users see identical gains per state, making user exchange
// an exact symmetry.
channel::SampleSet mirrored_sample(std::size_t n, std::uint64_t seed) {
    auto stream = rng::user_stream(seed, 0);
    std::vector<double> gains(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = -std::log(stream.uniform_open());
        gains[2 * i] = g;
        gains[2 * i + 1] = g;
    }
    return channel::SampleSet(2, n, seed, std::move(gains));
}

}  // namespace

TEST_CASE("quality indicator closed forms", "[indiv]") {
    const auto u = inf_user(1.0);
    const auto at_threshold = quality_indicator(u, 1.0, kLn2);
    CHECK(at_threshold.r_min == 0.0);
    CHECK(at_threshold.phi == 0.0);

    const auto active = quality_indicator(u, 1.0, 2.0 * kLn2);
    CHECK(active.r_min == Approx(1.0).margin(1e-12));
    CHECK(active.phi == Approx(1.0 - 2.0 * kLn2).margin(1e-12));

    const auto a = amc_user(1.0, {{1, 1}, {2, 3}});
    const auto q = quality_indicator(a, 1.0, 1.5);
    CHECK(q.r_min == 1.0);
    CHECK(q.phi == Approx(-0.5).margin(1e-15));
    // Below the first mode's slope the user defers.
    const auto idle = quality_indicator(a, 1.0, 0.5);
    CHECK(idle.r_min == 0.0);
    CHECK(idle.phi == 0.0);
}

TEST_CASE("indicator is never positive", "[indiv]") {
    rng::Xoshiro256pp gen(12);
    for (int i = 0; i < 300; ++i) {
        const double mu = 0.2 + 3.0 * gen.uniform_open();
        const double h = 0.05 + 5.0 * gen.uniform_open();
        const double lam = 0.05 + 5.0 * gen.uniform_open();
        CHECK(quality_indicator(inf_user(mu), h, lam).phi <= 0.0);
        CHECK(quality_indicator(amc_user(mu, {{1, 0.8}, {2, 2.5}}), h, lam).phi <= 0.0);
    }
}

TEST_CASE("greedy allocation basics", "[indiv]") {
    const std::vector<UserProfile> one{inf_user(1.0)};
    const std::vector<double> lam1{2.0 * kLn2};
    const auto a = greedy_allocate_state(one, std::vector<double>{1.0}, lam1);
    REQUIRE(a.legs.size() == 1);
    CHECK(a.legs[0].tau == 1.0);
    CHECK(a.legs[0].rate == Approx(1.0).margin(1e-12));

    // Levels below every activation threshold: all users defer.
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(2.0)};
    const std::vector<double> low{0.5 * kLn2, 0.5 * kLn2};
    CHECK(greedy_allocate_state(two, std::vector<double>{1.0, 1.0}, low).legs.empty());
}

TEST_CASE("greedy winner matches the grid oracle", "[indiv]") {
    rng::Xoshiro256pp gen(8);
    const std::vector<UserProfile> inf2{inf_user(1.0), inf_user(1.7)};
    const std::vector<UserProfile> amc2{amc_user(1.0, {{1, 1}, {2, 3}}),
                                        amc_user(1.3, {{0.8, 0.6}, {2.5, 3.4}})};
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> h{0.1 + 4.0 * gen.uniform_open(),
                                    0.1 + 4.0 * gen.uniform_open()};
        const std::vector<double> lam{0.3 + 3.0 * gen.uniform_open(),
                                      0.3 + 3.0 * gen.uniform_open()};
        for (const auto& users : {inf2, amc2}) {
            const auto oracle = oracles::greedy_grid(users, h, lam);
            const auto alloc = greedy_allocate_state(users, h, lam);
            if (oracle.user < 0 || oracle.cost > -1e-4) continue;  // near-idle: skip
            REQUIRE(alloc.legs.size() >= 1);
            CHECK(alloc.legs[0].user == oracle.user);
            // Achieved level-adjusted cost matches the grid minimum.
            const auto& u = users[static_cast<std::size_t>(alloc.legs[0].user)];
            const double r = alloc.legs[0].rate;
            const double p = u.is_infinite()
                                 ? (std::exp2(r) - 1.0) / h[static_cast<std::size_t>(alloc.legs[0].user)]
                                 : amc_upsilon(u.table(), h[static_cast<std::size_t>(alloc.legs[0].user)], r);
            const double cost = u.mu * p - lam[static_cast<std::size_t>(alloc.legs[0].user)] * r;
            CHECK(cost <= oracle.cost + 1e-4 * std::abs(oracle.cost) + 1e-9);
        }
    }
}

TEST_CASE("component update hits the single-user closed form", "[indiv]") {
    const std::vector<UserProfile> one{inf_user(1.0)};
    const auto sample = channel::sample_states({{channel::Constant{1.0}}}, 4, 2);
    const std::vector<double> lam{1.0};
    const double root = update_lambda_component(0, one, sample, lam, 1.0, 1e-10);
    CHECK(root == Approx(2.0 * kLn2).epsilon(1e-8));
}

TEST_CASE("component update is exchangeable on a mirrored sample", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.0)};
    const auto sample = mirrored_sample(2000, 6);
    const std::vector<double> ab{2.0, 3.0};
    const std::vector<double> ba{3.0, 2.0};
    const double ra = update_lambda_component(0, two, sample, ab, 0.7, 1e-8);
    const double rb = update_lambda_component(1, two, sample, ba, 0.7, 1e-8);
    CHECK(ra == rb);
}

TEST_CASE("component update is self-consistent on an independent sample", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.2)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{1.5}}}, 20000, 61);
    const std::vector<double> lam{1.5, 1.8};
    const double root = update_lambda_component(0, two, sample, lam, 0.7, 1e-6);
    const std::vector<double> at{root, lam[1]};
    const double rate = channel::expect(sample, [&](std::span<const double> h) {
        const auto a = greedy_allocate_state(two, h, at);
        double r = 0.0;
        for (const auto& leg : a.legs)
            if (leg.user == 0) r += leg.tau * leg.rate;
        return r;
    });
    // Within the sample's rate granularity of the target.
    CHECK(rate == Approx(0.7).margin(3e-4));
}

TEST_CASE("service rates respond monotonically to one user's level", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.4)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{1.6}}}, 4000, 77);
    double prev0 = -1.0, prev1 = 1e9;
    for (double lam0 : {0.4, 0.8, 1.6, 3.2, 6.4}) {
        const std::vector<double> lam{lam0, 1.9};
        const auto rates = channel::expect(sample, [&](std::span<const double> h) {
            const auto a = greedy_allocate_state(two, h, lam);
            double r = 0.0;
            for (const auto& leg : a.legs)
                if (leg.user == 0) r += leg.tau * leg.rate;
            return r;
        });
        const auto rates1 = channel::expect(sample, [&](std::span<const double> h) {
            const auto a = greedy_allocate_state(two, h, lam);
            double r = 0.0;
            for (const auto& leg : a.legs)
                if (leg.user == 1) r += leg.tau * leg.rate;
            return r;
        });
        CHECK(rates >= prev0 - 1e-12);
        CHECK(rates1 <= prev1 + 1e-12);
        prev0 = rates;
        prev1 = rates1;
    }
}

TEST_CASE("single user converges immediately", "[indiv]") {
    const std::vector<UserProfile> one{inf_user(1.0)};
    const auto sample = channel::sample_states({{channel::Constant{1.0}}}, 4, 2);
    const auto sol = solve(one, sample, std::vector<double>{1.0});
    REQUIRE(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.lambda[0] == Approx(2.0 * kLn2).epsilon(1e-4));
    CHECK(sol.avg_rate[0] == Approx(1.0).epsilon(1e-4));
    CHECK(sol.avg_power[0] == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("symmetric users converge to symmetric levels", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.0)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{1.0}}}, 30000, 14);
    const auto sol = solve(two, sample, std::vector<double>{1.0, 1.0});
    REQUIRE(sol.converged);
    CHECK(sol.avg_rate[0] == Approx(1.0).epsilon(2e-4));
    CHECK(sol.avg_rate[1] == Approx(1.0).epsilon(2e-4));
    CHECK(sol.lambda[0] == Approx(sol.lambda[1]).epsilon(0.03));
    CHECK(sol.avg_power[0] == Approx(sol.avg_power[1]).epsilon(0.1));
}

TEST_CASE("from-above initialization sweeps downward to the fixed point", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.5)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{0.8}}}, 8000, 23);
    const auto sol = solve(two, sample, std::vector<double>{0.9, 0.6});
    REQUIRE(sol.converged);
    for (std::size_t s = 1; s < sol.lambda_trace.size(); ++s)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(sol.lambda_trace[s][j] <= sol.lambda_trace[s - 1][j] * (1.0 + 1e-9));

    // Starting below the fixed point sweeps upward instead.
    SolveOptions below;
    below.lambda0 = std::vector<double>{sol.lambda[0] / 8.0, sol.lambda[1] / 8.0};
    const auto rising = solve(two, sample, std::vector<double>{0.9, 0.6}, below);
    REQUIRE(rising.converged);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(rising.lambda_trace[1][j] >= rising.lambda_trace[0][j] * (1.0 - 1e-9));
    CHECK(rising.lambda[0] == Approx(sol.lambda[0]).epsilon(1e-3));
    CHECK(rising.lambda[1] == Approx(sol.lambda[1]).epsilon(1e-3));
}

TEST_CASE("one extra sweep barely moves a converged level vector", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.2)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.2}, channel::RayleighPower{0.9}}}, 8000, 31);
    const auto sol = solve(two, sample, std::vector<double>{0.8, 0.7});
    REQUIRE(sol.converged);
    SolveOptions cont;
    cont.lambda0 = sol.lambda;
    cont.max_outer = 1;
    const auto next = solve(two, sample, std::vector<double>{0.8, 0.7}, cont);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(next.lambda[j] == Approx(sol.lambda[j]).epsilon(2e-3));
}

TEST_CASE("jacobi and gauss-seidel sweeps agree", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.5)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{1.3}}}, 8000, 19);
    SolveOptions gs;
    gs.tol = 1e-3;  // above the 8000-state rate granularity
    SolveOptions jac;
    jac.tol = 1e-3;
    jac.sweep = SolveOptions::Sweep::Jacobi;
    const auto a = solve(two, sample, std::vector<double>{0.8, 0.5}, gs);
    const auto b = solve(two, sample, std::vector<double>{0.8, 0.5}, jac);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(a.lambda[j] == Approx(b.lambda[j]).epsilon(1e-3));
}

TEST_CASE("mode-boundary targets time-share two modes", "[indiv]") {
    const std::vector<UserProfile> one{amc_user(1.0, {{1, 1}, {2, 3}})};
    const auto sample = channel::sample_states({{channel::Constant{1.0}}}, 4, 2);
    const auto sol = solve(one, sample, std::vector<double>{1.25});
    REQUIRE(sol.converged);
    CHECK(sol.lambda[0] == Approx(2.0));  // the second mode's incremental slope
    CHECK(sol.mode_tie_share[0] == Approx(0.25));
    CHECK(sol.avg_rate[0] == Approx(1.25).margin(1e-12));
    CHECK(sol.avg_power[0] == Approx(0.75 * 1.0 + 0.25 * 3.0).epsilon(1e-12));
}

TEST_CASE("infeasible per-user mode-table targets are rejected", "[indiv]") {
    const std::vector<UserProfile> two{amc_user(1.0, {{1, 1}}), amc_user(1.0, {{2, 3}})};
    const auto sample = channel::sample_states(
        {{channel::Constant{1.0}, channel::Constant{1.0}}}, 2, 1);
    CHECK_THROWS_AS(solve(two, sample, std::vector<double>{1.5, 1.0}), InfeasibleError);
    CHECK_THROWS_AS(solve(two, sample, std::vector<double>{0.9, 1.2}, SolveOptions{}),
                    InfeasibleError);
}

TEST_CASE("ties never fire against continuous fading", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.3)};
    const auto sample = channel::sample_states(
        {{channel::RayleighPower{1.0}, channel::RayleighPower{1.1}}}, 20000, 40);
    const std::vector<double> lam{1.1, 1.4};
    int multi = 0;
    for (std::size_t i = 0; i < sample.count(); ++i) {
        const auto a = greedy_allocate_state(two, sample.state(i), lam);
        if (a.active_users() > 1) ++multi;
        CHECK(a.tau_total() <= 1.0 + 1e-12);
    }
    CHECK(multi == 0);
}

TEST_CASE("quadrature reproduces single-user closed forms", "[indiv]") {
    const std::vector<UserProfile> one{inf_user(1.3)};
    const channel::ChannelModel model{{channel::RayleighPower{1.7}}};
    const std::vector<double> lam{2.1};
    const auto q = independent_quadrature(one, model, lam);
    CHECK(q.rates[0] == Approx(oracles::single_user_rate(2.1, 1.3, 1.7)).epsilon(1e-7));
    CHECK(q.powers[0] == Approx(oracles::single_user_power(2.1, 1.3, 1.7)).epsilon(1e-7));
}

TEST_CASE("quadrature reproduces the single-user mode-table sums", "[indiv]") {
    const std::vector<AmcMode> modes{{1, 1}, {2, 3}};
    const std::vector<UserProfile> one{amc_user(0.9, modes)};
    const channel::ChannelModel model{{channel::RayleighPower{1.4}}};
    const double lam = 1.8, mu = 0.9, mean = 1.4;
    const auto q = independent_quadrature(one, model, std::vector<double>{lam});
    // Piecewise-constant integrands have exponential closed forms.
    const double z1 = mu * 1.0 / lam, z2 = mu * 2.0 / lam;
    const double rate = 1.0 * (std::exp(-z1 / mean) - std::exp(-z2 / mean)) +
                        2.0 * std::exp(-z2 / mean);
    const double power = 1.0 * (oracles::e1(z1 / mean) - oracles::e1(z2 / mean)) / mean +
                         3.0 * oracles::e1(z2 / mean) / mean;
    CHECK(q.rates[0] == Approx(rate).epsilon(1e-7));
    CHECK(q.powers[0] == Approx(power).epsilon(1e-7));
}

TEST_CASE("quadrature is symmetric for exchangeable users", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.0)};
    const channel::ChannelModel model{{channel::RayleighPower{1.0}, channel::RayleighPower{1.0}}};
    const std::vector<double> lam{2.3, 2.3};
    const auto q = independent_quadrature(two, model, lam);
    CHECK(q.rates[0] == Approx(q.rates[1]).epsilon(1e-9));
    CHECK(q.powers[0] == Approx(q.powers[1]).epsilon(1e-9));
}

TEST_CASE("quadrature agrees with Monte Carlo at matched levels", "[indiv]") {
    // Unequal mean gains, two users; the sample route and the integral route
    // must agree within Monte Carlo error.
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.0)};
    const channel::ChannelModel model{{channel::RayleighPower{10.0}, channel::RayleighPower{1.0}}};
    const auto sample = channel::sample_states(model, 30000, 70);
    const std::vector<double> lam{0.9, 2.6};
    const auto q = independent_quadrature(two, model, lam);
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> vals(sample.count());
        for (std::size_t i = 0; i < sample.count(); ++i) {
            const auto a = greedy_allocate_state(two, sample.state(i), lam);
            double r = 0.0;
            for (const auto& leg : a.legs)
                if (leg.user == static_cast<int>(j)) r += leg.tau * leg.rate;
            vals[i] = r;
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double se = std::sqrt(var / static_cast<double>(vals.size())) /
                          std::sqrt(static_cast<double>(vals.size()));
        CHECK(std::abs(q.rates[j] - mean) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("quadrature fixed point reproduces its targets", "[indiv]") {
    const std::vector<UserProfile> two{inf_user(1.0), inf_user(1.0)};
    const channel::ChannelModel model{{channel::RayleighPower{1.0}, channel::RayleighPower{1.0}}};
    SolveOptions opts;
    opts.tol = 1e-6;
    const auto sol = solve_quadrature(two, model, std::vector<double>{1.0, 1.0}, opts);
    REQUIRE(sol.converged);
    const auto q = independent_quadrature(two, model, sol.lambda);
    CHECK(q.rates[0] == Approx(1.0).epsilon(1e-3));
    CHECK(q.rates[1] == Approx(1.0).epsilon(1e-3));
}
