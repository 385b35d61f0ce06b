#include "doctest.h"

#include <cmath>

#include "drut/protocol.hpp"

using namespace drut;

namespace {

HamiltonianSpec single(std::initializer_list<std::tuple<int, int, Complex>> terms, int d)
{
    HamiltonianSpec s;
    s.max_order = d;
    for (const auto& [p, q, g] : terms) {
        s.terms[TermKey::single(0, p, q)] = g;
    }
    return s;
}

SimulatedDevice::Options device_options(ExecutionMode mode, std::uint64_t seed = 1, int n_max = 0)
{
    SimulatedDevice::Options o;
    o.mode = mode;
    o.seed = seed;
    o.n_max = n_max;
    o.beta_max = 1.2;
    return o;
}

HamiltonianSpec hopping_spec(double c)
{
    HamiltonianSpec s;
    s.modes = 2;
    s.max_order = 2;
    s.terms[TermKey::single(0, 1, 1)] = 1.0;
    s.terms[TermKey::single(1, 1, 1)] = 0.7;
    s.set_pair(TermKey::single(0, 2, 0), 0.2);
    if (c != 0.0) {
        s.set_pair(TermKey({{0, 1, 0}, {1, 0, 1}}), c);
    }
    return s;
}

} // namespace

TEST_CASE("RPE configuration checks")
{
    RpeConfig ok = RpeConfig::from_bound(2.0, 6, 100);
    CHECK(ok.t0 == doctest::Approx(0.9 * kPi / 2.0));
    CHECK_NOTHROW(ok.validate());
    RpeConfig wide = ok;
    wide.t0 = 2.0;
    CHECK_THROWS_AS(wide.validate(), ConfigError);
    RpeConfig few = ok;
    few.M = 10;
    CHECK_THROWS_AS(few.validate(), ConfigError);
    CHECK(default_c_bound(2, 1.0, 1.0) == doctest::Approx(2.0 + 3.0));
}

TEST_CASE("RPE of the number Hamiltonian in the exact-probability mode")
{
    SimulatedDevice dev(single({{1, 1, 1.0}}, 2), device_options(ExecutionMode::ExactProbability, 1, 24));
    const PhaseEstimate e = rpe_estimate(dev, {0.8}, std::nullopt, RpeConfig::from_bound(2.0, 8, 50));
    CHECK(std::abs(e.c_hat - 0.64) < 1e-9);
    CHECK(e.rounds.size() == 9);
    CHECK(e.consistent);
}

TEST_CASE("RPE of the zero Hamiltonian")
{
    SimulatedDevice dev(HamiltonianSpec{}, device_options(ExecutionMode::Marginal, 2, 8));
    const RpeConfig cfg = RpeConfig::from_bound(1.0, 8, 100);
    const PhaseEstimate e = rpe_estimate(dev, {0.5}, std::nullopt, cfg);
    CHECK(std::abs(e.c_hat) < 1e-12);
    CHECK(e.time_cost > 0.0);
}

TEST_CASE("RPE accuracy calibration")
{
    // C = 0.7 with t0 = 1, K = 10, M = 200.
    SimulatedDevice dev(single({{1, 1, 1.0}}, 2), device_options(ExecutionMode::Marginal, 7, 24));
    RpeConfig cfg;
    cfg.K = 10;
    cfg.M = 200;
    cfg.t0 = 1.0;
    cfg.c_bound = 1.0;
    cfg.strict = false;
    int hits = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const PhaseEstimate e = rpe_estimate(dev, {std::sqrt(0.7)}, std::nullopt, cfg, s);
        hits += std::abs(e.c_hat - 0.7) < 5e-4 ? 1 : 0;
    }
    CHECK(hits >= 95);
}

TEST_CASE("single-mode learning")
{
    SUBCASE("number Hamiltonian")
    {
        SimulatedDevice dev(single({{1, 1, 2.0}}, 2), device_options(ExecutionMode::Marginal, 3));
        const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(2, 2.0, 1.0), 8, 200);
        const LearnedCoefficients lc = learn_single_mode(dev, 0, 2, cfg);
        for (const auto& [key, g] : lc.values) {
            const double truth = key == TermKey::single(0, 1, 1) ? 2.0 : 0.0;
            CHECK(std::abs(g - truth) < 4.0 * lc.std_error.at(key) + 1e-12);
        }
    }
    SUBCASE("quadratic triple within 3 standard errors")
    {
        const HamiltonianSpec s = single({{2, 0, 0.3}, {0, 2, 0.3}, {1, 1, 1.0}}, 2);
        SimulatedDevice dev(s, device_options(ExecutionMode::Marginal, 5));
        const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(2, 1.0, 1.0), 8, 200);
        const LearnedCoefficients lc = learn_single_mode(dev, 0, 2, cfg);
        for (const auto& key : {TermKey::single(0, 2, 0), TermKey::single(0, 1, 1), TermKey::single(0, 0, 2)}) {
            CHECK(std::abs(lc.value(key) - s.coefficient(key)) < 3.0 * lc.std_error.at(key));
        }
        CHECK(lc.time_cost > 0.0);
    }
    SUBCASE("noiseless exactness")
    {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const HamiltonianSpec s = random_spec(1, 3, 1.0, 1.0, 100 + seed);
            SimulatedDevice dev(s, device_options(ExecutionMode::ExactProbability));
            const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(3, 1.0, 1.0), 4, 20);
            const LearnedCoefficients lc = learn_single_mode(dev, 0, 3, cfg);
            for (const auto& [key, g] : lc.values) {
                CHECK(std::abs(g - s.coefficient(key)) < 1e-8);
            }
        }
    }
}

TEST_CASE("offset estimation removes the identity term")
{
    HamiltonianSpec s = single({{1, 1, 1.0}}, 2);
    s.identity_offset = 0.4;
    SimulatedDevice dev(s, device_options(ExecutionMode::ExactProbability));
    LearnOptions lo;
    lo.estimate_offset = true;
    const LearnedCoefficients lc = learn_single_mode(dev, 0, 2, RpeConfig::from_bound(4.0, 4, 20), lo);
    CHECK(lc.has_offset);
    CHECK(lc.offset == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(std::abs(lc.value(TermKey::single(0, 1, 1)) - 1.0) < 1e-8);
}

TEST_CASE("multi-mode strategies")
{
    const int d = 2;
    const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(d, 1.0, 1.0, 0.0) * 4, 6, 100);
    SUBCASE("noiseless strategies agree")
    {
        const HamiltonianSpec s = random_spec(2, d, 1.0, 1.0, 61);
        SimulatedDevice dev(s, device_options(ExecutionMode::ExactProbability));
        const StrategyPair both = learn_multimode_both(dev, d, cfg);
        for (const auto& [key, g] : s.terms) {
            CHECK(std::abs(both.hierarchical.value(key) - g) < 1e-8);
            CHECK(std::abs(both.simultaneous.value(key) - g) < 1e-8);
        }
    }
    SUBCASE("hopping recovered within 3 standard errors")
    {
        const HamiltonianSpec s = hopping_spec(0.5);
        SimulatedDevice dev(s, device_options(ExecutionMode::Marginal, 9));
        const LearnedCoefficients lc = learn_multimode_hierarchical(dev, d, cfg);
        const TermKey hop({{0, 1, 0}, {1, 0, 1}});
        CHECK(std::abs(lc.value(hop) - 0.5) < 3.0 * lc.std_error.at(hop));
        CHECK(lc.design_sigma_min > 0.0);
    }
    SUBCASE("step 1 is blind to the couplings")
    {
        SimulatedDevice a(hopping_spec(0.0), device_options(ExecutionMode::Marginal, 4));
        SimulatedDevice b(hopping_spec(0.3), device_options(ExecutionMode::Marginal, 4));
        const LearnedCoefficients la = learn_multimode_hierarchical(a, d, cfg);
        const LearnedCoefficients lb = learn_multimode_hierarchical(b, d, cfg);
        for (const auto& key : single_mode_keys(2, d)) {
            const double se = std::hypot(la.std_error.at(key), lb.std_error.at(key));
            CHECK(std::abs(la.value(key) - lb.value(key)) <= 2.0 * se + 1e-12);
        }
    }
}
