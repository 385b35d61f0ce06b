#include "doctest.h"

#include <cmath>

#include "device_oracle.hpp"
#include "drut/device.hpp"

using namespace drut;
using drut::testing::DeviceOracle;

namespace {

HamiltonianSpec number_spec(double omega)
{
    HamiltonianSpec s;
    s.max_order = 2;
    s.terms[TermKey::single(0, 1, 1)] = omega;
    return s;
}

HamiltonianSpec quartic_spec()
{
    HamiltonianSpec s;
    s.max_order = 4;
    s.terms[TermKey::single(0, 1, 1)] = 0.8;
    s.set_pair(TermKey::single(0, 2, 0), Complex(0.2, 0.1));
    s.terms[TermKey::single(0, 2, 2)] = 0.15;
    return s;
}

ShotRequest request(Complex beta, int kappa = 1, double t0 = 0.5)
{
    ShotRequest r;
    r.kappa = kappa;
    r.t0 = t0;
    r.beta = {beta};
    return r;
}

SimulatedDevice::Options options(ExecutionMode mode, int n_max = 24, std::uint64_t seed = 3)
{
    SimulatedDevice::Options o;
    o.mode = mode;
    o.n_max = n_max;
    o.seed = seed;
    return o;
}

} // namespace

TEST_CASE("zero Hamiltonian always returns 0 in the X basis")
{
    HamiltonianSpec zero;
    SimulatedDevice dev(zero, options(ExecutionMode::Marginal, 12));
    const ShotRequest r = request(Complex(0.7, 0.2), 4);
    CHECK(std::abs(DeviceOracle::limit_amplitude(dev, r) - 1.0) < 1e-12);
    const Counts c = dev.run_shot_batch(r, 500);
    CHECK(c.zeros == 500);
    CHECK(c.ones == 0);
}

TEST_CASE("number Hamiltonian X probability")
{
    const double omega = 0.9, beta = 0.8, t0 = 0.4;
    SimulatedDevice dev(number_spec(omega), options(ExecutionMode::ExactProbability));
    for (int kappa : {1, 2, 4, 8}) {
        const double expect = 0.5 * (1.0 + std::cos(kappa * t0 * omega * beta * beta));
        CHECK(dev.measure(request(beta, kappa, t0), 10) == doctest::Approx(expect).epsilon(1e-10));
        ShotRequest y = request(beta, kappa, t0);
        y.basis = Basis::Y;
        const double expect_y = 0.5 * (1.0 - std::sin(kappa * t0 * omega * beta * beta));
        CHECK(dev.measure(y, 10) == doctest::Approx(expect_y).epsilon(1e-10));
    }
}

TEST_CASE("finite-L amplitude approaches the limit")
{
    SimulatedDevice dev(quartic_spec(), options(ExecutionMode::Marginal));
    const ShotRequest r = request(Complex(0.6, 0.3), 2, 0.5);
    const Complex lim = DeviceOracle::limit_amplitude(dev, r);
    const double e1 = std::abs(DeviceOracle::finite_l_amplitude(dev, r, 64) - lim);
    const double e2 = std::abs(DeviceOracle::finite_l_amplitude(dev, r, 4096) - lim);
    CHECK(e2 < e1);
    CHECK(e2 < 1e-3);
}

TEST_CASE("shot budget and ledger")
{
    SimulatedDevice dev(number_spec(1.0), options(ExecutionMode::Marginal));
    CHECK(dev.ledger().total_evolution_time == 0.0);
    CHECK(dev.ledger().shot_count == 0);
    const Counts none = dev.run_shot_batch(request(0.5, 4, 0.1), 0);
    CHECK(none.total() == 0);
    CHECK(dev.ledger().shot_count == 0);
    CHECK(dev.ledger().total_evolution_time == 0.0);
    dev.run_shot(request(0.5, 4, 0.1));
    CHECK(dev.ledger().total_evolution_time == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(dev.ledger().shot_count == 1);
    dev.run_shot_batch(request(0.5, 2, 0.25), 10);
    CHECK(dev.ledger().total_evolution_time == doctest::Approx(0.4 + 5.0).epsilon(1e-14));
    CHECK(dev.ledger().shot_count == 11);
    dev.reset_ledger();
    CHECK(dev.ledger().shot_count == 0);
}

TEST_CASE("zero displacement bias leaves the distribution unchanged")
{
    SimulatedDevice a(quartic_spec(), options(ExecutionMode::Marginal));
    SimulatedDevice b(quartic_spec(), options(ExecutionMode::Marginal));
    NoiseModel nm;
    nm.displacement_bias = [](const DisplacementVector& beta) { return DisplacementVector(beta.size(), 0.0); };
    b.set_noise(nm);
    const ShotRequest r = request(Complex(0.5, -0.4), 4);
    const Counts ca = a.run_shot_batch(r, 400);
    const Counts cb = b.run_shot_batch(r, 400);
    CHECK(ca.zeros == cb.zeros);

    NoiseModel shift;
    shift.displacement_bias = [](const DisplacementVector& beta) { return DisplacementVector(beta.size(), 0.05); };
    b.set_noise(shift);
    const ShotRequest moved = request(Complex(0.55, -0.4), 4);
    CHECK(std::abs(DeviceOracle::limit_amplitude(b, r) - DeviceOracle::limit_amplitude(a, moved)) < 1e-12);
}

TEST_CASE("shots are deterministic per seed and stream")
{
    SimulatedDevice a(quartic_spec(), options(ExecutionMode::Marginal));
    SimulatedDevice b(quartic_spec(), options(ExecutionMode::Marginal));
    ShotRequest r = request(Complex(0.7, 0.1), 8);
    r.stream = 42;
    CHECK(a.run_shot_batch(r, 300).zeros == b.run_shot_batch(r, 300).zeros);
    // Split batches reproduce one large batch.
    ShotRequest first = r, second = r;
    second.first_shot = 100;
    CHECK(a.run_shot_batch(first, 100).zeros + a.run_shot_batch(second, 200).zeros == b.run_shot_batch(r, 300).zeros);
}

TEST_CASE("trajectory and marginal modes sample the same distribution")
{
    SimulatedDevice traj(quartic_spec(), options(ExecutionMode::Trajectory, 16));
    SimulatedDevice marg(quartic_spec(), options(ExecutionMode::Marginal, 16));
    ShotRequest r = request(Complex(0.5, 0.2), 2, 0.6);
    r.trotter_steps = 8;
    const double p = DeviceOracle::probability(marg, DeviceOracle::finite_l_amplitude(marg, r, 8), Basis::X);
    const std::uint64_t shots = 4000;
    const double phat = traj.run_shot_batch(r, shots).p_hat();
    const double sd = std::sqrt(p * (1 - p) / static_cast<double>(shots));
    CHECK(std::abs(phat - p) < 5.0 * sd);
    // The finite-L distribution differs from the limit at L = 8.
    const double p_lim = DeviceOracle::probability(marg, DeviceOracle::limit_amplitude(marg, r), Basis::X);
    CHECK(std::abs(p - p_lim) > 1e-4);
}

TEST_CASE("algebraic and squeeze frames agree")
{
    SimulatedDevice::Options oa = options(ExecutionMode::ExactProbability, 20);
    SimulatedDevice::Options os = oa;
    os.frame_method = FrameMethod::Squeeze;
    SimulatedDevice a(quartic_spec(), oa);
    SimulatedDevice s(quartic_spec(), os);
    ShotRequest r = request(Complex(0.4, 0.3), 2);
    r.frame = Frame{{0.2}};
    CHECK(std::abs(DeviceOracle::limit_amplitude(a, r) - DeviceOracle::limit_amplitude(s, r)) < 1e-6);
    r.frame = Frame::bare(1);
    ShotRequest plain = request(Complex(0.4, 0.3), 2);
    CHECK(std::abs(DeviceOracle::limit_amplitude(a, r) - DeviceOracle::limit_amplitude(a, plain)) < 1e-14);
}

TEST_CASE("reference vacuum preparation keeps the frame-vacuum weight")
{
    SimulatedDevice dev(quartic_spec(), options(ExecutionMode::ExactProbability, 60));
    ShotRequest r = request(Complex(0.3, 0.1), 3, 1.0);
    const double s = 0.4;
    r.frame = Frame{{s}};
    const Complex clean = DeviceOracle::limit_amplitude(dev, r);
    CHECK(std::abs(std::abs(clean) - 1.0) < 1e-10);
    NoiseModel nm;
    nm.prepare_reference_vacuum = true;
    dev.set_noise(nm);
    const Complex mixed = DeviceOracle::limit_amplitude(dev, r);
    const double p0 = 1.0 / std::cosh(s);
    CHECK(std::abs(mixed) >= 2.0 * p0 - 1.0 - 1e-12);
    CHECK(std::abs(mixed - clean) > 1e-3);
}

TEST_CASE("malformed requests are rejected")
{
    SimulatedDevice dev(number_spec(1.0), options(ExecutionMode::Marginal));
    ShotRequest r = request(0.3);
    r.beta = {0.3, 0.1};
    CHECK_THROWS(dev.run_shot(r));
    ShotRequest k = request(0.3, 0);
    CHECK_THROWS(dev.run_shot(k));
    NoiseModel nm;
    nm.state_prep_infidelity = 1.0;
    CHECK_THROWS_AS(dev.set_noise(nm), ConfigError);
}
