#include "doctest.h"

#include <cmath>

#include "drut/bogoliubov.hpp"
#include "drut/fockspace.hpp"

using namespace drut;

TEST_CASE("frames from mass-frequency ratios")
{
    const BogoliubovFrame id = frame_from_ratio(1.0, 1.0);
    CHECK(id.u == 1.0);
    CHECK(id.v == 0.0);
    CHECK(id.R == 0.0);

    const BogoliubovFrame f = frame_from_ratio(2.0, 1.0);
    CHECK(f.R == doctest::Approx(0.346574).epsilon(1e-6));
    CHECK(f.phi == doctest::Approx(kPi));
    CHECK(f.u == doctest::Approx(1.06066).epsilon(1e-5));
    CHECK(f.u * f.u - f.v * f.v == doctest::Approx(1.0).epsilon(1e-14));

    const BogoliubovFrame g = frame_from_signed(-0.2, 1.5);
    CHECK(g.signed_r == doctest::Approx(-0.2).epsilon(1e-14));
    CHECK(g.v == doctest::Approx(std::sinh(-0.2)).epsilon(1e-14));
    CHECK_THROWS_AS(frame_from_ratio(0.0, 1.0), ConfigError);
}

TEST_CASE("overlap feasibility")
{
    CHECK(overlap_threshold() == doctest::Approx(1.866025).epsilon(1e-6));
    CHECK(overlap_feasible(1.0));
    CHECK_FALSE(overlap_feasible(overlap_threshold()));
    CHECK(overlap_feasible(1.866));
    CHECK_FALSE(overlap_feasible(1.8661));
    CHECK(overlap_feasible(1.865));
    const BogoliubovFrame r10 = frame_from_ratio(10.0, 1.0);
    CHECK(r10.u == doctest::Approx(1.7393).epsilon(1e-4));
    CHECK(overlap_feasible(r10.u));
    const BogoliubovFrame r16 = frame_from_ratio(16.0, 1.0);
    CHECK(r16.u == doctest::Approx(2.125).epsilon(1e-12));
    CHECK_FALSE(overlap_feasible(r16.u));
    CHECK(std::cosh(max_feasible_signed_r()) == doctest::Approx(overlap_threshold()).epsilon(1e-14));
}

TEST_CASE("number operator of the transformed mode")
{
    const NormalPoly bare = nb_expansion(frame_from_signed(0.0));
    CHECK(bare.size() == 1);
    CHECK(bare.at({1, 1}) == Complex(1.0));

    const BogoliubovFrame f = frame_from_signed(0.3);
    const NormalPoly nb = nb_expansion(f);
    CHECK(nb.at({1, 1}).real() == doctest::Approx(1.185465).epsilon(1e-6));
    CHECK(nb.at({2, 0}).real() == doctest::Approx(0.318327).epsilon(1e-6));
    CHECK(nb.at({0, 2}).real() == doctest::Approx(0.318327).epsilon(1e-6));
    CHECK(nb.at({0, 0}).real() == doctest::Approx(0.092732).epsilon(1e-6));

    // B = u b + v b^dag built directly from truncated matrices.
    const FockCutoff c(60);
    const CMatrix b = annihilation_matrix(c);
    const CMatrix bb = f.u * b + f.v * b.adjoint();
    const CMatrix direct = bb.adjoint() * bb;
    CMatrix expect = CMatrix::Zero(61, 61);
    for (const auto& [pq, g] : nb) {
        CMatrix term = CMatrix::Identity(61, 61);
        for (int i = 0; i < pq.first; ++i) {
            term = term * b.adjoint();
        }
        for (int i = 0; i < pq.second; ++i) {
            term = term * b;
        }
        expect += g * term;
    }
    CHECK((direct - expect).topLeftCorner(40, 40).cwiseAbs().maxCoeff() < 1e-10);

    // Same coefficients from S^dag N S at n_max = 60.
    const CMatrix s = squeeze_matrix(-0.3, c);
    const CMatrix sns = s.adjoint() * number_matrix(c) * s;
    CHECK(std::abs(sns(0, 0) - nb.at({0, 0})) < 1e-6);
    CHECK(std::abs(sns(2, 0) / std::sqrt(2.0) - nb.at({2, 0})) < 1e-6);
    CHECK(std::abs(sns(1, 1) - sns(0, 0) - nb.at({1, 1})) < 1e-6);
}

TEST_CASE("transform to physical coefficients")
{
    const TransformT t = build_T(2, 1.0);
    const auto g = t.apply({{{1, 1}, 1.0}});
    CHECK(g.at({2, 0}).real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g.at({0, 2}).real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g.at({0, 0}).real() == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(g.size() == 3);

    const auto one = t.apply({{{0, 0}, 1.0}});
    CHECK(one.size() == 1);
    CHECK(std::abs(one.at({0, 0}) - 1.0) < 1e-15);

    for (int d : {2, 4}) {
        const TransformT td = build_T(d, 1.7);
        CHECK((td.physical * td.pinv * td.physical - td.physical).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(td.sigma_min > 0.0);
    }
}

TEST_CASE("physical model round trip")
{
    const PhysicalModel m = PhysicalModel::single_mode_example(1.3);
    CHECK(m.support.size() == 5);
    CHECK(m.max_order() == 4);
    PhysicalCoefficients g;
    double v = 0.3;
    for (const auto& t : m.support) {
        g[t] = v;
        v += 0.17;
    }
    const HamiltonianSpec spec = spec_from_physical(m, g);
    CHECK_NOTHROW(validate_hermitian(spec));
    const PhysicalCoefficients back = physical_from_spec(spec, m);
    for (const auto& [t, value] : g) {
        CHECK(back.at(t) == doctest::Approx(value).epsilon(1e-12));
    }

    const PhysicalModel two = PhysicalModel::two_mode_example(1.0, 0.8);
    CHECK(two.support.size() == 14);
    PhysicalCoefficients g2;
    v = -0.4;
    for (const auto& t : two.support) {
        g2[t] = v;
        v += 0.07;
    }
    const PhysicalCoefficients back2 = physical_from_spec(spec_from_physical(two, g2), two);
    for (const auto& [t, value] : g2) {
        CHECK(back2.at(t) == doctest::Approx(value).epsilon(1e-12));
    }

    HamiltonianSpec outside;
    outside.terms[TermKey::single(0, 3, 0)] = 1.0;
    outside.terms[TermKey::single(0, 0, 3)] = 1.0;
    outside.max_order = 3;
    CHECK_THROWS_AS(physical_from_spec(outside, m), RankError);
}

TEST_CASE("device spec composes frame conjugations")
{
    HamiltonianSpec b;
    b.max_order = 4;
    b.terms[TermKey::single(0, 1, 1)] = 1.0;
    b.terms[TermKey::single(0, 2, 2)] = 0.2;
    const HamiltonianSpec bare = device_spec_from_physical(b, {0.25});
    // Undoing the hidden squeeze recovers the B-basis spec.
    const HamiltonianSpec back = conjugate_spec_by_mismatch(bare, -0.25);
    for (const auto& [key, g] : b.terms) {
        CHECK(std::abs(back.coefficient(key) - g) < 1e-12);
    }
    for (const auto& [key, g] : back.terms) {
        if (b.terms.count(key) == 0) {
            CHECK(std::abs(g) < 1e-12);
        }
    }
}
