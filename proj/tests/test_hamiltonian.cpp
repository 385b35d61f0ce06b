#include "doctest.h"

#include <cmath>
#include <random>

#include "drut/hamiltonian.hpp"
#include "drut/spec_io.hpp"
#include "oracles.hpp"

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

} // namespace

TEST_CASE("Hermiticity validation")
{
    CHECK_NOTHROW(validate_hermitian(single({{1, 1, 2.0}}, 2)));
    CHECK_NOTHROW(validate_hermitian(single({{2, 0, 0.3}, {0, 2, 0.3}}, 2)));
    CHECK_THROWS_AS(validate_hermitian(single({{2, 0, Complex(0, 0.3)}, {0, 2, Complex(0, 0.3)}}, 2)),
                    HermiticityError);
    CHECK_THROWS_AS(validate_hermitian(single({{2, 0, 0.3}}, 2)), HermiticityError);
    CHECK_THROWS_AS(validate_hermitian(single({{1, 1, Complex(1, 0.1)}}, 2)), HermiticityError);
}

TEST_CASE("matrix construction")
{
    const FockCutoff c(3);
    const CMatrix n = build_matrix(single({{1, 1, 1.0}}, 2), c);
    const CMatrix nn = build_matrix(single({{2, 2, 1.0}}, 4), c);
    const double expect_n[] = {0, 1, 2, 3};
    const double expect_nn[] = {0, 0, 2, 6};
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(n(i, i) - expect_n[i]) < 1e-15);
        CHECK(std::abs(nn(i, i) - expect_nn[i]) < 1e-15);
    }
    CHECK((n - n.diagonal().asDiagonal().toDenseMatrix()).norm() == 0.0);

    const HamiltonianSpec r = random_spec(2, 3, 1.0, 1.0, 9);
    CHECK(hermiticity_defect(build_matrix(r, FockCutoff(5, 2))) < 1e-12);
    CHECK_THROWS_AS(build_matrix(single({{2, 2, 1.0}}, 4), FockCutoff(1)), CutoffError);

    HamiltonianSpec off = single({{1, 1, 1.0}}, 2);
    off.identity_offset = 0.5;
    CHECK(std::abs(build_matrix(off, c)(0, 0) - 0.5) < 1e-15);
}

TEST_CASE("constant term")
{
    const double omega = 1.7;
    CHECK(constant_term(single({{1, 1, omega}}, 2), {0.5}) == doctest::Approx(0.25 * omega));
    CHECK(std::abs(constant_term(single({{2, 0, 0.3}, {0, 2, 0.3}}, 2), {std::polar(1.0, kPi / 4)})) < 1e-15);
    const HamiltonianSpec r = random_spec(1, 4, 1.0, 1.0, 2);
    CHECK(constant_term(r, {0.0}) == 0.0);

    HamiltonianSpec hop;
    hop.modes = 2;
    hop.max_order = 2;
    hop.set_pair(TermKey({{0, 1, 0}, {1, 0, 1}}), 0.5);
    CHECK(constant_term(hop, {Complex(0.3), Complex(0.0)}) == 0.0);
    CHECK(std::abs(constant_term(hop, {Complex(0.3), Complex(0.0, 0.4)})) < 1e-15);
    CHECK(constant_term(hop, {Complex(0.3), Complex(0.4)}) == doctest::Approx(2 * 0.5 * 0.12));
}

TEST_CASE("phase-averaged displaced Hamiltonian")
{
    const FockCutoff c(6);
    const RVector diag = effective_exact_diagonal(single({{1, 1, 1.0}}, 2), {0.5}, c);
    for (int n = 0; n <= 6; ++n) {
        CHECK(diag(n) == doctest::Approx(n + 0.25).epsilon(1e-14));
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        HamiltonianSpec r = random_spec(1, 3, 1.0, 1.0, seed);
        r.identity_offset = 0.1 * static_cast<double>(seed);
        const DisplacementVector beta{std::polar(1.5 * (seed + 1) / 10.0, 0.37 * seed)};
        CHECK(std::abs(effective_exact(r, beta, c)(0, 0).real() - constant_term(r, beta) - r.identity_offset) <
              1e-10);
    }
}

TEST_CASE("quadrature oracle agrees with the analytic projection")
{
    const HamiltonianSpec r = random_spec(1, 4, 1.0, 1.0, 17);
    const DisplacementVector beta{std::polar(1.2, 2.1)};
    const CMatrix avg = testing::quadrature_average(r, beta, FockCutoff(60));
    const CMatrix ref = effective_exact(r, beta, FockCutoff(60));
    CHECK((avg - ref).topLeftCorner(6, 6).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mode isolation")
{
    const HamiltonianSpec r = random_spec(2, 3, 1.0, 1.0, 4);
    const HamiltonianSpec s0 = single_mode_restriction(r, 0);
    const HamiltonianSpec s1 = single_mode_restriction(r, 1);
    const Complex b(0.6, -0.2);
    CHECK(constant_term(r, {b, 0.0}) == doctest::Approx(constant_term(s0, {b})).epsilon(1e-14));
    CHECK(constant_term(r, {0.0, b}) == doctest::Approx(constant_term(s1, {b})).epsilon(1e-14));
}

TEST_CASE("random specs")
{
    const HamiltonianSpec a = random_spec(2, 3, 0.7, 0.5, 12);
    const HamiltonianSpec b = random_spec(2, 3, 0.7, 0.5, 12);
    CHECK(a.terms == b.terms);
    const HamiltonianSpec full = random_spec(2, 3, 1.0, 1.0, 3);
    CHECK(full.terms.size() == admissible_keys(2, 3).size());
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const HamiltonianSpec s = random_spec(1 + static_cast<int>(seed % 2), 1 + static_cast<int>(seed % 4), 1.0,
                                              0.6, seed);
        CHECK_NOTHROW(validate_hermitian(s));
        for (const auto& [key, g] : s.terms) {
            CHECK(std::abs(g) <= 1.0 + 1e-15);
        }
    }
}

TEST_CASE("admissible keys")
{
    CHECK(admissible_keys(1, 2).size() == 5);
    const auto two = admissible_keys(2, 2);
    // singles 5 per mode, plus b1^dag b2^dag, b1^dag b2, b1 b2^dag, b1 b2
    CHECK(two.size() == 14);
    CHECK(two.front().is_single_mode());
    CHECK_FALSE(two.back().is_single_mode());
}

TEST_CASE("spec documents round-trip")
{
    const HamiltonianSpec s = random_spec(2, 3, 1.0, 0.8, 21);
    const HamiltonianSpec t = spec_from_json(spec_to_json(s));
    CHECK(t.terms == s.terms);
    CHECK(t.modes == s.modes);
    CHECK(t.max_order == s.max_order);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json::parse(R"({"modes": 1, "terms": [{"p": [1]}]})")), ConfigError);
}
