#include "doctest.h"

#include <random>
#include <vector>

#include "drut/kernels.hpp"

using namespace drut;
using namespace drut::kernels;

namespace {

std::vector<Complex> random_vector(std::size_t n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    std::vector<Complex> v(n);
    for (auto& x : v) {
        x = Complex(g(rng), g(rng));
    }
    return v;
}

} // namespace

TEST_CASE("scalar table is always available")
{
    const KernelTable& s = scalar_table();
    CHECK(s.isa == Isa::scalar);
    CHECK(select(Isa::scalar));
    CHECK(active().isa == Isa::scalar);
}

TEST_CASE("scalar kernels against Eigen")
{
    std::mt19937_64 rng(7);
    const std::size_t n = 13;
    const auto a = random_vector(n * n, rng);
    const auto x = random_vector(n, rng);
    std::vector<Complex> y(n);
    scalar_table().matvec(a.data(), x.data(), y.data(), n);
    const Eigen::Map<const Eigen::Matrix<Complex, -1, -1, Eigen::RowMajor>> am(a.data(), n, n);
    const Eigen::Map<const CVector> xm(x.data(), n);
    const CVector ref = am * xm;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(y[i] - ref(static_cast<Eigen::Index>(i))) < 1e-12);
    }
    CHECK(std::abs(scalar_table().dotc(x.data(), x.data(), n) - xm.squaredNorm()) < 1e-12);
    CHECK(scalar_table().norm_sq(x.data(), n) == doctest::Approx(xm.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("avx2 kernels match the scalar reference")
{
    const KernelTable* v = avx2_table();
    if (v == nullptr || !cpu_has_avx2()) {
        MESSAGE("AVX2 variant not available; skipped");
        return;
    }
    std::mt19937_64 rng(11);
    for (std::size_t n : {1u, 2u, 3u, 7u, 8u, 31u, 64u, 101u}) {
        const auto a = random_vector(n * n, rng);
        const auto x = random_vector(n, rng);
        const auto d = random_vector(n, rng);
        std::vector<Complex> ys(n), yv(n);
        scalar_table().matvec(a.data(), x.data(), ys.data(), n);
        v->matvec(a.data(), x.data(), yv.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(ys[i] - yv[i]) < 1e-12 * (1.0 + std::abs(ys[i])));
        }
        std::vector<Complex> ms = x, mv = x;
        scalar_table().mul_inplace(d.data(), ms.data(), n);
        v->mul_inplace(d.data(), mv.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(ms[i] - mv[i]) < 1e-13 * (1.0 + std::abs(ms[i])));
        }
        const Complex ds = scalar_table().dotc(x.data(), d.data(), n);
        CHECK(std::abs(ds - v->dotc(x.data(), d.data(), n)) < 1e-12 * (1.0 + std::abs(ds)));
        const double ns = scalar_table().norm_sq(x.data(), n);
        CHECK(v->norm_sq(x.data(), n) == doctest::Approx(ns).epsilon(1e-13));
    }
    CHECK(select(Isa::avx2));
    CHECK(active().isa == Isa::avx2);
    CHECK(select(Isa::scalar));
}
