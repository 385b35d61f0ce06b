#ifndef DRUT_OPERATOR_ALGEBRA_HPP
#define DRUT_OPERATOR_ALGEBRA_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "drut/hamiltonian.hpp"
#include "drut/types.hpp"

namespace drut {

using Rational = boost::rational<std::int64_t>;

/// Exact element of Q(i)[sqrt 2]: (a_re + i a_im) + (b_re + i b_im) sqrt 2.
class Exact {
public:
    Exact() = default;
    Exact(std::int64_t n) : a_re_(n) {} // NOLINT(google-explicit-constructor)
    Exact(Rational re, Rational im = 0, Rational s2_re = 0, Rational s2_im = 0)
        : a_re_(re), a_im_(im), b_re_(s2_re), b_im_(s2_im)
    {
    }

    static Exact i() { return Exact(0, 1); }
    static Exact sqrt2() { return Exact(0, 0, 1, 0); }
    static Exact inv_sqrt2() { return Exact(0, 0, Rational(1, 2), 0); }

    Exact operator+(const Exact& o) const;
    Exact operator-(const Exact& o) const;
    Exact operator-() const;
    Exact operator*(const Exact& o) const;
    Exact& operator+=(const Exact& o) { return *this = *this + o; }
    Exact& operator-=(const Exact& o) { return *this = *this - o; }
    Exact& operator*=(const Exact& o) { return *this = *this * o; }
    bool operator==(const Exact& o) const = default;

    bool is_zero() const { return *this == Exact(); }
    Exact conj() const { return Exact(a_re_, -a_im_, b_re_, -b_im_); }
    Complex to_complex() const;
    std::string str() const;

private:
    Rational a_re_{0}, a_im_{0}, b_re_{0}, b_im_{0};
};

inline bool is_zero(const Exact& x) { return x.is_zero(); }
inline bool is_zero(const Complex& x) { return x == Complex(0.0); }

/// Polynomial in two generators L, R kept in L-left order (monomial L^a R^b),
/// with [R, L] = comm * identity. Normal-ordered bosonic polynomials use
/// L = b^dag, R = b, comm = 1; X-left position/momentum words use L = X,
/// R = P, comm = -i.
template <class C>
class OrderedPoly {
public:
    using Key = std::pair<int, int>;

    explicit OrderedPoly(C comm) : comm_(comm) {}

    static OrderedPoly identity(C comm) { return monomial(comm, 0, 0, C(1)); }
    static OrderedPoly monomial(C comm, int a, int b, C coeff)
    {
        OrderedPoly p(comm);
        p.add(a, b, coeff);
        return p;
    }

    void add(int a, int b, const C& coeff)
    {
        if (is_zero(coeff)) {
            return;
        }
        auto& slot = terms_[{a, b}];
        slot += coeff;
        if (is_zero(slot)) {
            terms_.erase({a, b});
        }
    }

    C coefficient(int a, int b) const
    {
        auto it = terms_.find({a, b});
        return it == terms_.end() ? C{} : it->second;
    }

    const std::map<Key, C>& terms() const noexcept { return terms_; }
    const C& comm() const noexcept { return comm_; }

    OrderedPoly operator+(const OrderedPoly& o) const
    {
        OrderedPoly r = *this;
        for (const auto& [k, v] : o.terms_) {
            r.add(k.first, k.second, v);
        }
        return r;
    }

    OrderedPoly operator*(const C& s) const
    {
        OrderedPoly r(comm_);
        for (const auto& [k, v] : terms_) {
            r.add(k.first, k.second, v * s);
        }
        return r;
    }

    // (L^a R^b)(L^c R^d) = sum_m C(b,m) C(c,m) m! comm^m L^(a+c-m) R^(b+d-m)
    OrderedPoly operator*(const OrderedPoly& o) const
    {
        OrderedPoly r(comm_);
        for (const auto& [k1, v1] : terms_) {
            for (const auto& [k2, v2] : o.terms_) {
                const int b = k1.second, c = k2.first;
                C weight(1);
                for (int m = 0; m <= std::min(b, c); ++m) {
                    r.add(k1.first + c - m, b + k2.second - m, v1 * v2 * weight);
                    // next: C(b,m+1)C(c,m+1)(m+1)! comm^(m+1) from the m-th factor
                    weight = weight * comm_ * C((b - m) * (c - m)) * inverse_int(m + 1);
                }
            }
        }
        return r;
    }

    OrderedPoly pow(int n) const
    {
        OrderedPoly r = identity(comm_);
        for (int i = 0; i < n; ++i) {
            r = r * *this;
        }
        return r;
    }

private:
    static C inverse_int(int n);

    C comm_;
    std::map<Key, C> terms_;
};

template <>
inline Exact OrderedPoly<Exact>::inverse_int(int n)
{
    return Exact(Rational(1, n));
}

template <>
inline Complex OrderedPoly<Complex>::inverse_int(int n)
{
    return Complex(1.0 / n);
}

using ExactPoly = OrderedPoly<Exact>;

/// Polynomial in normal-ordered (B^dag)^p B^q, keys (p, q).
ExactPoly normal_poly();
/// X-left words X^j P^k with [X, P] = i, keys (j, k).
ExactPoly xleft_poly();

/// Coefficients of a Hermitian-symmetrized expansion: key (j, k) stands for
/// {X^j P^k}_S = (X^j P^k + P^k X^j)/2; (0, 0) is the identity.
using SymmetrizedPoly = std::map<std::pair<int, int>, Exact>;

/// Re-express an X-left polynomial in the symmetrized basis.
SymmetrizedPoly xleft_to_symmetrized(const ExactPoly& xleft);

/// (B^dag)^p B^q with B = (X + iP)/sqrt 2, in the symmetrized basis.
SymmetrizedPoly normal_to_symmetrized(int p, int q);

/// {X^j P^k}_S as a normal-ordered polynomial in B, B^dag.
ExactPoly symmetrized_to_normal(int j, int k);

/// Substitute B = B' cosh(dr) + B'^dag sinh(dr) into (B^dag)^p B^q and
/// normal-order in B'. Keys (p', q'); (0, 0) is the identity.
std::map<std::pair<int, int>, Complex> mismatch_monomial(int p, int q, double dr);

/// Apply the per-mode mismatch relation to every term of a spec expressed in
/// the B basis. Identity pieces are added to identity_offset. Couplings are
/// expanded as tensor products of per-mode expansions.
HamiltonianSpec conjugate_spec_by_mismatch(const HamiltonianSpec& spec, const std::vector<double>& dr);
HamiltonianSpec conjugate_spec_by_mismatch(const HamiltonianSpec& spec, double dr);

} // namespace drut

#endif
