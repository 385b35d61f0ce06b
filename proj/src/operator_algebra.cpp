#include "drut/operator_algebra.hpp"

#include <cmath>
#include <sstream>

namespace drut {

Exact Exact::operator+(const Exact& o) const
{
    return Exact(a_re_ + o.a_re_, a_im_ + o.a_im_, b_re_ + o.b_re_, b_im_ + o.b_im_);
}

Exact Exact::operator-(const Exact& o) const
{
    return Exact(a_re_ - o.a_re_, a_im_ - o.a_im_, b_re_ - o.b_re_, b_im_ - o.b_im_);
}

Exact Exact::operator-() const
{
    return Exact(-a_re_, -a_im_, -b_re_, -b_im_);
}

Exact Exact::operator*(const Exact& o) const
{
    // (a + b r)(c + e r) with r^2 = 2 and a, b, c, e Gaussian rationals.
    auto gmul = [](Rational xr, Rational xi, Rational yr, Rational yi) {
        return std::pair<Rational, Rational>(xr * yr - xi * yi, xr * yi + xi * yr);
    };
    const auto ac = gmul(a_re_, a_im_, o.a_re_, o.a_im_);
    const auto be = gmul(b_re_, b_im_, o.b_re_, o.b_im_);
    const auto ae = gmul(a_re_, a_im_, o.b_re_, o.b_im_);
    const auto bc = gmul(b_re_, b_im_, o.a_re_, o.a_im_);
    return Exact(ac.first + 2 * be.first, ac.second + 2 * be.second, ae.first + bc.first,
                 ae.second + bc.second);
}

Complex Exact::to_complex() const
{
    auto d = [](Rational r) { return boost::rational_cast<double>(r); };
    const double s2 = std::sqrt(2.0);
    return Complex(d(a_re_) + s2 * d(b_re_), d(a_im_) + s2 * d(b_im_));
}

std::string Exact::str() const
{
    std::ostringstream os;
    os << '(' << a_re_ << " + " << a_im_ << "i) + (" << b_re_ << " + " << b_im_ << "i)*sqrt2";
    return os.str();
}

ExactPoly normal_poly()
{
    return ExactPoly(Exact(1));
}

ExactPoly xleft_poly()
{
    // [P, X] = -i
    return ExactPoly(-Exact::i());
}

SymmetrizedPoly xleft_to_symmetrized(const ExactPoly& xleft)
{
    std::map<std::pair<int, int>, Exact> rest = xleft.terms();
    SymmetrizedPoly out;
    const Exact comm = -Exact::i();
    while (!rest.empty()) {
        auto top = rest.begin();
        for (auto it = rest.begin(); it != rest.end(); ++it) {
            if (it->first.first + it->first.second > top->first.first + top->first.second) {
                top = it;
            }
        }
        const auto [j, k] = top->first;
        const Exact c = top->second;
        rest.erase(top);
        out[{j, k}] += c;
        // X^j P^k = {X^j P^k}_S - 1/2 sum_{m>=1} C(k,m) C(j,m) m! comm^m X^(j-m) P^(k-m)
        Exact weight(1);
        for (int m = 1; m <= std::min(j, k); ++m) {
            weight = weight * comm * Exact((k - m + 1) * (j - m + 1)) * Exact(Rational(1, m));
            auto& slot = rest[{j - m, k - m}];
            slot -= c * weight * Exact(Rational(1, 2));
            if (slot.is_zero()) {
                rest.erase({j - m, k - m});
            }
        }
    }
    for (auto it = out.begin(); it != out.end();) {
        it = it->second.is_zero() ? out.erase(it) : std::next(it);
    }
    return out;
}

SymmetrizedPoly normal_to_symmetrized(int p, int q)
{
    const ExactPoly base = xleft_poly();
    const Exact c = base.comm();
    const Exact r = Exact::inv_sqrt2();
    const ExactPoly x = ExactPoly::monomial(c, 1, 0, r);
    const ExactPoly ip = ExactPoly::monomial(c, 0, 1, Exact::i() * r);
    const ExactPoly bdag = x + ip * Exact(-1);
    const ExactPoly b = x + ip;
    return xleft_to_symmetrized(bdag.pow(p) * b.pow(q));
}

ExactPoly symmetrized_to_normal(int j, int k)
{
    const Exact c = normal_poly().comm();
    const Exact r = Exact::inv_sqrt2();
    // X = (B^dag + B)/sqrt 2, P = i (B^dag - B)/sqrt 2
    const ExactPoly x = ExactPoly::monomial(c, 1, 0, r) + ExactPoly::monomial(c, 0, 1, r);
    const ExactPoly pm = ExactPoly::monomial(c, 1, 0, Exact::i() * r) + ExactPoly::monomial(c, 0, 1, -Exact::i() * r);
    const ExactPoly xj = x.pow(j);
    const ExactPoly pk = pm.pow(k);
    return (xj * pk + pk * xj) * Exact(Rational(1, 2));
}

std::map<std::pair<int, int>, Complex> mismatch_monomial(int p, int q, double dr)
{
    using CPoly = OrderedPoly<Complex>;
    const Complex one(1.0);
    const double c = std::cosh(dr), s = std::sinh(dr);
    const CPoly bdag = CPoly::monomial(one, 1, 0, c) + CPoly::monomial(one, 0, 1, s);
    const CPoly b = CPoly::monomial(one, 0, 1, c) + CPoly::monomial(one, 1, 0, s);
    return (bdag.pow(p) * b.pow(q)).terms();
}

HamiltonianSpec conjugate_spec_by_mismatch(const HamiltonianSpec& spec, const std::vector<double>& dr)
{
    if (static_cast<int>(dr.size()) != spec.modes) {
        throw Error("conjugate_spec_by_mismatch: need one mismatch per mode");
    }
    HamiltonianSpec out;
    out.modes = spec.modes;
    out.max_order = spec.max_order;
    out.g_max = spec.g_max;
    out.identity_offset = spec.identity_offset;
    Complex identity(0.0);
    for (const auto& [key, value] : spec.terms) {
        // Running tensor product over the participating modes.
        std::vector<std::pair<std::vector<ModePower>, Complex>> acc{{{}, value}};
        for (const auto& mp : key.powers()) {
            const auto expansion = mismatch_monomial(mp.p, mp.q, dr[mp.mode]);
            std::vector<std::pair<std::vector<ModePower>, Complex>> next;
            for (const auto& [powers, coeff] : acc) {
                for (const auto& [pq, c] : expansion) {
                    auto extended = powers;
                    extended.push_back(ModePower{mp.mode, pq.first, pq.second});
                    next.emplace_back(std::move(extended), coeff * c);
                }
            }
            acc = std::move(next);
        }
        for (auto& [powers, coeff] : acc) {
            TermKey k(std::move(powers));
            if (k.empty()) {
                identity += coeff;
            } else {
                out.terms[k] += coeff;
            }
        }
    }
    out.identity_offset += identity.real();
    out.prune(1e-15);
    return out;
}

HamiltonianSpec conjugate_spec_by_mismatch(const HamiltonianSpec& spec, double dr)
{
    return conjugate_spec_by_mismatch(spec, std::vector<double>(static_cast<std::size_t>(spec.modes), dr));
}

} // namespace drut
