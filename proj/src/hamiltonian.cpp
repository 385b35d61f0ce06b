#include "drut/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "drut/rng.hpp"

namespace drut {

namespace {

double binomial(int n, int k)
{
    if (k < 0 || k > n) {
        return 0.0;
    }
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

double falling_factorial(int n, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i) {
        r *= (n - i);
    }
    return r;
}

Complex ipow(Complex z, int n)
{
    Complex r(1.0);
    for (int i = 0; i < n; ++i) {
        r *= z;
    }
    return r;
}

} // namespace

TermKey::TermKey(std::vector<ModePower> powers)
{
    for (const auto& mp : powers) {
        if (mp.p < 0 || mp.q < 0 || mp.mode < 0) {
            throw Error("TermKey: negative power or mode");
        }
        if (mp.p + mp.q > 0) {
            powers_.push_back(mp);
        }
    }
    std::sort(powers_.begin(), powers_.end(),
              [](const ModePower& a, const ModePower& b) { return a.mode < b.mode; });
    for (std::size_t i = 1; i < powers_.size(); ++i) {
        if (powers_[i].mode == powers_[i - 1].mode) {
            throw Error("TermKey: mode " + std::to_string(powers_[i].mode) + " listed twice");
        }
    }
}

TermKey TermKey::single(int mode, int p, int q)
{
    return TermKey({ModePower{mode, p, q}});
}

int TermKey::order() const noexcept
{
    int s = 0;
    for (const auto& mp : powers_) {
        s += mp.p + mp.q;
    }
    return s;
}

std::vector<int> TermKey::modes() const
{
    std::vector<int> m;
    for (const auto& mp : powers_) {
        m.push_back(mp.mode);
    }
    return m;
}

ModePower TermKey::on(int mode) const noexcept
{
    for (const auto& mp : powers_) {
        if (mp.mode == mode) {
            return mp;
        }
    }
    return ModePower{mode, 0, 0};
}

TermKey TermKey::conjugate() const
{
    std::vector<ModePower> c = powers_;
    for (auto& mp : c) {
        std::swap(mp.p, mp.q);
    }
    return TermKey(std::move(c));
}

Complex TermKey::monomial(const std::vector<Complex>& beta) const
{
    Complex v(1.0);
    for (const auto& mp : powers_) {
        if (mp.mode >= static_cast<int>(beta.size())) {
            throw Error("TermKey::monomial: displacement vector too short");
        }
        const Complex b = beta[mp.mode];
        v *= ipow(std::conj(b), mp.p) * ipow(b, mp.q);
    }
    return v;
}

std::string TermKey::str() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < powers_.size(); ++i) {
        if (i > 0) {
            os << ' ';
        }
        os << "m" << powers_[i].mode << ":(" << powers_[i].p << ',' << powers_[i].q << ')';
    }
    return os.str();
}

Complex HamiltonianSpec::coefficient(const TermKey& key) const
{
    auto it = terms.find(key);
    return it == terms.end() ? Complex(0.0) : it->second;
}

void HamiltonianSpec::set_pair(const TermKey& key, Complex value)
{
    const TermKey partner = key.conjugate();
    if (partner == key) {
        terms[key] = Complex(value.real(), 0.0);
    } else {
        terms[key] = value;
        terms[partner] = std::conj(value);
    }
}

void HamiltonianSpec::prune(double tol)
{
    for (auto it = terms.begin(); it != terms.end();) {
        if (std::abs(it->second) <= tol) {
            it = terms.erase(it);
        } else {
            ++it;
        }
    }
}

const HamiltonianSpec& validate_hermitian(const HamiltonianSpec& spec)
{
    std::ostringstream bad;
    int count = 0;
    for (const auto& [key, value] : spec.terms) {
        if (key.empty()) {
            throw HermiticityError("validate_hermitian: empty key (use identity_offset)");
        }
        if (key.order() > spec.max_order) {
            throw HermiticityError("validate_hermitian: term " + key.str() + " exceeds max order " +
                                   std::to_string(spec.max_order));
        }
        if (key.powers().back().mode >= spec.modes) {
            throw HermiticityError("validate_hermitian: term " + key.str() + " references a mode >= " +
                                   std::to_string(spec.modes));
        }
        const Complex partner = spec.coefficient(key.conjugate());
        if (std::abs(partner - std::conj(value)) > 1e-12) {
            if (count++ > 0) {
                bad << "; ";
            }
            bad << key.str() << " vs " << key.conjugate().str();
        }
    }
    if (count > 0) {
        throw HermiticityError("validate_hermitian: unpaired coefficients: " + bad.str());
    }
    const int small = std::max(1, spec.max_order);
    if (spec.modes <= 3) {
        const CMatrix h = build_matrix(spec, FockCutoff(small, spec.modes));
        const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        if (hermiticity_defect(h) > 1e-10 * scale) {
            throw HermiticityError("validate_hermitian: built matrix is not Hermitian");
        }
    }
    return spec;
}

CMatrix monomial_matrix(int p, int q, int n_max)
{
    CMatrix m = CMatrix::Zero(n_max + 1, n_max + 1);
    // (b^dag)^p b^q |n> = sqrt(n!/(n-q)!) sqrt((n-q+p)!/(n-q)!) |n-q+p>
    for (int n = q; n <= n_max; ++n) {
        const int out = n - q + p;
        if (out > n_max) {
            continue;
        }
        m(out, n) = std::sqrt(falling_factorial(n, q) * falling_factorial(out, p));
    }
    return m;
}

CMatrix build_matrix(const HamiltonianSpec& spec, const FockCutoff& cutoff)
{
    if (cutoff.modes() != spec.modes) {
        throw CutoffError("build_matrix: cutoff has " + std::to_string(cutoff.modes()) +
                          " modes, spec has " + std::to_string(spec.modes));
    }
    int ladder = 0;
    for (const auto& [key, value] : spec.terms) {
        for (const auto& mp : key.powers()) {
            ladder = std::max({ladder, mp.p, mp.q});
        }
    }
    if (cutoff.n_max() < ladder) {
        throw CutoffError("build_matrix: n_max=" + std::to_string(cutoff.n_max()) +
                          " below the largest ladder power " + std::to_string(ladder));
    }
    const auto dim = static_cast<Eigen::Index>(cutoff.dim());
    const int n = cutoff.n_max();
    CMatrix h = spec.identity_offset * CMatrix::Identity(dim, dim);
    const CMatrix eye = CMatrix::Identity(n + 1, n + 1);
    for (const auto& [key, value] : spec.terms) {
        CMatrix op = CMatrix::Identity(1, 1);
        for (int m = 0; m < spec.modes; ++m) {
            const ModePower mp = key.on(m);
            op = kron(op, mp.p + mp.q > 0 ? monomial_matrix(mp.p, mp.q, n) : eye);
        }
        h += value * op;
    }
    return h;
}

double constant_term(const HamiltonianSpec& spec, const DisplacementVector& beta)
{
    if (static_cast<int>(beta.size()) != spec.modes) {
        throw Error("constant_term: displacement vector has " + std::to_string(beta.size()) +
                    " entries for " + std::to_string(spec.modes) + " modes");
    }
    Complex c(0.0);
    double scale = 0.0;
    for (const auto& [key, value] : spec.terms) {
        const Complex t = value * key.monomial(beta);
        c += t;
        scale += std::abs(t);
    }
    if (std::abs(c.imag()) > 1e-12 * std::max(1.0, scale)) {
        throw HermiticityError("constant_term: imaginary part " + std::to_string(c.imag()) +
                               " (spec not Hermitian-paired)");
    }
    return c.real();
}

RVector effective_exact_diagonal(const HamiltonianSpec& spec, const DisplacementVector& beta,
                                 const FockCutoff& cutoff)
{
    if (static_cast<int>(beta.size()) != spec.modes || cutoff.modes() != spec.modes) {
        throw Error("effective_exact: mode count mismatch");
    }
    const int n = cutoff.n_max();
    CVector diag = CVector::Constant(static_cast<Eigen::Index>(cutoff.dim()), spec.identity_offset);
    for (const auto& [key, value] : spec.terms) {
        // Per participating mode, f(n) = sum_i C(p,i) C(q,i) conj(b)^(p-i) b^(q-i) n!/(n-i)!.
        std::vector<std::pair<int, CVector>> factors;
        for (const auto& mp : key.powers()) {
            const Complex b = beta[mp.mode];
            CVector f = CVector::Zero(n + 1);
            for (int i = 0; i <= std::min(mp.p, mp.q); ++i) {
                const Complex w = binomial(mp.p, i) * binomial(mp.q, i) * ipow(std::conj(b), mp.p - i) *
                                  ipow(b, mp.q - i);
                for (int k = i; k <= n; ++k) {
                    f(k) += w * falling_factorial(k, i);
                }
            }
            factors.emplace_back(mp.mode, std::move(f));
        }
        for (Eigen::Index idx = 0; idx < diag.size(); ++idx) {
            Complex v = value;
            for (const auto& [mode, f] : factors) {
                v *= f(cutoff.occupation(static_cast<std::size_t>(idx), mode));
            }
            diag(idx) += v;
        }
    }
    return diag.real();
}

CMatrix effective_exact(const HamiltonianSpec& spec, const DisplacementVector& beta, const FockCutoff& cutoff)
{
    return effective_exact_diagonal(spec, beta, cutoff).cast<Complex>().asDiagonal();
}

std::vector<TermKey> admissible_keys(int modes, int d, bool include_couplings)
{
    std::vector<TermKey> keys;
    for (int m = 0; m < modes; ++m) {
        for (int l = 1; l <= d; ++l) {
            for (int p = 0; p <= l; ++p) {
                keys.push_back(TermKey::single(m, p, l - p));
            }
        }
    }
    if (!include_couplings || modes < 2) {
        return keys;
    }
    std::set<TermKey> couplings;
    std::vector<ModePower> current;
    std::function<void(int, int)> recurse = [&](int mode, int budget) {
        if (mode == modes) {
            if (current.size() >= 2) {
                couplings.insert(TermKey(current));
            }
            return;
        }
        recurse(mode + 1, budget);
        for (int l = 1; l <= budget; ++l) {
            for (int p = 0; p <= l; ++p) {
                current.push_back(ModePower{mode, p, l - p});
                recurse(mode + 1, budget - l);
                current.pop_back();
            }
        }
    };
    recurse(0, d);
    std::vector<TermKey> sorted(couplings.begin(), couplings.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TermKey& a, const TermKey& b) { return a.order() < b.order(); });
    keys.insert(keys.end(), sorted.begin(), sorted.end());
    return keys;
}

HamiltonianSpec random_spec(int modes, int d, double g_max, double sparsity, std::uint64_t seed,
                            bool include_couplings)
{
    if (modes < 1 || d < 1 || g_max < 0.0) {
        throw ConfigError("random_spec: need modes >= 1, d >= 1, g_max >= 0");
    }
    HamiltonianSpec spec;
    spec.modes = modes;
    spec.max_order = d;
    spec.g_max = g_max;
    auto eng = stream_engine(seed, tag("random_spec"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& key : admissible_keys(modes, d, include_couplings)) {
        const TermKey partner = key.conjugate();
        if (partner < key) {
            continue;
        }
        const double keep = unit(eng);
        const double mag = g_max * unit(eng);
        const double phase = 2.0 * kPi * unit(eng);
        if (keep >= sparsity) {
            continue;
        }
        if (partner == key) {
            spec.set_pair(key, Complex(mag * (phase < kPi ? 1.0 : -1.0), 0.0));
        } else {
            spec.set_pair(key, std::polar(mag, phase));
        }
    }
    return spec;
}

HamiltonianSpec single_mode_restriction(const HamiltonianSpec& spec, int mode)
{
    HamiltonianSpec out;
    out.modes = 1;
    out.max_order = spec.max_order;
    out.g_max = spec.g_max;
    for (const auto& [key, value] : spec.terms) {
        if (key.is_single_mode() && key.powers().front().mode == mode) {
            const auto& mp = key.powers().front();
            out.terms[TermKey::single(0, mp.p, mp.q)] = value;
        }
    }
    return out;
}

double hamiltonian_scale(const HamiltonianSpec& spec, double r_max)
{
    const double d = std::max(1, spec.max_order);
    return spec.g_max * std::pow(1.0 + r_max, d) * d * d;
}

} // namespace drut
