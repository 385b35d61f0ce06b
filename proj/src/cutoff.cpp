#include <cmath>
#include <string>

#include "drut/fockspace.hpp"
#include "drut/hamiltonian.hpp"

namespace drut {

namespace {

// <psi| (b^dag)^p b^q |psi> with truncated b: <b^p psi | b^q psi>.
Complex truncated_moment(const CVector& psi, int p, int q)
{
    const int n = static_cast<int>(psi.size()) - 1;
    auto lower = [n](CVector v, int k) {
        for (int s = 0; s < k; ++s) {
            CVector w = CVector::Zero(n + 1);
            for (int m = 1; m <= n; ++m) {
                w(m - 1) = std::sqrt(static_cast<double>(m)) * v(m);
            }
            v = std::move(w);
        }
        return v;
    };
    return lower(psi, p).dot(lower(psi, q));
}

// Vacuum entry of D^dag H D at the truncation n_max, evaluated per mode on the
// product coherent state. Returns NaN when D(beta) itself is inaccurate.
double truncated_vacuum_value(const HamiltonianSpec& spec, const DisplacementVector& beta, int n_max)
{
    std::vector<CVector> states;
    for (int m = 0; m < spec.modes; ++m) {
        try {
            states.push_back(displacement_matrix(beta[m], FockCutoff(n_max)).col(0));
        } catch (const CutoffError&) {
            return std::nan("");
        }
    }
    Complex v(spec.identity_offset);
    for (const auto& [key, value] : spec.terms) {
        Complex t = value;
        for (const auto& mp : key.powers()) {
            t *= truncated_moment(states[mp.mode], mp.p, mp.q);
        }
        v += t;
    }
    return v.real();
}

} // namespace

FockCutoff adaptive_cutoff(const HamiltonianSpec& spec, double beta_max, double tol, int ceiling)
{
    const int d = std::max(1, spec.max_order);
    int n = static_cast<int>(std::ceil(4.0 * (beta_max * beta_max + d)));
    n = std::max(n, d);
    std::vector<DisplacementVector> probes;
    constexpr int kAngles = 8;
    for (int a = 0; a < kAngles; ++a) {
        const Complex b = std::polar(beta_max, 2.0 * kPi * a / kAngles + 0.1);
        probes.emplace_back(static_cast<std::size_t>(spec.modes), b);
    }
    while (n <= ceiling) {
        double worst = 0.0;
        for (const auto& beta : probes) {
            const double lo = truncated_vacuum_value(spec, beta, n);
            const double hi = truncated_vacuum_value(spec, beta, 2 * n);
            const double diff = std::abs(hi - lo);
            worst = std::isnan(diff) ? INFINITY : std::max(worst, diff);
        }
        if (worst < tol) {
            return FockCutoff(n, spec.modes);
        }
        n *= 2;
    }
    throw CutoffError("adaptive_cutoff: no convergence to tol=" + std::to_string(tol) +
                      " below the ceiling n_max=" + std::to_string(ceiling) +
                      " for beta_max=" + std::to_string(beta_max));
}

} // namespace drut
