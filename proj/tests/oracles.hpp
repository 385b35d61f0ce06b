#ifndef DRUT_TESTS_ORACLES_HPP
#define DRUT_TESTS_ORACLES_HPP

#include "drut/fockspace.hpp"
#include "drut/hamiltonian.hpp"

namespace drut::testing {

/// (1/n) sum_k U^dag(theta_k) D^dag H D U(theta_k) over n uniform angles, on
/// `cutoff` with the joint number rotation. Entries near the cutoff carry
/// truncation error; compare a low block only.
inline CMatrix quadrature_average(const HamiltonianSpec& spec, const DisplacementVector& beta,
                                  const FockCutoff& cutoff, int points = 720)
{
    CMatrix d = CMatrix::Identity(1, 1);
    for (int m = 0; m < cutoff.modes(); ++m) {
        d = kron(d, displacement_matrix(beta[static_cast<std::size_t>(m)], FockCutoff(cutoff.n_max())));
    }
    const CMatrix h = d.adjoint() * build_matrix(spec, cutoff) * d;
    const auto dim = static_cast<Eigen::Index>(cutoff.dim());
    RVector total(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        int n = 0;
        for (int m = 0; m < cutoff.modes(); ++m) {
            n += cutoff.occupation(static_cast<std::size_t>(i), m);
        }
        total(i) = n;
    }
    CMatrix avg = CMatrix::Zero(dim, dim);
    for (int k = 0; k < points; ++k) {
        const double theta = 2.0 * kPi * k / points;
        CVector phase(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            phase(i) = std::polar(1.0, -theta * total(i));
        }
        avg += phase.conjugate().asDiagonal() * h * phase.asDiagonal();
    }
    return avg / static_cast<double>(points);
}

} // namespace drut::testing

#endif
