#ifndef DRUT_FOCKSPACE_HPP
#define DRUT_FOCKSPACE_HPP

#include <cstddef>
#include <memory>

#include "drut/types.hpp"

namespace drut {

struct HamiltonianSpec;

/// Truncation of a multi-mode Fock space: each mode keeps |0>..|n_max>.
class FockCutoff {
public:
    FockCutoff(int n_max, int modes = 1);

    int n_max() const noexcept { return n_max_; }
    int modes() const noexcept { return modes_; }
    int mode_dim() const noexcept { return n_max_ + 1; }
    std::size_t dim() const noexcept { return dim_; }

    /// Stride of `mode` in the joint index (mode 0 is the most significant).
    std::size_t stride(int mode) const;

    /// Occupation of `mode` in joint basis state `index`.
    int occupation(std::size_t index, int mode) const;

    bool operator==(const FockCutoff&) const = default;

private:
    int n_max_;
    int modes_;
    std::size_t dim_;
};

// Single-mode operators embedded into the joint space (identity on other modes).
CMatrix annihilation_matrix(const FockCutoff& cutoff, int mode = 0);
CMatrix creation_matrix(const FockCutoff& cutoff, int mode = 0);
CMatrix number_matrix(const FockCutoff& cutoff, int mode = 0);

/// D(beta) = exp(beta b^dag - conj(beta) b). Throws CutoffError when the
/// truncated D(beta)|0> deviates from the coherent state by more than 1e-6.
CMatrix displacement_matrix(Complex beta, const FockCutoff& cutoff, int mode = 0);

/// U(theta) = exp(-i theta N), diagonal.
CMatrix rotation_matrix(double theta, const FockCutoff& cutoff, int mode = 0);

/// S(z) = exp(1/2 (conj(z) b^2 - z b^dag^2)). Throws CutoffError when the
/// truncated S(z)|0> deviates from the squeezed vacuum by more than 1e-6.
CMatrix squeeze_matrix(Complex z, const FockCutoff& cutoff, int mode = 0);

/// Kronecker product a (x) b.
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Kronecker-embed a (n_max+1)-square single-mode operator on `mode`.
CMatrix embed(const CMatrix& single, const FockCutoff& cutoff, int mode);

/// Closed-form coherent-state amplitudes e^{-|b|^2/2} b^n / sqrt(n!), n = 0..n_max.
CVector coherent_amplitudes(Complex beta, int n_max);

/// Closed-form amplitudes of S(z)|0>, n = 0..n_max.
CVector squeezed_vacuum_amplitudes(Complex z, int n_max);

double unitarity_defect(const CMatrix& u);   // max |U^dag U - I|
double hermiticity_defect(const CMatrix& h); // max |H - H^dag|

/// Spectral data of a Hermitian matrix; evaluates exp(-i H t) for any t
/// from a single eigendecomposition.
class HermitianExp {
public:
    explicit HermitianExp(const CMatrix& h);

    CMatrix at(double t) const;
    const RVector& eigenvalues() const noexcept { return eigenvalues_; }
    const CMatrix& eigenvectors() const noexcept { return eigenvectors_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }

private:
    RVector eigenvalues_;
    CMatrix eigenvectors_;
};

/// exp(-i H t). The eigendecomposition is cached by matrix content, so
/// repeated calls with the same H and different t decompose once.
CMatrix herm_expm(const CMatrix& h, double t);

/// Cached spectral data for `h` (shared across threads).
std::shared_ptr<const HermitianExp> cached_spectrum(const CMatrix& h);

/// Smallest n_max in the doubling sequence floor, 2 floor, ... at which the
/// vacuum entry of the displaced Hamiltonian stays within `tol` under one
/// more doubling, probed on |beta| = beta_max. Floor is ceil(4(beta_max^2 + d)).
FockCutoff adaptive_cutoff(const HamiltonianSpec& spec, double beta_max, double tol = 1e-8,
                           int ceiling = 256);

} // namespace drut

#endif
