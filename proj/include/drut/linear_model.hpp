#ifndef DRUT_LINEAR_MODEL_HPP
#define DRUT_LINEAR_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include "drut/hamiltonian.hpp"

namespace drut {

/// Real parameterization of Hermitian-paired coefficients. A self-conjugate
/// key contributes one real parameter x with C += x m(beta); a conjugate pair
/// (k, k^dag) with g_k = a + i b contributes two, C += 2 (a Re m - b Im m).
class PairedParameterization {
public:
    PairedParameterization() = default;
    /// `keys` may list either or both partners; the representative of each
    /// pair is the smaller key.
    explicit PairedParameterization(const std::vector<TermKey>& keys);

    int size() const noexcept { return static_cast<int>(columns_.size()); }
    const std::vector<TermKey>& representatives() const noexcept { return reps_; }
    std::string label(int column) const;

    RVector features(const DisplacementVector& beta) const;
    RMatrix design(const std::vector<DisplacementVector>& points) const;

    RVector parameters(const std::map<TermKey, Complex>& coefficients) const;
    std::map<TermKey, Complex> coefficients(const RVector& x) const;

    /// Per-key total variance Var(Re g) + Var(Im g) from a parameter covariance.
    std::map<TermKey, double> key_variances(const RMatrix& cov) const;

    /// Column index of the real (or imaginary, part = 1) part of `key`'s
    /// representative; -1 when absent.
    int column(const TermKey& key, int part = 0) const;

private:
    struct Column {
        TermKey key;
        int part; // 0 real part, 1 imaginary part
        bool self;
    };
    std::vector<TermKey> reps_;
    std::vector<Column> columns_;
};

std::vector<TermKey> single_mode_keys(int modes, int d);
std::vector<TermKey> coupling_keys(int modes, int d);

struct LeastSquaresResult {
    RVector x;
    RMatrix pinv;      // x = pinv * y
    double sigma_min;  // smallest singular value of the design
    double condition;
};

/// Ordinary least squares via SVD. Throws RankError on rank deficiency.
LeastSquaresResult least_squares(const RMatrix& design, const RVector& y);

} // namespace drut

#endif
