#ifndef DRUT_BOGOLIUBOV_HPP
#define DRUT_BOGOLIUBOV_HPP

#include <compare>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "drut/hamiltonian.hpp"
#include "drut/linear_model.hpp"
#include "drut/operator_algebra.hpp"

namespace drut {

/// B = u b + v b^dag between the reference frame (m0 w0) and a guess m' w'.
struct BogoliubovFrame {
    double m0w0 = 1.0;
    double mw_guess = 1.0;
    double u = 1.0;
    double v = 0.0;
    double R = 0.0;       // |1/2 ln(m0w0 / mw)|
    double phi = 0.0;     // pi when m0w0 > mw, else 0
    double signed_r = 0.0; // 1/2 ln(m0w0 / mw); u = cosh, v = sinh of it
};

BogoliubovFrame frame_from_ratio(double m0w0, double mw);
BogoliubovFrame frame_from_signed(double signed_r, double m0w0 = 1.0);

/// 1 / (4 - 2 sqrt 3), the largest u with vacuum overlap 1/u above 4 - 2 sqrt 3.
double overlap_threshold();
bool overlap_feasible(double u);
/// acosh(overlap_threshold()): the largest feasible |signed R|.
double max_feasible_signed_r();

/// (p, q) -> coefficient of (b^dag)^p b^q; (0, 0) is the identity.
using NormalPoly = std::map<std::pair<int, int>, Complex>;

/// N_B = (u^2 + v^2) N + u v (b^2 + b^dag^2) + v^2 in the bare basis.
NormalPoly nb_expansion(const BogoliubovFrame& frame);

/// (B^dag)^p B^q = sum_{jk} T_{pq,jk} {x^j p^k}_S with the physical rescaling
/// {X^j P^k}_S = (m0 w0)^{(j-k)/2} {x^j p^k}_S. Rows and columns both start
/// with the identity.
struct TransformT {
    int d = 1;
    double m0w0 = 1.0;
    std::vector<std::pair<int, int>> rows; // (p, q), p + q <= d
    std::vector<std::pair<int, int>> cols; // (j, k), j + k <= d
    CMatrix exact;    // X, P basis (no rescaling)
    CMatrix physical; // x, p basis
    CMatrix pinv;     // of physical
    double sigma_min = 0.0;

    /// G_{jk} = sum_pq g'_pq T_{pq,jk} for a single-mode normal polynomial.
    std::map<std::pair<int, int>, Complex> apply(const NormalPoly& g) const;
};

TransformT build_T(int d, double m0w0 = 1.0);

/// Physical monomial prod_mode {x^j p^k}_S with one (j, k) per mode.
struct PhysicalTerm {
    std::vector<std::pair<int, int>> jk;

    int order() const;
    std::string str() const;
    auto operator<=>(const PhysicalTerm&) const = default;
};

struct PhysicalModel {
    int modes = 1;
    std::vector<double> m0w0{1.0};
    std::vector<PhysicalTerm> support;

    /// G20 x^2 + G02 p^2 + G40 x^4 + G04 p^4 + G22 {x^2 p^2}_S.
    static PhysicalModel single_mode_example(double m0w0 = 1.0);
    /// Two copies of the single-mode model plus x1 x2, p1 p2, x1 p2, x2 p1.
    static PhysicalModel two_mode_example(double m0w0_1 = 1.0, double m0w0_2 = 1.0);

    int max_order() const;
};

using PhysicalCoefficients = std::map<PhysicalTerm, double>;

/// Normal-ordered B-basis expansion of one physical monomial; the second
/// member is the identity part.
std::pair<std::map<TermKey, Complex>, double> normal_expansion(const PhysicalTerm& term, const std::vector<double>& m0w0);

/// B-basis spec (identity part in identity_offset) of sum_t G_t t.
HamiltonianSpec spec_from_physical(const PhysicalModel& model, const PhysicalCoefficients& g);

/// Exact G on the model support for a B-basis spec in its span. Throws
/// RankError when the spec leaves the span by more than `tol`.
PhysicalCoefficients physical_from_spec(const HamiltonianSpec& spec_b, const PhysicalModel& model, double tol = 1e-9);

/// Device-native (bare) spec for a system whose B basis is displaced from
/// the device basis by signed squeezing s_true per mode.
HamiltonianSpec device_spec_from_physical(const HamiltonianSpec& spec_b, const std::vector<double>& s_true);

struct PhysicalFit {
    PhysicalCoefficients values;
    PhysicalCoefficients std_error;
    RMatrix cov;
    double sigma_min = 0.0;
};

/// Least squares of G on the model support from learned g' (identity
/// excluded) with covariance propagated from `param_cov`.
PhysicalFit fit_physical(const PairedParameterization& param, const RVector& params, const RMatrix& param_cov,
                         const PhysicalModel& model);

} // namespace drut

#endif
