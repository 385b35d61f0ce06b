#ifndef DRUT_RECOVERY_HPP
#define DRUT_RECOVERY_HPP

#include <map>
#include <string>
#include <vector>

#include "drut/hamiltonian.hpp"
#include "drut/linear_model.hpp"

namespace drut {

/// First-kind Chebyshev points on [r_min, r_max], ascending.
RVector chebyshev_nodes(int count, double r_min, double r_max);
RVector equispaced_nodes(int count, double r_min, double r_max);

/// L_{mu,l} = r_mu^l for l = 1..d (no intercept column).
RMatrix vandermonde(const RVector& nodes, int d);

struct RadialDesign {
    int d = 1;
    double r_min = 0.2;
    double r_max = 1.0;
    RVector nodes;
    RMatrix L;
    RMatrix G;                // L^T L
    RVector gram_eigenvalues; // ascending
    RMatrix pinv;             // (L^T L)^{-1} L^T
    double condition = 1.0;   // cond(L)

    /// Chebyshev design with d + 1 nodes.
    static RadialDesign chebyshev(int d, double r_min = 0.2, double r_max = 1.0);
    static RadialDesign from_nodes(int d, const RVector& nodes);
};

struct RadialFit {
    RVector g; // g_1..g_d (index l - 1)
    double condition = 1.0;
    bool ill_conditioned = false;
};

/// Least squares g = L^+ y. Flags (and warns once on stderr) when cond(L) > 1e8.
RadialFit radial_fit(const RadialDesign& design, const RVector& c_values);

/// theta_{u,l} = pi u / (l + 1), u = 0..l.
std::vector<double> angle_set(int l);
/// Sorted union of angle_set(l) over l = 1..d.
std::vector<double> angle_union(int d);

/// F_l with (F_l)_{p,u} = e^{-i l theta_u} e^{i 2 pi p u/(l+1)} / (l + 1), so
/// g_{p,l-p} = (F_l g_l)_p before pairing.
CMatrix dft_matrix(int l);

/// g_{p,l-p} for p = 0..l from g_l at the canonical angles, with the pair
/// (p, l-p) averaged against its conjugate partner.
CVector angular_idft(const RVector& gl_values, int l);

/// Algorithm-1 measurement layout and the materialized two-stage linear map.
class RecoveryPlan {
public:
    RecoveryPlan(int d, double r_min = 0.2, double r_max = 1.0);

    int d() const noexcept { return d_; }
    const RadialDesign& radial() const noexcept { return radial_; }
    const std::vector<double>& angles() const noexcept { return angles_; }

    /// Measurement points in the order C values are expected: angle-major,
    /// nodes ascending within an angle.
    const std::vector<Complex>& points() const noexcept { return points_; }
    int point_count() const noexcept { return static_cast<int>(points_.size()); }
    int point_index(int angle_index, int node_index) const;

    /// Keys (b^dag)^p b^q on mode `mode`, 0 < p + q <= d.
    std::vector<TermKey> keys(int mode = 0) const;
    const PairedParameterization& parameterization() const noexcept { return param_; }

    /// Complex coefficients g_{p,q} keyed on mode 0.
    std::map<TermKey, Complex> recover(const RVector& c_values) const;

    /// Real map from C values to the parameterization (two stages composed).
    const RMatrix& map() const noexcept { return map_; }
    /// Forward model: C values from real parameters.
    const RMatrix& forward() const noexcept { return forward_; }
    /// Map from C values to [Re g_k, Im g_k] stacked over keys(0); its 2-norm
    /// is the 2-norm of the complex coefficient vector.
    const RMatrix& coefficient_map() const noexcept { return coefficient_map_; }

private:
    RVector recover_params(const RVector& c_values) const;

    int d_;
    RadialDesign radial_;
    std::vector<double> angles_;
    std::vector<std::vector<int>> order_angle_index_; // per l, indices into angles_
    std::vector<Complex> points_;
    PairedParameterization param_;
    RMatrix map_;
    RMatrix forward_;
    RMatrix coefficient_map_;
};

/// [Re g_k, Im g_k] stacked in `keys` order (absent keys count as zero).
RVector stack_coefficients(const std::map<TermKey, Complex>& coefficients, const std::vector<TermKey>& keys);

struct CovarianceReport {
    double eps_c = 0.0;
    RMatrix radial_cov;               // Cov(g_1..g_d) at one angle
    std::vector<CMatrix> order_cov;   // Cov(g_{p,l-p}) per l before pairing, index l - 1
    std::vector<double> order_mse;    // trace MSE per l
    std::vector<double> order_mse_from_radial; // (1/(l+1)) sum_u Var(g_l(theta_u))
    RVector gram_eigenvalues;
    double inverse_eigen_sum = 0.0;   // sum 1/lambda_l
    RMatrix param_cov;                // full covariance of the plan's parameters
};

CovarianceReport predict_covariance(const RecoveryPlan& plan, double eps_c);

/// Parameter covariance for heteroscedastic point noise plus a common-mode
/// term (variance shared by all points, e.g. a subtracted offset estimate).
RMatrix propagate_covariance(const RMatrix& map, const RVector& point_variances, double common_variance = 0.0);

/// Bound on |grad C| over |beta| <= r_max.
double lipschitz_bound(int d, double r_max, const std::map<TermKey, Complex>& coefficients);
/// Same bound with every |g_{p,q}| <= g_max.
double lipschitz_bound_uniform(int d, double r_max, double g_max);

struct SpamReport {
    double lipschitz = 0.0;
    double sigma_min = 0.0; // 1 / ||K^+||_2 with K^+ the two-stage recovery map
    double delta_beta_norm = 0.0;
    double bound = 0.0;
    double observed = -1.0; // negative when not measured
};

/// `recovery_map` maps C values to coefficient parameters.
SpamReport spam_bound(const RMatrix& recovery_map, double lipschitz, const std::vector<Complex>& delta_beta);

struct MultiFit {
    PairedParameterization param;
    std::map<TermKey, Complex> coefficients;
    RVector x;
    RMatrix pinv;
    RVector residual;
    double sigma_min = 0.0;
    double condition = 1.0;
};

/// Subtracts the learned single-mode model and fits the coupling monomials
/// on the residual.
MultiFit multidim_fit(const std::vector<DisplacementVector>& points, const RVector& c_total, int modes, int d,
                      const std::map<TermKey, Complex>& learned_singles);

/// Least squares for singles and couplings together.
MultiFit joint_fit(const std::vector<DisplacementVector>& points, const RVector& c_total, int modes, int d);

/// Tensor grid of per-mode (Chebyshev radii x angle union) points.
std::vector<DisplacementVector> joint_grid(int modes, int d, double r_min = 0.2, double r_max = 1.0);

struct OrderingReport {
    RMatrix cov_sim_singles;
    RMatrix cov_sim_couplings;
    RMatrix cov_hier_singles;
    RMatrix cov_hier_couplings;
    double min_eig_singles = 0.0;   // of Cov_sim - Cov_hier
    double min_eig_couplings = 0.0;
    double woodbury_residual = 0.0; // relative Frobenius
    bool ordered(double tol = 1e-10) const { return min_eig_singles >= -tol && min_eig_couplings >= -tol; }
};

OrderingReport covariance_compare(const RMatrix& m_singles, const RMatrix& m_couplings, double eps_c);

/// Relative Frobenius residual of the Woodbury identity
/// (D - B^T A^{-1} B)^{-1} = D^{-1} + D^{-1} B^T (A - B D^{-1} B^T)^{-1} B D^{-1}.
double woodbury_residual(const RMatrix& a, const RMatrix& b, const RMatrix& d);

} // namespace drut

#endif
