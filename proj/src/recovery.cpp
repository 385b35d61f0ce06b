#include "drut/recovery.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace drut {

namespace {

double matrix_condition(const RMatrix& m)
{
    Eigen::JacobiSVD<RMatrix> svd(m);
    const RVector& s = svd.singularValues();
    if (s.size() == 0 || s(s.size() - 1) <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return s(0) / s(s.size() - 1);
}

double min_eigenvalue(const RMatrix& m)
{
    const RMatrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

RMatrix spd_inverse(const RMatrix& m, const char* what)
{
    Eigen::LDLT<RMatrix> ldlt(m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
        throw RankError(std::string(what) + ": matrix is singular");
    }
    const RMatrix inv = ldlt.solve(RMatrix::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
}

std::atomic<bool> g_warned_conditioning{false};

} // namespace

RVector chebyshev_nodes(int count, double r_min, double r_max)
{
    if (count < 1) {
        throw ConfigError("chebyshev_nodes: count must be >= 1");
    }
    if (!(r_min >= 0.0 && r_max > r_min)) {
        throw ConfigError("chebyshev_nodes: need 0 <= r_min < r_max");
    }
    const double mid = 0.5 * (r_min + r_max);
    const double half = 0.5 * (r_max - r_min);
    RVector r(count);
    for (int mu = 1; mu <= count; ++mu) {
        r(mu - 1) = mid + half * std::cos((2.0 * mu - 1.0) * kPi / (2.0 * count));
    }
    std::sort(r.data(), r.data() + r.size());
    return r;
}

RVector equispaced_nodes(int count, double r_min, double r_max)
{
    if (count < 1 || !(r_min >= 0.0 && r_max > r_min)) {
        throw ConfigError("equispaced_nodes: bad interval or count");
    }
    if (count == 1) {
        return RVector::Constant(1, 0.5 * (r_min + r_max));
    }
    return RVector::LinSpaced(count, r_min, r_max);
}

RMatrix vandermonde(const RVector& nodes, int d)
{
    RMatrix l(nodes.size(), d);
    for (Eigen::Index mu = 0; mu < nodes.size(); ++mu) {
        double p = 1.0;
        for (int k = 0; k < d; ++k) {
            p *= nodes(mu);
            l(mu, k) = p;
        }
    }
    return l;
}

RadialDesign RadialDesign::from_nodes(int d, const RVector& nodes)
{
    if (d < 1) {
        throw ConfigError("RadialDesign: d must be >= 1");
    }
    if (nodes.size() < d) {
        throw RankError("RadialDesign: need at least d nodes");
    }
    RVector sorted = nodes;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    for (Eigen::Index i = 0; i < sorted.size(); ++i) {
        if (sorted(i) <= 0.0 || (i > 0 && sorted(i) == sorted(i - 1))) {
            throw RankError("RadialDesign: nodes must be distinct and positive");
        }
    }
    RadialDesign out;
    out.d = d;
    out.nodes = nodes;
    out.r_min = sorted(0);
    out.r_max = sorted(sorted.size() - 1);
    out.L = vandermonde(nodes, d);
    out.G = out.L.transpose() * out.L;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(out.G, Eigen::EigenvaluesOnly);
    out.gram_eigenvalues = es.eigenvalues();
    if (!(out.gram_eigenvalues(0) > 0.0)) {
        throw RankError("RadialDesign: Gram matrix is not positive definite");
    }
    out.pinv = spd_inverse(out.G, "RadialDesign") * out.L.transpose();
    out.condition = matrix_condition(out.L);
    return out;
}

RadialDesign RadialDesign::chebyshev(int d, double r_min, double r_max)
{
    RadialDesign out = from_nodes(d, chebyshev_nodes(d + 1, r_min, r_max));
    out.r_min = r_min;
    out.r_max = r_max;
    return out;
}

RadialFit radial_fit(const RadialDesign& design, const RVector& c_values)
{
    if (c_values.size() != design.nodes.size()) {
        throw ConfigError("radial_fit: one value per node required");
    }
    RadialFit fit;
    fit.g = design.pinv * c_values;
    fit.condition = design.condition;
    fit.ill_conditioned = design.condition > 1e8;
    if (fit.ill_conditioned && !g_warned_conditioning.exchange(true)) {
        std::cerr << "warning: radial Vandermonde condition number " << design.condition << " exceeds 1e8\n";
    }
    return fit;
}

std::vector<double> angle_set(int l)
{
    std::vector<double> out;
    for (int u = 0; u <= l; ++u) {
        out.push_back(kPi * u / (l + 1));
    }
    return out;
}

std::vector<double> angle_union(int d)
{
    std::vector<double> out;
    for (int l = 1; l <= d; ++l) {
        for (double th : angle_set(l)) {
            const bool seen = std::any_of(out.begin(), out.end(), [&](double x) { return std::abs(x - th) < 1e-12; });
            if (!seen) {
                out.push_back(th);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

CMatrix dft_matrix(int l)
{
    CMatrix f(l + 1, l + 1);
    const auto angles = angle_set(l);
    for (int p = 0; p <= l; ++p) {
        for (int u = 0; u <= l; ++u) {
            f(p, u) = std::exp(-kI * (l * angles[static_cast<std::size_t>(u)])) *
                      std::exp(kI * (2.0 * kPi * p * u / (l + 1))) / static_cast<double>(l + 1);
        }
    }
    return f;
}

CVector angular_idft(const RVector& gl_values, int l)
{
    if (l < 1 || gl_values.size() != l + 1) {
        throw ConfigError("angular_idft: need exactly l + 1 values");
    }
    const CVector raw = dft_matrix(l) * gl_values.cast<Complex>();
    CVector out(l + 1);
    for (int p = 0; p <= l; ++p) {
        out(p) = 0.5 * (raw(p) + std::conj(raw(l - p)));
    }
    return out;
}

RecoveryPlan::RecoveryPlan(int d, double r_min, double r_max)
    : d_(d), radial_(RadialDesign::chebyshev(d, r_min, r_max)), angles_(angle_union(d))
{
    for (int l = 1; l <= d; ++l) {
        std::vector<int> idx;
        for (double th : angle_set(l)) {
            const auto it = std::find_if(angles_.begin(), angles_.end(), [&](double x) { return std::abs(x - th) < 1e-12; });
            idx.push_back(static_cast<int>(it - angles_.begin()));
        }
        order_angle_index_.push_back(std::move(idx));
    }
    for (double th : angles_) {
        for (Eigen::Index mu = 0; mu < radial_.nodes.size(); ++mu) {
            points_.push_back(std::polar(radial_.nodes(mu), th));
        }
    }
    param_ = PairedParameterization(keys(0));

    const int n = point_count();
    map_.resize(param_.size(), n);
    for (int j = 0; j < n; ++j) {
        map_.col(j) = recover_params(RVector::Unit(n, j));
    }
    std::vector<DisplacementVector> pts;
    for (const auto& b : points_) {
        pts.push_back({b});
    }
    forward_ = param_.design(pts);

    const auto ks = keys(0);
    RMatrix expand = RMatrix::Zero(2 * static_cast<Eigen::Index>(ks.size()), param_.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const TermKey& k = ks[i];
        const bool is_rep = k <= k.conjugate();
        const auto row = 2 * static_cast<Eigen::Index>(i);
        expand(row, param_.column(k, 0)) = 1.0;
        if (!k.self_conjugate()) {
            expand(row + 1, param_.column(k, 1)) = is_rep ? 1.0 : -1.0;
        }
    }
    coefficient_map_ = expand * map_;
}

int RecoveryPlan::point_index(int angle_index, int node_index) const
{
    return angle_index * static_cast<int>(radial_.nodes.size()) + node_index;
}

std::vector<TermKey> RecoveryPlan::keys(int mode) const
{
    std::vector<TermKey> out;
    for (int l = 1; l <= d_; ++l) {
        for (int p = 0; p <= l; ++p) {
            out.push_back(TermKey::single(mode, p, l - p));
        }
    }
    return out;
}

RVector RecoveryPlan::recover_params(const RVector& c_values) const
{
    return param_.parameters(recover(c_values));
}

std::map<TermKey, Complex> RecoveryPlan::recover(const RVector& c_values) const
{
    if (c_values.size() != point_count()) {
        throw ConfigError("RecoveryPlan::recover: wrong number of C values");
    }
    const int nodes = static_cast<int>(radial_.nodes.size());
    RMatrix g(d_, static_cast<Eigen::Index>(angles_.size())); // g(l-1, angle)
    for (std::size_t a = 0; a < angles_.size(); ++a) {
        const RVector y = c_values.segment(point_index(static_cast<int>(a), 0), nodes);
        g.col(static_cast<Eigen::Index>(a)) = radial_fit(radial_, y).g;
    }
    std::map<TermKey, Complex> out;
    for (int l = 1; l <= d_; ++l) {
        const auto& idx = order_angle_index_[static_cast<std::size_t>(l - 1)];
        RVector vals(l + 1);
        for (int u = 0; u <= l; ++u) {
            vals(u) = g(l - 1, idx[static_cast<std::size_t>(u)]);
        }
        const CVector c = angular_idft(vals, l);
        for (int p = 0; p <= l; ++p) {
            out[TermKey::single(0, p, l - p)] = c(p);
        }
    }
    return out;
}

RVector stack_coefficients(const std::map<TermKey, Complex>& coefficients, const std::vector<TermKey>& keys)
{
    RVector out(2 * static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto it = coefficients.find(keys[i]);
        const Complex g = it == coefficients.end() ? Complex(0.0) : it->second;
        out(2 * static_cast<Eigen::Index>(i)) = g.real();
        out(2 * static_cast<Eigen::Index>(i) + 1) = g.imag();
    }
    return out;
}

CovarianceReport predict_covariance(const RecoveryPlan& plan, double eps_c)
{
    const RadialDesign& rd = plan.radial();
    CovarianceReport rep;
    rep.eps_c = eps_c;
    const double e2 = eps_c * eps_c;
    rep.radial_cov = e2 * spd_inverse(rd.G, "predict_covariance");
    rep.gram_eigenvalues = rd.gram_eigenvalues;
    rep.inverse_eigen_sum = rd.gram_eigenvalues.cwiseInverse().sum();
    for (int l = 1; l <= plan.d(); ++l) {
        const double var = rep.radial_cov(l - 1, l - 1);
        const CMatrix f = dft_matrix(l);
        const CMatrix cov = var * f * f.adjoint();
        rep.order_cov.push_back(cov);
        rep.order_mse.push_back(cov.trace().real());
        rep.order_mse_from_radial.push_back(var * (l + 1) / static_cast<double>(l + 1));
    }
    rep.param_cov = e2 * plan.map() * plan.map().transpose();
    return rep;
}

RMatrix propagate_covariance(const RMatrix& map, const RVector& point_variances, double common_variance)
{
    if (point_variances.size() != map.cols()) {
        throw ConfigError("propagate_covariance: one variance per point required");
    }
    RMatrix cov = map * point_variances.asDiagonal() * map.transpose();
    if (common_variance != 0.0) {
        const RVector s = map.rowwise().sum();
        cov += common_variance * s * s.transpose();
    }
    return 0.5 * (cov + cov.transpose());
}

double lipschitz_bound(int d, double r_max, const std::map<TermKey, Complex>& coefficients)
{
    std::vector<double> mag(static_cast<std::size_t>(d) + 1, 0.0), ang(static_cast<std::size_t>(d) + 1, 0.0);
    for (const auto& [key, g] : coefficients) {
        const int l = key.order();
        if (l < 1 || l > d) {
            continue;
        }
        int spread = 0;
        for (const auto& mp : key.powers()) {
            spread += std::abs(mp.q - mp.p);
        }
        mag[static_cast<std::size_t>(l)] += std::abs(g);
        ang[static_cast<std::size_t>(l)] += std::abs(g) * spread;
    }
    double radial = 0.0, angular = 0.0;
    for (int l = 1; l <= d; ++l) {
        const double w = l * std::pow(r_max, l - 1);
        radial += w * mag[static_cast<std::size_t>(l)];
        angular += w * ang[static_cast<std::size_t>(l)];
    }
    return std::hypot(radial, angular);
}

double lipschitz_bound_uniform(int d, double r_max, double g_max)
{
    std::map<TermKey, Complex> all;
    for (int l = 1; l <= d; ++l) {
        for (int p = 0; p <= l; ++p) {
            all[TermKey::single(0, p, l - p)] = g_max;
        }
    }
    return lipschitz_bound(d, r_max, all);
}

SpamReport spam_bound(const RMatrix& recovery_map, double lipschitz, const std::vector<Complex>& delta_beta)
{
    Eigen::JacobiSVD<RMatrix> svd(recovery_map);
    const double norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    if (!(norm > 0.0)) {
        throw RankError("spam_bound: recovery map is zero");
    }
    SpamReport rep;
    rep.lipschitz = lipschitz;
    rep.sigma_min = 1.0 / norm;
    double n2 = 0.0;
    for (const auto& db : delta_beta) {
        n2 += std::norm(db);
    }
    rep.delta_beta_norm = std::sqrt(n2);
    rep.bound = lipschitz / rep.sigma_min * rep.delta_beta_norm;
    return rep;
}

namespace {

MultiFit fit_keys(const std::vector<DisplacementVector>& points, const RVector& y, const std::vector<TermKey>& keys)
{
    MultiFit out;
    out.param = PairedParameterization(keys);
    const RMatrix m = out.param.design(points);
    const LeastSquaresResult ls = least_squares(m, y);
    out.x = ls.x;
    out.pinv = ls.pinv;
    out.residual = y - m * ls.x;
    out.sigma_min = ls.sigma_min;
    out.condition = ls.condition;
    out.coefficients = out.param.coefficients(ls.x);
    return out;
}

} // namespace

MultiFit multidim_fit(const std::vector<DisplacementVector>& points, const RVector& c_total, int modes, int d,
                      const std::map<TermKey, Complex>& learned_singles)
{
    if (static_cast<Eigen::Index>(points.size()) != c_total.size()) {
        throw ConfigError("multidim_fit: one value per point required");
    }
    RVector y = c_total;
    for (std::size_t j = 0; j < points.size(); ++j) {
        Complex single(0.0);
        for (const auto& [key, g] : learned_singles) {
            if (key.is_single_mode()) {
                single += g * key.monomial(points[j]);
            }
        }
        y(static_cast<Eigen::Index>(j)) -= single.real();
    }
    return fit_keys(points, y, coupling_keys(modes, d));
}

MultiFit joint_fit(const std::vector<DisplacementVector>& points, const RVector& c_total, int modes, int d)
{
    if (static_cast<Eigen::Index>(points.size()) != c_total.size()) {
        throw ConfigError("joint_fit: one value per point required");
    }
    return fit_keys(points, c_total, admissible_keys(modes, d, true));
}

std::vector<DisplacementVector> joint_grid(int modes, int d, double r_min, double r_max)
{
    const RVector nodes = chebyshev_nodes(d + 1, r_min, r_max);
    std::vector<Complex> per_mode;
    for (double th : angle_union(d)) {
        for (Eigen::Index mu = 0; mu < nodes.size(); ++mu) {
            per_mode.push_back(std::polar(nodes(mu), th));
        }
    }
    std::vector<DisplacementVector> grid{DisplacementVector{}};
    for (int m = 0; m < modes; ++m) {
        std::vector<DisplacementVector> next;
        for (const auto& partial : grid) {
            for (const auto& b : per_mode) {
                auto v = partial;
                v.push_back(b);
                next.push_back(std::move(v));
            }
        }
        grid = std::move(next);
    }
    return grid;
}

double woodbury_residual(const RMatrix& a, const RMatrix& b, const RMatrix& d)
{
    const RMatrix ai = spd_inverse(a, "woodbury A");
    const RMatrix di = spd_inverse(d, "woodbury D");
    const RMatrix lhs = spd_inverse(d - b.transpose() * ai * b, "woodbury Schur(D)");
    const RMatrix schur_a = spd_inverse(a - b * di * b.transpose(), "woodbury Schur(A)");
    const RMatrix rhs = di + di * b.transpose() * schur_a * b * di;
    return (lhs - rhs).norm() / std::max(lhs.norm(), 1e-300);
}

OrderingReport covariance_compare(const RMatrix& m_singles, const RMatrix& m_couplings, double eps_c)
{
    if (m_singles.rows() != m_couplings.rows()) {
        throw ConfigError("covariance_compare: blocks must share rows");
    }
    const double e2 = eps_c * eps_c;
    const RMatrix a = m_singles.transpose() * m_singles;
    const RMatrix b = m_singles.transpose() * m_couplings;
    const RMatrix d = m_couplings.transpose() * m_couplings;
    const RMatrix ai = spd_inverse(a, "covariance_compare A");
    const RMatrix di = spd_inverse(d, "covariance_compare D");

    OrderingReport rep;
    rep.cov_sim_singles = e2 * spd_inverse(a - b * di * b.transpose(), "covariance_compare Schur(A)");
    rep.cov_sim_couplings = e2 * spd_inverse(d - b.transpose() * ai * b, "covariance_compare Schur(D)");
    rep.cov_hier_singles = e2 * ai;
    rep.cov_hier_couplings = e2 * (di + di * b.transpose() * ai * b * di);
    const double scale = std::max(1.0, e2);
    rep.min_eig_singles = min_eigenvalue(rep.cov_sim_singles - rep.cov_hier_singles) / scale;
    rep.min_eig_couplings = min_eigenvalue(rep.cov_sim_couplings - rep.cov_hier_couplings) / scale;
    rep.woodbury_residual = woodbury_residual(a, b, d);
    return rep;
}

} // namespace drut
