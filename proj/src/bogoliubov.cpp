#include "drut/bogoliubov.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/SVD>

namespace drut {

BogoliubovFrame frame_from_ratio(double m0w0, double mw)
{
    if (!(m0w0 > 0.0) || !(mw > 0.0)) {
        throw ConfigError("frame_from_ratio requires positive m0w0 and mw");
    }
    BogoliubovFrame f;
    f.m0w0 = m0w0;
    f.mw_guess = mw;
    const double a = std::sqrt(m0w0 / mw);
    f.u = 0.5 * (a + 1.0 / a);
    f.v = 0.5 * (a - 1.0 / a);
    f.signed_r = 0.5 * std::log(m0w0 / mw);
    f.R = std::abs(f.signed_r);
    f.phi = m0w0 > mw ? kPi : 0.0;
    return f;
}

BogoliubovFrame frame_from_signed(double signed_r, double m0w0)
{
    return frame_from_ratio(m0w0, m0w0 * std::exp(-2.0 * signed_r));
}

double overlap_threshold()
{
    return 1.0 / (4.0 - 2.0 * std::sqrt(3.0));
}

bool overlap_feasible(double u)
{
    return u >= 1.0 && u < overlap_threshold();
}

double max_feasible_signed_r()
{
    return std::acosh(overlap_threshold());
}

NormalPoly nb_expansion(const BogoliubovFrame& frame)
{
    const double u = frame.u, v = frame.v;
    NormalPoly out;
    out[{1, 1}] = u * u + v * v;
    if (v != 0.0) {
        out[{2, 0}] = u * v;
        out[{0, 2}] = u * v;
        out[{0, 0}] = v * v;
    }
    return out;
}

namespace {

std::vector<std::pair<int, int>> triangle(int d)
{
    std::vector<std::pair<int, int>> out;
    for (int l = 0; l <= d; ++l) {
        for (int a = l; a >= 0; --a) {
            out.emplace_back(a, l - a);
        }
    }
    return out;
}

double scale_xp(int j, int k, double m0w0)
{
    return std::pow(m0w0, 0.5 * (j - k));
}

} // namespace

std::map<std::pair<int, int>, Complex> TransformT::apply(const NormalPoly& g) const
{
    CVector row = CVector::Zero(static_cast<Eigen::Index>(rows.size()));
    for (const auto& [pq, value] : g) {
        auto it = std::find(rows.begin(), rows.end(), pq);
        if (it == rows.end()) {
            throw ConfigError("normal monomial outside the T row set");
        }
        row(it - rows.begin()) = value;
    }
    const CVector gjk = physical.transpose() * row;
    std::map<std::pair<int, int>, Complex> out;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (std::abs(gjk(static_cast<Eigen::Index>(c))) > 1e-14) {
            out[cols[c]] = gjk(static_cast<Eigen::Index>(c));
        }
    }
    return out;
}

TransformT build_T(int d, double m0w0)
{
    if (d < 1) {
        throw ConfigError("build_T requires d >= 1");
    }
    if (!(m0w0 > 0.0)) {
        throw ConfigError("build_T requires m0w0 > 0");
    }
    TransformT t;
    t.d = d;
    t.m0w0 = m0w0;
    t.rows = triangle(d);
    t.cols = triangle(d);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    t.exact = CMatrix::Zero(n, n);
    t.physical = CMatrix::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto [p, q] = t.rows[static_cast<std::size_t>(r)];
        for (const auto& [jk, value] : normal_to_symmetrized(p, q)) {
            auto it = std::find(t.cols.begin(), t.cols.end(), jk);
            const auto c = it - t.cols.begin();
            t.exact(r, c) = value.to_complex();
            t.physical(r, c) = value.to_complex() * scale_xp(jk.first, jk.second, m0w0);
        }
    }
    Eigen::JacobiSVD<CMatrix> svd(t.physical, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector s = svd.singularValues();
    t.sigma_min = s(s.size() - 1);
    if (t.sigma_min <= 1e-12 * s(0)) {
        throw RankError("T is rank deficient");
    }
    t.pinv = svd.solve(CMatrix::Identity(n, n));
    return t;
}

int PhysicalTerm::order() const
{
    int o = 0;
    for (const auto& [j, k] : jk) {
        o += j + k;
    }
    return o;
}

std::string PhysicalTerm::str() const
{
    std::ostringstream os;
    bool first = true;
    for (std::size_t m = 0; m < jk.size(); ++m) {
        const auto [j, k] = jk[m];
        auto factor = [&](const char* sym, int power) {
            if (power == 0) {
                return;
            }
            if (!first) {
                os << ' ';
            }
            first = false;
            os << sym << m + 1;
            if (power > 1) {
                os << '^' << power;
            }
        };
        factor("x", j);
        factor("p", k);
    }
    return first ? std::string("1") : os.str();
}

PhysicalModel PhysicalModel::single_mode_example(double m0w0)
{
    PhysicalModel m;
    m.modes = 1;
    m.m0w0 = {m0w0};
    for (auto jk : std::vector<std::pair<int, int>>{{2, 0}, {0, 2}, {4, 0}, {0, 4}, {2, 2}}) {
        m.support.push_back(PhysicalTerm{{jk}});
    }
    return m;
}

PhysicalModel PhysicalModel::two_mode_example(double m0w0_1, double m0w0_2)
{
    PhysicalModel m;
    m.modes = 2;
    m.m0w0 = {m0w0_1, m0w0_2};
    const std::vector<std::pair<int, int>> singles{{2, 0}, {0, 2}, {4, 0}, {0, 4}, {2, 2}};
    for (int mode = 0; mode < 2; ++mode) {
        for (auto jk : singles) {
            PhysicalTerm t{{{0, 0}, {0, 0}}};
            t.jk[static_cast<std::size_t>(mode)] = jk;
            m.support.push_back(t);
        }
    }
    m.support.push_back(PhysicalTerm{{{1, 0}, {1, 0}}});
    m.support.push_back(PhysicalTerm{{{0, 1}, {0, 1}}});
    m.support.push_back(PhysicalTerm{{{1, 0}, {0, 1}}});
    m.support.push_back(PhysicalTerm{{{0, 1}, {1, 0}}});
    return m;
}

int PhysicalModel::max_order() const
{
    int o = 0;
    for (const auto& t : support) {
        for (const auto& [j, k] : t.jk) {
            o = std::max(o, j + k);
        }
    }
    return o;
}

std::pair<std::map<TermKey, Complex>, double> normal_expansion(const PhysicalTerm& term, const std::vector<double>& m0w0)
{
    if (term.jk.size() != m0w0.size()) {
        throw ConfigError("physical term and m0w0 disagree on the mode count");
    }
    // Running tensor product of per-mode normal polynomials.
    std::map<std::vector<ModePower>, Complex> acc{{{}, Complex(1.0)}};
    for (std::size_t m = 0; m < term.jk.size(); ++m) {
        const auto [j, k] = term.jk[m];
        if (j == 0 && k == 0) {
            continue;
        }
        const double scale = std::pow(m0w0[m], 0.5 * (k - j));
        std::map<std::vector<ModePower>, Complex> next;
        const ExactPoly poly = symmetrized_to_normal(j, k);
        for (const auto& [pq, value] : poly.terms()) {
            const Complex c = value.to_complex() * scale;
            for (const auto& [powers, prev] : acc) {
                auto p = powers;
                if (pq.first + pq.second > 0) {
                    p.push_back(ModePower{static_cast<int>(m), pq.first, pq.second});
                }
                next[p] += prev * c;
            }
        }
        acc = std::move(next);
    }
    std::map<TermKey, Complex> out;
    double identity = 0.0;
    for (const auto& [powers, value] : acc) {
        if (std::abs(value) < 1e-15) {
            continue;
        }
        if (powers.empty()) {
            identity += value.real();
        } else {
            out[TermKey(powers)] += value;
        }
    }
    return {out, identity};
}

HamiltonianSpec spec_from_physical(const PhysicalModel& model, const PhysicalCoefficients& g)
{
    HamiltonianSpec spec;
    spec.modes = model.modes;
    spec.max_order = 1;
    for (const auto& [term, value] : g) {
        const auto [terms, identity] = normal_expansion(term, model.m0w0);
        for (const auto& [key, c] : terms) {
            spec.terms[key] += value * c;
            spec.max_order = std::max(spec.max_order, key.order());
        }
        spec.identity_offset += value * identity;
    }
    spec.prune(1e-14);
    double gmax = 0.0;
    for (const auto& [key, c] : spec.terms) {
        gmax = std::max(gmax, std::abs(c));
    }
    spec.g_max = gmax > 0.0 ? gmax : 1.0;
    return spec;
}

namespace {

struct SupportDesign {
    PairedParameterization param;
    RMatrix a; // parameters x support
};

SupportDesign support_design(const PhysicalModel& model, std::vector<TermKey> keys)
{
    std::vector<std::map<TermKey, Complex>> expansions;
    for (const auto& term : model.support) {
        expansions.push_back(normal_expansion(term, model.m0w0).first);
        for (const auto& [key, c] : expansions.back()) {
            keys.push_back(key);
        }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    SupportDesign s{PairedParameterization(keys), {}};
    s.a = RMatrix::Zero(s.param.size(), static_cast<Eigen::Index>(model.support.size()));
    for (std::size_t t = 0; t < expansions.size(); ++t) {
        s.a.col(static_cast<Eigen::Index>(t)) = s.param.parameters(expansions[t]);
    }
    return s;
}

} // namespace

PhysicalCoefficients physical_from_spec(const HamiltonianSpec& spec_b, const PhysicalModel& model, double tol)
{
    std::vector<TermKey> keys;
    for (const auto& [key, c] : spec_b.terms) {
        keys.push_back(key);
    }
    const SupportDesign s = support_design(model, keys);
    const RVector y = s.param.parameters(spec_b.terms);
    const LeastSquaresResult ls = least_squares(s.a, y);
    const double resid = (s.a * ls.x - y).norm();
    if (resid > tol * std::max(1.0, y.norm())) {
        throw RankError("spec lies outside the span of the physical model (residual " + std::to_string(resid) + ")");
    }
    PhysicalCoefficients out;
    for (std::size_t t = 0; t < model.support.size(); ++t) {
        out[model.support[t]] = ls.x(static_cast<Eigen::Index>(t));
    }
    return out;
}

HamiltonianSpec device_spec_from_physical(const HamiltonianSpec& spec_b, const std::vector<double>& s_true)
{
    HamiltonianSpec bare = conjugate_spec_by_mismatch(spec_b, s_true);
    bare.prune(1e-14);
    return bare;
}

PhysicalFit fit_physical(const PairedParameterization& param, const RVector& params, const RMatrix& param_cov,
                         const PhysicalModel& model)
{
    RMatrix a = RMatrix::Zero(param.size(), static_cast<Eigen::Index>(model.support.size()));
    for (std::size_t t = 0; t < model.support.size(); ++t) {
        const auto expansion = normal_expansion(model.support[t], model.m0w0).first;
        for (const auto& [key, c] : expansion) {
            if (param.column(key) < 0) {
                throw ConfigError("learned coefficients do not cover " + key.str() + " needed by " +
                                  model.support[t].str());
            }
        }
        a.col(static_cast<Eigen::Index>(t)) = param.parameters(expansion);
    }
    const LeastSquaresResult ls = least_squares(a, params);
    PhysicalFit fit;
    fit.sigma_min = ls.sigma_min;
    fit.cov = ls.pinv * param_cov * ls.pinv.transpose();
    fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
    for (std::size_t t = 0; t < model.support.size(); ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        fit.values[model.support[t]] = ls.x(i);
        fit.std_error[model.support[t]] = std::sqrt(std::max(0.0, fit.cov(i, i)));
    }
    return fit;
}

} // namespace drut
