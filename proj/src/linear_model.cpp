#include "drut/linear_model.hpp"

#include <algorithm>
#include <set>

#include <Eigen/SVD>

namespace drut {

PairedParameterization::PairedParameterization(const std::vector<TermKey>& keys)
{
    std::set<TermKey> seen;
    for (const auto& k : keys) {
        const TermKey rep = std::min(k, k.conjugate());
        if (!seen.insert(rep).second) {
            continue;
        }
        reps_.push_back(rep);
        if (rep.self_conjugate()) {
            columns_.push_back(Column{rep, 0, true});
        } else {
            columns_.push_back(Column{rep, 0, false});
            columns_.push_back(Column{rep, 1, false});
        }
    }
}

std::string PairedParameterization::label(int column) const
{
    const Column& c = columns_.at(static_cast<std::size_t>(column));
    return (c.part == 0 ? "Re " : "Im ") + c.key.str();
}

RVector PairedParameterization::features(const DisplacementVector& beta) const
{
    RVector f(size());
    for (int i = 0; i < size(); ++i) {
        const Column& c = columns_[static_cast<std::size_t>(i)];
        const Complex m = c.key.monomial(beta);
        if (c.self) {
            f(i) = m.real();
        } else {
            f(i) = c.part == 0 ? 2.0 * m.real() : -2.0 * m.imag();
        }
    }
    return f;
}

RMatrix PairedParameterization::design(const std::vector<DisplacementVector>& points) const
{
    RMatrix m(static_cast<Eigen::Index>(points.size()), size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        m.row(static_cast<Eigen::Index>(j)) = features(points[j]).transpose();
    }
    return m;
}

RVector PairedParameterization::parameters(const std::map<TermKey, Complex>& coefficients) const
{
    RVector x(size());
    for (int i = 0; i < size(); ++i) {
        const Column& c = columns_[static_cast<std::size_t>(i)];
        auto it = coefficients.find(c.key);
        const Complex g = it == coefficients.end() ? Complex(0.0) : it->second;
        x(i) = c.part == 0 ? g.real() : g.imag();
    }
    return x;
}

std::map<TermKey, Complex> PairedParameterization::coefficients(const RVector& x) const
{
    std::map<TermKey, Complex> out;
    for (int i = 0; i < size(); ++i) {
        const Column& c = columns_[static_cast<std::size_t>(i)];
        Complex& g = out[c.key];
        g += c.part == 0 ? Complex(x(i), 0.0) : Complex(0.0, x(i));
    }
    for (const auto& rep : reps_) {
        if (!rep.self_conjugate()) {
            out[rep.conjugate()] = std::conj(out[rep]);
        }
    }
    return out;
}

std::map<TermKey, double> PairedParameterization::key_variances(const RMatrix& cov) const
{
    std::map<TermKey, double> out;
    for (int i = 0; i < size(); ++i) {
        const Column& c = columns_[static_cast<std::size_t>(i)];
        out[c.key] += cov(i, i);
    }
    for (const auto& rep : reps_) {
        if (!rep.self_conjugate()) {
            out[rep.conjugate()] = out[rep];
        }
    }
    return out;
}

int PairedParameterization::column(const TermKey& key, int part) const
{
    const TermKey rep = std::min(key, key.conjugate());
    for (int i = 0; i < size(); ++i) {
        const Column& c = columns_[static_cast<std::size_t>(i)];
        if (c.key == rep && c.part == part) {
            return i;
        }
    }
    return -1;
}

std::vector<TermKey> single_mode_keys(int modes, int d)
{
    std::vector<TermKey> out;
    for (const auto& k : admissible_keys(modes, d, false)) {
        out.push_back(k);
    }
    return out;
}

std::vector<TermKey> coupling_keys(int modes, int d)
{
    std::vector<TermKey> out;
    for (const auto& k : admissible_keys(modes, d, true)) {
        if (!k.is_single_mode()) {
            out.push_back(k);
        }
    }
    return out;
}

LeastSquaresResult least_squares(const RMatrix& design, const RVector& y)
{
    if (design.rows() != y.size()) {
        throw Error("least_squares: design/data size mismatch");
    }
    if (design.cols() == 0) {
        return LeastSquaresResult{RVector(0), RMatrix(0, design.rows()), 0.0, 1.0};
    }
    Eigen::JacobiSVD<RMatrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (design.rows() < design.cols() || !(smin > 1e-12 * std::max(1.0, smax))) {
        throw RankError("least_squares: design is rank deficient (sigma_min=" + std::to_string(smin) + ")");
    }
    const RMatrix pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return LeastSquaresResult{pinv * y, pinv, smin, smax / smin};
}

} // namespace drut
