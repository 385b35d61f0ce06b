#include "drut/fockspace.hpp"

#include <cmath>
#include <cstring>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

namespace drut {

FockCutoff::FockCutoff(int n_max, int modes) : n_max_(n_max), modes_(modes), dim_(1)
{
    if (n_max < 1) {
        throw CutoffError("FockCutoff: n_max must be >= 1, got " + std::to_string(n_max));
    }
    if (modes < 1) {
        throw CutoffError("FockCutoff: modes must be >= 1, got " + std::to_string(modes));
    }
    for (int m = 0; m < modes; ++m) {
        dim_ *= static_cast<std::size_t>(n_max + 1);
    }
}

std::size_t FockCutoff::stride(int mode) const
{
    std::size_t s = 1;
    for (int m = mode + 1; m < modes_; ++m) {
        s *= static_cast<std::size_t>(n_max_ + 1);
    }
    return s;
}

int FockCutoff::occupation(std::size_t index, int mode) const
{
    return static_cast<int>((index / stride(mode)) % static_cast<std::size_t>(n_max_ + 1));
}

namespace {

void check_mode(const FockCutoff& cutoff, int mode)
{
    if (mode < 0 || mode >= cutoff.modes()) {
        throw Error("mode index " + std::to_string(mode) + " out of range for " +
                    std::to_string(cutoff.modes()) + " mode(s)");
    }
}

CMatrix single_annihilation(int n_max)
{
    CMatrix b = CMatrix::Zero(n_max + 1, n_max + 1);
    for (int n = 1; n <= n_max; ++n) {
        b(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return b;
}

CMatrix exp_anti_hermitian(const CMatrix& generator)
{
    // exp(G) = exp(-i H) with H = iG Hermitian.
    const CMatrix h = kI * generator;
    return HermitianExp(0.5 * (h + h.adjoint())).at(1.0);
}

} // namespace

CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

CMatrix embed(const CMatrix& single, const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    const auto d = static_cast<Eigen::Index>(cutoff.mode_dim());
    if (single.rows() != d || single.cols() != d) {
        throw Error("embed: single-mode operator has wrong dimension");
    }
    if (cutoff.modes() == 1) {
        return single;
    }
    const auto after = static_cast<Eigen::Index>(cutoff.stride(mode));
    const auto before = static_cast<Eigen::Index>(cutoff.dim()) / (after * d);
    const auto n = static_cast<Eigen::Index>(cutoff.dim());
    CMatrix out = CMatrix::Zero(n, n);
    for (Eigen::Index hi = 0; hi < before; ++hi) {
        for (Eigen::Index r = 0; r < d; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                const Complex v = single(r, c);
                if (v == Complex(0.0)) {
                    continue;
                }
                for (Eigen::Index lo = 0; lo < after; ++lo) {
                    out((hi * d + r) * after + lo, (hi * d + c) * after + lo) = v;
                }
            }
        }
    }
    return out;
}

CMatrix annihilation_matrix(const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    return embed(single_annihilation(cutoff.n_max()), cutoff, mode);
}

CMatrix creation_matrix(const FockCutoff& cutoff, int mode)
{
    return annihilation_matrix(cutoff, mode).adjoint();
}

CMatrix number_matrix(const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    CMatrix n = CMatrix::Zero(cutoff.mode_dim(), cutoff.mode_dim());
    for (int k = 0; k <= cutoff.n_max(); ++k) {
        n(k, k) = static_cast<double>(k);
    }
    return embed(n, cutoff, mode);
}

CVector coherent_amplitudes(Complex beta, int n_max)
{
    CVector a(n_max + 1);
    a(0) = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n <= n_max; ++n) {
        a(n) = a(n - 1) * beta / std::sqrt(static_cast<double>(n));
    }
    return a;
}

CVector squeezed_vacuum_amplitudes(Complex z, int n_max)
{
    const double r = std::abs(z);
    const double phi = std::arg(z);
    const Complex ratio = -std::polar(std::tanh(r), phi);
    CVector a = CVector::Zero(n_max + 1);
    // c_{2m} = ratio^m sqrt((2m)!) / (2^m m!) / sqrt(cosh r)
    Complex c = 1.0 / std::sqrt(std::cosh(r));
    for (int m = 0; 2 * m <= n_max; ++m) {
        a(2 * m) = c;
        c *= ratio * std::sqrt(static_cast<double>((2 * m + 1) * (2 * m + 2))) / (2.0 * (m + 1));
    }
    return a;
}

CMatrix displacement_matrix(Complex beta, const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    const CMatrix b = single_annihilation(cutoff.n_max());
    const CMatrix d = exp_anti_hermitian(beta * b.adjoint() - std::conj(beta) * b);
    const double err = (d.col(0) - coherent_amplitudes(beta, cutoff.n_max())).cwiseAbs().maxCoeff();
    if (err > 1e-6 || unitarity_defect(d) > 1e-6) {
        throw CutoffError("displacement_matrix: n_max=" + std::to_string(cutoff.n_max()) +
                          " too small for |beta|=" + std::to_string(std::abs(beta)) +
                          " (coherent column error " + std::to_string(err) + ")");
    }
    return embed(d, cutoff, mode);
}

CMatrix rotation_matrix(double theta, const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    CMatrix u = CMatrix::Zero(cutoff.mode_dim(), cutoff.mode_dim());
    for (int n = 0; n <= cutoff.n_max(); ++n) {
        u(n, n) = std::polar(1.0, -theta * n);
    }
    return embed(u, cutoff, mode);
}

CMatrix squeeze_matrix(Complex z, const FockCutoff& cutoff, int mode)
{
    check_mode(cutoff, mode);
    const CMatrix b = single_annihilation(cutoff.n_max());
    const CMatrix b2 = b * b;
    const CMatrix s = exp_anti_hermitian(0.5 * (std::conj(z) * b2 - z * b2.adjoint()));
    const double err = (s.col(0) - squeezed_vacuum_amplitudes(z, cutoff.n_max())).cwiseAbs().maxCoeff();
    if (err > 1e-6 || unitarity_defect(s) > 1e-6) {
        throw CutoffError("squeeze_matrix: n_max=" + std::to_string(cutoff.n_max()) +
                          " too small for |z|=" + std::to_string(std::abs(z)));
    }
    return embed(s, cutoff, mode);
}

double unitarity_defect(const CMatrix& u)
{
    const CMatrix e = u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols());
    return e.cwiseAbs().maxCoeff();
}

double hermiticity_defect(const CMatrix& h)
{
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

HermitianExp::HermitianExp(const CMatrix& h)
{
    if (h.rows() != h.cols()) {
        throw HermiticityError("HermitianExp: matrix is not square");
    }
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (hermiticity_defect(h) > 1e-10 * scale) {
        throw HermiticityError("HermitianExp: matrix is not Hermitian (defect " +
                               std::to_string(hermiticity_defect(h)) + ")");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
    if (solver.info() != Eigen::Success) {
        throw Error("HermitianExp: eigendecomposition failed");
    }
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
}

CMatrix HermitianExp::at(double t) const
{
    CVector phases(eigenvalues_.size());
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
        phases(k) = std::polar(1.0, -eigenvalues_(k) * t);
    }
    return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
}

namespace {

std::uint64_t content_hash(const CMatrix& m)
{
    // FNV-1a over the raw entries plus the shape.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const Eigen::Index shape[2] = {m.rows(), m.cols()};
    mix(shape, sizeof(shape));
    mix(m.data(), sizeof(Complex) * static_cast<std::size_t>(m.size()));
    return h;
}

class SpectrumCache {
public:
    std::shared_ptr<const HermitianExp> get(const CMatrix& h)
    {
        const std::uint64_t key = content_hash(h);
        {
            std::shared_lock lock(mutex_);
            if (auto hit = find(key, h)) {
                return hit;
            }
        }
        auto made = std::make_shared<const HermitianExp>(h);
        std::unique_lock lock(mutex_);
        if (auto hit = find(key, h)) {
            return hit;
        }
        if (size_ >= kMaxEntries) {
            entries_.clear();
            size_ = 0;
        }
        entries_[key].push_back({h, made});
        ++size_;
        return made;
    }

private:
    struct Entry {
        CMatrix matrix;
        std::shared_ptr<const HermitianExp> spectrum;
    };

    std::shared_ptr<const HermitianExp> find(std::uint64_t key, const CMatrix& h) const
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            return nullptr;
        }
        for (const auto& e : it->second) {
            if (e.matrix.rows() == h.rows() && e.matrix.cols() == h.cols() && e.matrix == h) {
                return e.spectrum;
            }
        }
        return nullptr;
    }

    static constexpr std::size_t kMaxEntries = 64;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::uint64_t, std::vector<Entry>> entries_;
    std::size_t size_ = 0;
};

SpectrumCache& spectrum_cache()
{
    static SpectrumCache cache;
    return cache;
}

} // namespace

std::shared_ptr<const HermitianExp> cached_spectrum(const CMatrix& h)
{
    return spectrum_cache().get(h);
}

CMatrix herm_expm(const CMatrix& h, double t)
{
    return cached_spectrum(h)->at(t);
}

} // namespace drut
