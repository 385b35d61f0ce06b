#include "drut/device.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "drut/kernels.hpp"
#include "drut/operator_algebra.hpp"
#include "drut/rng.hpp"

namespace drut {

namespace {

using RowMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::uint64_t kPrepTag = tag("prep");
constexpr std::uint64_t kThetaTag = tag("theta");

CVector kron_vectors(const std::vector<CVector>& parts)
{
    CVector out = CVector::Ones(1);
    for (const auto& v : parts) {
        CVector next(out.size() * v.size());
        for (Eigen::Index i = 0; i < out.size(); ++i) {
            next.segment(i * v.size(), v.size()) = out(i) * v;
        }
        out = std::move(next);
    }
    return out;
}

// log(1 + z) without cancellation for small z.
Complex log1p_complex(Complex z)
{
    const double re = 0.5 * std::log1p(2.0 * z.real() + std::norm(z));
    const double im = std::atan2(z.imag(), 1.0 + z.real());
    return {re, im};
}

// Rows/cols of a padded joint space whose per-mode occupations fit n_max.
std::vector<Eigen::Index> low_block_indices(const FockCutoff& padded, int n_max)
{
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < padded.dim(); ++i) {
        bool keep = true;
        for (int m = 0; m < padded.modes() && keep; ++m) {
            keep = padded.occupation(i, m) <= n_max;
        }
        if (keep) {
            idx.push_back(static_cast<Eigen::Index>(i));
        }
    }
    return idx;
}

} // namespace

bool Frame::is_bare() const
{
    return std::all_of(signed_r.begin(), signed_r.end(), [](double s) { return s == 0.0; });
}

SimulatedDevice::SimulatedDevice(HamiltonianSpec spec, Options options)
    : spec_(validate_hermitian(spec)),
      modes_(spec_.modes),
      options_(options),
      cutoff_(options.n_max > 0 ? FockCutoff(options.n_max, spec_.modes)
                                : adaptive_cutoff(spec_, options.beta_max, 1e-10)),
      h_scale_(hamiltonian_scale(spec_, options.beta_max))
{
    if (cutoff_.n_max() < spec_.max_order) {
        throw CutoffError("SimulatedDevice: n_max below the Hamiltonian order");
    }
}

void SimulatedDevice::set_noise(NoiseModel model)
{
    if (model.state_prep_infidelity < 0.0 || model.state_prep_infidelity >= 1.0) {
        throw ConfigError("state_prep_infidelity must lie in [0, 1)");
    }
    noise_ = std::move(model);
    bump_noise_epoch();
}

void SimulatedDevice::clear_noise()
{
    noise_ = NoiseModel{};
    bump_noise_epoch();
}

void SimulatedDevice::bump_noise_epoch()
{
    std::unique_lock lock(cache_mutex_);
    ++noise_epoch_;
    support_cache_.clear();
}

TimeLedger SimulatedDevice::ledger() const
{
    return TimeLedger{total_time_.load(), shot_count_.load()};
}

void SimulatedDevice::reset_ledger()
{
    total_time_.store(0.0);
    shot_count_.store(0);
}

std::int64_t SimulatedDevice::auto_trotter_steps(int kappa, double t0) const
{
    const double x = kappa * t0 * h_scale_;
    const double steps = std::ceil(options_.trotter_factor * x * x);
    return std::max<std::int64_t>(options_.min_trotter_steps, static_cast<std::int64_t>(std::min(steps, 1e15)));
}

std::int64_t SimulatedDevice::steps_for(const ShotRequest& request) const
{
    return request.trotter_steps > 0 ? request.trotter_steps : auto_trotter_steps(request.kappa, request.t0);
}

void SimulatedDevice::check_request(const ShotRequest& request) const
{
    if (request.kappa < 1 || !(request.t0 > 0.0)) {
        throw ConfigError("ShotRequest: need kappa >= 1 and t0 > 0");
    }
    if (request.trotter_steps < 0) {
        throw ConfigError("ShotRequest: trotter_steps must be >= 0");
    }
    if (static_cast<int>(request.beta.size()) != modes_) {
        throw ConfigError("ShotRequest: beta has " + std::to_string(request.beta.size()) + " entries for " +
                          std::to_string(modes_) + " modes");
    }
    if (request.frame && static_cast<int>(request.frame->signed_r.size()) != modes_) {
        throw ConfigError("ShotRequest: frame has the wrong number of modes");
    }
}

void SimulatedDevice::charge(const ShotRequest& request, std::uint64_t shots)
{
    total_time_.fetch_add(static_cast<double>(shots) * request.kappa * request.t0);
    shot_count_.fetch_add(shots);
}

std::shared_ptr<const SimulatedDevice::FrameData> SimulatedDevice::frame_data(const std::optional<Frame>& frame) const
{
    const std::vector<double> key = frame ? frame->signed_r : Frame::bare(modes_).signed_r;
    {
        std::shared_lock lock(cache_mutex_);
        auto it = frame_cache_.find(key);
        if (it != frame_cache_.end()) {
            return it->second;
        }
    }
    auto data = std::make_shared<FrameData>();
    const bool bare = std::all_of(key.begin(), key.end(), [](double s) { return s == 0.0; });
    if (bare) {
        data->h = build_matrix(spec_, cutoff_);
    } else if (options_.frame_method == FrameMethod::Algebraic) {
        // S(z) b S^dag(z) = b cosh s - b^dag sinh s for z = -s.
        std::vector<double> dr(key.size());
        std::transform(key.begin(), key.end(), dr.begin(), [](double s) { return -s; });
        data->h = build_matrix(conjugate_spec_by_mismatch(spec_, dr), cutoff_);
    } else {
        const FockCutoff padded(cutoff_.n_max() + options_.squeeze_padding, modes_);
        CMatrix h = build_matrix(spec_, padded);
        for (int m = 0; m < modes_; ++m) {
            if (key[m] == 0.0) {
                continue;
            }
            const CMatrix s = embed(squeeze_matrix(Complex(-key[m], 0.0), FockCutoff(padded.n_max())), padded, m);
            h = s * h * s.adjoint();
        }
        const auto idx = low_block_indices(padded, cutoff_.n_max());
        const auto n = static_cast<Eigen::Index>(idx.size());
        CMatrix low(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                low(i, j) = h(idx[i], idx[j]);
            }
        }
        data->h = low;
    }
    data->h = 0.5 * (data->h + data->h.adjoint()).eval();
    data->spectrum = std::make_shared<const HermitianExp>(data->h);
    std::unique_lock lock(cache_mutex_);
    if (frame_cache_.size() >= 32) {
        frame_cache_.clear();
    }
    frame_cache_.emplace(key, data);
    return data;
}

DisplacementVector SimulatedDevice::executed_beta(const DisplacementVector& beta) const
{
    if (!noise_.displacement_bias) {
        return beta;
    }
    DisplacementVector delta = noise_.displacement_bias(beta);
    if (delta.size() != beta.size()) {
        throw ConfigError("displacement_bias returned the wrong number of modes");
    }
    DisplacementVector out = beta;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += delta[i];
    }
    return out;
}

std::vector<std::pair<double, CVector>> SimulatedDevice::prepared_mixture(const std::optional<Frame>& frame) const
{
    const int n = cutoff_.n_max();
    const bool reference = noise_.prepare_reference_vacuum && frame && !frame->is_bare();
    auto mode_state = [&](int mode, int level) {
        if (reference && frame->signed_r[mode] != 0.0) {
            const Complex z(-frame->signed_r[mode], 0.0);
            CVector c = level == 0 ? squeezed_vacuum_amplitudes(z, n)
                                   : CVector(squeeze_matrix(z, FockCutoff(n)).col(level));
            const double tail = 1.0 - c.squaredNorm();
            if (tail > 1e-8) {
                throw CutoffError("n_max=" + std::to_string(n) + " truncates the reference vacuum in frame R=" +
                                  std::to_string(frame->signed_r[mode]) + " (lost norm " + std::to_string(tail) + ")");
            }
            return c;
        }
        CVector e = CVector::Zero(n + 1);
        e(level) = 1.0;
        return e;
    };
    std::vector<std::pair<double, CVector>> out;
    const double eta = noise_.state_prep_infidelity;
    for (int excited = 0; excited <= (eta > 0.0 ? 1 : 0); ++excited) {
        std::vector<CVector> parts;
        for (int m = 0; m < modes_; ++m) {
            parts.push_back(mode_state(m, (m == 0 && excited == 1) ? 1 : 0));
        }
        out.emplace_back(excited == 0 ? 1.0 - eta : eta, kron_vectors(parts));
    }
    return out;
}

std::shared_ptr<const std::vector<SimulatedDevice::SupportState>>
SimulatedDevice::support(const ShotRequest& request, const FrameData& data) const
{
    std::vector<double> key{static_cast<double>(noise_epoch_), request.frame ? 1.0 : 0.0};
    if (request.frame) {
        key.insert(key.end(), request.frame->signed_r.begin(), request.frame->signed_r.end());
    }
    for (const auto& b : request.beta) {
        key.push_back(b.real());
        key.push_back(b.imag());
    }
    {
        std::shared_lock lock(cache_mutex_);
        const auto it = support_cache_.find(key);
        if (it != support_cache_.end()) {
            return it->second;
        }
    }
    auto computed = std::make_shared<const std::vector<SupportState>>(compute_support(request, data));
    std::unique_lock lock(cache_mutex_);
    if (support_cache_.size() >= 256) {
        support_cache_.clear();
    }
    support_cache_.emplace(std::move(key), computed);
    return computed;
}

std::vector<SimulatedDevice::SupportState> SimulatedDevice::compute_support(const ShotRequest& request,
                                                                            const FrameData& data) const
{
    const DisplacementVector beta = executed_beta(request.beta);
    const int n = cutoff_.n_max();
    const auto dim = static_cast<Eigen::Index>(cutoff_.dim());

    RVector weights = RVector::Zero(dim);
    for (const auto& [w, phi] : prepared_mixture(request.frame)) {
        weights += w * phi.cwiseAbs2();
    }

    std::vector<CMatrix> displacements;
    const CMatrix& v = data.spectrum->eigenvectors();
    std::vector<SupportState> out;
    for (Eigen::Index idx = 0; idx < dim; ++idx) {
        if (weights(idx) <= 1e-15) {
            continue;
        }
        std::vector<CVector> parts;
        for (int m = 0; m < modes_; ++m) {
            const int level = cutoff_.occupation(static_cast<std::size_t>(idx), m);
            if (level == 0) {
                CVector c = coherent_amplitudes(beta[m], n);
                const double tail = 1.0 - c.squaredNorm();
                if (tail > 1e-10) {
                    throw CutoffError("shot aborted: n_max=" + std::to_string(n) + " truncates the coherent state at |beta|=" +
                                      std::to_string(std::abs(beta[m])) + " (lost norm " + std::to_string(tail) + ")");
                }
                parts.push_back(std::move(c));
            } else {
                if (displacements.empty()) {
                    for (int k = 0; k < modes_; ++k) {
                        displacements.push_back(displacement_matrix(beta[k], FockCutoff(n)));
                    }
                }
                parts.push_back(displacements[m].col(level));
            }
        }
        const CVector psi = kron_vectors(parts);
        RVector p = (v.adjoint() * psi).cwiseAbs2();
        p /= p.sum();
        out.push_back(SupportState{weights(idx), std::move(p)});
    }
    return out;
}

Complex SimulatedDevice::marginal_amplitude(const ShotRequest& request, std::int64_t steps) const
{
    const auto data = frame_data(request.frame);
    const RVector& lambda = data->spectrum->eigenvalues();
    const double tau = request.kappa * request.t0 / static_cast<double>(steps);
    Complex a(0.0);
    const auto states = support(request, *data);
    for (const auto& s : *states) {
        // W_nn - 1 = sum_k p_k (e^{-i lambda_k tau} - 1)
        Complex z(0.0);
        for (Eigen::Index k = 0; k < lambda.size(); ++k) {
            const double x = lambda(k) * tau;
            const double h = std::sin(0.5 * x);
            z += s.eigen_weights(k) * Complex(-2.0 * h * h, -std::sin(x));
        }
        a += s.weight * std::exp(static_cast<double>(steps) * log1p_complex(z));
    }
    return a;
}

Complex SimulatedDevice::limit_amplitude(const ShotRequest& request) const
{
    const auto data = frame_data(request.frame);
    const RVector& lambda = data->spectrum->eigenvalues();
    Complex a(0.0);
    const auto states = support(request, *data);
    for (const auto& s : *states) {
        const double energy = s.eigen_weights.dot(lambda);
        a += s.weight * std::polar(1.0, -request.kappa * request.t0 * energy);
    }
    return a;
}

CMatrix SimulatedDevice::trajectory_step(const ShotRequest& request, std::int64_t steps) const
{
    const auto data = frame_data(request.frame);
    const DisplacementVector beta = executed_beta(request.beta);
    CMatrix d = CMatrix::Identity(1, 1);
    for (int m = 0; m < modes_; ++m) {
        d = kron(d, displacement_matrix(beta[m], FockCutoff(cutoff_.n_max())));
    }
    const double tau = request.kappa * request.t0 / static_cast<double>(steps);
    return d.adjoint() * data->spectrum->at(tau) * d;
}

Complex SimulatedDevice::trajectory_amplitude(const ShotRequest& request, const CMatrix& step, std::int64_t steps,
                                              std::uint64_t shot) const
{
    const RowMatrix w = step;
    const auto dim = static_cast<std::size_t>(w.rows());

    const auto mixture = prepared_mixture(request.frame);
    const double pick = counter_uniform(options_.seed, request.stream ^ kPrepTag, shot);
    const CVector& phi = (mixture.size() > 1 && pick >= mixture.front().first) ? mixture[1].second
                                                                                : mixture.front().second;

    const auto& k = kernels::active();
    std::vector<Complex> psi(phi.data(), phi.data() + dim), tmp(dim), phase(dim), phase_c(dim);
    auto eng = stream_engine(options_.seed, request.stream ^ kThetaTag, shot);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::vector<double> theta(static_cast<std::size_t>(modes_));
    for (std::int64_t step = 0; step < steps; ++step) {
        for (auto& t : theta) {
            t = angle(eng);
        }
        for (std::size_t i = 0; i < dim; ++i) {
            double arg = 0.0;
            for (int m = 0; m < modes_; ++m) {
                arg += theta[m] * cutoff_.occupation(i, m);
            }
            phase[i] = std::polar(1.0, -arg);
            phase_c[i] = std::conj(phase[i]);
        }
        k.mul_inplace(phase.data(), psi.data(), dim);
        k.matvec(w.data(), psi.data(), tmp.data(), dim);
        k.mul_inplace(phase_c.data(), tmp.data(), dim);
        psi.swap(tmp);
    }
    const double norm = k.norm_sq(psi.data(), dim);
    if (std::abs(norm - 1.0) > 1e-9) {
        throw Error("trajectory lost norm: |psi|^2 = " + std::to_string(norm));
    }
    return k.dotc(phi.data(), psi.data(), dim);
}

double SimulatedDevice::probability_from_amplitude(Complex a, Basis basis) const
{
    const double p = 0.5 * (1.0 + (basis == Basis::X ? a.real() : a.imag()));
    return std::clamp(p, 0.0, 1.0);
}

Counts SimulatedDevice::run_shot_batch(const ShotRequest& request, std::uint64_t shots)
{
    check_request(request);
    Counts counts;
    if (shots == 0) {
        return counts;
    }
    const std::int64_t steps = steps_for(request);
    if (options_.mode == ExecutionMode::Trajectory) {
        if (steps > 1000000) {
            throw ConfigError("trajectory mode with L=" + std::to_string(steps) +
                              " steps; set trotter_steps explicitly or use marginal mode");
        }
        const CMatrix step = trajectory_step(request, steps);
        for (std::uint64_t s = 0; s < shots; ++s) {
            const std::uint64_t index = request.first_shot + s;
            const double p =
                probability_from_amplitude(trajectory_amplitude(request, step, steps, index), request.basis);
            (counter_uniform(options_.seed, request.stream, index) < p ? counts.zeros : counts.ones) += 1;
        }
    } else {
        const Complex a = options_.mode == ExecutionMode::Marginal ? marginal_amplitude(request, steps)
                                                                  : limit_amplitude(request);
        const double p = probability_from_amplitude(a, request.basis);
        for (std::uint64_t s = 0; s < shots; ++s) {
            (counter_uniform(options_.seed, request.stream, request.first_shot + s) < p ? counts.zeros : counts.ones) += 1;
        }
    }
    charge(request, shots);
    return counts;
}

int SimulatedDevice::run_shot(const ShotRequest& request)
{
    return run_shot_batch(request, 1).zeros == 1 ? 0 : 1;
}

double SimulatedDevice::measure(const ShotRequest& request, std::uint64_t shots)
{
    if (options_.mode == ExecutionMode::ExactProbability) {
        check_request(request);
        const double p = probability_from_amplitude(limit_amplitude(request), request.basis);
        charge(request, shots);
        return p;
    }
    return run_shot_batch(request, shots).p_hat();
}

} // namespace drut
