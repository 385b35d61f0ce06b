#ifndef DRUT_DEVICE_HPP
#define DRUT_DEVICE_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "drut/fockspace.hpp"
#include "drut/hamiltonian.hpp"

namespace drut {

namespace testing {
class DeviceOracle;
}

enum class Basis { X, Y };

/// Per-mode Bogoliubov frame in the signed parameterization: the frame
/// operator is B' = b cosh s + b^dag sinh s, realized by S(z) with z = -s.
struct Frame {
    std::vector<double> signed_r;

    static Frame bare(int modes) { return Frame{std::vector<double>(static_cast<std::size_t>(modes), 0.0)}; }
    bool is_bare() const;
    bool operator==(const Frame&) const = default;
};

struct NoiseModel {
    /// Executed displacement offset delta_beta as a function of the requested
    /// beta. Empty means no bias.
    std::function<DisplacementVector(const DisplacementVector&)> displacement_bias;
    /// Probability that the prepared state is the frame's first excited state
    /// of mode 0 instead of the frame vacuum.
    double state_prep_infidelity = 0.0;
    /// Prepare the bare vacuum |0> even when a frame is active; the overlap
    /// with the frame vacuum is then 1/cosh R per mode.
    bool prepare_reference_vacuum = false;
};

struct ShotRequest {
    int kappa = 1;
    double t0 = 1.0;
    std::int64_t trotter_steps = 0; // 0 selects the automatic step count
    DisplacementVector beta;
    std::optional<Frame> frame;
    Basis basis = Basis::X;
    std::uint64_t stream = 0;       // seed-derivation token
    std::uint64_t first_shot = 0;   // shot index offset within the stream
};

struct TimeLedger {
    double total_evolution_time = 0.0;
    std::uint64_t shot_count = 0;
};

struct Counts {
    std::uint64_t zeros = 0;
    std::uint64_t ones = 0;

    std::uint64_t total() const noexcept { return zeros + ones; }
    /// Fraction of 0 outcomes; P(0) = (1 + Re A)/2 in X, (1 + Im A)/2 in Y.
    double p_hat() const { return total() == 0 ? 0.5 : static_cast<double>(zeros) / static_cast<double>(total()); }
};

enum class ExecutionMode {
    /// Literal per-shot simulation: fresh theta_1..theta_L, L matrix-vector
    /// products, then a Bernoulli draw on the resulting amplitude.
    Trajectory,
    /// Same bit distribution as Trajectory, sampled from the theta-averaged
    /// amplitude sum_n w_n (W_nn)^L (cost independent of L).
    Marginal,
    /// L -> infinity probabilities returned without sampling (M -> infinity).
    ExactProbability,
};

enum class FrameMethod {
    Algebraic, // exact Bogoliubov substitution into the spec
    Squeeze,   // conjugation by truncated squeeze matrices with padding
};

class SimulatedDevice {
public:
    struct Options {
        ExecutionMode mode = ExecutionMode::Marginal;
        FrameMethod frame_method = FrameMethod::Algebraic;
        std::uint64_t seed = 0;
        int n_max = 0;          // 0 selects adaptive_cutoff against beta_max
        double beta_max = 1.2;  // largest |beta| the cutoff must support
        int squeeze_padding = 40;
        double trotter_factor = 32.0;
        std::int64_t min_trotter_steps = 64;
    };

    SimulatedDevice(HamiltonianSpec spec, Options options);

    int modes() const noexcept { return modes_; }
    const FockCutoff& cutoff() const noexcept { return cutoff_; }
    ExecutionMode mode() const noexcept { return options_.mode; }
    void set_mode(ExecutionMode mode) { options_.mode = mode; }

    /// One shot; returns the ancilla bit (0 with probability P).
    int run_shot(const ShotRequest& request);
    Counts run_shot_batch(const ShotRequest& request, std::uint64_t shots);

    /// Estimated P(0) from `shots` shots; the exact P in ExactProbability mode.
    double measure(const ShotRequest& request, std::uint64_t shots);

    void set_noise(NoiseModel model);
    void clear_noise();

    TimeLedger ledger() const;
    void reset_ledger();

    /// Default L = max(min_steps, ceil(factor (kappa t0 H_scale)^2)).
    std::int64_t auto_trotter_steps(int kappa, double t0) const;

private:
    friend class testing::DeviceOracle;

    struct FrameData {
        CMatrix h;
        std::shared_ptr<const HermitianExp> spectrum;
    };

    struct SupportState {
        double weight;
        RVector eigen_weights; // |<v_k|D|n>|^2
    };

    void check_request(const ShotRequest& request) const;
    std::shared_ptr<const FrameData> frame_data(const std::optional<Frame>& frame) const;
    DisplacementVector executed_beta(const DisplacementVector& beta) const;
    std::vector<std::pair<double, CVector>> prepared_mixture(const std::optional<Frame>& frame) const;
    std::shared_ptr<const std::vector<SupportState>> support(const ShotRequest& request, const FrameData& data) const;
    std::vector<SupportState> compute_support(const ShotRequest& request, const FrameData& data) const;
    Complex marginal_amplitude(const ShotRequest& request, std::int64_t steps) const;
    Complex limit_amplitude(const ShotRequest& request) const;
    CMatrix trajectory_step(const ShotRequest& request, std::int64_t steps) const;
    Complex trajectory_amplitude(const ShotRequest& request, const CMatrix& step, std::int64_t steps,
                                 std::uint64_t shot) const;
    double probability_from_amplitude(Complex a, Basis basis) const;
    std::int64_t steps_for(const ShotRequest& request) const;
    void charge(const ShotRequest& request, std::uint64_t shots);
    void bump_noise_epoch();

    HamiltonianSpec spec_;
    int modes_;
    Options options_;
    FockCutoff cutoff_;
    double h_scale_;
    NoiseModel noise_;
    std::atomic<double> total_time_{0.0};
    std::atomic<std::uint64_t> shot_count_{0};

    mutable std::shared_mutex cache_mutex_;
    mutable std::map<std::vector<double>, std::shared_ptr<const FrameData>> frame_cache_;
    mutable std::map<std::vector<double>, std::shared_ptr<const std::vector<SupportState>>> support_cache_;
    std::uint64_t noise_epoch_ = 0;
};

} // namespace drut

#endif
