#ifndef DRUT_PROTOCOL_HPP
#define DRUT_PROTOCOL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drut/device.hpp"
#include "drut/linear_model.hpp"
#include "drut/recovery.hpp"

namespace drut {

struct RpeConfig {
    int K = 8;            // kappa runs over 2^0..2^K
    int M = 200;          // shots per basis per round
    double t0 = 0.0;
    double c_bound = 0.0; // prior bound on |C|
    bool strict = true;   // throw RpeInconsistency on a failed window check
    std::int64_t trotter_steps = 0;

    /// Throws ConfigError unless c_bound * t0 < pi, M >= 20, K >= 0.
    void validate() const;

    /// t0 = 0.9 pi / c_bound.
    static RpeConfig from_bound(double c_bound, int K = 8, int M = 200);
};

/// sum_l (l + 1) g_max r_max^l over l = 1..d, plus |offset_bound|.
double default_c_bound(int d, double g_max, double r_max, double offset_bound = 0.0);

struct RpeRound {
    int kappa = 1;
    double p_x = 0.5;
    double p_y = 0.5;
    double phase = 0.0;   // atan2(2 P_Y - 1, 2 P_X - 1)
    double estimate = 0.0;
    double lo = 0.0;      // consistency interval around the estimate
    double hi = 0.0;
    bool consistent = true;
};

struct PhaseEstimate {
    double c_hat = 0.0;
    double std_error = 0.0; // shot-noise standard error of the final round
    std::vector<RpeRound> rounds;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
    bool consistent = true;
};

/// Robust phase estimation of C(beta) (plus the identity offset).
PhaseEstimate rpe_estimate(SimulatedDevice& device, const DisplacementVector& beta, const std::optional<Frame>& frame,
                           const RpeConfig& cfg, std::uint64_t stream = 0);

enum class SingleModeEstimator {
    TwoStage,     // radial least squares per angle, then angular inverse DFT
    LeastSquares, // one least-squares fit over the same measurement grid
};

struct LearnOptions {
    double r_min = 0.2;
    double r_max = 1.0;
    std::optional<Frame> frame;
    bool estimate_offset = false; // measure the beta = 0 phase and subtract it
    int replicas = 1;             // independent RPE repetitions per grid point
    int workers = 0;              // 0 uses the hardware concurrency
    int retries = 2;              // re-runs with doubled M after RpeInconsistency
    std::uint64_t stream = 0;
    SingleModeEstimator estimator = SingleModeEstimator::TwoStage;
};

struct GridMeasurement {
    std::vector<DisplacementVector> points;
    RVector c;         // estimated C (offset removed when estimated)
    RVector variance;  // per-point shot-noise variance
    double offset = 0.0;
    double offset_variance = 0.0;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
    int retries_used = 0;
};

struct LearnedCoefficients {
    int modes = 1;
    int d = 1;
    std::map<TermKey, Complex> values;
    std::map<TermKey, double> std_error; // sqrt(Var Re + Var Im)
    PairedParameterization param;
    RVector params;
    RMatrix param_cov;
    bool has_offset = false;
    double offset = 0.0;
    double offset_std_error = 0.0;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
    double design_sigma_min = 0.0;
    double chi2 = 0.0; // residual chi-square of the final linear stage
    int chi2_dof = 0;
    std::vector<GridMeasurement> stages;

    Complex value(const TermKey& key) const;
    double error(const TermKey& key) const;
    HamiltonianSpec as_spec(double g_max = 1.0) const;
};

/// Estimates C on an explicit list of displacements.
GridMeasurement measure_grid(SimulatedDevice& device, const std::vector<DisplacementVector>& points,
                             const RpeConfig& cfg, const LearnOptions& options);

/// Algorithm 1 on mode `mode` with all other modes undisplaced. Keys in the
/// result are on `mode`.
LearnedCoefficients learn_single_mode(SimulatedDevice& device, int mode, int d, const RpeConfig& cfg,
                                      const LearnOptions& options = {});

struct MultiModeOptions {
    LearnOptions base;
    /// Step-1 repetitions per isolated grid point; 0 matches the number of
    /// joint-grid points sharing each single-mode projection.
    int step1_replicas = 0;
    SingleModeEstimator step1_estimator = SingleModeEstimator::LeastSquares;
    std::vector<DisplacementVector> grid; // empty selects joint_grid
    /// Total order of the coupling monomials in the hierarchical fit; 0 uses d.
    int coupling_order = 0;
};

/// Step 1 per mode, then couplings fitted on the residual over the joint grid.
LearnedCoefficients learn_multimode_hierarchical(SimulatedDevice& device, int d, const RpeConfig& cfg,
                                                 const MultiModeOptions& options = {});

/// One least-squares fit for all coefficients over the joint grid.
LearnedCoefficients learn_multimode_simultaneous(SimulatedDevice& device, int d, const RpeConfig& cfg,
                                                 const MultiModeOptions& options = {});

/// Both strategies from one shared joint-grid measurement.
struct StrategyPair {
    LearnedCoefficients hierarchical;
    LearnedCoefficients simultaneous;
};
StrategyPair learn_multimode_both(SimulatedDevice& device, int d, const RpeConfig& cfg,
                                  const MultiModeOptions& options = {});

} // namespace drut

#endif
