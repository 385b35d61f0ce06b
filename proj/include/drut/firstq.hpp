#ifndef DRUT_FIRSTQ_HPP
#define DRUT_FIRSTQ_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "drut/bogoliubov.hpp"
#include "drut/protocol.hpp"

namespace drut {

/// Inner-learner settings shared by the signal measurements and the final learn.
struct FirstqConfig {
    int d = 4;
    int M = 100;
    double g_max = 1.0;      // prior bound on |g'| in any frame of the bracket
    int K_min = 1;
    int K_max = 30;
    double r_min = 0.2;
    double r_max = 1.0;
    int workers = 0;
    int retries = 2;
    bool strict = true; // false flags RPE window failures instead of throwing
    /// The device prepares the reference vacuum, so the frame vacuum has
    /// overlap prod 1/cosh R'. Precision targets then also cover the RPE
    /// phase bias arcsin((1 - p0)/p0) / (kappa t0), and strict is ignored.
    bool reference_vacuum = false;
    std::uint64_t stream = 0;
};

/// arcsin((1 - p0)/p0) with p0 = prod 1/cosh R'; zero for the frame vacuum.
/// Throws BracketError when p0 <= 4 - 2 sqrt 3.
double overlap_phase_bound(const FirstqConfig& cfg, const Frame& frame);

/// RPE settings whose shot-noise error on the Re part of `key` in a
/// single-mode offset-corrected learn is about `eps`. `spread` is the largest
/// |signed R| mismatch the frame may carry.
RpeConfig signal_rpe_config(const FirstqConfig& cfg, std::pair<int, int> key, double eps, double spread, int modes = 1,
                            double phase_bound = 0.0);

struct SignalSample {
    double r = 0.0;      // signed R' of the searched mode
    double f = 0.0;      // Re of the signal coefficient
    double se = 0.0;     // predicted standard error of f (with the overlap bias bound)
    double target = 0.0; // requested precision
    int K = 0;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
    bool ambiguous() const { return std::abs(f) <= 3.0 * se; }
};

/// Inner single-mode learn of `mode` in `frame` with the searched mode moved to
/// `r`; returns the real part of the signal coefficient.
SignalSample signal_measure(SimulatedDevice& device, int mode, const Frame& frame, double r, std::pair<int, int> key,
                            double eps, const FirstqConfig& cfg, std::uint64_t stream, double spread);

struct BisectionOptions {
    int mode = 0;
    double lo = -0.3; // signed R bracket
    double hi = 0.3;
    double eps_r = 0.0;                    // <= 0 derives eps_g / (4 |slope|)
    double eps_g = 1e-2;
    std::pair<int, int> signal_key{2, 0};
    double endpoint_precision = 0.02;
    double precision_divisor = 48.0;       // sign-call precision |slope| width / divisor
    std::optional<Frame> base_frame;       // frames of the other modes
    FirstqConfig cfg;
};

struct BisectionState {
    double lo = 0.0;
    double hi = 0.0;
    int iterations = 0;     // accepted bracket updates
    int planned = 0;        // ceil(log2(width / eps_r))
    int reruns = 0;
    bool golden = false;    // fell back to golden-section on |f|
    double slope = 0.0;     // bootstrapped from the endpoints
    double eps_r = 0.0;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
    std::vector<SignalSample> history;

    double width() const { return hi - lo; }
    double estimate() const { return 0.5 * (lo + hi); }
};

/// Throws BracketError on same-sign or unresolved endpoints and when the
/// bracket leaves the overlap-feasible region.
BisectionState bisection_search(SimulatedDevice& device, const BisectionOptions& options);

struct FirstqOptions {
    BisectionOptions search;
    double eps_g = 1e-2;           // target standard error of every G
    bool frame_uncertainty = true; // fold the residual bracket width into the G covariance
};

struct FirstqResult {
    BisectionState search;
    Frame frame;
    LearnedCoefficients final_learn;
    PhysicalFit g;
    RpeConfig final_rpe;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
};

/// Bisection on the frame, then a final learn in the converged frame and a
/// least-squares transform to the physical coefficients.
FirstqResult learn_firstq(SimulatedDevice& device, const PhysicalModel& model, const FirstqOptions& options);

struct TwoModeOptions {
    std::array<BisectionOptions, 2> search;
    double eps_g = 1e-2;
    int coupling_order = 2;
    bool frame_uncertainty = true;
};

struct TwoModeResult {
    std::array<BisectionState, 2> search;
    Frame frame;
    LearnedCoefficients final_learn;
    PhysicalFit g;
    RpeConfig final_rpe;
    double time_cost = 0.0;
    std::uint64_t shots = 0;
};

/// Two concurrent single-mode searches, then a hierarchical learn in the
/// joint frame.
TwoModeResult parallel_two_mode_search(SimulatedDevice& device, const PhysicalModel& model,
                                       const TwoModeOptions& options);

} // namespace drut

#endif
