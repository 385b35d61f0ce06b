#ifndef DRUT_EXPERIMENTS_HPP
#define DRUT_EXPERIMENTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "drut/device.hpp"
#include "drut/firstq.hpp"
#include "drut/protocol.hpp"
#include "drut/recovery.hpp"

namespace drut {

using Json = nlohmann::json;

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Experiment kinds: learn-single, learn-multi, learn-firstq,
/// sweep-heisenberg, compare-covariance, spam-sweep.
///
/// Config document (every section optional unless the experiment needs it):
///   experiment   string
///   seed         unsigned integer (default 1)
///   workers      integer >= 0 (0 = hardware concurrency)
///   noiseless    bool, exact probabilities instead of shots
///   spec         path string | inline spec document | {"path": ...} |
///                {"random": {"modes", "d", "g_max", "sparsity", "seed"}}
///   device       {"mode": "marginal"|"trajectory"|"exact", "n_max", "beta_max", "trotter_factor"}
///   rpe          {"K", "M", "t0": number|"auto", "c_bound": number|"auto", "strict", "trotter_steps"}
///   grid         {"d", "r_min", "r_max", "replicas", "estimate_offset"}
///   multi        {"strategy": "both"|"hierarchical"|"simultaneous", "step1_replicas"}
///   noise        {"delta_beta", "state_prep_infidelity", "prepare_reference_vacuum"}
///   sweep        {"k_min", "k_max", "seeds", "beta": [re, im]}
///   covariance   {"eps_c", "runs"}
///   spam         {"norms": [...], "trials"}
///   firstq       {"modes", "g11", "g22", "coupling", "ratios", "m0w0", "bracket",
///                 "eps_g", "eps_r", "d", "M", "g_max", "signal_key", "reference_vacuum", "coupling_order"}
///   output       {"json", "csv"}
/// Unknown keys are rejected.
struct ExperimentConfig {
    std::string kind;
    Json doc;            // as given, with flag overrides applied
    std::string base_dir = ".";
    std::uint64_t seed = 1;
    int workers = 0;
    bool noiseless = false;
    std::string json_path;
    std::string csv_path;

    /// Throws ConfigError on schema violations.
    static ExperimentConfig parse(const Json& doc, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path);
};

/// FNV-1a of the canonical dump without "workers" and "output" (which do
/// not change results), as 16 hex digits.
std::string config_hash(const Json& doc);

struct RunReport {
    Json doc;
    std::string csv; // empty unless the experiment writes a sweep
};

/// Dry-run checks (Hermiticity, overlap feasibility, c_bound t0, cutoff).
/// Returns the derived quantities; throws ConfigError when a check fails.
Json validate(const ExperimentConfig& cfg);

RunReport run(const ExperimentConfig& cfg);

// Building blocks shared with the acceptance harness.

struct SweepRow {
    int k = 0;
    double total_time = 0.0; // mean evolution time per RPE run, units of 1/g_max
    double rmse = 0.0;
    double shots = 0.0;      // mean shots per RPE run
};

/// RPE of C(beta) for K = k_min..k_max (other settings from `base`), `seeds`
/// independent runs per K. RMSE against the exact C plus offset, in units of
/// g_max; times in units of 1/g_max.
std::vector<SweepRow> heisenberg_sweep(const HamiltonianSpec& spec, const DisplacementVector& beta, int k_min,
                                       int k_max, const RpeConfig& base, int seeds,
                                       const SimulatedDevice::Options& device_options, std::uint64_t stream,
                                       int workers = 0);

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& comment = {});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SpamTrial {
    double delta_norm = 0.0;
    double observed = 0.0; // ||g_learned - g_true||_2
    SpamReport report;
};

/// Noiseless single-mode learn with a random executed-displacement offset of
/// total 2-norm `delta_norm` spread over the grid points.
SpamTrial spam_trial(const HamiltonianSpec& spec, int d, double delta_norm, std::uint64_t seed, const RpeConfig& cfg,
                     double r_min = 0.2, double r_max = 1.0);

/// g'11 N_B + g'22 B^dag^2 B^2 per mode, plus coupling (B1^dag B2 + h.c.).
HamiltonianSpec firstq_example_spec(int modes, double g11, double g22, double coupling);

/// Smallest n_max holding the reference vacuum of every frame with
/// |R| <= r_edge to within `tol` lost norm.
int reference_vacuum_cutoff(double r_edge, double tol = 1e-8, int ceiling = 400);

/// Sum over admissible keys of order <= d of g_max r_max^order, plus |offset|.
double auto_c_bound(int modes, int d, double g_max, double r_max, double offset_bound = 0.0);

struct EmpiricalParameter {
    std::string label;
    double var_hier = 0.0;
    double var_sim = 0.0;
    double se_diff = 0.0; // standard error of var_sim - var_hier
    bool ordered(double sigmas = 2.0) const { return var_sim - var_hier >= -sigmas * se_diff; }
};

/// Per-parameter variances of both multi-mode strategies over `runs`
/// seeded end-to-end runs on one shared device.
std::vector<EmpiricalParameter> empirical_ordering(const HamiltonianSpec& spec, int d, const RpeConfig& cfg,
                                                   const MultiModeOptions& options, int runs,
                                                   const SimulatedDevice::Options& device_options,
                                                   std::uint64_t stream, int workers = 0);

} // namespace drut

#endif
