#include "drut/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "drut/parallel.hpp"
#include "drut/rng.hpp"

namespace drut {

namespace {

constexpr std::uint64_t kGridTag = tag("grid");
constexpr std::uint64_t kOffsetTag = tag("offset");
constexpr std::uint64_t kStep1Tag = tag("step1");
constexpr std::uint64_t kJointTag = tag("joint");

DisplacementVector on_mode(int modes, int mode, Complex beta)
{
    DisplacementVector v(static_cast<std::size_t>(modes), Complex(0.0));
    v[static_cast<std::size_t>(mode)] = beta;
    return v;
}

/// Copies the columns of (x, cov) in `src` into the matching columns of `dst`.
void embed(const PairedParameterization& src, const RVector& x, const RMatrix& cov,
           const PairedParameterization& dst, RVector& out_x, RMatrix& out_cov)
{
    std::vector<int> where(static_cast<std::size_t>(src.size()), -1);
    for (const auto& rep : src.representatives()) {
        for (int part = 0; part < 2; ++part) {
            const int s = src.column(rep, part);
            if (s >= 0) {
                const int t = dst.column(rep, part);
                if (t < 0) {
                    throw Error("embed: key " + rep.str() + " missing from target parameterization");
                }
                where[static_cast<std::size_t>(s)] = t;
            }
        }
    }
    for (int i = 0; i < src.size(); ++i) {
        const int ti = where[static_cast<std::size_t>(i)];
        out_x(ti) = x(i);
        for (int j = 0; j < src.size(); ++j) {
            out_cov(ti, where[static_cast<std::size_t>(j)]) = cov(i, j);
        }
    }
}

RMatrix point_covariance(const GridMeasurement& g)
{
    const auto n = g.c.size();
    RMatrix cov = RMatrix::Constant(n, n, g.offset_variance);
    cov.diagonal() += g.variance;
    return cov;
}

void finalize(LearnedCoefficients& out)
{
    out.values = out.param.coefficients(out.params);
    out.std_error.clear();
    for (const auto& [key, var] : out.param.key_variances(out.param_cov)) {
        out.std_error[key] = std::sqrt(std::max(var, 0.0));
    }
}

double chi_square(const RVector& residual, const RVector& variance)
{
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        if (variance(i) > 0.0) {
            chi2 += residual(i) * residual(i) / variance(i);
        }
    }
    return chi2;
}

} // namespace

void RpeConfig::validate() const
{
    if (K < 0 || K > 40) {
        throw ConfigError("RpeConfig: K must be in [0, 40]");
    }
    if (M < 20) {
        throw ConfigError("RpeConfig: M must be >= 20");
    }
    if (!(t0 > 0.0) || !(c_bound > 0.0)) {
        throw ConfigError("RpeConfig: t0 and c_bound must be positive");
    }
    if (!(c_bound * t0 < kPi)) {
        throw ConfigError("RpeConfig: c_bound * t0 must be < pi for first-round unambiguity");
    }
    if (trotter_steps < 0) {
        throw ConfigError("RpeConfig: trotter_steps must be >= 0");
    }
}

RpeConfig RpeConfig::from_bound(double c_bound, int K, int M)
{
    RpeConfig cfg;
    cfg.K = K;
    cfg.M = M;
    cfg.c_bound = c_bound;
    cfg.t0 = 0.9 * kPi / c_bound;
    return cfg;
}

double default_c_bound(int d, double g_max, double r_max, double offset_bound)
{
    double b = 0.0;
    for (int l = 1; l <= d; ++l) {
        b += (l + 1) * g_max * std::pow(r_max, l);
    }
    return b + std::abs(offset_bound);
}

PhaseEstimate rpe_estimate(SimulatedDevice& device, const DisplacementVector& beta, const std::optional<Frame>& frame,
                           const RpeConfig& cfg, std::uint64_t stream)
{
    cfg.validate();
    const bool exact = device.mode() == ExecutionMode::ExactProbability;
    ShotRequest req;
    req.t0 = cfg.t0;
    req.trotter_steps = cfg.trotter_steps;
    req.beta = beta;
    req.frame = frame;

    PhaseEstimate out;
    double est = 0.0;
    for (int j = 0; j <= cfg.K; ++j) {
        const int kappa = 1 << j;
        req.kappa = kappa;
        req.basis = Basis::X;
        req.stream = hash_combine(stream, static_cast<std::uint64_t>(j), 0);
        const double px = device.measure(req, static_cast<std::uint64_t>(cfg.M));
        req.basis = Basis::Y;
        req.stream = hash_combine(stream, static_cast<std::uint64_t>(j), 1);
        const double py = device.measure(req, static_cast<std::uint64_t>(cfg.M));

        RpeRound round;
        round.kappa = kappa;
        round.p_x = px;
        round.p_y = py;
        round.phase = std::atan2(2.0 * py - 1.0, 2.0 * px - 1.0);
        const double scale = kappa * cfg.t0;
        const double base = -round.phase / scale;
        const double window = kPi / (3.0 * scale);
        if (j == 0) {
            est = base;
            round.consistent = std::abs(est) <= cfg.c_bound + window;
        } else {
            const double period = 2.0 * kPi / scale;
            const double m = std::round((est - base) / period);
            const double cand = base + m * period;
            round.consistent = std::abs(cand - est) <= window;
            est = cand;
        }
        round.estimate = est;
        round.lo = est - window;
        round.hi = est + window;
        out.rounds.push_back(round);
        out.time_cost += 2.0 * cfg.M * scale;
        out.shots += 2 * static_cast<std::uint64_t>(cfg.M);
        if (!round.consistent) {
            out.consistent = false;
            if (cfg.strict) {
                throw RpeInconsistency("RPE round " + std::to_string(j) + " (kappa=" + std::to_string(kappa) +
                                           ") failed its consistency window",
                                       j);
            }
        }
    }
    out.c_hat = std::clamp(est, -cfg.c_bound, cfg.c_bound);

    if (!exact) {
        const RpeRound& last = out.rounds.back();
        const double x = 2.0 * last.p_x - 1.0;
        const double y = 2.0 * last.p_y - 1.0;
        const double r2 = x * x + y * y;
        double var_phi = kPi * kPi / 3.0;
        if (r2 > 1e-12) {
            const double vx = std::max(1.0 - x * x, 1.0 / cfg.M) / cfg.M;
            const double vy = std::max(1.0 - y * y, 1.0 / cfg.M) / cfg.M;
            var_phi = std::min(var_phi, (y * y * vx + x * x * vy) / (r2 * r2));
        }
        out.std_error = std::sqrt(var_phi) / (last.kappa * cfg.t0);
    }
    return out;
}

Complex LearnedCoefficients::value(const TermKey& key) const
{
    const auto it = values.find(key);
    return it == values.end() ? Complex(0.0) : it->second;
}

double LearnedCoefficients::error(const TermKey& key) const
{
    const auto it = std_error.find(key);
    return it == std_error.end() ? 0.0 : it->second;
}

HamiltonianSpec LearnedCoefficients::as_spec(double g_max) const
{
    HamiltonianSpec s;
    s.modes = modes;
    s.max_order = d;
    s.g_max = g_max;
    s.terms = values;
    s.identity_offset = has_offset ? offset : 0.0;
    return s;
}

GridMeasurement measure_grid(SimulatedDevice& device, const std::vector<DisplacementVector>& points,
                             const RpeConfig& cfg, const LearnOptions& options)
{
    cfg.validate();
    if (options.replicas < 1) {
        throw ConfigError("LearnOptions: replicas must be >= 1");
    }
    const std::size_t reps = static_cast<std::size_t>(options.replicas);
    const std::size_t n = points.size();
    const std::size_t jobs = (n + (options.estimate_offset ? 1 : 0)) * reps;
    std::vector<PhaseEstimate> results(jobs);
    std::vector<int> retries(jobs, 0);

    parallel_for(jobs, options.workers, [&](std::size_t job) {
        const std::size_t point = job / reps;
        const bool offset = point == n;
        const DisplacementVector beta =
            offset ? DisplacementVector(static_cast<std::size_t>(device.modes()), Complex(0.0)) : points[point];
        const std::uint64_t base =
            offset ? hash_combine(options.stream, kOffsetTag, job % reps) : hash_combine(options.stream, kGridTag, job);
        RpeConfig attempt = cfg;
        for (int a = 0;; ++a) {
            try {
                results[job] = rpe_estimate(device, beta, options.frame, attempt, hash_combine(base, static_cast<std::uint64_t>(a)));
                retries[job] = a;
                return;
            } catch (const RpeInconsistency&) {
                if (a >= options.retries) {
                    throw;
                }
                attempt.M *= 2;
            }
        }
    });

    GridMeasurement g;
    g.points = points;
    g.c = RVector::Zero(static_cast<Eigen::Index>(n));
    g.variance = RVector::Zero(static_cast<Eigen::Index>(n));
    const double r = static_cast<double>(reps);
    for (std::size_t job = 0; job < jobs; ++job) {
        const std::size_t point = job / reps;
        const PhaseEstimate& e = results[job];
        g.time_cost += e.time_cost;
        g.shots += e.shots;
        g.retries_used += retries[job];
        const double var = e.std_error * e.std_error / (r * r);
        if (point == n) {
            g.offset += e.c_hat / r;
            g.offset_variance += var;
        } else {
            g.c(static_cast<Eigen::Index>(point)) += e.c_hat / r;
            g.variance(static_cast<Eigen::Index>(point)) += var;
        }
    }
    if (options.estimate_offset) {
        g.c.array() -= g.offset;
    }
    return g;
}

LearnedCoefficients learn_single_mode(SimulatedDevice& device, int mode, int d, const RpeConfig& cfg,
                                      const LearnOptions& options)
{
    if (mode < 0 || mode >= device.modes()) {
        throw ConfigError("learn_single_mode: mode out of range");
    }
    if (d < 1) {
        throw ConfigError("learn_single_mode: d must be >= 1");
    }
    const RecoveryPlan plan(d, options.r_min, options.r_max);
    std::vector<DisplacementVector> points;
    for (const auto& b : plan.points()) {
        points.push_back(on_mode(device.modes(), mode, b));
    }
    GridMeasurement g = measure_grid(device, points, cfg, options);

    LearnedCoefficients out;
    out.modes = device.modes();
    out.d = d;
    out.param = PairedParameterization(plan.keys(mode));
    const LeastSquaresResult ls = least_squares(plan.forward(), g.c);
    RMatrix map;
    if (options.estimator == SingleModeEstimator::TwoStage) {
        map = plan.map();
        Eigen::JacobiSVD<RMatrix> svd(map);
        out.design_sigma_min = 1.0 / svd.singularValues()(0);
    } else {
        map = ls.pinv;
        out.design_sigma_min = ls.sigma_min;
    }
    out.params = map * g.c;
    out.param_cov = propagate_covariance(map, g.variance, g.offset_variance);
    out.has_offset = options.estimate_offset;
    out.offset = g.offset;
    out.offset_std_error = std::sqrt(g.offset_variance);
    out.time_cost = g.time_cost;
    out.shots = g.shots;
    out.chi2 = chi_square(g.c - plan.forward() * ls.x, g.variance);
    out.chi2_dof = plan.point_count() - out.param.size();
    out.stages.push_back(std::move(g));
    finalize(out);
    return out;
}

namespace {

struct Step1 {
    std::vector<LearnedCoefficients> per_mode;
    std::map<TermKey, Complex> singles;
    PairedParameterization param;
    RVector x;
    RMatrix cov;
};

Step1 run_step1(SimulatedDevice& device, int d, const RpeConfig& cfg, const MultiModeOptions& options,
                std::size_t joint_points)
{
    const int modes = device.modes();
    const RecoveryPlan plan(d, options.base.r_min, options.base.r_max);
    int replicas = options.step1_replicas;
    if (replicas <= 0) {
        replicas = std::max<int>(1, static_cast<int>(joint_points / static_cast<std::size_t>(plan.point_count())));
    }
    Step1 s;
    s.param = PairedParameterization(single_mode_keys(modes, d));
    s.x = RVector::Zero(s.param.size());
    s.cov = RMatrix::Zero(s.param.size(), s.param.size());
    for (int m = 0; m < modes; ++m) {
        LearnOptions o = options.base;
        o.replicas = replicas;
        o.estimator = options.step1_estimator;
        o.stream = hash_combine(options.base.stream, kStep1Tag, static_cast<std::uint64_t>(m));
        LearnedCoefficients lc = learn_single_mode(device, m, d, cfg, o);
        embed(lc.param, lc.params, lc.param_cov, s.param, s.x, s.cov);
        s.per_mode.push_back(std::move(lc));
    }
    s.singles = s.param.coefficients(s.x);
    return s;
}

std::vector<DisplacementVector> grid_for(const SimulatedDevice& device, int d, const MultiModeOptions& options)
{
    if (device.modes() < 2 || device.modes() > 3) {
        throw ConfigError("multi-mode learning supports 2 or 3 modes");
    }
    if (!options.grid.empty()) {
        return options.grid;
    }
    return joint_grid(device.modes(), d, options.base.r_min, options.base.r_max);
}

int coupling_order(int d, const MultiModeOptions& options)
{
    if (options.coupling_order < 0 || options.coupling_order > d) {
        throw ConfigError("coupling_order must lie in [0, d]");
    }
    return options.coupling_order == 0 ? d : options.coupling_order;
}

GridMeasurement run_joint(SimulatedDevice& device, const std::vector<DisplacementVector>& grid, const RpeConfig& cfg,
                          const MultiModeOptions& options)
{
    LearnOptions o = options.base;
    o.replicas = 1;
    o.stream = hash_combine(options.base.stream, kJointTag);
    return measure_grid(device, grid, cfg, o);
}

LearnedCoefficients hierarchical_from(const Step1& s1, const GridMeasurement& joint, int modes, int d, int dc)
{
    const MultiFit fit = multidim_fit(joint.points, joint.c, modes, dc, s1.singles);
    const RMatrix m1 = s1.param.design(joint.points);
    const RMatrix cov_y = point_covariance(joint);
    const RMatrix cov_c = fit.pinv * (cov_y + m1 * s1.cov * m1.transpose()) * fit.pinv.transpose();

    LearnedCoefficients out;
    out.modes = modes;
    out.d = d;
    std::vector<TermKey> keys = single_mode_keys(modes, d);
    const auto couplings = coupling_keys(modes, dc);
    keys.insert(keys.end(), couplings.begin(), couplings.end());
    out.param = PairedParameterization(keys);
    out.params = RVector::Zero(out.param.size());
    out.param_cov = RMatrix::Zero(out.param.size(), out.param.size());
    embed(s1.param, s1.x, s1.cov, out.param, out.params, out.param_cov);
    embed(fit.param, fit.x, 0.5 * (cov_c + cov_c.transpose()), out.param, out.params, out.param_cov);
    out.has_offset = joint.offset_variance > 0.0 || joint.offset != 0.0;
    out.offset = joint.offset;
    out.offset_std_error = std::sqrt(joint.offset_variance);
    out.time_cost = joint.time_cost;
    out.shots = joint.shots;
    for (const auto& lc : s1.per_mode) {
        out.time_cost += lc.time_cost;
        out.shots += lc.shots;
        out.stages.push_back(lc.stages.front());
    }
    out.stages.push_back(joint);
    out.design_sigma_min = fit.sigma_min;
    out.chi2 = chi_square(fit.residual, joint.variance);
    out.chi2_dof = static_cast<int>(joint.points.size()) - fit.param.size();
    finalize(out);
    return out;
}

LearnedCoefficients simultaneous_from(const GridMeasurement& joint, int modes, int d)
{
    const MultiFit fit = joint_fit(joint.points, joint.c, modes, d);
    LearnedCoefficients out;
    out.modes = modes;
    out.d = d;
    out.param = fit.param;
    out.params = fit.x;
    const RMatrix cov = fit.pinv * point_covariance(joint) * fit.pinv.transpose();
    out.param_cov = 0.5 * (cov + cov.transpose());
    out.has_offset = joint.offset_variance > 0.0 || joint.offset != 0.0;
    out.offset = joint.offset;
    out.offset_std_error = std::sqrt(joint.offset_variance);
    out.time_cost = joint.time_cost;
    out.shots = joint.shots;
    out.design_sigma_min = fit.sigma_min;
    out.chi2 = chi_square(fit.residual, joint.variance);
    out.chi2_dof = static_cast<int>(joint.points.size()) - fit.param.size();
    out.stages.push_back(joint);
    finalize(out);
    return out;
}

} // namespace

LearnedCoefficients learn_multimode_hierarchical(SimulatedDevice& device, int d, const RpeConfig& cfg,
                                                 const MultiModeOptions& options)
{
    const int dc = coupling_order(d, options);
    const auto grid = grid_for(device, dc, options);
    const Step1 s1 = run_step1(device, d, cfg, options, grid.size());
    return hierarchical_from(s1, run_joint(device, grid, cfg, options), device.modes(), d, dc);
}

LearnedCoefficients learn_multimode_simultaneous(SimulatedDevice& device, int d, const RpeConfig& cfg,
                                                 const MultiModeOptions& options)
{
    const auto grid = grid_for(device, d, options);
    return simultaneous_from(run_joint(device, grid, cfg, options), device.modes(), d);
}

StrategyPair learn_multimode_both(SimulatedDevice& device, int d, const RpeConfig& cfg, const MultiModeOptions& options)
{
    const auto grid = grid_for(device, d, options);
    const Step1 s1 = run_step1(device, d, cfg, options, grid.size());
    const GridMeasurement joint = run_joint(device, grid, cfg, options);
    return StrategyPair{hierarchical_from(s1, joint, device.modes(), d, d), simultaneous_from(joint, device.modes(), d)};
}

} // namespace drut
