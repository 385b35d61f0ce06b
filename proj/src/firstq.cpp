#include "drut/firstq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drut/parallel.hpp"
#include "drut/recovery.hpp"
#include "drut/rng.hpp"

namespace drut {

namespace {

constexpr std::uint64_t kBisectTag = tag("bisect");
constexpr std::uint64_t kFinalTag = tag("firstq-final");

RpeConfig rpe_for_point_precision(const FirstqConfig& cfg, double eps_c, double spread, int modes, double phase_bound)
{
    if (!(eps_c > 0.0)) {
        throw ConfigError("first-quantization precision target must be positive");
    }
    const double base = default_c_bound(cfg.d, cfg.g_max, cfg.r_max, cfg.d * cfg.g_max);
    const double c_bound = modes * modes * base * std::exp(cfg.d * std::abs(spread));
    RpeConfig rpe = RpeConfig::from_bound(c_bound, 0, cfg.M);
    rpe.strict = cfg.strict && !cfg.reference_vacuum;
    if (phase_bound > 0.0) {
        // Branch selection survives per-round bias delta while |2 e_prev - e| < pi, leaving
        // pi - 3 delta for shot noise of combined sd sqrt(5) / (|A| sqrt(M)); hold it at 5 sd with
        // |A| >= sqrt(2 p0 - 1), the amplitude at the largest phase deviation.
        const double p0 = 1.0 / (1.0 + std::sin(phase_bound));
        const double margin = kPi - 3.0 * phase_bound;
        const double sigma = margin / (5.0 * std::sqrt(5.0));
        const double m = 1.0 / ((2.0 * p0 - 1.0) * sigma * sigma);
        rpe.M = std::max(rpe.M, static_cast<int>(std::min(std::ceil(m), 1e8)));
    }
    // Final-round phase error: shot noise 1/sqrt(M) or the overlap bias bound.
    const double phase = std::max(1.0 / std::sqrt(static_cast<double>(rpe.M)), phase_bound);
    const double k = std::ceil(std::log2(phase / (eps_c * rpe.t0)));
    rpe.K = std::clamp(static_cast<int>(k), cfg.K_min, cfg.K_max);
    // Shrink t0 so the final-round precision meets eps_c without the 2x slack of rounding K.
    rpe.t0 = std::min(rpe.t0, phase / (std::ldexp(1.0, rpe.K) * eps_c));
    return rpe;
}

/// Per-point C bias bound of an RPE run.
double point_bias(const RpeConfig& rpe, double phase_bound)
{
    return phase_bound / (std::ldexp(1.0, rpe.K) * rpe.t0);
}

void check_bracket(const BisectionOptions& o)
{
    if (!(o.lo < o.hi)) {
        throw BracketError("bisection bracket requires lo < hi");
    }
    const double edge = std::max(std::abs(o.lo), std::abs(o.hi));
    if (!overlap_feasible(std::cosh(edge))) {
        throw BracketError("bracket edge |R| = " + std::to_string(edge) + " gives u = " +
                           std::to_string(std::cosh(edge)) +
                           ", violating the overlap constraint u < 1/(4 - 2 sqrt 3) ~ 1.866");
    }
}

Frame frame_for(const BisectionOptions& o, int modes)
{
    Frame f = o.base_frame.value_or(Frame::bare(modes));
    if (static_cast<int>(f.signed_r.size()) != modes) {
        throw ConfigError("base frame size does not match the device");
    }
    return f;
}

/// Standard error of every physical G per unit C-point standard error.
double g_error_factor(const FirstqConfig& cfg, const PhysicalModel& single)
{
    const RecoveryPlan plan(cfg.d, cfg.r_min, cfg.r_max);
    const RMatrix cov = propagate_covariance(plan.map(), RVector::Ones(plan.point_count()), 1.0);
    const PhysicalFit unit = fit_physical(plan.parameterization(), RVector::Zero(plan.parameterization().size()), cov,
                                          single);
    double s = 0.0;
    for (const auto& [term, se] : unit.std_error) {
        s = std::max(s, se);
    }
    return s;
}

/// Adds the covariance induced by a residual frame mismatch of standard
/// deviation sigma_r on each mode.
void add_frame_uncertainty(PhysicalFit& fit, const LearnedCoefficients& lc, const PhysicalModel& model,
                           const std::vector<double>& sigma_r)
{
    const HamiltonianSpec spec = lc.as_spec();
    const RMatrix zero = RMatrix::Zero(lc.param.size(), lc.param.size());
    const double h = 1e-4;
    for (std::size_t m = 0; m < sigma_r.size(); ++m) {
        std::vector<double> plus(sigma_r.size(), 0.0), minus(sigma_r.size(), 0.0);
        plus[m] = h;
        minus[m] = -h;
        const auto gp = fit_physical(lc.param, lc.param.parameters(conjugate_spec_by_mismatch(spec, plus).terms), zero,
                                     model);
        const auto gm = fit_physical(lc.param, lc.param.parameters(conjugate_spec_by_mismatch(spec, minus).terms), zero,
                                     model);
        RVector j(static_cast<Eigen::Index>(model.support.size()));
        for (std::size_t t = 0; t < model.support.size(); ++t) {
            const auto& term = model.support[t];
            j(static_cast<Eigen::Index>(t)) = (gp.values.at(term) - gm.values.at(term)) / (2.0 * h);
        }
        fit.cov += sigma_r[m] * sigma_r[m] * j * j.transpose();
    }
    for (std::size_t t = 0; t < model.support.size(); ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        fit.std_error[model.support[t]] = std::sqrt(std::max(0.0, fit.cov(i, i)));
    }
}

PhysicalModel restrict_to_mode(const PhysicalModel& model, int mode)
{
    PhysicalModel single;
    single.modes = 1;
    single.m0w0 = {model.m0w0[static_cast<std::size_t>(mode)]};
    for (const auto& term : model.support) {
        bool only = true;
        for (std::size_t m = 0; m < term.jk.size(); ++m) {
            if (static_cast<int>(m) != mode && term.jk[m] != std::pair<int, int>{0, 0}) {
                only = false;
            }
        }
        if (only) {
            single.support.push_back(PhysicalTerm{{term.jk[static_cast<std::size_t>(mode)]}});
        }
    }
    return single;
}

} // namespace

double overlap_phase_bound(const FirstqConfig& cfg, const Frame& frame)
{
    if (!cfg.reference_vacuum) {
        return 0.0;
    }
    double p0 = 1.0;
    for (double r : frame.signed_r) {
        p0 /= std::cosh(r);
    }
    if (!(p0 > 4.0 - 2.0 * std::sqrt(3.0))) {
        throw BracketError("reference-vacuum overlap " + std::to_string(p0) +
                           " violates the RPE overlap constraint p0 > 4 - 2 sqrt 3 (u < 1.866)");
    }
    return std::asin((1.0 - p0) / p0);
}

namespace {

RVector signal_row(const RecoveryPlan& plan, std::pair<int, int> key)
{
    const int col = plan.parameterization().column(TermKey::single(0, key.first, key.second), 0);
    if (col < 0) {
        throw ConfigError("signal key is not learnable at order d");
    }
    return plan.map().row(col).transpose();
}

} // namespace

RpeConfig signal_rpe_config(const FirstqConfig& cfg, std::pair<int, int> key, double eps, double spread, int modes,
                            double phase_bound)
{
    const RecoveryPlan plan(cfg.d, cfg.r_min, cfg.r_max);
    const RVector row = signal_row(plan, key);
    const double factor = std::sqrt(row.squaredNorm() + row.sum() * row.sum());
    return rpe_for_point_precision(cfg, eps / factor, spread, modes, phase_bound);
}

SignalSample signal_measure(SimulatedDevice& device, int mode, const Frame& frame, double r, std::pair<int, int> key,
                            double eps, const FirstqConfig& cfg, std::uint64_t stream, double spread)
{
    Frame at = frame;
    at.signed_r[static_cast<std::size_t>(mode)] = r;
    const double phase_bound = overlap_phase_bound(cfg, at);
    const RpeConfig rpe = signal_rpe_config(cfg, key, eps, spread, device.modes(), phase_bound);
    LearnOptions o;
    o.r_min = cfg.r_min;
    o.r_max = cfg.r_max;
    o.frame = at;
    o.estimate_offset = true;
    o.workers = cfg.workers;
    o.retries = cfg.retries;
    o.stream = stream;
    const LearnedCoefficients lc = learn_single_mode(device, mode, cfg.d, rpe, o);
    const int col = lc.param.column(TermKey::single(mode, key.first, key.second), 0);
    SignalSample s;
    s.r = r;
    s.f = lc.params(col);
    s.se = std::sqrt(std::max(0.0, lc.param_cov(col, col)));
    if (phase_bound > 0.0) {
        // Worst-case propagation of the per-point bias through the map row and the offset.
        const RVector row = signal_row(RecoveryPlan(cfg.d, cfg.r_min, cfg.r_max), key);
        s.se = std::hypot(s.se, point_bias(rpe, phase_bound) * (row.cwiseAbs().sum() + std::abs(row.sum())));
    }
    s.target = eps;
    s.K = rpe.K;
    s.time_cost = lc.time_cost;
    s.shots = lc.shots;
    return s;
}

BisectionState bisection_search(SimulatedDevice& device, const BisectionOptions& options)
{
    check_bracket(options);
    const Frame frame = frame_for(options, device.modes());
    const double spread = options.hi - options.lo;
    BisectionState st;
    st.lo = options.lo;
    st.hi = options.hi;
    std::uint64_t counter = 0;
    const std::uint64_t base_stream = hash_combine(options.cfg.stream, kBisectTag, static_cast<std::uint64_t>(options.mode));

    auto measure = [&](double r, double eps) {
        SignalSample s = signal_measure(device, options.mode, frame, r, options.signal_key, eps, options.cfg,
                                        hash_combine(base_stream, counter++), spread);
        st.time_cost += s.time_cost;
        st.shots += s.shots;
        st.history.push_back(s);
        return s;
    };
    // One re-run at 4x precision on an ambiguous sign.
    auto resolved = [&](double r, double eps) {
        SignalSample s = measure(r, eps);
        if (s.ambiguous()) {
            ++st.reruns;
            s = measure(r, eps / 4.0);
        }
        return s;
    };

    const SignalSample f_lo = resolved(st.lo, options.endpoint_precision);
    const SignalSample f_hi = resolved(st.hi, options.endpoint_precision);
    if (f_lo.ambiguous() || f_hi.ambiguous()) {
        throw BracketError("bracket endpoint signal not resolved above 3 standard errors");
    }
    if ((f_lo.f > 0.0) == (f_hi.f > 0.0)) {
        throw BracketError("bracket endpoints give the same signal sign");
    }
    st.slope = (f_hi.f - f_lo.f) / (st.hi - st.lo);
    st.eps_r = options.eps_r > 0.0 ? options.eps_r : options.eps_g / (4.0 * std::abs(st.slope));
    st.planned = st.width() > st.eps_r ? static_cast<int>(std::ceil(std::log2(st.width() / st.eps_r))) : 0;
    const bool lo_positive = f_lo.f > 0.0;
    // Per-iteration precision |slope| w / divisor, rescaled by eps_r / (2 w_final) in [1/2, 1) so the
    // total cost tracks eps_r continuously rather than the rounded final width.
    const double w_final = (options.hi - options.lo) / std::ldexp(1.0, st.planned);
    const double rescale = std::min(1.0, st.eps_r / (2.0 * w_final));
    auto precision = [&] { return rescale * std::abs(st.slope) * st.width() / options.precision_divisor; };

    while (st.iterations < st.planned) {
        const double mid = st.estimate();
        const SignalSample s = resolved(mid, precision());
        if (s.ambiguous()) {
            st.golden = true;
            break;
        }
        if ((s.f > 0.0) == lo_positive) {
            st.lo = mid;
        } else {
            st.hi = mid;
        }
        ++st.iterations;
    }

    if (st.golden) {
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        auto abs_f = [&](double r) {
            return std::abs(measure(r, precision()).f);
        };
        double a = st.lo, b = st.hi;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = abs_f(c), fd = abs_f(d);
        while (b - a > st.eps_r) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                st.lo = a;
                st.hi = b;
                c = b - inv_phi * (b - a);
                fc = abs_f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                st.lo = a;
                st.hi = b;
                d = a + inv_phi * (b - a);
                fd = abs_f(d);
            }
            ++st.iterations;
        }
        st.lo = a;
        st.hi = b;
    }
    return st;
}

FirstqResult learn_firstq(SimulatedDevice& device, const PhysicalModel& model, const FirstqOptions& options)
{
    if (model.modes != 1 || device.modes() != 1) {
        throw ConfigError("learn_firstq handles one mode; use parallel_two_mode_search for two");
    }
    const FirstqConfig& cfg = options.search.cfg;
    if (model.max_order() > cfg.d) {
        throw ConfigError("physical model order exceeds the learner order d");
    }
    BisectionOptions search = options.search;
    search.eps_g = options.eps_g;

    FirstqResult out;
    out.search = bisection_search(device, search);
    out.frame = Frame{{out.search.estimate()}};

    const double eps_c = options.eps_g / g_error_factor(cfg, model);
    const double phase_bound = overlap_phase_bound(cfg, out.frame);
    out.final_rpe = rpe_for_point_precision(cfg, eps_c, search.hi - search.lo, 1, phase_bound);
    LearnOptions o;
    o.r_min = cfg.r_min;
    o.r_max = cfg.r_max;
    o.frame = out.frame;
    o.estimate_offset = true;
    o.workers = cfg.workers;
    o.retries = cfg.retries;
    o.stream = hash_combine(cfg.stream, kFinalTag);
    out.final_learn = learn_single_mode(device, 0, cfg.d, out.final_rpe, o);
    if (phase_bound > 0.0) {
        // Treat the per-point bias bound as an extra independent error, common part included.
        const RecoveryPlan plan(cfg.d, cfg.r_min, cfg.r_max);
        const double b = point_bias(out.final_rpe, phase_bound);
        out.final_learn.param_cov += propagate_covariance(plan.map(), RVector::Constant(plan.point_count(), b * b), b * b);
    }
    out.g = fit_physical(out.final_learn.param, out.final_learn.params, out.final_learn.param_cov, model);
    if (options.frame_uncertainty) {
        add_frame_uncertainty(out.g, out.final_learn, model, {out.search.width() / std::sqrt(12.0)});
    }
    out.time_cost = out.search.time_cost + out.final_learn.time_cost;
    out.shots = out.search.shots + out.final_learn.shots;
    return out;
}

TwoModeResult parallel_two_mode_search(SimulatedDevice& device, const PhysicalModel& model,
                                       const TwoModeOptions& options)
{
    if (model.modes != 2 || device.modes() != 2) {
        throw ConfigError("parallel_two_mode_search handles exactly two modes");
    }
    TwoModeResult out;
    std::array<BisectionOptions, 2> searches = options.search;
    for (int m = 0; m < 2; ++m) {
        searches[static_cast<std::size_t>(m)].mode = m;
        searches[static_cast<std::size_t>(m)].eps_g = options.eps_g;
    }
    parallel_for(2, 2, [&](std::size_t m) { out.search[m] = bisection_search(device, searches[m]); });
    out.frame = Frame{{out.search[0].estimate(), out.search[1].estimate()}};

    const FirstqConfig& cfg = searches[0].cfg;
    double factor = 0.0;
    for (int m = 0; m < 2; ++m) {
        factor = std::max(factor, g_error_factor(cfg, restrict_to_mode(model, m)));
    }
    const double spread = std::max(searches[0].hi - searches[0].lo, searches[1].hi - searches[1].lo);
    out.final_rpe =
        rpe_for_point_precision(cfg, options.eps_g / factor, spread, 2, overlap_phase_bound(cfg, out.frame));

    MultiModeOptions mo;
    mo.base.r_min = cfg.r_min;
    mo.base.r_max = cfg.r_max;
    mo.base.frame = out.frame;
    mo.base.estimate_offset = true;
    mo.base.workers = cfg.workers;
    mo.base.retries = cfg.retries;
    mo.base.stream = hash_combine(cfg.stream, kFinalTag, 2);
    mo.coupling_order = options.coupling_order;
    out.final_learn = learn_multimode_hierarchical(device, cfg.d, out.final_rpe, mo);
    out.g = fit_physical(out.final_learn.param, out.final_learn.params, out.final_learn.param_cov, model);
    if (options.frame_uncertainty) {
        add_frame_uncertainty(out.g, out.final_learn, model,
                              {out.search[0].width() / std::sqrt(12.0), out.search[1].width() / std::sqrt(12.0)});
    }
    out.time_cost = out.search[0].time_cost + out.search[1].time_cost + out.final_learn.time_cost;
    out.shots = out.search[0].shots + out.search[1].shots + out.final_learn.shots;
    return out;
}

} // namespace drut
