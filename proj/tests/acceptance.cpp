// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails. `--only N` runs one criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "device_oracle.hpp"
#include "drut/experiments.hpp"
#include "drut/firstq.hpp"
#include "drut/protocol.hpp"
#include "drut/recovery.hpp"
#include "drut/rng.hpp"
#include "oracles.hpp"

using namespace drut;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SimulatedDevice::Options device_options(ExecutionMode mode, std::uint64_t seed, int n_max = 0, double beta_max = 1.2)
{
    SimulatedDevice::Options o;
    o.mode = mode;
    o.seed = seed;
    o.n_max = n_max;
    o.beta_max = beta_max;
    return o;
}

// 1. constant_term against the analytic projection and the 720-angle quadrature.
Outcome constant_term_oracle()
{
    std::mt19937_64 rng(20261015);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_exact = 0.0, worst_quad = 0.0;
    const FockCutoff cutoff(40);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const int d = 1 + static_cast<int>(s % 4);
        const HamiltonianSpec spec = random_spec(1, d, 1.0, 1.0, 1000 + s);
        for (int b = 0; b < 20; ++b) {
            const DisplacementVector beta{std::polar(1.5 * std::sqrt(unit(rng)), 2.0 * kPi * unit(rng))};
            const double c = constant_term(spec, beta);
            const double vac = effective_exact(spec, beta, cutoff)(0, 0).real() - spec.identity_offset;
            worst_exact = std::max(worst_exact, std::abs(c - vac));
            const CMatrix quad = testing::quadrature_average(spec, beta, cutoff);
            worst_quad = std::max(worst_quad, std::abs(quad(0, 0) - Complex(c + spec.identity_offset)));
        }
    }
    return {worst_exact <= 1e-10 && worst_quad <= 1e-8,
            fmt("50 specs x 20 beta: max |C - <vac|H_eff|vac>| = %.2e (<= 1e-10), max |C - quadrature| = %.2e "
                "(<= 1e-8)",
                worst_exact, worst_quad)};
}

// 2. Noiseless Algorithm-1 recovery.
Outcome noiseless_exactness()
{
    double worst = 0.0;
    int specs = 0;
    for (int d = 1; d <= 3; ++d) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const HamiltonianSpec spec = random_spec(1, d, 1.0, 1.0, 2000 + 10 * d + s);
            SimulatedDevice dev(spec, device_options(ExecutionMode::ExactProbability, s));
            const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(d, 1.0, 1.0), 6, 20);
            const LearnedCoefficients lc = learn_single_mode(dev, 0, d, cfg);
            for (const auto& key : admissible_keys(1, d)) {
                worst = std::max(worst, std::abs(lc.value(key) - spec.coefficient(key)));
            }
            ++specs;
        }
    }
    return {worst <= 1e-8, fmt("%d random specs, d = 1..3: max coefficient error %.2e (<= 1e-8)", specs, worst)};
}

// 3. RPE RMSE against evolution time.
Outcome heisenberg_scaling()
{
    const HamiltonianSpec spec = random_spec(1, 3, 1.0, 1.0, 5);
    const DisplacementVector beta{Complex(0.6, 0.3)};
    RpeConfig base = RpeConfig::from_bound(default_c_bound(3, 1.0, 1.0), 0, 200);
    base.strict = false;
    const auto rows = heisenberg_sweep(spec, beta, 4, 11, base, 100, device_options(ExecutionMode::Marginal, 3),
                                       tag("acceptance-sweep"), 1);
    std::vector<double> t, e;
    for (const auto& r : rows) {
        t.push_back(r.total_time);
        e.push_back(r.rmse);
    }
    const double slope = loglog_slope(t, e);
    return {slope >= -1.15 && slope <= -0.85,
            fmt("K = 4..11, M = 200, 100 seeds: log-log slope %.3f in [-1.15, -0.85] (rmse %.2e -> %.2e)", slope,
                e.front(), e.back())};
}

// 4. Finite-L bias against the effective-Hamiltonian limit.
Outcome trotter_control()
{
    const HamiltonianSpec spec = random_spec(1, 3, 1.0, 1.0, 44);
    SimulatedDevice dev(spec, device_options(ExecutionMode::Marginal, 8, 30));
    ShotRequest r;
    r.kappa = 2;
    r.t0 = 0.5;
    r.beta = {std::polar(0.8, 0.5)};
    const Complex limit = testing::DeviceOracle::limit_amplitude(dev, r);
    std::vector<double> bias;
    std::string ratios;
    bool halves = true;
    for (std::int64_t l : {32, 64, 128, 256}) {
        // E[P_hat] in the X and Y bases is (1 + Re/Im A_L)/2; both biases together are |A_L - A|/2.
        bias.push_back(0.5 * std::abs(testing::DeviceOracle::finite_l_amplitude(dev, r, l) - limit));
        if (bias.size() > 1) {
            const double q = bias.back() / bias[bias.size() - 2];
            halves = halves && std::abs(q - 0.5) <= 0.15;
            ratios += fmt("%s%.3f", ratios.empty() ? "" : ", ", q);
        }
    }
    // Sampled P_hat from literal trajectories at L = 32 agrees with the oracle expectation.
    SimulatedDevice traj(spec, device_options(ExecutionMode::Trajectory, 9, 30));
    ShotRequest tr = r;
    tr.trotter_steps = 32;
    const std::uint64_t shots = 20000;
    const double p32 = 0.5 * (1.0 + testing::DeviceOracle::finite_l_amplitude(dev, r, 32).real());
    const double phat = traj.run_shot_batch(tr, shots).p_hat();
    const double z = (phat - p32) / std::sqrt(p32 * (1 - p32) / static_cast<double>(shots));
    const bool sampled = std::abs(z) < 4.0;
    return {halves && sampled,
            fmt("bias at L = 32..256: %.2e %.2e %.2e %.2e; successive ratios %s (0.5 +- 30%%); trajectory "
                "P_hat at L = 32 vs expectation z = %.2f",
                bias[0], bias[1], bias[2], bias[3], ratios.c_str(), z)};
}

// 5. Monte-Carlo covariance of recovered coefficients.
Outcome covariance_propagation()
{
    const int d = 3;
    const double eps = 0.01;
    const RecoveryPlan plan(d);
    const HamiltonianSpec spec = random_spec(1, d, 1.0, 1.0, 55);
    RVector c(plan.point_count());
    for (int i = 0; i < plan.point_count(); ++i) {
        c(i) = constant_term(spec, {plan.points()[static_cast<std::size_t>(i)]});
    }
    const RVector x0 = plan.map() * c;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, eps);
    const int trials = 10000;
    const auto n = plan.parameterization().size();
    RMatrix acc = RMatrix::Zero(n, n);
    RVector mean = RVector::Zero(n);
    for (int t = 0; t < trials; ++t) {
        RVector y = c;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y(i) += noise(rng);
        }
        const RVector dx = plan.map() * y - x0;
        acc += dx * dx.transpose();
        mean += dx;
    }
    mean /= trials;
    const RMatrix emp = (acc - trials * mean * mean.transpose()) / (trials - 1);
    const RMatrix pred = predict_covariance(plan, eps).param_cov;
    const double rel = (emp - pred).norm() / pred.norm();
    return {rel <= 0.1, fmt("d = 3, eps_C = %.0e, 1e4 trials: relative Frobenius difference %.4f (<= 0.10)", eps, rel)};
}

// 6. Hierarchical versus simultaneous ordering.
Outcome appendix_ordering()
{
    const int d = 2;
    const auto grid = joint_grid(2, d);
    const RMatrix ms = PairedParameterization(single_mode_keys(2, d)).design(grid);
    const RMatrix mc = PairedParameterization(coupling_keys(2, d)).design(grid);
    const OrderingReport rep = covariance_compare(ms, mc, 0.01);
    const bool analytic =
        rep.min_eig_singles >= -1e-10 && rep.min_eig_couplings >= -1e-10 && rep.woodbury_residual < 1e-9;

    const HamiltonianSpec spec = random_spec(2, d, 1.0, 1.0, 66);
    RpeConfig cfg = RpeConfig::from_bound(auto_c_bound(2, d, 1.0, 1.0), 6, 100);
    cfg.strict = false;
    MultiModeOptions mo;
    const auto start = std::chrono::steady_clock::now();
    const auto params = empirical_ordering(spec, d, cfg, mo, 500, device_options(ExecutionMode::Marginal, 6),
                                           tag("acceptance-ordering"), 1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    int ordered = 0;
    double worst_z = INFINITY;
    for (const auto& p : params) {
        ordered += p.ordered(2.0) ? 1 : 0;
        if (p.se_diff > 0.0) {
            worst_z = std::min(worst_z, (p.var_sim - p.var_hier) / p.se_diff);
        }
    }
    const bool empirical = ordered == static_cast<int>(params.size());
    return {analytic && empirical,
            fmt("min eig singles %.2e, couplings %.2e (>= -1e-10); Woodbury residual %.2e (< 1e-9); 500 runs: "
                "%d/%zu parameters ordered within 2 sigma (min z %.2f, %.0f s)",
                rep.min_eig_singles, rep.min_eig_couplings, rep.woodbury_residual, ordered, params.size(), worst_z,
                seconds)};
}

// 7. SPAM bound.
Outcome spam_bound_check()
{
    const int d = 3;
    const HamiltonianSpec spec = random_spec(1, d, 1.0, 1.0, 9);
    const RpeConfig cfg = RpeConfig::from_bound(default_c_bound(d, 1.0, 1.05), 4, 20);
    std::vector<double> med;
    int within = 0, total = 0;
    double worst = 0.0;
    for (double norm : {1e-3, 1e-2}) {
        std::vector<double> observed;
        for (std::uint64_t t = 0; t < 50; ++t) {
            const SpamTrial trial = spam_trial(spec, d, norm, hash_combine(tag("acceptance-spam"), t), cfg);
            observed.push_back(trial.observed);
            within += trial.observed <= trial.report.bound ? 1 : 0;
            worst = std::max(worst, trial.observed / trial.report.bound);
            ++total;
        }
        med.push_back(median(observed));
    }
    const double ratio = med[1] / med[0];
    return {within == total && std::abs(ratio - 10.0) <= 2.0,
            fmt("%d/%d trials within the bound (max observed/bound %.3f); median ratio %.3f (10 +- 20%%)", within,
                total, worst, ratio)};
}

struct FirstqRun {
    FirstqResult result;
    PhysicalCoefficients truth;
    double max_z = 0.0;
};

FirstqRun firstq_run(double ratio, double eps_g, ExecutionMode mode, std::uint64_t seed)
{
    const HamiltonianSpec spec_b = firstq_example_spec(1, 1.0, 0.2, 0.0);
    const double s_true = frame_from_ratio(ratio, 1.0).signed_r;
    SimulatedDevice dev(device_spec_from_physical(spec_b, {s_true}), device_options(mode, seed));
    const PhysicalModel model = PhysicalModel::single_mode_example();
    FirstqOptions fo;
    fo.search.lo = -0.3;
    fo.search.hi = 0.3;
    fo.search.cfg.d = 4;
    fo.search.cfg.M = 100;
    fo.search.cfg.g_max = 1.5;
    fo.search.cfg.workers = 1;
    fo.search.cfg.stream = seed;
    fo.eps_g = eps_g;
    FirstqRun run;
    run.result = learn_firstq(dev, model, fo);
    run.truth = physical_from_spec(spec_b, model);
    for (const auto& [term, value] : run.result.g.values) {
        const double se = std::hypot(run.result.g.std_error.at(term), 1e-9);
        run.max_z = std::max(run.max_z, std::abs(value - run.truth.at(term)) / se);
    }
    return run;
}

// 8. First-quantization end to end.
Outcome firstq_end_to_end()
{
    bool ok = true;
    std::string detail;
    for (double ratio : {0.8, 1.3}) {
        const FirstqRun exact = firstq_run(ratio, 1e-2, ExecutionMode::ExactProbability, 1);
        const bool exact_iter = exact.result.search.iterations == exact.result.search.planned;
        const FirstqRun shots = firstq_run(ratio, 1e-2, ExecutionMode::Marginal, 2);
        const bool shot_iter = shots.result.search.iterations <= 2 * shots.result.search.planned;
        const bool g_ok = shots.max_z <= 3.0;
        ok = ok && exact_iter && shot_iter && g_ok;
        detail += fmt("ratio %.1f: noiseless %d/%d iterations, shots %d (<= 2 x %d), max |z| %.2f; ", ratio,
                      exact.result.search.iterations, exact.result.search.planned, shots.result.search.iterations,
                      shots.result.search.planned, shots.max_z);
    }
    std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    std::vector<double> time;
    for (double e : eps) {
        time.push_back(firstq_run(1.3, e, ExecutionMode::Marginal, 3).result.time_cost);
    }
    const double slope = loglog_slope(eps, time);
    ok = ok && slope >= -1.2 && slope <= -0.85;
    detail += fmt("time vs eps_G slope %.3f in [-1.2, -0.85]", slope);
    return {ok, detail};
}

Json firstq_doc(double ratio, std::pair<double, double> bracket, bool reference_vacuum)
{
    Json doc;
    doc["experiment"] = "learn-firstq";
    doc["seed"] = 3;
    doc["workers"] = 1;
    doc["firstq"] = {{"modes", 1},
                     {"ratios", ratio},
                     {"bracket", Json::array({bracket.first, bracket.second})},
                     {"eps_g", 0.01},
                     {"reference_vacuum", reference_vacuum}};
    return doc;
}

// 9. Overlap feasibility gate.
Outcome overlap_gate()
{
    int rejected = 0;
    std::string message;
    const double u_edge = overlap_threshold();
    const double ratio_edge = std::exp(2.0 * std::acosh(u_edge));
    const std::vector<Json> infeasible{
        firstq_doc(16.0, {1.0, 1.5}, true),
        firstq_doc(ratio_edge, {1.0, 1.35}, true),
        firstq_doc(1.3, {-0.3, 1.4}, false),
    };
    for (const auto& doc : infeasible) {
        try {
            validate(ExperimentConfig::parse(doc));
        } catch (const ConfigError& e) {
            ++rejected;
            message = e.what();
        }
    }
    const bool cites = message.find("u < 1/(4 - 2 sqrt 3) ~ 1.866") != std::string::npos;

    const double ratio_17 = std::exp(2.0 * std::acosh(1.7));
    Json ok_doc = firstq_doc(ratio_17, {1.0, 1.2}, true);
    ok_doc["device"] = {{"n_max", 100}};
    bool ran = false;
    double max_z = 0.0;
    std::string error;
    try {
        const RunReport rep = run(ExperimentConfig::parse(ok_doc));
        max_z = rep.doc["results"]["max_abs_z"].get<double>();
        ran = true;
    } catch (const std::exception& e) {
        error = e.what();
    }
    return {rejected == 3 && cites && ran,
            fmt("%d/3 infeasible configs rejected (constraint cited: %s); u = 1.70 config %s (max |z| %.2f)%s",
                rejected, cites ? "yes" : "no", ran ? "ran" : "failed", max_z, error.c_str())};
}

// 10. Two-mode parallel search.
Outcome two_mode_search()
{
    const std::vector<double> s_true{frame_from_ratio(1.2, 1.0).signed_r, frame_from_ratio(0.8, 1.0).signed_r};
    const PhysicalModel model = PhysicalModel::two_mode_example();
    const HamiltonianSpec spec_b = firstq_example_spec(2, 1.0, 0.2, 0.3);
    SimulatedDevice dev(device_spec_from_physical(spec_b, s_true), device_options(ExecutionMode::Marginal, 5, 22));
    BisectionOptions b;
    b.lo = -0.3;
    b.hi = 0.3;
    b.cfg.d = 4;
    b.cfg.M = 100;
    b.cfg.g_max = 1.5;
    b.cfg.workers = 1;
    b.cfg.stream = 5;
    TwoModeOptions to;
    to.search = {b, b};
    to.eps_g = 1e-2;
    const TwoModeResult r = parallel_two_mode_search(dev, model, to);
    const PhysicalCoefficients truth = physical_from_spec(spec_b, model);
    int within = 0;
    double max_z = 0.0;
    for (const auto& [term, value] : r.g.values) {
        const double z = std::abs(value - truth.at(term)) / std::hypot(r.g.std_error.at(term), 1e-9);
        within += z <= 3.0 ? 1 : 0;
        max_z = std::max(max_z, z);
    }

    // Step 1 in the true joint frame for coupling 0 and 0.3, same shot streams.
    RpeConfig cfg = RpeConfig::from_bound(4.0 * default_c_bound(4, 1.5, 1.0, 6.0), 8, 200);
    cfg.strict = false;
    MultiModeOptions mo;
    mo.base.frame = Frame{s_true};
    mo.base.estimate_offset = true;
    mo.base.workers = 1;
    mo.base.stream = tag("acceptance-step1");
    std::vector<LearnedCoefficients> step1;
    for (double coupling : {0.0, 0.3}) {
        SimulatedDevice d(device_spec_from_physical(firstq_example_spec(2, 1.0, 0.2, coupling), s_true),
                          device_options(ExecutionMode::Marginal, 12, 22));
        LearnOptions lo = mo.base;
        LearnedCoefficients joint;
        for (int m = 0; m < 2; ++m) {
            lo.stream = hash_combine(mo.base.stream, static_cast<std::uint64_t>(m));
            const LearnedCoefficients lc = learn_single_mode(d, m, 4, cfg, lo);
            for (const auto& [key, v] : lc.values) {
                joint.values[key] = v;
                joint.std_error[key] = lc.std_error.at(key);
            }
        }
        step1.push_back(joint);
    }
    int invariant = 0, compared = 0;
    double worst = 0.0;
    for (const auto& [key, v] : step1[0].values) {
        const double se = std::hypot(step1[0].std_error.at(key), step1[1].std_error.at(key));
        const double z = std::abs(v - step1[1].values.at(key)) / std::hypot(se, 1e-12);
        invariant += z <= 2.0 ? 1 : 0;
        worst = std::max(worst, z);
        ++compared;
    }
    return {within == static_cast<int>(truth.size()) && invariant == compared,
            fmt("%d/%zu physical coefficients within 3 SE (max |z| %.2f); Step-1 singles invariant under coupling "
                "0 vs 0.3: %d/%d within 2 sigma (max %.2f sigma)",
                within, truth.size(), max_z, invariant, compared, worst)};
}

} // namespace

int main(int argc, char** argv)
{
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
            return 2;
        }
    }
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"constant-term oracle equivalence", constant_term_oracle},
        {"noiseless pipeline exactness", noiseless_exactness},
        {"Heisenberg scaling", heisenberg_scaling},
        {"finite-L Trotter control", trotter_control},
        {"covariance propagation", covariance_propagation},
        {"hierarchical <= simultaneous ordering", appendix_ordering},
        {"SPAM bound", spam_bound_check},
        {"first-quantization end to end", firstq_end_to_end},
        {"overlap feasibility gate", overlap_gate},
        {"two-mode parallel search", two_mode_search},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (only != 0 && only != id) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str(), s);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
