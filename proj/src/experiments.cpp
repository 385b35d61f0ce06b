#include "drut/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "drut/bogoliubov.hpp"
#include "drut/fockspace.hpp"
#include "drut/parallel.hpp"
#include "drut/rng.hpp"
#include "drut/spec_io.hpp"

namespace drut {

namespace {

const std::set<std::string> kKinds{"learn-single",     "learn-multi",        "learn-firstq",
                                   "sweep-heisenberg", "compare-covariance", "spam-sweep"};

const std::map<std::string, std::set<std::string>> kSections{
    {"device", {"mode", "n_max", "beta_max", "trotter_factor"}},
    {"rpe", {"K", "M", "t0", "c_bound", "strict", "trotter_steps"}},
    {"grid", {"d", "r_min", "r_max", "replicas", "estimate_offset"}},
    {"multi", {"strategy", "step1_replicas"}},
    {"noise", {"delta_beta", "state_prep_infidelity", "prepare_reference_vacuum"}},
    {"sweep", {"k_min", "k_max", "seeds", "beta"}},
    {"covariance", {"eps_c", "runs"}},
    {"spam", {"norms", "trials"}},
    {"firstq",
     {"modes", "g11", "g22", "coupling", "ratios", "m0w0", "bracket", "eps_g", "eps_r", "d", "M", "g_max",
      "signal_key", "reference_vacuum", "coupling_order"}},
    {"output", {"json", "csv"}},
};

const std::set<std::string> kTopLevel{"experiment", "seed", "workers", "noiseless", "spec"};

// Typed field access; every failure names the offending field.

const Json* field(const Json& section, const char* key)
{
    if (!section.is_object()) {
        return nullptr;
    }
    const auto it = section.find(key);
    return it == section.end() ? nullptr : &*it;
}

double get_number(const Json& section, const std::string& where, const char* key, double fallback)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (!v->is_number()) {
        throw ConfigError(where + "." + key + " must be a number");
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(where + "." + key + " must be finite");
    }
    return x;
}

double get_positive(const Json& section, const std::string& where, const char* key, double fallback)
{
    const double x = get_number(section, where, key, fallback);
    if (!(x > 0.0)) {
        throw ConfigError(where + "." + key + " must be > 0");
    }
    return x;
}

int get_int(const Json& section, const std::string& where, const char* key, int fallback, int lo, int hi)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (!v->is_number_integer()) {
        throw ConfigError(where + "." + key + " must be an integer");
    }
    const auto x = v->get<std::int64_t>();
    if (x < lo || x > hi) {
        throw ConfigError(where + "." + key + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "]");
    }
    return static_cast<int>(x);
}

bool get_bool(const Json& section, const std::string& where, const char* key, bool fallback)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (!v->is_boolean()) {
        throw ConfigError(where + "." + key + " must be true or false");
    }
    return v->get<bool>();
}

Complex get_complex(const Json& section, const std::string& where, const char* key, Complex fallback)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (v->is_number()) {
        return Complex(v->get<double>(), 0.0);
    }
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        throw ConfigError(where + "." + key + " must be a number or [re, im]");
    }
    return Complex((*v)[0].get<double>(), (*v)[1].get<double>());
}

std::vector<double> get_numbers(const Json& section, const std::string& where, const char* key,
                                std::vector<double> fallback)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (v->is_number()) {
        return {v->get<double>()};
    }
    if (!v->is_array() || v->empty()) {
        throw ConfigError(where + "." + key + " must be a number or a non-empty array of numbers");
    }
    std::vector<double> out;
    for (const auto& x : *v) {
        if (!x.is_number()) {
            throw ConfigError(where + "." + key + " must contain only numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

std::string get_string(const Json& section, const std::string& where, const char* key, std::string fallback)
{
    const Json* v = field(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (!v->is_string()) {
        throw ConfigError(where + "." + key + " must be a string");
    }
    return v->get<std::string>();
}

const Json& section(const Json& doc, const char* name)
{
    static const Json empty = Json::object();
    const auto it = doc.find(name);
    return it == doc.end() ? empty : *it;
}

struct DeviceSettings {
    ExecutionMode mode = ExecutionMode::Marginal;
    int n_max = 0;
    double beta_max = 1.2;
    double trotter_factor = 32.0;
};

struct RpeSettings {
    int K = 8;
    int M = 200;
    std::optional<double> t0;
    std::optional<double> c_bound;
    bool strict = true;
    std::int64_t trotter_steps = 0;
};

struct GridSettings {
    std::optional<int> d;
    double r_min = 0.2;
    double r_max = 1.0;
    int replicas = 1;
    bool estimate_offset = false;
};

struct MultiSettings {
    std::string strategy = "both";
    int step1_replicas = 0;
};

struct NoiseSettings {
    Complex delta_beta{0.0, 0.0};
    double state_prep_infidelity = 0.0;
    bool prepare_reference_vacuum = false;
};

struct SweepSettings {
    int k_min = 4;
    int k_max = 10;
    int seeds = 20;
    Complex beta{0.6, 0.3};
};

struct CovarianceSettings {
    double eps_c = 1e-2;
    int runs = 0;
};

struct SpamSettings {
    std::vector<double> norms{1e-3, 1e-2};
    int trials = 50;
};

struct FirstqSettings {
    int modes = 1;
    double g11 = 1.0;
    double g22 = 0.2;
    double coupling = 0.0;
    std::vector<double> ratios;
    std::vector<double> m0w0;
    std::vector<std::pair<double, double>> bracket;
    double eps_g = 1e-2;
    double eps_r = 0.0;
    int d = 4;
    int M = 100;
    double g_max = 1.5;
    std::pair<int, int> signal_key{2, 0};
    bool reference_vacuum = false;
    int coupling_order = 2;
};

struct Settings {
    std::string kind;
    DeviceSettings device;
    RpeSettings rpe;
    GridSettings grid;
    MultiSettings multi;
    NoiseSettings noise;
    SweepSettings sweep;
    CovarianceSettings covariance;
    SpamSettings spam;
    FirstqSettings firstq;
};

void check_keys(const Json& doc)
{
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (kTopLevel.count(key) != 0) {
            continue;
        }
        const auto it = kSections.find(key);
        if (it == kSections.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        if (!value.is_object()) {
            throw ConfigError("config section '" + key + "' must be an object");
        }
        for (const auto& [sub, unused] : value.items()) {
            (void)unused;
            if (it->second.count(sub) == 0) {
                throw ConfigError("unknown config key '" + key + "." + sub + "'");
            }
        }
    }
}

FirstqSettings parse_firstq(const Json& s)
{
    const std::string w = "firstq";
    FirstqSettings f;
    f.modes = get_int(s, w, "modes", 1, 1, 2);
    f.g11 = get_number(s, w, "g11", 1.0);
    f.g22 = get_number(s, w, "g22", 0.2);
    f.coupling = get_number(s, w, "coupling", 0.0);
    if (f.modes == 1 && f.coupling != 0.0) {
        throw ConfigError("firstq.coupling requires firstq.modes = 2");
    }
    const auto n = static_cast<std::size_t>(f.modes);
    auto per_mode = [&](const char* key, double fallback) {
        auto v = get_numbers(s, w, key, {fallback});
        if (v.size() == 1) {
            v.assign(n, v.front());
        }
        if (v.size() != n) {
            throw ConfigError(w + "." + key + " needs one entry per mode");
        }
        for (double x : v) {
            if (!(x > 0.0) || !std::isfinite(x)) {
                throw ConfigError(w + "." + key + " entries must be positive");
            }
        }
        return v;
    };
    if (field(s, "ratios") == nullptr) {
        throw ConfigError("firstq.ratios (hidden m0w0/mw per mode) is required");
    }
    f.ratios = per_mode("ratios", 1.0);
    f.m0w0 = per_mode("m0w0", 1.0);
    const Json* b = field(s, "bracket");
    if (b == nullptr) {
        f.bracket.assign(n, {-0.3, 0.3});
    } else {
        auto edge_pair = [&](const Json& e) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                throw ConfigError("firstq.bracket must be [lo, hi] or one [lo, hi] per mode");
            }
            const double lo = e[0].get<double>();
            const double hi = e[1].get<double>();
            if (!(lo < hi)) {
                throw ConfigError("firstq.bracket needs lo < hi");
            }
            return std::pair{lo, hi};
        };
        if (b->is_array() && !b->empty() && (*b)[0].is_array()) {
            for (const auto& e : *b) {
                f.bracket.push_back(edge_pair(e));
            }
            if (f.bracket.size() != n) {
                throw ConfigError("firstq.bracket needs one [lo, hi] per mode");
            }
        } else {
            f.bracket.assign(n, edge_pair(*b));
        }
    }
    f.eps_g = get_positive(s, w, "eps_g", 1e-2);
    f.eps_r = get_number(s, w, "eps_r", 0.0);
    if (f.eps_r < 0.0) {
        throw ConfigError("firstq.eps_r must be >= 0 (0 derives it from eps_g)");
    }
    f.d = get_int(s, w, "d", 4, 2, 8);
    f.M = get_int(s, w, "M", 100, 20, 1000000);
    f.g_max = get_positive(s, w, "g_max", 1.5);
    if (const Json* k = field(s, "signal_key")) {
        if (!k->is_array() || k->size() != 2 || !(*k)[0].is_number_integer() || !(*k)[1].is_number_integer()) {
            throw ConfigError("firstq.signal_key must be [p, q]");
        }
        f.signal_key = {(*k)[0].get<int>(), (*k)[1].get<int>()};
        if (f.signal_key.first < 0 || f.signal_key.second < 0 || f.signal_key.first + f.signal_key.second < 1 ||
            f.signal_key.first + f.signal_key.second > f.d) {
            throw ConfigError("firstq.signal_key must have 1 <= p + q <= d");
        }
    }
    f.reference_vacuum = get_bool(s, w, "reference_vacuum", false);
    f.coupling_order = get_int(s, w, "coupling_order", 2, 1, f.d);
    return f;
}

Settings parse_settings(const Json& doc)
{
    check_keys(doc);
    Settings s;
    s.kind = get_string(doc, "config", "experiment", "");
    if (kKinds.count(s.kind) == 0) {
        throw ConfigError("config.experiment must be one of learn-single, learn-multi, learn-firstq, "
                          "sweep-heisenberg, compare-covariance, spam-sweep (got '" +
                          s.kind + "')");
    }

    const Json& dev = section(doc, "device");
    const std::string mode = get_string(dev, "device", "mode", "marginal");
    if (mode == "marginal") {
        s.device.mode = ExecutionMode::Marginal;
    } else if (mode == "trajectory") {
        s.device.mode = ExecutionMode::Trajectory;
    } else if (mode == "exact") {
        s.device.mode = ExecutionMode::ExactProbability;
    } else {
        throw ConfigError("device.mode must be marginal, trajectory or exact");
    }
    if (get_bool(doc, "config", "noiseless", false)) {
        s.device.mode = ExecutionMode::ExactProbability;
    }
    s.device.n_max = get_int(dev, "device", "n_max", 0, 0, 4096);
    s.device.beta_max = get_positive(dev, "device", "beta_max", 1.2);
    s.device.trotter_factor = get_positive(dev, "device", "trotter_factor", 32.0);

    const Json& rpe = section(doc, "rpe");
    s.rpe.K = get_int(rpe, "rpe", "K", 8, 0, 40);
    s.rpe.M = get_int(rpe, "rpe", "M", 200, 20, 100000000);
    for (const char* key : {"t0", "c_bound"}) {
        const Json* v = field(rpe, key);
        if (v == nullptr || (v->is_string() && v->get<std::string>() == "auto")) {
            continue;
        }
        const double x = get_positive(rpe, "rpe", key, 1.0);
        (std::string(key) == "t0" ? s.rpe.t0 : s.rpe.c_bound) = x;
    }
    s.rpe.strict = get_bool(rpe, "rpe", "strict", true);
    s.rpe.trotter_steps = get_int(rpe, "rpe", "trotter_steps", 0, 0, 1 << 30);

    const Json& grid = section(doc, "grid");
    if (field(grid, "d") != nullptr) {
        s.grid.d = get_int(grid, "grid", "d", 2, 1, 8);
    }
    s.grid.r_min = get_positive(grid, "grid", "r_min", 0.2);
    s.grid.r_max = get_positive(grid, "grid", "r_max", 1.0);
    if (!(s.grid.r_min < s.grid.r_max)) {
        throw ConfigError("grid.r_min must be below grid.r_max");
    }
    s.grid.replicas = get_int(grid, "grid", "replicas", 1, 1, 1000);
    s.grid.estimate_offset = get_bool(grid, "grid", "estimate_offset", false);

    const Json& multi = section(doc, "multi");
    s.multi.strategy = get_string(multi, "multi", "strategy", "both");
    if (s.multi.strategy != "both" && s.multi.strategy != "hierarchical" && s.multi.strategy != "simultaneous") {
        throw ConfigError("multi.strategy must be hierarchical, simultaneous or both");
    }
    s.multi.step1_replicas = get_int(multi, "multi", "step1_replicas", 0, 0, 100000);

    const Json& noise = section(doc, "noise");
    s.noise.delta_beta = get_complex(noise, "noise", "delta_beta", Complex(0.0, 0.0));
    s.noise.state_prep_infidelity = get_number(noise, "noise", "state_prep_infidelity", 0.0);
    if (s.noise.state_prep_infidelity < 0.0 || s.noise.state_prep_infidelity > 1.0) {
        throw ConfigError("noise.state_prep_infidelity must lie in [0, 1]");
    }
    s.noise.prepare_reference_vacuum = get_bool(noise, "noise", "prepare_reference_vacuum", false);

    const Json& sweep = section(doc, "sweep");
    s.sweep.k_min = get_int(sweep, "sweep", "k_min", 4, 0, 40);
    s.sweep.k_max = get_int(sweep, "sweep", "k_max", 10, 0, 40);
    if (s.sweep.k_min > s.sweep.k_max) {
        throw ConfigError("sweep.k_min must not exceed sweep.k_max");
    }
    s.sweep.seeds = get_int(sweep, "sweep", "seeds", 20, 1, 1000000);
    s.sweep.beta = get_complex(sweep, "sweep", "beta", Complex(0.6, 0.3));

    const Json& cov = section(doc, "covariance");
    s.covariance.eps_c = get_positive(cov, "covariance", "eps_c", 1e-2);
    s.covariance.runs = get_int(cov, "covariance", "runs", 0, 0, 1000000);
    if (s.covariance.runs == 1) {
        throw ConfigError("covariance.runs must be 0 or at least 2");
    }

    const Json& spam = section(doc, "spam");
    s.spam.norms = get_numbers(spam, "spam", "norms", {1e-3, 1e-2});
    for (double x : s.spam.norms) {
        if (!(x >= 0.0)) {
            throw ConfigError("spam.norms must be >= 0");
        }
    }
    s.spam.trials = get_int(spam, "spam", "trials", 50, 1, 1000000);

    if (s.kind == "learn-firstq") {
        s.firstq = parse_firstq(section(doc, "firstq"));
    } else if (doc.contains("firstq")) {
        throw ConfigError("config section 'firstq' only applies to learn-firstq");
    }
    if (s.kind != "learn-firstq" && s.kind != "compare-covariance" && s.kind != "spam-sweep" &&
        !doc.contains("spec")) {
        throw ConfigError(s.kind + " requires a 'spec' entry");
    }
    if (s.kind == "learn-firstq" && doc.contains("spec")) {
        throw ConfigError("learn-firstq builds its spec from the 'firstq' section; remove 'spec'");
    }
    return s;
}

HamiltonianSpec resolve_spec(const Json& doc, const std::string& base_dir, const std::string& kind,
                             std::uint64_t seed, std::optional<int> grid_d)
{
    auto from_path = [&](const std::string& p) {
        std::filesystem::path path(p);
        if (path.is_relative()) {
            path = std::filesystem::path(base_dir) / path;
        }
        return load_spec(path.string());
    };
    const auto it = doc.find("spec");
    if (it == doc.end()) {
        const int modes = kind == "compare-covariance" ? 2 : 1;
        const int d = grid_d.value_or(kind == "compare-covariance" ? 2 : 3);
        return random_spec(modes, d, 1.0, 1.0, hash_combine(seed, tag("spec")), true);
    }
    const Json& s = *it;
    if (s.is_string()) {
        return from_path(s.get<std::string>());
    }
    if (!s.is_object()) {
        throw ConfigError("spec must be a path, a spec document, {\"path\": ...} or {\"random\": {...}}");
    }
    if (s.contains("path")) {
        if (s.size() != 1 || !s["path"].is_string()) {
            throw ConfigError("spec.path must be the only key and a string");
        }
        return from_path(s["path"].get<std::string>());
    }
    if (s.contains("random")) {
        const Json& r = s["random"];
        if (s.size() != 1 || !r.is_object()) {
            throw ConfigError("spec.random must be the only key and an object");
        }
        static const std::set<std::string> keys{"modes", "d", "g_max", "sparsity", "seed", "couplings"};
        for (const auto& [k, v] : r.items()) {
            (void)v;
            if (keys.count(k) == 0) {
                throw ConfigError("unknown config key 'spec.random." + k + "'");
            }
        }
        const std::string w = "spec.random";
        const int modes = get_int(r, w, "modes", 1, 1, 3);
        const int d = get_int(r, w, "d", 3, 1, 8);
        const double g_max = get_positive(r, w, "g_max", 1.0);
        const double sparsity = get_number(r, w, "sparsity", 1.0);
        if (sparsity < 0.0 || sparsity > 1.0) {
            throw ConfigError("spec.random.sparsity must lie in [0, 1]");
        }
        const int spec_seed = get_int(r, w, "seed", 0, 0, 2147483647);
        const bool couplings = get_bool(r, w, "couplings", true);
        const std::uint64_t sd = field(r, "seed") != nullptr ? static_cast<std::uint64_t>(spec_seed)
                                                               : hash_combine(seed, tag("spec"));
        return random_spec(modes, d, g_max, sparsity, sd, couplings);
    }
    return spec_from_json(s);
}

NoiseModel noise_model(const NoiseSettings& n)
{
    NoiseModel m;
    if (n.delta_beta != Complex(0.0, 0.0)) {
        const Complex db = n.delta_beta;
        m.displacement_bias = [db](const DisplacementVector& beta) { return DisplacementVector(beta.size(), db); };
    }
    m.state_prep_infidelity = n.state_prep_infidelity;
    m.prepare_reference_vacuum = n.prepare_reference_vacuum;
    return m;
}

bool has_noise(const NoiseSettings& n)
{
    return n.delta_beta != Complex(0.0, 0.0) || n.state_prep_infidelity > 0.0 || n.prepare_reference_vacuum;
}

RpeConfig rpe_config(const RpeSettings& r, double auto_bound)
{
    RpeConfig c;
    c.K = r.K;
    c.M = r.M;
    c.strict = r.strict;
    c.trotter_steps = r.trotter_steps;
    c.c_bound = r.c_bound.value_or(auto_bound);
    c.t0 = r.t0.value_or(0.9 * kPi / c.c_bound);
    if (!(c.c_bound * c.t0 < kPi)) {
        throw ConfigError("rpe: c_bound * t0 = " + std::to_string(c.c_bound * c.t0) +
                          " must stay below pi for an unambiguous phase");
    }
    c.validate();
    return c;
}

/// Standard-error floor for reported z scores (noiseless runs give se ~ 1e-17).
double z_score(double error, double se)
{
    return error / std::hypot(se, 1e-9);
}

Json complex_json(Complex z)
{
    return Json::array({z.real(), z.imag()});
}

/// Everything validate derives for the non-firstq experiments.
struct Prepared {
    HamiltonianSpec spec;
    int d = 1;
    double beta_max = 1.2;
    RpeConfig rpe;
    SimulatedDevice::Options device;
};

Prepared prepare(const Settings& s, const ExperimentConfig& cfg)
{
    Prepared p;
    p.spec = resolve_spec(cfg.doc, cfg.base_dir, s.kind, cfg.seed, s.grid.d);
    validate_hermitian(p.spec);
    p.d = s.grid.d.value_or(p.spec.max_order);
    if (s.kind == "learn-multi" || s.kind == "compare-covariance") {
        if (p.spec.modes < 2 || p.spec.modes > 3) {
            throw ConfigError(s.kind + " needs a spec with 2 or 3 modes (got " + std::to_string(p.spec.modes) + ")");
        }
    }
    if (s.kind == "sweep-heisenberg" || s.kind == "spam-sweep") {
        if (p.spec.modes != 1) {
            throw ConfigError(s.kind + " needs a single-mode spec (got " + std::to_string(p.spec.modes) + " modes)");
        }
    }
    if (p.spec.max_order > p.d) {
        throw ConfigError("spec has order " + std::to_string(p.spec.max_order) + " terms but grid.d = " +
                          std::to_string(p.d) + "; the recovery needs d >= the spec order");
    }
    double r_reach = s.grid.r_max;
    if (s.kind == "sweep-heisenberg") {
        r_reach = std::abs(s.sweep.beta);
    }
    if (s.kind == "spam-sweep") {
        r_reach += *std::max_element(s.spam.norms.begin(), s.spam.norms.end());
    }
    r_reach += std::abs(s.noise.delta_beta);
    p.beta_max = std::max(s.device.beta_max, r_reach);
    const double offset = s.grid.estimate_offset ? 0.0 : std::abs(p.spec.identity_offset);
    p.rpe = rpe_config(s.rpe, auto_c_bound(p.spec.modes, p.d, p.spec.g_max, r_reach, offset));
    p.device.mode = s.device.mode;
    p.device.seed = cfg.seed;
    p.device.beta_max = p.beta_max;
    p.device.trotter_factor = s.device.trotter_factor;
    p.device.n_max = s.device.n_max > 0 ? s.device.n_max : adaptive_cutoff(p.spec, p.beta_max).n_max();
    return p;
}

struct FirstqPrepared {
    HamiltonianSpec spec_b;
    PhysicalModel model;
    std::vector<double> s_true;
    SimulatedDevice::Options device;
    Json derived;
};

FirstqPrepared prepare_firstq(const Settings& s, const ExperimentConfig& cfg)
{
    const FirstqSettings& f = s.firstq;
    FirstqPrepared p;
    p.derived["overlap_threshold_u"] = overlap_threshold();
    Json frames = Json::array();
    double edge = 0.0;
    for (int m = 0; m < f.modes; ++m) {
        const auto i = static_cast<std::size_t>(m);
        const double ratio = f.ratios[i];
        const BogoliubovFrame fr = frame_from_ratio(f.m0w0[i], f.m0w0[i] / ratio);
        const std::string label = "mode " + std::to_string(m);
        if (!overlap_feasible(fr.u)) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "%s: hidden ratio m0w0/mw = %g gives u = %.4f; the frame vacuum overlap needs "
                          "u < 1/(4 - 2 sqrt 3) ~ 1.866",
                          label.c_str(), ratio, fr.u);
            throw ConfigError(buf);
        }
        const auto [lo, hi] = f.bracket[i];
        for (double e : {lo, hi}) {
            const double u = std::cosh(e);
            if (!overlap_feasible(u)) {
                char buf[256];
                std::snprintf(buf, sizeof buf,
                              "%s: bracket edge R = %g gives u = cosh R = %.4f; every frame in the bracket needs "
                              "u < 1/(4 - 2 sqrt 3) ~ 1.866 (|R| < %.4f)",
                              label.c_str(), e, u, max_feasible_signed_r());
                throw ConfigError(buf);
            }
        }
        if (!(fr.signed_r > lo && fr.signed_r < hi)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "%s: hidden signed R = %.6f lies outside the bracket [%g, %g]",
                          label.c_str(), fr.signed_r, lo, hi);
            throw ConfigError(buf);
        }
        edge = std::max({edge, std::abs(lo), std::abs(hi)});
        p.s_true.push_back(fr.signed_r);
        frames.push_back({{"mode", m},
                          {"ratio", ratio},
                          {"u", fr.u},
                          {"v", fr.v},
                          {"R", fr.R},
                          {"phi", fr.phi},
                          {"signed_r", fr.signed_r},
                          {"bracket", Json::array({lo, hi})}});
    }
    p.derived["frames"] = frames;

    p.spec_b = firstq_example_spec(f.modes, f.g11, f.g22, f.coupling);
    p.model = f.modes == 1 ? PhysicalModel::single_mode_example(f.m0w0[0])
                           : PhysicalModel::two_mode_example(f.m0w0[0], f.m0w0[1]);
    const HamiltonianSpec bare = device_spec_from_physical(p.spec_b, p.s_true);
    validate_hermitian(bare);

    const bool ref_vac = f.reference_vacuum || s.noise.prepare_reference_vacuum;
    p.device.mode = s.device.mode;
    p.device.seed = cfg.seed;
    p.device.beta_max = std::max(s.device.beta_max, 1.0 + std::abs(s.noise.delta_beta));
    p.device.trotter_factor = s.device.trotter_factor;
    int n_max = s.device.n_max > 0 ? s.device.n_max : adaptive_cutoff(bare, p.device.beta_max).n_max();
    if (ref_vac) {
        const int needed = reference_vacuum_cutoff(edge);
        p.derived["reference_vacuum_n_max"] = needed;
        if (s.device.n_max > 0 && s.device.n_max < needed) {
            throw ConfigError("device.n_max = " + std::to_string(s.device.n_max) +
                              " truncates the reference vacuum at the bracket edge; need n_max >= " +
                              std::to_string(needed));
        }
        n_max = std::max(n_max, needed);
    }
    p.device.n_max = n_max;
    p.derived["n_max"] = n_max;
    p.derived["reference_vacuum"] = ref_vac;
    return p;
}

Json validate_settings(const Settings& s, const ExperimentConfig& cfg)
{
    Json out;
    out["experiment"] = s.kind;
    if (s.kind == "learn-firstq") {
        FirstqPrepared p = prepare_firstq(s, cfg);
        out.update(p.derived);
        out["hermitian"] = true;
        return out;
    }
    const Prepared p = prepare(s, cfg);
    out["hermitian"] = true;
    out["modes"] = p.spec.modes;
    out["d"] = p.d;
    out["spec_order"] = p.spec.max_order;
    out["beta_max"] = p.beta_max;
    out["c_bound"] = p.rpe.c_bound;
    out["c_bound_source"] = s.rpe.c_bound ? "config" : "auto";
    out["t0"] = p.rpe.t0;
    out["t0_source"] = s.rpe.t0 ? "config" : "auto (0.9 pi / c_bound)";
    out["K"] = p.rpe.K;
    out["M"] = p.rpe.M;
    out["n_max"] = p.device.n_max;
    out["n_max_source"] = s.device.n_max > 0 ? "config" : "adaptive";
    return out;
}

Json coefficient_table(const LearnedCoefficients& lc, const HamiltonianSpec& truth, double* max_error)
{
    Json rows = Json::array();
    double worst = 0.0;
    for (const auto& rep : lc.param.representatives()) {
        const Complex est = lc.value(rep);
        const Complex tru = truth.coefficient(rep);
        const double se = lc.error(rep);
        const double err = std::abs(est - tru);
        worst = std::max(worst, err);
        rows.push_back({{"key", rep.str()},
                        {"estimate", complex_json(est)},
                        {"truth", complex_json(tru)},
                        {"abs_error", err},
                        {"std_error", se},
                        {"z", z_score(err, se)}});
    }
    if (max_error != nullptr) {
        *max_error = worst;
    }
    return rows;
}

Json stage_list(const LearnedCoefficients& lc)
{
    Json out = Json::array();
    for (const auto& g : lc.stages) {
        out.push_back({{"points", g.points.size()},
                       {"evolution_time", g.time_cost},
                       {"shots", g.shots},
                       {"retries", g.retries_used}});
    }
    return out;
}

Json learned_json(const LearnedCoefficients& lc, const HamiltonianSpec& truth)
{
    double worst = 0.0;
    Json out;
    out["coefficients"] = coefficient_table(lc, truth, &worst);
    out["max_abs_error"] = worst;
    out["chi2"] = lc.chi2;
    out["chi2_dof"] = lc.chi2_dof;
    out["design_sigma_min"] = lc.design_sigma_min;
    if (lc.has_offset) {
        out["offset"] = {{"estimate", lc.offset}, {"std_error", lc.offset_std_error}, {"truth", truth.identity_offset}};
    }
    out["evolution_time"] = lc.time_cost;
    out["shots"] = lc.shots;
    out["stages"] = stage_list(lc);
    return out;
}

LearnOptions learn_options(const Settings& s, const ExperimentConfig& cfg)
{
    LearnOptions o;
    o.r_min = s.grid.r_min;
    o.r_max = s.grid.r_max;
    o.estimate_offset = s.grid.estimate_offset;
    o.replicas = s.grid.replicas;
    o.workers = cfg.workers;
    o.stream = hash_combine(cfg.seed, tag("learn"));
    return o;
}

Json run_learn_single(const Settings& s, const ExperimentConfig& cfg, const Prepared& p, SimulatedDevice& dev)
{
    Json modes = Json::array();
    for (int m = 0; m < p.spec.modes; ++m) {
        LearnOptions o = learn_options(s, cfg);
        o.stream = hash_combine(o.stream, static_cast<std::uint64_t>(m));
        const LearnedCoefficients lc = learn_single_mode(dev, m, p.d, p.rpe, o);
        Json j = learned_json(lc, p.spec);
        j["mode"] = m;
        modes.push_back(j);
    }
    return {{"modes", modes}};
}

Json run_learn_multi(const Settings& s, const ExperimentConfig& cfg, const Prepared& p, SimulatedDevice& dev)
{
    MultiModeOptions mo;
    mo.base = learn_options(s, cfg);
    mo.step1_replicas = s.multi.step1_replicas;
    Json out;
    if (s.multi.strategy == "both") {
        const StrategyPair pair = learn_multimode_both(dev, p.d, p.rpe, mo);
        out["hierarchical"] = learned_json(pair.hierarchical, p.spec);
        out["simultaneous"] = learned_json(pair.simultaneous, p.spec);
    } else if (s.multi.strategy == "hierarchical") {
        out["hierarchical"] = learned_json(learn_multimode_hierarchical(dev, p.d, p.rpe, mo), p.spec);
    } else {
        out["simultaneous"] = learned_json(learn_multimode_simultaneous(dev, p.d, p.rpe, mo), p.spec);
    }
    return out;
}

std::string number(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

Json run_sweep(const Settings& s, const ExperimentConfig& cfg, const Prepared& p, std::string& csv)
{
    const DisplacementVector beta{s.sweep.beta};
    const auto rows = heisenberg_sweep(p.spec, beta, s.sweep.k_min, s.sweep.k_max, p.rpe, s.sweep.seeds, p.device,
                                       hash_combine(cfg.seed, tag("sweep")), cfg.workers);
    csv = sweep_csv(rows, "seed=" + std::to_string(cfg.seed) + " config_hash=" + config_hash(cfg.doc));
    Json table = Json::array();
    std::vector<double> t;
    std::vector<double> e;
    for (const auto& r : rows) {
        table.push_back({{"k", r.k}, {"total_time", r.total_time}, {"rmse", r.rmse}, {"shots", r.shots}});
        t.push_back(r.total_time);
        e.push_back(r.rmse);
    }
    Json out{{"rows", table}, {"beta", complex_json(s.sweep.beta)}, {"seeds_per_k", s.sweep.seeds}};
    const bool positive = std::all_of(e.begin(), e.end(), [](double x) { return x > 0.0; });
    if (rows.size() >= 2 && positive) {
        out["loglog_slope"] = loglog_slope(t, e);
    }
    return out;
}

Json run_compare(const Settings& s, const ExperimentConfig& cfg, const Prepared& p)
{
    const auto grid = joint_grid(p.spec.modes, p.d, s.grid.r_min, s.grid.r_max);
    const RMatrix ms = PairedParameterization(single_mode_keys(p.spec.modes, p.d)).design(grid);
    const RMatrix mc = PairedParameterization(coupling_keys(p.spec.modes, p.d)).design(grid);
    const OrderingReport rep = covariance_compare(ms, mc, s.covariance.eps_c);
    Json out;
    out["grid_points"] = grid.size();
    out["eps_c"] = s.covariance.eps_c;
    out["min_eig_singles"] = rep.min_eig_singles;
    out["min_eig_couplings"] = rep.min_eig_couplings;
    out["woodbury_residual"] = rep.woodbury_residual;
    out["ordered"] = rep.ordered(1e-10);
    if (s.covariance.runs >= 2) {
        MultiModeOptions mo;
        mo.base = learn_options(s, cfg);
        mo.base.workers = 1;
        mo.step1_replicas = s.multi.step1_replicas;
        const auto params = empirical_ordering(p.spec, p.d, p.rpe, mo, s.covariance.runs, p.device,
                                               hash_combine(cfg.seed, tag("empirical")), cfg.workers);
        Json rows = Json::array();
        bool all = true;
        for (const auto& e : params) {
            all = all && e.ordered();
            rows.push_back({{"parameter", e.label},
                            {"var_hier", e.var_hier},
                            {"var_sim", e.var_sim},
                            {"se_diff", e.se_diff},
                            {"ordered_2sigma", e.ordered()}});
        }
        out["empirical"] = {{"runs", s.covariance.runs}, {"parameters", rows}, {"all_ordered_2sigma", all}};
    }
    return out;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Json run_spam(const Settings& s, const ExperimentConfig& cfg, const Prepared& p)
{
    Json per_norm = Json::array();
    std::vector<double> medians;
    for (std::size_t i = 0; i < s.spam.norms.size(); ++i) {
        const double norm = s.spam.norms[i];
        std::vector<SpamTrial> trials(static_cast<std::size_t>(s.spam.trials));
        parallel_for(trials.size(), cfg.workers, [&](std::size_t t) {
            trials[t] = spam_trial(p.spec, p.d, norm, hash_combine(cfg.seed, tag("spam"), t), p.rpe, s.grid.r_min,
                                   s.grid.r_max);
        });
        int within = 0;
        std::vector<double> observed;
        std::vector<double> ratio;
        for (const auto& t : trials) {
            within += t.observed <= t.report.bound ? 1 : 0;
            observed.push_back(t.observed);
            ratio.push_back(t.report.bound > 0.0 ? t.observed / t.report.bound : 0.0);
        }
        medians.push_back(median(observed));
        per_norm.push_back({{"delta_beta_norm", norm},
                            {"trials", trials.size()},
                            {"within_bound", within},
                            {"median_observed", medians.back()},
                            {"median_bound", median([&] {
                                 std::vector<double> b;
                                 for (const auto& t : trials) {
                                     b.push_back(t.report.bound);
                                 }
                                 return b;
                             }())},
                            {"max_observed_over_bound", *std::max_element(ratio.begin(), ratio.end())},
                            {"lipschitz", trials.front().report.lipschitz},
                            {"sigma_min", trials.front().report.sigma_min}});
    }
    Json out{{"norms", per_norm}};
    if (medians.size() >= 2 && medians.front() > 0.0) {
        out["median_ratio_last_over_first"] = medians.back() / medians.front();
        out["norm_ratio_last_over_first"] = s.spam.norms.back() / s.spam.norms.front();
    }
    return out;
}

Json search_json(const BisectionState& st, double s_true)
{
    return {{"estimate", st.estimate()},
            {"truth", s_true},
            {"abs_error", std::abs(st.estimate() - s_true)},
            {"bracket", Json::array({st.lo, st.hi})},
            {"eps_r", st.eps_r},
            {"slope", st.slope},
            {"iterations", st.iterations},
            {"planned", st.planned},
            {"reruns", st.reruns},
            {"golden_fallback", st.golden},
            {"evolution_time", st.time_cost},
            {"shots", st.shots}};
}

Json g_table(const PhysicalFit& fit, const PhysicalCoefficients& truth, double* max_z)
{
    Json rows = Json::array();
    double worst = 0.0;
    for (const auto& [term, value] : fit.values) {
        const double tru = truth.count(term) != 0 ? truth.at(term) : 0.0;
        const double se = fit.std_error.at(term);
        const double z = z_score(value - tru, se);
        worst = std::max(worst, std::abs(z));
        rows.push_back({{"term", term.str()}, {"estimate", value}, {"truth", tru}, {"std_error", se}, {"z", z}});
    }
    if (max_z != nullptr) {
        *max_z = worst;
    }
    return rows;
}

Json run_firstq(const Settings& s, const ExperimentConfig& cfg, const FirstqPrepared& p, SimulatedDevice& dev)
{
    const FirstqSettings& f = s.firstq;
    const PhysicalCoefficients truth = physical_from_spec(p.spec_b, p.model);
    auto search_options = [&](int m) {
        const auto i = static_cast<std::size_t>(m);
        BisectionOptions b;
        b.mode = m;
        b.lo = f.bracket[i].first;
        b.hi = f.bracket[i].second;
        b.eps_r = f.eps_r;
        b.eps_g = f.eps_g;
        b.signal_key = f.signal_key;
        b.cfg.d = f.d;
        b.cfg.M = f.M;
        b.cfg.g_max = f.g_max;
        b.cfg.r_min = s.grid.r_min;
        b.cfg.r_max = s.grid.r_max;
        b.cfg.workers = cfg.workers;
        b.cfg.reference_vacuum = f.reference_vacuum || s.noise.prepare_reference_vacuum;
        b.cfg.stream = cfg.seed;
        return b;
    };
    Json out;
    double max_z = 0.0;
    if (f.modes == 1) {
        FirstqOptions fo;
        fo.search = search_options(0);
        fo.eps_g = f.eps_g;
        const FirstqResult r = learn_firstq(dev, p.model, fo);
        out["search"] = Json::array({search_json(r.search, p.s_true[0])});
        out["g"] = g_table(r.g, truth, &max_z);
        out["g_sigma_min"] = r.g.sigma_min;
        out["final_rpe"] = {{"K", r.final_rpe.K}, {"M", r.final_rpe.M}, {"t0", r.final_rpe.t0}};
        // Truth here is the B-basis spec, i.e. the learned frame's target when R' = R.
        out["final_learn"] = learned_json(r.final_learn, p.spec_b);
        out["evolution_time"] = r.time_cost;
        out["shots"] = r.shots;
    } else {
        TwoModeOptions to;
        to.search = {search_options(0), search_options(1)};
        to.eps_g = f.eps_g;
        to.coupling_order = f.coupling_order;
        const TwoModeResult r = parallel_two_mode_search(dev, p.model, to);
        out["search"] = Json::array({search_json(r.search[0], p.s_true[0]), search_json(r.search[1], p.s_true[1])});
        out["g"] = g_table(r.g, truth, &max_z);
        out["g_sigma_min"] = r.g.sigma_min;
        out["final_rpe"] = {{"K", r.final_rpe.K}, {"M", r.final_rpe.M}, {"t0", r.final_rpe.t0}};
        out["evolution_time"] = r.time_cost;
        out["shots"] = r.shots;
    }
    out["max_abs_z"] = max_z;
    return out;
}

} // namespace

std::string config_hash(const Json& doc)
{
    Json canonical = doc;
    if (canonical.is_object()) {
        canonical.erase("workers");
        canonical.erase("output");
    }
    const std::string text = canonical.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig ExperimentConfig::parse(const Json& doc, const std::string& base_dir)
{
    const Settings s = parse_settings(doc);
    ExperimentConfig c;
    c.kind = s.kind;
    c.doc = doc;
    c.base_dir = base_dir;
    if (const Json* seed = field(doc, "seed")) {
        if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
            throw ConfigError("config.seed must be a non-negative integer");
        }
        c.seed = seed->get<std::uint64_t>();
    }
    c.workers = get_int(doc, "config", "workers", 0, 0, 4096);
    c.noiseless = get_bool(doc, "config", "noiseless", false);
    const Json& out = section(doc, "output");
    c.json_path = get_string(out, "output", "json", "");
    c.csv_path = get_string(out, "output", "csv", "");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();
    return parse(doc, dir.empty() ? "." : dir.string());
}

Json validate(const ExperimentConfig& cfg)
{
    const Settings s = parse_settings(cfg.doc);
    try {
        return validate_settings(s, cfg);
    } catch (const HermiticityError& e) {
        throw ConfigError(std::string("spec is not Hermitian: ") + e.what());
    } catch (const CutoffError& e) {
        throw ConfigError(std::string("cutoff estimate failed: ") + e.what());
    }
}

RunReport run(const ExperimentConfig& cfg)
{
    const Settings s = parse_settings(cfg.doc);
    RunReport rep;
    Json& doc = rep.doc;
    doc["toolkit_version"] = kToolkitVersion;
    doc["experiment"] = s.kind;
    doc["seed"] = cfg.seed;
    doc["config_hash"] = config_hash(cfg.doc);
    doc["config"] = cfg.doc;
    doc["derived"] = validate(cfg);

    std::optional<SimulatedDevice> device;
    Json results;
    if (s.kind == "learn-firstq") {
        const FirstqPrepared p = prepare_firstq(s, cfg);
        device.emplace(device_spec_from_physical(p.spec_b, p.s_true), p.device);
        NoiseModel nm = noise_model(s.noise);
        nm.prepare_reference_vacuum = nm.prepare_reference_vacuum || s.firstq.reference_vacuum;
        device->set_noise(nm);
        results = run_firstq(s, cfg, p, *device);
    } else {
        const Prepared p = prepare(s, cfg);
        if (s.kind == "learn-single" || s.kind == "learn-multi") {
            device.emplace(p.spec, p.device);
            if (has_noise(s.noise)) {
                device->set_noise(noise_model(s.noise));
            }
            results = s.kind == "learn-single" ? run_learn_single(s, cfg, p, *device)
                                               : run_learn_multi(s, cfg, p, *device);
        } else if (s.kind == "sweep-heisenberg") {
            if (has_noise(s.noise)) {
                throw ConfigError("sweep-heisenberg does not take a noise section");
            }
            results = run_sweep(s, cfg, p, rep.csv);
        } else if (s.kind == "compare-covariance") {
            results = run_compare(s, cfg, p);
        } else {
            results = run_spam(s, cfg, p);
        }
    }
    doc["results"] = results;
    if (device) {
        const TimeLedger l = device->ledger();
        doc["ledger"] = {{"total_evolution_time", l.total_evolution_time}, {"shot_count", l.shot_count}};
    }
    return rep;
}

std::vector<SweepRow> heisenberg_sweep(const HamiltonianSpec& spec, const DisplacementVector& beta, int k_min,
                                       int k_max, const RpeConfig& base, int seeds,
                                       const SimulatedDevice::Options& device_options, std::uint64_t stream,
                                       int workers)
{
    if (k_min > k_max || seeds < 1) {
        throw ConfigError("heisenberg_sweep: need k_min <= k_max and seeds >= 1");
    }
    SimulatedDevice dev(spec, device_options);
    const double truth = constant_term(spec, beta) + spec.identity_offset;
    const double g = spec.g_max > 0.0 ? spec.g_max : 1.0;
    std::vector<SweepRow> rows;
    for (int k = k_min; k <= k_max; ++k) {
        RpeConfig cfg = base;
        cfg.K = k;
        std::vector<double> err(static_cast<std::size_t>(seeds));
        std::vector<double> time(err.size());
        std::vector<double> shots(err.size());
        parallel_for(err.size(), workers, [&](std::size_t i) {
            const PhaseEstimate pe = rpe_estimate(dev, beta, std::nullopt, cfg,
                                                  hash_combine(stream, static_cast<std::uint64_t>(k), i));
            err[i] = pe.c_hat - truth;
            time[i] = pe.time_cost;
            shots[i] = static_cast<double>(pe.shots);
        });
        SweepRow r;
        r.k = k;
        double se = 0.0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            se += err[i] * err[i];
            r.total_time += time[i];
            r.shots += shots[i];
        }
        const auto n = static_cast<double>(seeds);
        r.rmse = std::sqrt(se / n) / g;
        r.total_time = r.total_time / n * g;
        r.shots /= n;
        rows.push_back(r);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& comment)
{
    std::ostringstream out;
    if (!comment.empty()) {
        out << "# " << comment << '\n';
    }
    out << "k,total_time[1/g_max],rmse[g_max],shots[count]\n";
    for (const auto& r : rows) {
        out << r.k << ',' << number(r.total_time) << ',' << number(r.rmse) << ',' << number(r.shots) << '\n';
    }
    return out.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw ConfigError("loglog_slope: need at least two (x, y) pairs");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw ConfigError("loglog_slope: values must be positive");
        }
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) {
        throw ConfigError("loglog_slope: x values must not all be equal");
    }
    return sxy / sxx;
}

SpamTrial spam_trial(const HamiltonianSpec& spec, int d, double delta_norm, std::uint64_t seed, const RpeConfig& cfg,
                     double r_min, double r_max)
{
    if (spec.modes != 1) {
        throw ConfigError("spam_trial: single-mode spec required");
    }
    const RecoveryPlan plan(d, r_min, r_max);
    const auto& points = plan.points();
    auto eng = stream_engine(seed, tag("spam-delta"));
    std::normal_distribution<double> normal;
    std::vector<Complex> delta(points.size());
    double n2 = 0.0;
    for (auto& z : delta) {
        z = Complex(normal(eng), normal(eng));
        n2 += std::norm(z);
    }
    double largest = 0.0;
    for (auto& z : delta) {
        z *= delta_norm / std::sqrt(n2);
        largest = std::max(largest, std::abs(z));
    }

    std::vector<std::pair<Complex, Complex>> table;
    for (std::size_t i = 0; i < points.size(); ++i) {
        table.emplace_back(points[i], delta[i]);
    }
    NoiseModel nm;
    nm.displacement_bias = [table](const DisplacementVector& beta) {
        DisplacementVector out(beta.size(), Complex(0.0, 0.0));
        for (const auto& [p, db] : table) {
            if (std::abs(beta[0] - p) < 1e-12) {
                out[0] = db;
                break;
            }
        }
        return out;
    };
    SimulatedDevice::Options o;
    o.mode = ExecutionMode::ExactProbability;
    o.seed = seed;
    o.beta_max = r_max + largest;
    SimulatedDevice dev(spec, o);
    dev.set_noise(nm);
    LearnOptions lo;
    lo.r_min = r_min;
    lo.r_max = r_max;
    lo.workers = 1;
    lo.stream = seed;
    const LearnedCoefficients lc = learn_single_mode(dev, 0, d, cfg, lo);

    SpamTrial t;
    t.delta_norm = delta_norm;
    double e2 = 0.0;
    for (const auto& key : plan.keys(0)) {
        e2 += std::norm(lc.value(key) - spec.coefficient(key));
    }
    t.observed = std::sqrt(e2);
    t.report = spam_bound(plan.coefficient_map(), lipschitz_bound(d, r_max + largest, spec.terms), delta);
    t.report.observed = t.observed;
    return t;
}

HamiltonianSpec firstq_example_spec(int modes, double g11, double g22, double coupling)
{
    if (modes < 1 || modes > 2) {
        throw ConfigError("firstq_example_spec: 1 or 2 modes");
    }
    HamiltonianSpec s;
    s.modes = modes;
    s.max_order = 4;
    for (int m = 0; m < modes; ++m) {
        if (g11 != 0.0) {
            s.terms[TermKey::single(m, 1, 1)] = g11;
        }
        if (g22 != 0.0) {
            s.terms[TermKey::single(m, 2, 2)] = g22;
        }
    }
    if (modes == 2 && coupling != 0.0) {
        s.set_pair(TermKey({ModePower{0, 1, 0}, ModePower{1, 0, 1}}), coupling);
    }
    s.g_max = std::max({std::abs(g11), std::abs(g22), std::abs(coupling), 1e-300});
    return s;
}

int reference_vacuum_cutoff(double r_edge, double tol, int ceiling)
{
    for (int n = 2; n <= ceiling; n += 2) {
        const CVector a = squeezed_vacuum_amplitudes(Complex(std::abs(r_edge), 0.0), n);
        if (1.0 - a.squaredNorm() <= tol) {
            return n;
        }
    }
    throw ConfigError("reference vacuum at |R| = " + std::to_string(r_edge) + " needs n_max above " +
                      std::to_string(ceiling));
}

double auto_c_bound(int modes, int d, double g_max, double r_max, double offset_bound)
{
    double b = 0.0;
    for (const auto& key : admissible_keys(modes, d, modes > 1)) {
        b += g_max * std::pow(r_max, key.order());
    }
    return b + std::abs(offset_bound);
}

std::vector<EmpiricalParameter> empirical_ordering(const HamiltonianSpec& spec, int d, const RpeConfig& cfg,
                                                   const MultiModeOptions& options, int runs,
                                                   const SimulatedDevice::Options& device_options,
                                                   std::uint64_t stream, int workers)
{
    if (runs < 2) {
        throw ConfigError("empirical_ordering: need at least 2 runs");
    }
    SimulatedDevice dev(spec, device_options);
    std::vector<TermKey> keys = single_mode_keys(spec.modes, d);
    const auto couplings = coupling_keys(spec.modes, d);
    keys.insert(keys.end(), couplings.begin(), couplings.end());
    const PairedParameterization param(keys);
    const auto n = static_cast<std::size_t>(runs);
    std::vector<RVector> hier(n);
    std::vector<RVector> sim(n);
    parallel_for(n, workers, [&](std::size_t i) {
        MultiModeOptions o = options;
        o.base.workers = 1;
        o.base.stream = hash_combine(stream, i);
        const StrategyPair pair = learn_multimode_both(dev, d, cfg, o);
        hier[i] = param.parameters(pair.hierarchical.values);
        sim[i] = param.parameters(pair.simultaneous.values);
    });
    auto mean_of = [&](const std::vector<RVector>& xs) {
        RVector mean = RVector::Zero(param.size());
        for (const auto& x : xs) {
            mean += x;
        }
        return RVector(mean / static_cast<double>(n));
    };
    const RVector mh = mean_of(hier);
    const RVector ms = mean_of(sim);
    const double scale = static_cast<double>(n) / static_cast<double>(n - 1);
    std::vector<EmpiricalParameter> out;
    for (int c = 0; c < param.size(); ++c) {
        // Both strategies share each run's measurements, so the variance
        // difference is estimated from paired per-run squared deviations.
        double sh = 0.0, ss = 0.0, sdiff = 0.0, sdiff2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::pow(hier[i](c) - mh(c), 2);
            const double b = std::pow(sim[i](c) - ms(c), 2);
            sh += a;
            ss += b;
            sdiff += b - a;
            sdiff2 += (b - a) * (b - a);
        }
        const double nd = static_cast<double>(n);
        const double mean_diff = sdiff / nd;
        const double var_diff = std::max(0.0, (sdiff2 / nd - mean_diff * mean_diff) * scale);
        EmpiricalParameter e;
        e.label = param.label(c);
        e.var_hier = sh / nd * scale;
        e.var_sim = ss / nd * scale;
        e.se_diff = scale * std::sqrt(var_diff / nd);
        out.push_back(e);
    }
    return out;
}

} // namespace drut
