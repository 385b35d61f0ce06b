#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "drut/experiments.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> workers;
    bool noiseless = false;
};

void add_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", f.seed, "Master seed (overrides config)");
    cmd->add_option("--out", f.out, "Report path; sweeps also write <out>.csv");
    cmd->add_option("--workers", f.workers, "Worker threads, 0 = hardware concurrency")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--noiseless", f.noiseless, "Exact probabilities instead of shots");
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw drut::Error("cannot write '" + path + "'");
    }
}

drut::ExperimentConfig load(const Flags& f, const std::string& subcommand)
{
    std::ifstream in(f.config);
    if (!in) {
        throw drut::ConfigError("cannot open config file '" + f.config + "'");
    }
    drut::Json doc;
    try {
        doc = drut::Json::parse(in);
    } catch (const drut::Json::exception& e) {
        throw drut::ConfigError("config file '" + f.config + "': " + e.what());
    }
    if (!doc.is_object()) {
        throw drut::ConfigError("config must be a JSON object");
    }
    if (subcommand != "validate") {
        doc["experiment"] = subcommand;
    }
    if (f.seed) {
        doc["seed"] = *f.seed;
    }
    if (f.workers) {
        doc["workers"] = *f.workers;
    }
    if (f.noiseless) {
        doc["noiseless"] = true;
    }
    if (!f.out.empty()) {
        doc["output"]["json"] = f.out;
        if (!doc["output"].contains("csv")) {
            doc["output"]["csv"] = std::filesystem::path(f.out).replace_extension(".csv").string();
        }
    }
    const auto dir = std::filesystem::path(f.config).parent_path();
    return drut::ExperimentConfig::parse(doc, dir.empty() ? "." : dir.string());
}

int execute(const Flags& f, const std::string& subcommand)
{
    const drut::ExperimentConfig cfg = load(f, subcommand);
    if (subcommand == "validate") {
        drut::Json out;
        out["valid"] = true;
        out["config_hash"] = drut::config_hash(cfg.doc);
        out["seed"] = cfg.seed;
        out["derived"] = drut::validate(cfg);
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    const drut::RunReport rep = drut::run(cfg);
    const std::string text = rep.doc.dump(2) + "\n";
    if (cfg.json_path.empty()) {
        std::cout << text;
    } else {
        write_file(cfg.json_path, text);
    }
    if (!rep.csv.empty()) {
        if (!cfg.csv_path.empty()) {
            write_file(cfg.csv_path, rep.csv);
        } else if (cfg.json_path.empty()) {
            std::cout << rep.csv;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Displacement-RUT Hamiltonian learning experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(drut::kToolkitVersion));
    Flags flags;
    const char* commands[][2] = {
        {"learn-single", "Learn every mode with the single-mode protocol"},
        {"learn-multi", "Hierarchical and/or simultaneous multi-mode learning"},
        {"learn-firstq", "Frame bisection and physical-coefficient learning"},
        {"sweep-heisenberg", "RPE error against evolution time over K; writes a CSV"},
        {"compare-covariance", "Hierarchical versus simultaneous covariance ordering"},
        {"spam-sweep", "Displacement-error bound check over injected norms"},
        {"validate", "Dry-run checks of a config"},
    };
    for (const auto& [name, help] : commands) {
        add_flags(app.add_subcommand(name, help), flags);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();
    try {
        return execute(flags, subcommand);
    } catch (const drut::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
