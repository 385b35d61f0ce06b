#include "drut/spec_io.hpp"

#include <fstream>

namespace drut {

using nlohmann::json;

json spec_to_json(const HamiltonianSpec& spec)
{
    json terms = json::array();
    for (const auto& [key, value] : spec.terms) {
        json modes = json::array(), p = json::array(), q = json::array();
        for (const auto& mp : key.powers()) {
            modes.push_back(mp.mode);
            p.push_back(mp.p);
            q.push_back(mp.q);
        }
        terms.push_back({{"modes", modes}, {"p", p}, {"q", q}, {"re", value.real()}, {"im", value.imag()}});
    }
    return {{"modes", spec.modes},
            {"d", spec.max_order},
            {"identity_offset", spec.identity_offset},
            {"g_max", spec.g_max},
            {"terms", terms}};
}

HamiltonianSpec spec_from_json(const json& doc)
{
    try {
        HamiltonianSpec spec;
        spec.modes = doc.at("modes").get<int>();
        spec.max_order = doc.at("d").get<int>();
        spec.identity_offset = doc.value("identity_offset", 0.0);
        spec.g_max = doc.value("g_max", 1.0);
        if (spec.modes < 1 || spec.max_order < 1) {
            throw ConfigError("spec: modes and d must be positive");
        }
        for (const auto& t : doc.at("terms")) {
            const auto modes = t.at("modes").get<std::vector<int>>();
            const auto p = t.at("p").get<std::vector<int>>();
            const auto q = t.at("q").get<std::vector<int>>();
            if (modes.size() != p.size() || modes.size() != q.size() || modes.empty()) {
                throw ConfigError("spec: term arrays modes/p/q must be non-empty and equally long");
            }
            std::vector<ModePower> powers;
            for (std::size_t i = 0; i < modes.size(); ++i) {
                powers.push_back(ModePower{modes[i], p[i], q[i]});
            }
            TermKey key(std::move(powers));
            if (key.empty()) {
                throw ConfigError("spec: term with all-zero powers (use identity_offset)");
            }
            if (spec.terms.count(key) != 0) {
                throw ConfigError("spec: duplicate term " + key.str());
            }
            spec.terms[key] = Complex(t.at("re").get<double>(), t.value("im", 0.0));
        }
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    }
}

HamiltonianSpec load_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open spec file '" + path + "'");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("spec file '" + path + "': " + e.what());
    }
    return spec_from_json(doc);
}

void save_spec(const HamiltonianSpec& spec, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write spec file '" + path + "'");
    }
    out << spec_to_json(spec).dump(2) << '\n';
}

} // namespace drut
