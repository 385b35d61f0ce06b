#ifndef DRUT_SPEC_IO_HPP
#define DRUT_SPEC_IO_HPP

#include <string>

#include "json.hpp"

#include "drut/hamiltonian.hpp"

namespace drut {

// Document layout:
//   {"modes": 2, "d": 2, "identity_offset": 0.0, "g_max": 1.0,
//    "terms": [{"modes": [0, 1], "p": [1, 0], "q": [0, 1], "re": 0.5, "im": 0.0}, ...]}
// Doubles are written with round-trip precision. Malformed input raises ConfigError.

nlohmann::json spec_to_json(const HamiltonianSpec& spec);
HamiltonianSpec spec_from_json(const nlohmann::json& doc);

HamiltonianSpec load_spec(const std::string& path);
void save_spec(const HamiltonianSpec& spec, const std::string& path);

} // namespace drut

#endif
