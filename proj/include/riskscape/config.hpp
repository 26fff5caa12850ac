#pragma once

#include <string>

#include <json.hpp>

#include "riskscape/common.hpp"

namespace riskscape {

using Json = nlohmann::json;

// Loads a config file, dispatching on extension (.json / .toml) with a
// content sniff as fallback. TOML support covers the subset used by the
// shipped configs: [dotted.tables], key = value with strings, integers,
// floats, booleans and flat arrays, plus # comments.
Json load_config_file(const std::string& path);

Json parse_toml(const std::string& text);

// Deep merge: user values override defaults, objects merge recursively.
Json merge_config(Json defaults, const Json& user);

}  // namespace riskscape
