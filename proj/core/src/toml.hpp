#pragma once

#include <string>

#include <json.hpp>

namespace taper::detail {

// Minimal TOML reader covering the job-config subset: tables, arrays of
// tables, dotted keys, strings, numbers, booleans, arrays, and inline
// tables. Produces the same document tree as the JSON config path.
nlohmann::json parse_toml(const std::string& text);

}  // namespace taper::detail
