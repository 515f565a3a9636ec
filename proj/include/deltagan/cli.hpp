#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace deltagan {

/// Runs one command line (argv[0] is the program name). Returns 0 on
/// success, 2 on usage errors and 1 on runtime failures.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Reads a training config file: a JSON object, or `key = value` lines
/// where dotted keys address nested objects (weights.rec = 100).
nlohmann::json read_config_file(const std::string& path);
nlohmann::json parse_key_value_config(const std::string& text);

}  // namespace deltagan
