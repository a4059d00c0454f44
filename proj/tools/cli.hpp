#pragma once

// Command-line front end. Each subcommand has a flat key/value parameter set;
// values come from built-in defaults, then an optional config file
// (--config FILE, "key = value" lines, '#' comments), then --key flags.

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aimle::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

struct CommandSchema {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> keys;  // key, default
};

const std::vector<CommandSchema>& commands();
const CommandSchema& command(std::string_view name);

// Throws ConfigError on malformed lines.
KeyValues parse_config_text(std::string_view text);

// Defaults < file < overrides; rejects keys the command does not declare.
KeyValues resolve(const CommandSchema& schema, const KeyValues& file, const KeyValues& overrides);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aimle::cli
