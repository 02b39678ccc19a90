#pragma once

// Command-line front end shared by the `mfde` executable and the tests.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfde::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyMap = std::map<std::string, std::string>;
using Entries = std::vector<std::pair<std::string, std::string>>;

struct RunConfig {
  std::string subcommand;
  Entries params;  // every known key, in declaration order, defaults filled
  std::uint64_t seed = 42;

  const std::string& get(const std::string& key) const;
};

/// Known keys and their defaults for one subcommand.
const Entries& defaults_for(const std::string& subcommand);

/// Parses `[section]` / `key = value` text with `#` comments. Keys under the
/// `[subcommand]` header (or before any header) are returned. Sections of
/// other subcommands and the output-only `[result]` section are skipped.
/// Unknown keys and sections are usage errors.
KeyMap parse_config_text(const std::string& text, const std::string& subcommand);

/// Layers defaults < file values < command-line values.
RunConfig resolve(const std::string& subcommand, const KeyMap& file, const KeyMap& cli);

/// Throws UsageError on bad input. Returns nullopt-like empty subcommand when
/// help was requested.
RunConfig parse_args(int argc, const char* const* argv);

/// Summary text: resolved config as a `[subcommand]` block followed by a
/// `[result]` block. Valid config input.
std::string format_summary(const RunConfig& cfg, const Entries& results);

std::string fmt17(double v);

int run(const RunConfig& cfg);

/// Full entry point with exit codes 0 (success), 1 (numerical failure) and
/// 2 (usage error).
int main_entry(int argc, const char* const* argv);

}  // namespace mfde::cli
