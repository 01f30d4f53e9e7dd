#pragma once

// Sectioned `key = value` configuration files.
//
//   # comment
//   [section]
//   key = value
//
// Keys outside any section belong to the empty section "".

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gantry {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigFile {
  std::vector<ConfigEntry> entries;

  /// Entries of one section, keyed by name; duplicate keys are a ConfigError.
  std::map<std::string, std::string> section(const std::string& name) const;
  bool has_section(const std::string& name) const;
  std::optional<ConfigEntry> find(const std::string& section, const std::string& key) const;
};

ConfigFile parse_config(std::istream& in);
ConfigFile load_config(const std::string& path);

double parse_double(const std::string& text, const std::string& key);
int parse_int(const std::string& text, const std::string& key);
bool parse_bool(const std::string& text, const std::string& key);
/// Comma separated list of doubles.
std::vector<double> parse_double_list(const std::string& text, const std::string& key);

}  // namespace gantry
