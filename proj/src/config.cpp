#include "gantry/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gantry {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

ConfigError::ConfigError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

std::map<std::string, std::string> ConfigFile::section(const std::string& name) const {
  std::map<std::string, std::string> out;
  for (const auto& e : entries) {
    if (e.section != name) continue;
    if (!out.emplace(e.key, e.value).second) {
      throw ConfigError(e.line, "duplicate key '" + e.key + "' in section [" + name + "]");
    }
  }
  return out;
}

bool ConfigFile::has_section(const std::string& name) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const ConfigEntry& e) { return e.section == name; });
}

std::optional<ConfigEntry> ConfigFile::find(const std::string& section,
                                            const std::string& key) const {
  for (const auto& e : entries) {
    if (e.section == section && e.key == key) return e;
  }
  return std::nullopt;
}

ConfigFile parse_config(std::istream& in) {
  ConfigFile file;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line_no, "expected 'key = value', got '" + trim(raw) + "'");
    }
    ConfigEntry entry{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (entry.key.empty()) throw ConfigError(line_no, "missing key before '='");
    file.entries.push_back(std::move(entry));
  }
  return file;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  return parse_config(in);
}

double parse_double(const std::string& text, const std::string& key) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("value of '" + key + "' is not a number: '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, const std::string& key) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("value of '" + key + "' is not an integer: '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  throw std::invalid_argument("value of '" + key + "' is not a boolean: '" + text + "'");
}

std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), key));
  if (out.empty()) throw std::invalid_argument("value of '" + key + "' is an empty list");
  return out;
}

}  // namespace gantry
