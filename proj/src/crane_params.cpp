#include "gantry/crane_params.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gantry/common.hpp"
#include "gantry/config.hpp"

namespace gantry {

void CraneParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("crane parameter ") + name + " must be positive, got " +
                            std::to_string(v));
    }
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("friction coefficient ") + name +
                            " must be non-negative, got " + std::to_string(v));
    }
  };
  positive(m_T, "m_T");
  positive(m_L, "m_L");
  positive(J, "J");
  positive(R, "R");
  positive(g, "g");
  non_negative(r_vT, "r_vT");
  non_negative(r_CT, "r_CT");
  non_negative(r_vphi, "r_vphi");
  non_negative(r_Cphi, "r_Cphi");
}

std::map<std::string, std::string> apply_crane_params(
    const std::map<std::string, std::string>& entries, CraneParams& base) {
  const std::map<std::string, double CraneParams::*> fields = {
      {"m_T", &CraneParams::m_T},     {"m_L", &CraneParams::m_L},   {"J", &CraneParams::J},
      {"R", &CraneParams::R},         {"g", &CraneParams::g},       {"r_vT", &CraneParams::r_vT},
      {"r_CT", &CraneParams::r_CT},   {"r_vphi", &CraneParams::r_vphi},
      {"r_Cphi", &CraneParams::r_Cphi}};
  std::map<std::string, std::string> rest;
  for (const auto& [key, value] : entries) {
    auto it = fields.find(key);
    if (it == fields.end()) {
      rest.emplace(key, value);
      continue;
    }
    base.*(it->second) = parse_double(value, key);
  }
  return rest;
}

CraneParams parse_crane_params(std::istream& in) {
  const ConfigFile file = parse_config(in);
  CraneParams params;
  for (const auto& entry : file.entries) {
    std::map<std::string, std::string> one{{entry.key, entry.value}};
    if (!apply_crane_params(one, params).empty()) {
      throw ConfigError(entry.line, "unknown crane parameter '" + entry.key + "'");
    }
  }
  params.validate();
  return params;
}

CraneParams load_crane_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open " + path);
  return parse_crane_params(in);
}

std::string to_config_text(const CraneParams& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "m_T = " << p.m_T << "\nm_L = " << p.m_L << "\nJ = " << p.J << "\nR = " << p.R
     << "\ng = " << p.g << "\nr_vT = " << p.r_vT << "\nr_CT = " << p.r_CT
     << "\nr_vphi = " << p.r_vphi << "\nr_Cphi = " << p.r_Cphi << "\n";
  return os.str();
}

}  // namespace gantry
