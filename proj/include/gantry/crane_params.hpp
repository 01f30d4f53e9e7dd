#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace gantry {

/// Physical constants of the gantry crane (SI units).
struct CraneParams {
  double m_T = 1.0;        // trolley mass [kg]
  double m_L = 0.5;        // load mass [kg]
  double J = 1.5625e-4;    // drum moment of inertia [kg m^2]
  double R = 0.025;        // drum radius [m]
  double g = 9.81;         // gravitational acceleration [m/s^2]
  double r_vT = 0.0;       // viscous trolley friction [N s/m]
  double r_CT = 0.0;       // Coulomb trolley friction [N]
  double r_vphi = 0.0;     // viscous drum friction [N m s]
  double r_Cphi = 0.0;     // Coulomb drum friction [N m]

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  /// Torque holding the load at rest.
  double rest_torque() const { return -m_L * R * g; }
};

/// Parses `key = value` lines with the field names above. Unknown keys and
/// malformed lines are reported with their line number.
CraneParams parse_crane_params(std::istream& in);
CraneParams load_crane_params(const std::string& path);

/// Applies the recognized keys of `entries` on top of `base`; returns the keys it did not consume.
std::map<std::string, std::string> apply_crane_params(const std::map<std::string, std::string>& entries,
                                                      CraneParams& base);

std::string to_config_text(const CraneParams& params);

}  // namespace gantry
