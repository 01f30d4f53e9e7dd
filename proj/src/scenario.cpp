#include "gantry/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

namespace gantry {

namespace {

using Handler = std::function<void(const std::string&)>;

Eigen::Vector2d parse_pair(const std::string& text, const std::string& key) {
  const auto v = parse_double_list(text, key);
  if (v.size() != 2) throw std::invalid_argument("'" + key + "' needs two values 'x, y'");
  return {v[0], v[1]};
}

AsymmetricFriction& pick(FrictionCompensation& c, bool trolley) { return trolley ? c.trolley : c.drum; }

void set_pair(double& pos, double& neg, const std::string& text, const std::string& key) {
  const auto v = parse_double_list(text, key);
  if (v.size() > 2) throw std::invalid_argument("'" + key + "' takes one or two values");
  pos = v[0];
  neg = v.size() == 2 ? v[1] : v[0];
  if (pos < 0.0 || neg < 0.0) throw std::invalid_argument("'" + key + "' must be non-negative");
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

std::vector<double> expand_roots(const std::vector<double>& roots, int order, const char* channel) {
  if (roots.size() == 1) return std::vector<double>(order, roots[0]);
  if (static_cast<int>(roots.size()) != order) {
    std::ostringstream os;
    os << "controller roots_" << channel << " has " << roots.size() << " values, the channel order is "
       << order;
    throw ValidationError(os.str());
  }
  return roots;
}

std::vector<std::complex<double>> as_complex(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

bool is_multiple(double T, double Ts) {
  const double n = T / Ts;
  return std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, n);
}

}  // namespace

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::Polynomial: return "polynomial";
    case ReferenceKind::Optimal: return "optimal";
    case ReferenceKind::LyingEight: return "lying_eight";
    case ReferenceKind::File: return "file";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  crane.validate();
  const double Ts = simulation.sample_time;
  if (!(Ts > 0.0)) throw ValidationError("simulation sample_time must be positive");
  if (simulation.duration && !(*simulation.duration > 0.0)) {
    throw ValidationError("simulation duration must be positive");
  }
  if (simulation.substeps && *simulation.substeps < 1) {
    throw ValidationError("simulation substeps must be >= 1");
  }
  if (controller.kinds.empty()) throw ValidationError("controller type list is empty");
  const bool polynomial_like =
      reference.kind == ReferenceKind::Polynomial || reference.kind == ReferenceKind::Optimal;
  if (polynomial_like) {
    if (!(reference.horizon > 0.0)) throw ValidationError("reference horizon must be positive");
    const bool off_grid_ok = reference.allow_off_grid && reference.kind == ReferenceKind::Polynomial;
    if (!off_grid_ok && !is_multiple(reference.horizon, Ts)) {
      std::ostringstream os;
      os << "reference horizon T = " << reference.horizon
         << " s is not divisible by sample_time T_s = " << Ts << " s";
      throw ValidationError(os.str());
    }
  }
  if (reference.kind == ReferenceKind::File && reference.file.empty()) {
    throw ValidationError("reference type 'file' needs a 'file' key");
  }
  for (ControllerKind k : controller.kinds) {
    if (k == ControllerKind::EmulatedContinuous &&
        (reference.kind == ReferenceKind::Optimal || reference.kind == ReferenceKind::File)) {
      throw ValidationError("continuous controller needs an analytic reference (polynomial or lying_eight)");
    }
    if (k != ControllerKind::EmulatedContinuous) {
      discrete_spec(controller, k).validate(k == ControllerKind::DiscreteDynamic
                                                ? std::array<int, 2>{4, 4}
                                                : std::array<int, 2>{4, 2},
                                            Ts);
      if (auto is = integral_spec(controller, k, Ts)) {
        is->validate(k == ControllerKind::DiscreteDynamic ? std::array<int, 2>{4, 4}
                                                          : std::array<int, 2>{4, 2},
                     Ts);
      }
    }
  }
  if (!(controller.continuous_root < 0.0)) {
    throw ValidationError("controller continuous_root must be negative");
  }
  if (!(optimization.F_max > 0.0) || !(optimization.M_max > 0.0)) {
    throw ValidationError("optimization F_max and M_max must be positive");
  }
}

ErrorDynamicsSpec discrete_spec(const ControllerConfig& c, ControllerKind kind) {
  const int y_order = kind == ControllerKind::DiscreteDynamic ? 4 : 2;
  std::array<std::vector<std::complex<double>>, 2> roots{
      as_complex(expand_roots(c.roots_x, 4, "x")), as_complex(expand_roots(c.roots_y, y_order, "y"))};
  return pole_place(roots);
}

std::optional<ErrorDynamicsSpec> integral_spec(const ControllerConfig& c, ControllerKind kind,
                                               double sample_time) {
  if (!c.integral || kind == ControllerKind::EmulatedContinuous) return std::nullopt;
  const int y_order = kind == ControllerKind::DiscreteDynamic ? 4 : 2;
  const std::vector<std::complex<double>> rx(5, {c.integral_root, 0.0});
  const std::vector<std::complex<double>> ry(y_order + 1, {c.integral_root, 0.0});
  ErrorDynamicsSpec spec;
  spec.channels[0] = place_channel_with_integral(rx, sample_time);
  spec.channels[1] = place_channel_with_integral(ry, sample_time);
  return spec;
}

ScenarioConfig parse_scenario_config(const ConfigFile& file, const std::string& base_directory) {
  ScenarioConfig cfg;
  cfg.base_directory = base_directory;
  std::map<std::string, double CraneParams::*> crane_fields = {
      {"m_T", &CraneParams::m_T},   {"m_L", &CraneParams::m_L},   {"J", &CraneParams::J},
      {"R", &CraneParams::R},       {"g", &CraneParams::g},       {"r_vT", &CraneParams::r_vT},
      {"r_CT", &CraneParams::r_CT}, {"r_vphi", &CraneParams::r_vphi},
      {"r_Cphi", &CraneParams::r_Cphi}};

  auto& C = cfg.controller;
  auto& Rf = cfg.reference;
  auto& S = cfg.simulation;
  auto& O = cfg.optimization;
  std::map<std::string, std::map<std::string, Handler>> sections;
  sections[""]["name"] = [&](const std::string& v) { cfg.name = v; };
  for (const auto& [key, field] : crane_fields) {
    sections["crane"][key] = [&cfg, key = key, field = field](const std::string& v) {
      cfg.crane.*field = parse_double(v, key);
    };
  }
  auto& ctl = sections["controller"];
  ctl["type"] = [&](const std::string& v) {
    C.kinds.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      C.kinds.push_back(parse_controller_kind(item));
    }
  };
  ctl["roots"] = [&](const std::string& v) { C.roots_x = C.roots_y = parse_double_list(v, "roots"); };
  ctl["roots_x"] = [&](const std::string& v) { C.roots_x = parse_double_list(v, "roots_x"); };
  ctl["roots_y"] = [&](const std::string& v) { C.roots_y = parse_double_list(v, "roots_y"); };
  ctl["continuous_root"] = [&](const std::string& v) {
    C.continuous_root = parse_double(v, "continuous_root");
  };
  ctl["integral"] = [&](const std::string& v) { C.integral = parse_bool(v, "integral"); };
  ctl["integral_root"] = [&](const std::string& v) {
    C.integral_root = parse_double(v, "integral_root");
  };
  ctl["integral_activation"] = [&](const std::string& v) {
    C.integral_activation = parse_double(v, "integral_activation");
  };
  ctl["friction_feedforward"] = [&](const std::string& v) {
    C.friction_feedforward = parse_bool(v, "friction_feedforward");
  };
  const std::array<std::tuple<const char*, bool, bool>, 4> ff = {
      std::tuple{"ff_trolley_viscous", true, true}, std::tuple{"ff_trolley_coulomb", true, false},
      std::tuple{"ff_drum_viscous", false, true}, std::tuple{"ff_drum_coulomb", false, false}};
  for (const auto& [key, trolley, viscous] : ff) {
    ctl[key] = [&C, key = std::string(key), trolley = trolley, viscous = viscous](const std::string& v) {
      AsymmetricFriction& a = pick(C.compensation, trolley);
      if (viscous) set_pair(a.viscous_pos, a.viscous_neg, v, key);
      else set_pair(a.coulomb_pos, a.coulomb_neg, v, key);
      C.compensation_set = true;
    };
  }
  auto& ref = sections["reference"];
  ref["type"] = [&](const std::string& v) {
    if (v == "polynomial") Rf.kind = ReferenceKind::Polynomial;
    else if (v == "optimal") Rf.kind = ReferenceKind::Optimal;
    else if (v == "lying_eight") Rf.kind = ReferenceKind::LyingEight;
    else if (v == "file") Rf.kind = ReferenceKind::File;
    else throw std::invalid_argument("unknown reference type '" + v + "'");
  };
  ref["start"] = [&](const std::string& v) { Rf.start = parse_pair(v, "start"); };
  ref["end"] = [&](const std::string& v) { Rf.end = parse_pair(v, "end"); };
  ref["horizon"] = [&](const std::string& v) { Rf.horizon = parse_double(v, "horizon"); };
  ref["allow_off_grid"] = [&](const std::string& v) {
    Rf.allow_off_grid = parse_bool(v, "allow_off_grid");
  };
  ref["center"] = [&](const std::string& v) { Rf.eight.center = parse_pair(v, "center"); };
  ref["width"] = [&](const std::string& v) { Rf.eight.width = parse_double(v, "width"); };
  ref["height"] = [&](const std::string& v) { Rf.eight.height = parse_double(v, "height"); };
  ref["period"] = [&](const std::string& v) { Rf.eight.period = parse_double(v, "period"); };
  ref["file"] = [&](const std::string& v) { Rf.file = v; };
  auto& sim = sections["simulation"];
  sim["sample_time"] = [&](const std::string& v) { S.sample_time = parse_double(v, "sample_time"); };
  sim["duration"] = [&](const std::string& v) { S.duration = parse_double(v, "duration"); };
  sim["substeps"] = [&](const std::string& v) { S.substeps = parse_int(v, "substeps"); };
  sim["friction"] = [&](const std::string& v) { S.friction = parse_bool(v, "friction"); };
  sim["friction_velocity_eps"] = [&](const std::string& v) {
    S.friction_velocity_eps = parse_double(v, "friction_velocity_eps");
  };
  sim["disturbance_F"] = [&](const std::string& v) { S.disturbance.F = parse_double(v, "disturbance_F"); };
  sim["disturbance_M"] = [&](const std::string& v) { S.disturbance.M = parse_double(v, "disturbance_M"); };
  sim["initial_offset"] = [&](const std::string& v) { S.initial_offset = parse_pair(v, "initial_offset"); };
  sim["initial_perturbation"] = [&](const std::string& v) {
    S.initial_perturbation = parse_double(v, "initial_perturbation");
  };
  sim["nominal"] = [&](const std::string& v) { S.nominal = parse_bool(v, "nominal"); };
  auto& opt = sections["optimization"];
  opt["F_max"] = [&](const std::string& v) { O.F_max = parse_double(v, "F_max"); };
  opt["M_max"] = [&](const std::string& v) { O.M_max = parse_double(v, "M_max"); };
  opt["tolerance"] = [&](const std::string& v) { O.settings.tolerance = parse_double(v, "tolerance"); };
  opt["max_outer_iterations"] = [&](const std::string& v) {
    O.settings.max_outer_iterations = parse_int(v, "max_outer_iterations");
  };
  opt["max_inner_iterations"] = [&](const std::string& v) {
    O.settings.max_inner_iterations = parse_int(v, "max_inner_iterations");
  };
  opt["run"] = [&](const std::string& v) { O.run_after = parse_bool(v, "run"); };
  sections["output"]["directory"] = [&](const std::string& v) { cfg.output_directory = v; };

  std::map<std::pair<std::string, std::string>, int> seen;
  for (const auto& e : file.entries) {
    auto sec = sections.find(e.section);
    if (sec == sections.end()) throw ConfigError(e.line, "unknown section [" + e.section + "]");
    auto handler = sec->second.find(e.key);
    if (handler == sec->second.end()) {
      throw ConfigError(e.line, "unknown key '" + e.key + "' in section [" + e.section + "]");
    }
    if (auto [it, fresh] = seen.emplace(std::pair{e.section, e.key}, e.line); !fresh) {
      throw ConfigError(e.line, "duplicate key '" + e.key + "' (first set on line " +
                                    std::to_string(it->second) + ")");
    }
    try {
      handler->second(e.value);
    } catch (const std::exception& ex) {
      throw ConfigError(e.line, ex.what());
    }
  }
  if (!C.compensation_set) C.compensation = FrictionCompensation::from_params(cfg.crane);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  const ConfigFile file = load_config(path);
  const auto dir = std::filesystem::path(path).parent_path();
  ScenarioConfig cfg = parse_scenario_config(file, dir.empty() ? "." : dir.string());
  if (!file.find("", "name")) cfg.name = std::filesystem::path(path).stem().string();
  return cfg;
}

std::string to_config_text(const ScenarioConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17) << std::boolalpha;
  os << "name = " << c.name << "\n\n[crane]\n" << to_config_text(c.crane) << "\n[controller]\ntype = ";
  for (std::size_t i = 0; i < c.controller.kinds.size(); ++i) {
    os << (i ? ", " : "") << to_string(c.controller.kinds[i]);
  }
  const auto& C = c.controller;
  os << "\nroots_x = " << join(C.roots_x) << "\nroots_y = " << join(C.roots_y)
     << "\ncontinuous_root = " << C.continuous_root << "\nintegral = " << C.integral
     << "\nintegral_root = " << C.integral_root << "\n";
  if (C.integral_activation) os << "integral_activation = " << *C.integral_activation << "\n";
  os << "friction_feedforward = " << C.friction_feedforward
     << "\nff_trolley_viscous = " << C.compensation.trolley.viscous_pos << ", "
     << C.compensation.trolley.viscous_neg << "\nff_trolley_coulomb = "
     << C.compensation.trolley.coulomb_pos << ", " << C.compensation.trolley.coulomb_neg
     << "\nff_drum_viscous = " << C.compensation.drum.viscous_pos << ", "
     << C.compensation.drum.viscous_neg << "\nff_drum_coulomb = " << C.compensation.drum.coulomb_pos
     << ", " << C.compensation.drum.coulomb_neg << "\n";
  const auto& R = c.reference;
  os << "\n[reference]\ntype = " << to_string(R.kind) << "\nstart = " << R.start(0) << ", "
     << R.start(1) << "\nend = " << R.end(0) << ", " << R.end(1) << "\nhorizon = " << R.horizon
     << "\nallow_off_grid = " << R.allow_off_grid << "\ncenter = " << R.eight.center(0) << ", "
     << R.eight.center(1) << "\nwidth = " << R.eight.width << "\nheight = " << R.eight.height
     << "\nperiod = " << R.eight.period << "\n";
  if (!R.file.empty()) os << "file = " << R.file << "\n";
  const auto& S = c.simulation;
  os << "\n[simulation]\nsample_time = " << S.sample_time << "\n";
  if (S.duration) os << "duration = " << *S.duration << "\n";
  os << "substeps = " << S.substeps.value_or(PlantModel::default_substeps(S.sample_time))
     << "\nfriction = " << S.friction << "\nfriction_velocity_eps = " << S.friction_velocity_eps
     << "\ndisturbance_F = " << S.disturbance.F << "\ndisturbance_M = " << S.disturbance.M
     << "\ninitial_offset = " << S.initial_offset(0) << ", " << S.initial_offset(1)
     << "\ninitial_perturbation = " << S.initial_perturbation << "\nnominal = " << S.nominal
     << "\n";
  const auto& O = c.optimization;
  os << "\n[optimization]\nF_max = " << O.F_max << "\nM_max = " << O.M_max
     << "\ntolerance = " << O.settings.tolerance
     << "\nmax_outer_iterations = " << O.settings.max_outer_iterations
     << "\nmax_inner_iterations = " << O.settings.max_inner_iterations << "\nrun = " << O.run_after
     << "\n\n[output]\ndirectory = " << c.output_directory << "\n";
  return os.str();
}

OptimizationProblem optimization_problem(const ScenarioConfig& c) {
  OptimizationProblem p;
  p.start = c.reference.start;
  p.end = c.reference.end;
  p.horizon = c.reference.horizon;
  p.sample_time = c.simulation.sample_time;
  p.F_max = c.optimization.F_max;
  p.M_max = c.optimization.M_max;
  p.settings = c.optimization.settings;
  return p;
}

ReferenceTrajectory build_reference(const ScenarioConfig& c, double Ts,
                                    const ReferenceTrajectory* optimal) {
  const auto& R = c.reference;
  switch (R.kind) {
    case ReferenceKind::Polynomial:
      return polynomial_reference(R.start, R.end, R.horizon, Ts);
    case ReferenceKind::LyingEight:
      return lying_eight_reference(R.eight, Ts, c.crane);
    case ReferenceKind::Optimal: {
      if (optimal) return *optimal;
      OptimizationProblem p = optimization_problem(c);
      p.sample_time = Ts;
      return optimize_minimax_acceleration(p, initial_reference(p), c.crane).trajectory;
    }
    case ReferenceKind::File: {
      const auto path = std::filesystem::path(R.file).is_absolute()
                            ? std::filesystem::path(R.file)
                            : std::filesystem::path(c.base_directory) / R.file;
      std::ifstream in(path);
      if (!in) throw ValidationError("cannot open reference file " + path.string());
      ReferenceTrajectory ref = read_reference_csv(in);
      if (std::abs(ref.sample_time - Ts) > 1e-9 * Ts) {
        std::ostringstream os;
        os << "reference file sample time " << ref.sample_time << " s differs from T_s = " << Ts
           << " s";
        throw ValidationError(os.str());
      }
      ref.check_admissible(c.crane);
      return ref;
    }
  }
  throw ValidationError("unknown reference kind");
}

Scenario build_scenario(const ScenarioConfig& c, ControllerKind kind, std::uint64_t seed,
                        std::optional<ReferenceTrajectory> fixed_reference) {
  Scenario s;
  s.name = c.name;
  s.sample_time = c.simulation.sample_time;
  s.plant.params = c.crane;
  s.plant.friction_enabled = c.simulation.friction;
  s.plant.friction_velocity_eps = c.simulation.friction_velocity_eps;
  s.plant.disturbance = c.simulation.disturbance;
  s.plant.substeps = c.simulation.substeps.value_or(PlantModel::default_substeps(s.sample_time));
  s.plant.nominal_euler = c.simulation.nominal;

  auto& o = s.options;
  o.controller = kind;
  if (kind != ControllerKind::EmulatedContinuous) o.spec = discrete_spec(c.controller, kind);
  o.continuous = continuous_uniform(c.controller.continuous_root);
  o.integral_spec = integral_spec(c.controller, kind, s.sample_time);
  o.integral_activation_time = c.controller.integral_activation;
  o.friction_feedforward = c.controller.friction_feedforward;
  o.compensation = c.controller.compensation;
  o.duration = c.simulation.duration;
  o.initial_offset = c.simulation.initial_offset;
  if (c.simulation.initial_perturbation > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-c.simulation.initial_perturbation,
                                             c.simulation.initial_perturbation);
    o.initial_offset(0) += u(rng);
    o.initial_offset(1) += u(rng);
  }

  if (fixed_reference) {
    s.reference = [ref = *fixed_reference](double Ts) {
      if (std::abs(ref.sample_time - Ts) > 1e-12) {
        throw ValidationError("fixed reference cannot be resampled to another T_s");
      }
      return ref;
    };
  } else {
    s.reference = [c](double Ts) { return build_reference(c, Ts); };
  }
  s.retarget = [ctl = c.controller](Scenario& sc) {
    const ControllerKind k = sc.options.controller;
    if (k != ControllerKind::EmulatedContinuous) sc.options.spec = discrete_spec(ctl, k);
    sc.options.integral_spec = integral_spec(ctl, k, sc.sample_time);
  };
  return s;
}

}  // namespace gantry
