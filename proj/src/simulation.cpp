#include "gantry/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace gantry {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::DiscreteDynamic: return "dynamic";
    case ControllerKind::DiscreteQuasiStatic: return "quasi_static";
    case ControllerKind::EmulatedContinuous: return "continuous";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(const std::string& name) {
  if (name == "dynamic") return ControllerKind::DiscreteDynamic;
  if (name == "quasi_static") return ControllerKind::DiscreteQuasiStatic;
  if (name == "continuous") return ControllerKind::EmulatedContinuous;
  throw ValidationError("unknown controller '" + name +
                        "' (expected dynamic, quasi_static or continuous)");
}

void PlantModel::validate() const {
  params.validate();
  if (substeps < 1) throw ValidationError("plant substeps must be >= 1");
  if (!(friction_velocity_eps > 0.0)) throw ValidationError("friction velocity eps must be positive");
  if (!std::isfinite(disturbance.F) || !std::isfinite(disturbance.M)) {
    throw ValidationError("disturbance must be finite");
  }
}

int PlantModel::default_substeps(double sample_time) {
  return std::max(1, static_cast<int>(std::lround(20.0 * sample_time / 0.01)));
}

Vector6<double> plant_dynamics(const PlantModel& plant, const OriginalState<double>& x,
                               const Input<double>& u) {
  const CraneParams& p = plant.params;
  Input<double> applied{u.F + plant.disturbance.F, u.M + plant.disturbance.M};
  if (plant.friction_enabled) {
    // Drum friction is smoothed at the same rope speed as the trolley's.
    const double eps = plant.friction_velocity_eps;
    applied.F -= p.r_vT * x.v_T + p.r_CT * std::tanh(x.v_T / eps);
    applied.M -= p.r_vphi * x.omega_phi + p.r_Cphi * std::tanh(x.omega_phi * p.R / eps);
  }
  return continuous_dynamics(x, applied, p);
}

OriginalState<double> integrate_interval(const PlantModel& plant, const OriginalState<double>& x,
                                         const Input<double>& u, double sample_time) {
  const double h = sample_time / plant.substeps;
  Vector6<double> s = x.vector();
  const auto f = [&](const Vector6<double>& v) {
    return plant_dynamics(plant, OriginalState<double>::from_vector(v), u);
  };
  for (int i = 0; i < plant.substeps; ++i) {
    const Vector6<double> k1 = f(s);
    const Vector6<double> k2 = f(s + 0.5 * h * k1);
    const Vector6<double> k3 = f(s + 0.5 * h * k2);
    const Vector6<double> k4 = f(s + h * k3);
    s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return OriginalState<double>::from_vector(s);
}

std::vector<double> hurwitz_coefficients(std::span<const std::complex<double>> roots) {
  for (const auto& r : roots) {
    if (!(r.real() < 0.0)) {
      std::ostringstream os;
      os << "continuous root " << r << " is not in the open left half plane";
      throw ValidationError(os.str());
    }
    if (r.imag() != 0.0 &&
        std::none_of(roots.begin(), roots.end(), [&](const auto& q) {
          return std::abs(q - std::conj(r)) <= 1e-12 * std::max(1.0, std::abs(r));
        })) {
      std::ostringstream os;
      os << "complex root " << r << " has no conjugate partner";
      throw ValidationError(os.str());
    }
  }
  return expand_monic(roots);
}

ContinuousErrorDynamics continuous_uniform(double s, std::array<int, 2> orders) {
  ContinuousErrorDynamics spec;
  for (int j = 0; j < 2; ++j) {
    const std::vector<std::complex<double>> roots(orders[j], {s, 0.0});
    spec.coefficients[j] = hurwitz_coefficients(roots);
  }
  return spec;
}

Input<double> emulated_continuous_controller(const TransformedState<double>& x,
                                             const ReferenceDerivatives& ref,
                                             const ContinuousErrorDynamics& spec,
                                             const CraneParams& p) {
  if (spec.coefficients[0].size() != 4 || spec.coefficients[1].size() != 2) {
    throw ValidationError("continuous quasi-static law needs error dynamics of order (4, 2)");
  }
  check_domain(x, p);
  const auto& a = spec.coefficients[1];
  const auto& b = spec.coefficients[0];
  const double st = std::sin(x.theta), ct = std::cos(x.theta), tt = st / ct;
  const double w = x.omega_theta;

  // y_L chain of order 2 and the derivatives of its new input along the closed loop.
  const double e0 = x.y_L - ref(0, 1);
  const double e1 = x.v_Ly - ref(1, 1);
  const double vy = ref(2, 1) - a[1] * e1 - a[0] * e0;
  const double e2 = vy - ref(2, 1);
  const double vy1 = ref(3, 1) - a[1] * e2 - a[0] * e1;
  const double e3 = vy1 - ref(3, 1);
  const double vy2 = ref(4, 1) - a[1] * e3 - a[0] * e2;

  const double vertical = p.g - vy;
  if (!(vertical > 0.0)) {
    std::ostringstream os;
    os << "continuous law singular: g - v_y = " << vertical << " at " << detail::describe(x);
    throw SingularityError(os.str());
  }
  // x_L derivatives implied by the pendulum constraint a_Lx = (g - a_Ly) tan(theta).
  const double x2 = vertical * tt;
  const double x3 = -vy1 * tt + vertical * w / (ct * ct);
  const double vx = ref(4, 0) - b[3] * (x3 - ref(3, 0)) - b[2] * (x2 - ref(2, 0)) -
                    b[1] * (x.v_Lx - ref(1, 0)) - b[0] * (x.x_L - ref(0, 0));
  const double alpha =
      ct * ct * (vx + vy2 * tt + 2.0 * vy1 * w / (ct * ct)) / vertical - 2.0 * w * w * tt;
  const double tension = p.m_L * vertical / ct;
  return input_from_tension(x, tension, alpha, p);
}

namespace {

bool state_diverged(const OriginalState<double>& x, const CraneParams& p, std::string& why) {
  const Vector6<double> v = x.vector();
  if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e6) {
    why = "state magnitude exceeded 1e6";
    return true;
  }
  if (!(std::abs(x.theta) < kAngleGuard)) {
    why = "pendulum angle left the guard";
    return true;
  }
  if (!(p.R * x.phi * std::cos(x.theta) > kMinLoadDepth)) {
    why = "load depth fell below 1e-4 m";
    return true;
  }
  return false;
}

}  // namespace

ScenarioResult run_closed_loop(const PlantModel& plant, const ClosedLoopOptions& options,
                               const ReferenceTrajectory& ref) {
  plant.validate();
  const CraneParams& p = plant.params;
  const double Ts = ref.sample_time;
  if (!(Ts > 0.0)) throw ValidationError("sampling time must be positive");
  if (ref.size() < kRestPadding + 1) throw ValidationError("reference too short");
  const auto validate_spec = [&](std::array<int, 2> orders) {
    options.spec.validate(orders, Ts);
    if (options.integral_spec) options.integral_spec->validate(orders, Ts);
  };
  switch (options.controller) {
    case ControllerKind::DiscreteDynamic: validate_spec({4, 4}); break;
    case ControllerKind::DiscreteQuasiStatic: validate_spec({4, 2}); break;
    case ControllerKind::EmulatedContinuous:
      if (!ref.continuous) {
        throw ValidationError("continuous controller needs a reference with analytic derivatives");
      }
      break;
  }
  const double duration = options.duration.value_or(ref.size() * Ts + 1.0);
  const int steps = static_cast<int>(std::lround(duration / Ts));
  const double activation = options.integral_activation_time.value_or(ref.transition_end_time());

  ScenarioResult res;
  res.sample_time = Ts;
  res.controller = options.controller;

  TransformedState<double> start = flat_parameterize(ref.window(0), p, Ts).state;
  start.x_L += options.initial_offset(0);
  start.y_L += options.initial_offset(1);
  OriginalState<double> x = inverse_transform(start, p);
  DynamicControllerState z = DynamicControllerState::from_reference(ref.window(0));
  IntegralState integral;

  for (int k = 0; k <= steps; ++k) {
    const double t = k * Ts;
    TransformedState<double> xt;
    Input<double> u;
    const Eigen::Vector2d yd = ref.at(k);
    const bool active = t >= activation - 1e-9 * Ts;
    const ErrorDynamicsSpec& spec =
        active && options.integral_spec ? *options.integral_spec : options.spec;
    try {
      xt = transform_to_load_coords(x, p);
      const ReferenceWindow window = ref.window(k);
      switch (options.controller) {
        case ControllerKind::DiscreteDynamic: {
          const auto out = dynamic_feedback_step(xt, z, window, spec, p, Ts, integral);
          u = out.input;
          z = out.next;
          break;
        }
        case ControllerKind::DiscreteQuasiStatic:
          u = quasi_static_feedback(xt, window, spec, p, Ts, integral).input;
          break;
        case ControllerKind::EmulatedContinuous:
          u = emulated_continuous_controller(xt, ref.continuous(t), options.continuous, p);
          break;
      }
      if (options.friction_feedforward) {
        const Eigen::Vector2d vd = desired_actuator_velocities(window, p, Ts);
        u = u + friction_feedforward(vd(0), vd(1), options.compensation);
      }
      if (!std::isfinite(u.F) || !std::isfinite(u.M)) throw SingularityError("non-finite input");
    } catch (const std::exception& e) {
      res.diverged = true;
      res.divergence_reason = std::string("controller failed at k=") + std::to_string(k) + ": " +
                              e.what();
      break;
    }

    const Eigen::Vector2d y(xt.x_L, xt.y_L);
    res.time.push_back(t);
    res.original.push_back(x);
    res.transformed.push_back(xt);
    res.input.push_back(u);
    res.reference.push_back(yd);
    res.error.push_back(y - yd);
    integral = integral_update(integral, y - yd, active && options.integral_spec.has_value(), Ts);
    if (k == steps) break;

    try {
      if (plant.nominal_euler) {
        const Input<double> applied{u.F + plant.disturbance.F, u.M + plant.disturbance.M};
        x = inverse_transform(euler_step(xt, applied, p, Ts), p);
      } else {
        x = integrate_interval(plant, x, u, Ts);
      }
    } catch (const std::exception& e) {
      res.diverged = true;
      res.divergence_reason = std::string("plant left the valid domain after k=") +
                              std::to_string(k) + ": " + e.what();
      break;
    }
    std::string why;
    if (state_diverged(x, p, why)) {
      res.diverged = true;
      res.divergence_reason = why + " after k=" + std::to_string(k);
      break;
    }
  }
  res.last_valid_index = res.size() - 1;
  res.summary = summarize(res);
  return res;
}

ScenarioSummary summarize(const ScenarioResult& r) {
  ScenarioSummary s;
  if (r.size() == 0) return s;
  s.F_min = s.F_max = r.input.front().F;
  s.M_min = s.M_max = r.input.front().M;
  for (int k = 0; k < r.size(); ++k) {
    s.max_error = s.max_error.cwiseMax(r.error[k].cwiseAbs());
    s.max_position_error = std::max(s.max_position_error, r.error[k].norm());
    s.F_min = std::min(s.F_min, r.input[k].F);
    s.F_max = std::max(s.F_max, r.input[k].F);
    s.M_min = std::min(s.M_min, r.input[k].M);
    s.M_max = std::max(s.M_max, r.input[k].M);
  }
  s.final_error = r.error.back().cwiseAbs();
  s.final_position_error = r.error.back().norm();
  return s;
}

void write_result_csv(std::ostream& out, const ScenarioResult& r) {
  out << "k,t,x_T,phi,theta,v_T,omega_phi,omega_theta,x_L,y_L,v_Lx,v_Ly,F,M,x_Ld,y_Ld,e_x,e_y\n";
  out << std::setprecision(12);
  for (int k = 0; k < r.size(); ++k) {
    const auto& o = r.original[k];
    const auto& l = r.transformed[k];
    out << k << ',' << r.time[k] << ',' << o.x_T << ',' << o.phi << ',' << o.theta << ',' << o.v_T
        << ',' << o.omega_phi << ',' << o.omega_theta << ',' << l.x_L << ',' << l.y_L << ','
        << l.v_Lx << ',' << l.v_Ly << ',' << r.input[k].F << ',' << r.input[k].M << ','
        << r.reference[k](0) << ',' << r.reference[k](1) << ',' << r.error[k](0) << ','
        << r.error[k](1) << '\n';
  }
}

std::string result_file_name(const std::string& scenario, ControllerKind controller,
                             double sample_time) {
  return scenario + "_" + to_string(controller) + "_" +
         std::to_string(std::lround(sample_time * 1000.0)) + "ms.csv";
}

ScenarioResult run_scenario(const Scenario& scenario) {
  if (!scenario.reference) throw ValidationError("scenario has no reference generator");
  const ReferenceTrajectory ref = scenario.reference(scenario.sample_time);
  return run_closed_loop(scenario.plant, scenario.options, ref);
}

std::vector<SweepRow> sweep_sampling_times(const Scenario& scenario,
                                           const std::vector<double>& sample_times,
                                           const std::vector<ControllerKind>& controllers) {
  std::vector<std::future<SweepRow>> jobs;
  for (ControllerKind kind : controllers) {
    for (double Ts : sample_times) {
      Scenario s = scenario;
      s.sample_time = Ts;
      s.options.controller = kind;
      s.plant.substeps = std::max(
          1, static_cast<int>(std::lround(scenario.plant.substeps * Ts / scenario.sample_time)));
      if (s.retarget) s.retarget(s);
      jobs.push_back(std::async(std::launch::async, [s = std::move(s)]() {
        const ScenarioResult r = run_scenario(s);
        return SweepRow{s.options.controller, s.sample_time, r.diverged, r.last_valid_index,
                        r.summary};
      }));
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "controller,Ts_ms,diverged,last_index,max_error_x,max_error_y,max_position_error,"
         "final_error_x,final_error_y,F_min,F_max,M_min,M_max\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << to_string(r.controller) << ',' << std::lround(r.sample_time * 1000.0) << ','
        << (r.diverged ? 1 : 0) << ',' << r.last_valid_index << ',' << s.max_error(0) << ','
        << s.max_error(1) << ',' << s.max_position_error << ',' << s.final_error(0) << ','
        << s.final_error(1) << ',' << s.F_min << ',' << s.F_max << ',' << s.M_min << ','
        << s.M_max << '\n';
  }
}

}  // namespace gantry
