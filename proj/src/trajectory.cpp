#include "gantry/trajectory.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace gantry {

namespace {

int rest_index(double duration, double sample_time) {
  // Guard against 1.7 / 0.01 = 170.00000000000003.
  const double steps = duration / sample_time;
  return kRestPadding - 1 + static_cast<int>(std::ceil(steps - 1e-9));
}

}  // namespace

Eigen::Vector2d ReferenceTrajectory::at(int k) const {
  if (samples.empty()) throw ValidationError("empty reference trajectory");
  if (k < 0) return samples.front();
  if (k >= size()) return samples.back();
  return samples[static_cast<std::size_t>(k)];
}

ReferenceWindow ReferenceTrajectory::window(int k) const {
  ReferenceWindow w;
  for (int i = 0; i < 5; ++i) w.row(i) = at(k + i).transpose();
  return w;
}

void ReferenceTrajectory::check_rest_padding() const {
  if (size() < transition_end + kRestPadding) {
    throw ValidationError("reference shorter than its terminal rest padding");
  }
  for (int k = 0; k < kRestPadding; ++k) {
    if (samples[k] != samples.front()) {
      throw ValidationError("initial rest padding violated at k=" + std::to_string(k));
    }
    const int m = transition_end + k;
    if (samples[m] != samples.back()) {
      throw ValidationError("terminal rest padding violated at k=" + std::to_string(m));
    }
  }
}

void ReferenceTrajectory::check_admissible(const CraneParams& params) const {
  for (int k = 0; k < size(); ++k) {
    try {
      (void)flat_parameterize(window(k), params, sample_time);
    } catch (const std::exception& e) {
      throw ValidationError("reference window at k=" + std::to_string(k) +
                            " is not admissible: " + e.what());
    }
  }
}

Eigen::Matrix<double, 5, 1> rest_to_rest_profile(double tau) {
  Eigen::Matrix<double, 5, 1> s = Eigen::Matrix<double, 5, 1>::Zero();
  if (tau <= 0.0) return s;
  if (tau >= 1.0) {
    s(0) = 1.0;
    return s;
  }
  const double t = tau, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, t6 = t5 * t, t7 = t6 * t;
  s(0) = 35 * t4 - 84 * t5 + 70 * t6 - 20 * t7;
  s(1) = 140 * t3 - 420 * t4 + 420 * t5 - 140 * t6;
  s(2) = 420 * t2 - 1680 * t3 + 2100 * t4 - 840 * t5;
  s(3) = 840 * t - 5040 * t2 + 8400 * t3 - 4200 * t4;
  s(4) = 840 - 10080 * t + 25200 * t2 - 16800 * t3;
  return s;
}

RestToRestPolynomial::RestToRestPolynomial(Eigen::Vector2d y0, Eigen::Vector2d yT, double duration,
                                           double start_time)
    : y0_(std::move(y0)), yT_(std::move(yT)), duration_(duration), start_time_(start_time) {
  if (!(duration > 0.0)) throw ValidationError("transition duration must be positive");
}

ReferenceDerivatives RestToRestPolynomial::derivatives(double t) const {
  const double tau = (t - start_time_) / duration_;
  const Eigen::Matrix<double, 5, 1> s = rest_to_rest_profile(tau);
  ReferenceDerivatives d;
  const Eigen::Vector2d delta = yT_ - y0_;
  double scale = 1.0;
  for (int i = 0; i < 5; ++i) {
    d.row(i) = (s(i) * scale) * delta.transpose();
    scale /= duration_;
  }
  // Exact endpoints (no rounding through y0 + 1 * delta).
  if (tau <= 0.0) d.row(0) = y0_.transpose();
  else if (tau >= 1.0) d.row(0) = yT_.transpose();
  else d.row(0) += y0_.transpose();
  return d;
}

Eigen::Matrix<double, 8, 1> RestToRestPolynomial::coefficients(int channel) const {
  const double delta = yT_(channel) - y0_(channel);
  const double T = duration_;
  Eigen::Matrix<double, 8, 1> c = Eigen::Matrix<double, 8, 1>::Zero();
  c(0) = y0_(channel);
  c(4) = 35 * delta / std::pow(T, 4);
  c(5) = -84 * delta / std::pow(T, 5);
  c(6) = 70 * delta / std::pow(T, 6);
  c(7) = -20 * delta / std::pow(T, 7);
  return c;
}

ReferenceTrajectory polynomial_reference(const Eigen::Vector2d& y0, const Eigen::Vector2d& yT,
                                         double duration, double sample_time) {
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  if (!(duration > 0.0)) throw ValidationError("transition duration must be positive");
  const double start = (kRestPadding - 1) * sample_time;
  RestToRestPolynomial poly(y0, yT, duration, start);

  ReferenceTrajectory ref;
  ref.sample_time = sample_time;
  ref.start = y0;
  ref.end = yT;
  ref.transition_end = rest_index(duration, sample_time);
  const int count = ref.transition_end + kRestPadding;
  ref.samples.reserve(count);
  for (int k = 0; k < count; ++k) {
    if (k < kRestPadding) ref.samples.push_back(y0);
    else if (k >= ref.transition_end) ref.samples.push_back(yT);
    else ref.samples.push_back(poly.value(k * sample_time));
  }
  ref.continuous = [poly](double t) { return poly.derivatives(t); };
  return ref;
}

namespace {

// Derivatives 0..4 in t of f(s(t)) given derivatives of f in s and of s in t.
Eigen::Matrix<double, 5, 1> compose(const Eigen::Matrix<double, 5, 1>& f,
                                    const Eigen::Matrix<double, 5, 1>& s) {
  Eigen::Matrix<double, 5, 1> out;
  out(0) = f(0);
  out(1) = f(1) * s(1);
  out(2) = f(2) * s(1) * s(1) + f(1) * s(2);
  out(3) = f(3) * std::pow(s(1), 3) + 3 * f(2) * s(1) * s(2) + f(1) * s(3);
  out(4) = f(4) * std::pow(s(1), 4) + 6 * f(3) * s(1) * s(1) * s(2) +
           f(2) * (3 * s(2) * s(2) + 4 * s(1) * s(3)) + f(1) * s(4);
  return out;
}

// Derivatives 0..4 of amplitude * sin(omega * s) with respect to s.
Eigen::Matrix<double, 5, 1> sine_derivatives(double amplitude, double omega, double s) {
  Eigen::Matrix<double, 5, 1> d;
  const double sn = std::sin(omega * s), cs = std::cos(omega * s);
  d << sn, omega * cs, -omega * omega * sn, -std::pow(omega, 3) * cs, std::pow(omega, 4) * sn;
  return amplitude * d;
}

}  // namespace

ReferenceTrajectory lying_eight_reference(const LyingEightGeometry& geo, double sample_time,
                                          const CraneParams& params) {
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  if (!(geo.period > 0.0)) throw ValidationError("lying-eight period must be positive");
  if (geo.width < 0.0 || geo.height < 0.0) {
    throw ValidationError("lying-eight width and height must be non-negative");
  }
  const double start = (kRestPadding - 1) * sample_time;
  const double two_pi = 2.0 * std::numbers::pi;
  const auto derivatives = [geo, start, two_pi](double t) {
    const double tau = (t - start) / geo.period;
    Eigen::Matrix<double, 5, 1> phase = rest_to_rest_profile(tau);
    double scale = 1.0;
    for (int i = 1; i < 5; ++i) {
      scale /= geo.period;
      phase(i) *= scale;
    }
    ReferenceDerivatives d;
    d.col(0) = compose(sine_derivatives(0.5 * geo.width, two_pi, phase(0)), phase);
    d.col(1) = compose(sine_derivatives(0.5 * geo.height, 2.0 * two_pi, phase(0)), phase);
    // The path closes exactly at the centre.
    if (tau <= 0.0 || tau >= 1.0) d.row(0).setZero();
    d.row(0) += geo.center.transpose();
    return d;
  };

  ReferenceTrajectory ref;
  ref.sample_time = sample_time;
  ref.start = geo.center;
  ref.end = geo.center;
  ref.transition_end = rest_index(geo.period, sample_time);
  const int count = ref.transition_end + kRestPadding;
  for (int k = 0; k < count; ++k) {
    if (k < kRestPadding || k >= ref.transition_end) ref.samples.push_back(geo.center);
    else ref.samples.push_back(derivatives(k * sample_time).row(0).transpose());
  }
  ref.continuous = derivatives;
  ref.check_admissible(params);
  return ref;
}

void write_reference_csv(std::ostream& out, const ReferenceTrajectory& ref) {
  out << "k,t,x_L,y_L\n";
  out << std::setprecision(17);
  for (int k = 0; k < ref.size(); ++k) {
    out << k << ',' << ref.time(k) << ',' << ref.samples[k](0) << ',' << ref.samples[k](1) << '\n';
  }
}

ReferenceTrajectory read_reference_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("reference CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,t,x_L,y_L") {
    throw ValidationError("reference CSV header must be 'k,t,x_L,y_L', got '" + line + "'");
  }
  ReferenceTrajectory ref;
  std::vector<double> times;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    double values[4];
    for (double& v : values) {
      if (!std::getline(ss, cell, ',')) {
        throw ValidationError("reference CSV row " + std::to_string(row) + " has too few columns");
      }
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("reference CSV row " + std::to_string(row) + ": bad number '" +
                              cell + "'");
      }
    }
    if (static_cast<int>(values[0]) != static_cast<int>(ref.samples.size())) {
      throw ValidationError("reference CSV row " + std::to_string(row) + ": k out of sequence");
    }
    times.push_back(values[1]);
    ref.samples.emplace_back(values[2], values[3]);
  }
  if (ref.samples.size() < 2) throw ValidationError("reference CSV needs at least two samples");
  ref.sample_time = times[1] - times[0];
  if (!(ref.sample_time > 0.0)) throw ValidationError("reference CSV time column not increasing");
  ref.start = ref.samples.front();
  ref.end = ref.samples.back();
  // Terminal rest begins where the trailing run of samples equal to the last one starts.
  int n = ref.size() - 1;
  while (n > 0 && ref.samples[n - 1] == ref.end) --n;
  ref.transition_end = std::max(n, std::min(kRestPadding, ref.size()));
  return ref;
}

}  // namespace gantry
