#include "gantry/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/AutoDiff>
#include <json.hpp>

namespace gantry {

namespace {

using Inner = Eigen::AutoDiffScalar<Eigen::Matrix<double, 10, 1>>;
using Outer = Eigen::AutoDiffScalar<Eigen::Matrix<Inner, 10, 1>>;
using Vector10 = Eigen::Matrix<double, 10, 1>;
using Matrix10 = Eigen::Matrix<double, 10, 10>;

constexpr int kPerWindow = 5;  // a_L - eps, F - F_max, -F - F_max, M - M_max, -M - M_max

// Value, gradient and Hessian of one scalar with respect to the 10 window entries
// (entry 2 r + c is sample k + r, channel c).
struct Local {
  double value = 0.0;
  Vector10 gradient = Vector10::Zero();
  Matrix10 hessian = Matrix10::Zero();
};

// Decision vector x = [eps, y(4), ..., y(N-1)] with channels interleaved.
class Transcription {
 public:
  Transcription(const OptimizationProblem& problem, const ReferenceTrajectory& init,
                const CraneParams& params)
      : problem_(problem), params_(params), base_(init.samples), N_(problem.transition_end()) {}

  int size() const { return 1 + 2 * (N_ - 4); }
  int windows() const { return N_; }

  int index(int sample, int channel) const {
    return (sample >= 4 && sample < N_) ? 1 + 2 * (sample - 4) + channel : -1;
  }

  double sample(const Eigen::VectorXd& x, int s, int c) const {
    const int i = index(s, c);
    return i < 0 ? base_[s](c) : x(i);
  }

  FlatWindow<double> window(const Eigen::VectorXd& x, int k) const {
    FlatWindow<double> w;
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 2; ++c) w(r, c) = sample(x, k + r, c);
    return w;
  }

  Eigen::VectorXd pack(const std::vector<Eigen::Vector2d>& samples, double eps) const {
    Eigen::VectorXd x(size());
    x(0) = eps;
    for (int s = 4; s < N_; ++s)
      for (int c = 0; c < 2; ++c) x(index(s, c)) = samples[s](c);
    return x;
  }

  std::vector<Eigen::Vector2d> unpack(const Eigen::VectorXd& x) const {
    std::vector<Eigen::Vector2d> out = base_;
    for (int s = 4; s < N_; ++s) out[s] = {x(index(s, 0)), x(index(s, 1))};
    return out;
  }

  double acceleration(const FlatWindow<double>& w) const {
    const double h2 = problem_.sample_time * problem_.sample_time;
    return std::hypot((w(2, 0) - 2.0 * w(1, 0) + w(0, 0)) / h2,
                      (w(2, 1) - 2.0 * w(1, 1) + w(0, 1)) / h2);
  }

  // Plain values a_L, F, M at window k; false when the window is not admissible.
  bool values(const Eigen::VectorXd& x, int k, double& a, double& F, double& M) const {
    const FlatWindow<double> w = window(x, k);
    a = acceleration(w);
    try {
      const auto fp = flat_parameterize(w, params_, problem_.sample_time);
      F = fp.input.F;
      M = fp.input.M;
    } catch (const std::exception&) {
      return false;
    }
    return std::isfinite(F) && std::isfinite(M);
  }

  Local acceleration_local(const Eigen::VectorXd& x, int k) const {
    const FlatWindow<double> w = window(x, k);
    const double h2 = problem_.sample_time * problem_.sample_time;
    const double d[3] = {1.0 / h2, -2.0 / h2, 1.0 / h2};
    Eigen::Vector2d a;
    for (int c = 0; c < 2; ++c) a(c) = d[0] * w(0, c) + d[1] * w(1, c) + d[2] * w(2, c);
    Local out;
    out.value = a.norm();
    if (out.value < 1e-12) return out;
    const Eigen::Vector2d u = a / out.value;
    const Eigen::Matrix2d P = (Eigen::Matrix2d::Identity() - u * u.transpose()) / out.value;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 2; ++c) {
        out.gradient(2 * r + c) = d[r] * u(c);
        for (int s = 0; s < 3; ++s)
          for (int e = 0; e < 2; ++e) out.hessian(2 * r + c, 2 * s + e) = d[r] * d[s] * P(c, e);
      }
    }
    return out;
  }

  void input_local(const Eigen::VectorXd& x, int k, Local& F, Local& M) const {
    const FlatWindow<double> w = window(x, k);
    FlatWindow<Outer> wo;
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 2; ++c) {
        const int i = 2 * r + c;
        Outer o;
        o.value() = Inner(w(r, c), 10, i);
        o.derivatives().resize(10);
        for (int j = 0; j < 10; ++j) o.derivatives()(j) = Inner(j == i ? 1.0 : 0.0, Vector10::Zero());
        wo(r, c) = o;
      }
    }
    const auto fp = flat_parameterize(wo, params_, problem_.sample_time);
    const auto unpack_local = [](const Outer& v, Local& out) {
      out.value = v.value().value();
      out.gradient = v.value().derivatives();
      for (int j = 0; j < 10; ++j) out.hessian.row(j) = v.derivatives()(j).derivatives().transpose();
      out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    };
    unpack_local(fp.input.F, F);
    unpack_local(fp.input.M, M);
  }

 private:
  const OptimizationProblem& problem_;
  const CraneParams& params_;
  std::vector<Eigen::Vector2d> base_;
  int N_;
};

enum class Phase { Feasibility, Minimax };

// Primal log-barrier method on the scaled constraints g(x) < 0. In the feasibility
// phase x(0) is a common slack s on the input bounds (g = c - s); in the minimax
// phase x(0) is eps and the acceleration rows read (a_L - eps) / a_ref.
class Barrier {
 public:
  Barrier(const OptimizationProblem& problem, const Transcription& tr, double a_ref, Phase phase)
      : problem_(problem), tr_(tr), a_ref_(a_ref), phase_(phase) {}

  bool included(int i) const { return phase_ == Phase::Minimax || i != 0; }

  // Scaled constraint values; false unless every window is admissible and strictly feasible.
  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, bool strict = true) const {
    g.resize(kPerWindow * tr_.windows());
    const double s = phase_ == Phase::Feasibility ? x(0) : 0.0;
    for (int k = 0; k < tr_.windows(); ++k) {
      double a = 0, F = 0, M = 0;
      if (!tr_.values(x, k, a, F, M)) return false;
      g.segment<kPerWindow>(kPerWindow * k)
          << (phase_ == Phase::Minimax ? (a - x(0)) / a_ref_ : -1.0),
          (F - problem_.F_max) / problem_.F_max - s, (-F - problem_.F_max) / problem_.F_max - s,
          (M - problem_.M_max) / problem_.M_max - s, (-M - problem_.M_max) / problem_.M_max - s;
    }
    if (strict) {
      for (int i = 0; i < g.size(); ++i)
        if (included(i % kPerWindow) && !(g(i) < 0.0)) return false;
    }
    return true;
  }

  double objective(const Eigen::VectorXd& x) const {
    return phase_ == Phase::Minimax ? x(0) / a_ref_ : x(0);
  }

  double merit(const Eigen::VectorXd& x, const Eigen::VectorXd& g, double mu) const {
    double sum = 0.0;
    for (int i = 0; i < g.size(); ++i)
      if (included(i % kPerWindow)) sum += std::log(-g(i));
    return objective(x) - mu * sum;
  }

  void derivatives(const Eigen::VectorXd& x, const Eigen::VectorXd& g, double mu,
                   Eigen::VectorXd& grad, Eigen::SparseMatrix<double>& H) const {
    const int n = tr_.size();
    grad = Eigen::VectorXd::Zero(n);
    grad(0) = phase_ == Phase::Minimax ? 1.0 / a_ref_ : 1.0;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(tr_.windows()) * 121);
    const double slack_weight = phase_ == Phase::Feasibility ? -1.0 : 0.0;

    for (int k = 0; k < tr_.windows(); ++k) {
      int idx[11];
      idx[0] = 0;
      bool free_samples = false;
      for (int r = 0; r < 5; ++r) {
        for (int e = 0; e < 2; ++e) {
          idx[1 + 2 * r + e] = tr_.index(k + r, e);
          free_samples = free_samples || idx[1 + 2 * r + e] >= 0;
        }
      }

      // Gradients of the five constraints in the local 11-vector [x(0), window].
      Eigen::Matrix<double, 11, kPerWindow> G = Eigen::Matrix<double, 11, kPerWindow>::Zero();
      double weight[kPerWindow];
      for (int i = 0; i < kPerWindow; ++i)
        weight[i] = included(i) ? mu / -g(kPerWindow * k + i) : 0.0;

      Matrix10 curvature = Matrix10::Zero();
      if (phase_ == Phase::Minimax) {
        G(0, 0) = -1.0 / a_ref_;
        if (free_samples) {
          const Local a = tr_.acceleration_local(x, k);
          G.col(0).tail<10>() = a.gradient / a_ref_;
          curvature += weight[0] / a_ref_ * a.hessian;
        }
      }
      for (int i = 1; i < kPerWindow; ++i) G(0, i) = slack_weight;
      if (free_samples) {
        Local F, M;
        tr_.input_local(x, k, F, M);
        G.col(1).tail<10>() = F.gradient / problem_.F_max;
        G.col(2).tail<10>() = -F.gradient / problem_.F_max;
        G.col(3).tail<10>() = M.gradient / problem_.M_max;
        G.col(4).tail<10>() = -M.gradient / problem_.M_max;
        curvature += (weight[1] - weight[2]) / problem_.F_max * F.hessian;
        curvature += (weight[3] - weight[4]) / problem_.M_max * M.hessian;
      }
      for (int e = 0; e < 10; ++e) {
        if (idx[1 + e] < 0) {
          curvature.row(e).setZero();
          curvature.col(e).setZero();
          G.row(1 + e).setZero();
        }
      }
      // Convexify the window curvature.
      Eigen::SelfAdjointEigenSolver<Matrix10> eig(curvature);
      Eigen::Matrix<double, 11, 11> block = Eigen::Matrix<double, 11, 11>::Zero();
      block.bottomRightCorner<10, 10>() = eig.eigenvectors() *
                                          eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                                          eig.eigenvectors().transpose();
      for (int i = 0; i < kPerWindow; ++i) {
        if (weight[i] == 0.0) continue;
        block += (weight[i] * weight[i] / mu) * G.col(i) * G.col(i).transpose();
        for (int e = 0; e < 11; ++e)
          if (idx[e] >= 0) grad(idx[e]) += weight[i] * G(e, i);
      }
      for (int a = 0; a < 11; ++a) {
        if (idx[a] < 0) continue;
        for (int b = 0; b < 11; ++b) {
          if (idx[b] < 0 || block(a, b) == 0.0) continue;
          triplets.emplace_back(idx[a], idx[b], block(a, b));
        }
      }
    }
    H.resize(n, n);
    H.setFromTriplets(triplets.begin(), triplets.end());
  }

  // Damped Newton centering for one barrier weight. Stops early once `stop` holds.
  // Returns the iteration count; `centered` reports whether the decrement fell below tol.
  template <typename Stop>
  int center(Eigen::VectorXd& x, double mu, double tol, bool& centered, Stop stop) const {
    Eigen::VectorXd g;
    if (!constraints(x, g)) throw SingularityError("barrier iterate is not strictly feasible");
    double phi = merit(x, g, mu);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::VectorXd grad;
    Eigen::SparseMatrix<double> H;
    centered = false;
    int it = 0;
    for (; it < problem_.settings.max_inner_iterations; ++it) {
      if (stop(x)) {
        centered = true;
        break;
      }
      derivatives(x, g, mu, grad, H);
      Eigen::VectorXd d;
      double shift = 1e-12;
      for (int attempt = 0; attempt < 12; ++attempt, shift *= 100.0) {
        Eigen::SparseMatrix<double> A = H;
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += shift * (1.0 + std::abs(A.coeff(i, i)));
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success) continue;
        d = -ldlt.solve(grad);
        if (ldlt.info() == Eigen::Success && d.allFinite() && grad.dot(d) < 0.0) break;
        d.resize(0);
      }
      if (d.size() == 0) break;
      const double decrement = -grad.dot(d);
      if (decrement < tol) {
        centered = true;
        break;
      }
      double t = 1.0;
      bool accepted = false;
      Eigen::VectorXd trial, g_trial;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        trial = x + t * d;
        if (!constraints(trial, g_trial)) continue;
        const double phi_trial = merit(trial, g_trial, mu);
        if (phi_trial <= phi - 1e-4 * t * decrement) {
          x = trial;
          g = g_trial;
          phi = phi_trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No progress possible at working precision.
        centered = decrement < 1e3 * tol;
        break;
      }
    }
    return it;
  }

  int constraint_count() const {
    return tr_.windows() * (phase_ == Phase::Minimax ? kPerWindow : kPerWindow - 1);
  }

 private:
  const OptimizationProblem& problem_;
  const Transcription& tr_;
  double a_ref_;
  Phase phase_;
};

// Largest excess over the bounds in native units (acceleration against eps).
double native_violation(const Transcription& tr, const OptimizationProblem& problem,
                        const Eigen::VectorXd& x, double eps) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < tr.windows(); ++k) {
    double a = 0, F = 0, M = 0;
    if (!tr.values(x, k, a, F, M)) return std::numeric_limits<double>::infinity();
    worst = std::max({worst, a - eps, std::abs(F) - problem.F_max, std::abs(M) - problem.M_max});
  }
  return worst;
}

void fill_active_sets(OptimizationReport& r, const OptimizationProblem& problem) {
  const double rel = 1e-4;
  r.active_acceleration.clear();
  r.active_force.clear();
  r.active_torque.clear();
  for (std::size_t k = 0; k < r.a_L.size(); ++k) {
    const int i = static_cast<int>(k);
    if (r.a_L[k] >= r.epsilon * (1.0 - rel) && r.epsilon > 0.0) r.active_acceleration.push_back(i);
    if (std::abs(r.F[k]) >= problem.F_max * (1.0 - rel)) r.active_force.push_back(i);
    if (std::abs(r.M[k]) >= problem.M_max * (1.0 - rel)) r.active_torque.push_back(i);
  }
}

ReferenceTrajectory make_reference(const OptimizationProblem& problem,
                                   std::vector<Eigen::Vector2d> samples) {
  ReferenceTrajectory ref;
  ref.sample_time = problem.sample_time;
  ref.samples = std::move(samples);
  ref.transition_end = problem.transition_end();
  ref.start = problem.start;
  ref.end = problem.end;
  return ref;
}

}  // namespace

void OptimizationProblem::validate() const {
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
  const double steps = horizon / sample_time;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    std::ostringstream os;
    os << "horizon T = " << horizon << " s is not an integer multiple of T_s = " << sample_time
       << " s";
    throw ValidationError(os.str());
  }
  if (std::round(steps) < 2) throw ValidationError("horizon must span at least two samples");
  if (!(F_max > 0.0) || !(M_max > 0.0)) throw ValidationError("F_max and M_max must be positive");
  if (!(settings.tolerance > 0.0) || settings.max_outer_iterations < 1 ||
      settings.max_inner_iterations < 1) {
    throw ValidationError("invalid optimizer settings");
  }
}

int OptimizationProblem::transition_end() const {
  return kRestPadding - 1 + static_cast<int>(std::lround(horizon / sample_time));
}

ReferenceTrajectory initial_reference(const OptimizationProblem& problem) {
  problem.validate();
  return polynomial_reference(problem.start, problem.end, problem.horizon, problem.sample_time);
}

OptimizationReport evaluate_reference(const OptimizationProblem& problem,
                                      const ReferenceTrajectory& ref, const CraneParams& params) {
  const int N = problem.transition_end();
  if (ref.size() < N + kRestPadding) {
    throw ValidationError("reference has " + std::to_string(ref.size()) + " samples, expected " +
                          std::to_string(N + kRestPadding));
  }
  OptimizationReport r;
  r.F_max = problem.F_max;
  r.M_max = problem.M_max;
  for (int k = 0; k < N; ++k) {
    const ReferenceWindow w = ref.window(k);
    const auto fp = flat_parameterize(w, params, problem.sample_time);
    const double h2 = problem.sample_time * problem.sample_time;
    r.a_L.push_back(std::hypot((w(2, 0) - 2.0 * w(1, 0) + w(0, 0)) / h2,
                               (w(2, 1) - 2.0 * w(1, 1) + w(0, 1)) / h2));
    r.F.push_back(fp.input.F);
    r.M.push_back(fp.input.M);
  }
  r.epsilon = *std::max_element(r.a_L.begin(), r.a_L.end());
  r.initial_epsilon = r.epsilon;
  for (int k = 0; k < N; ++k) {
    r.max_violation = std::max({r.max_violation, std::abs(r.F[k]) - problem.F_max,
                                std::abs(r.M[k]) - problem.M_max});
  }
  fill_active_sets(r, problem);
  return r;
}

OptimizationResult optimize_minimax_acceleration(const OptimizationProblem& problem,
                                                 const ReferenceTrajectory& init,
                                                 const CraneParams& params) {
  problem.validate();
  params.validate();
  const int N = problem.transition_end();
  if (init.size() != N + kRestPadding || init.transition_end != N) {
    throw ValidationError("initial reference does not match the problem's sample layout");
  }
  for (int k = 0; k < kRestPadding; ++k) {
    if (init.samples[k] != problem.start || init.samples[N + k] != problem.end) {
      throw ValidationError("initial reference violates the rest boundary samples");
    }
  }
  const OptimizationReport initial = evaluate_reference(problem, init, params);
  const double a_ref = initial.epsilon > 1e-9 ? initial.epsilon : 1.0;
  const auto& s = problem.settings;

  Transcription tr(problem, init, params);
  Eigen::VectorXd x = tr.pack(init.samples, 0.0);
  int stages = 0, iterations = 0;

  const auto finish = [&](bool converged, double eps) {
    OptimizationResult result;
    result.trajectory = make_reference(problem, tr.unpack(x));
    result.report = evaluate_reference(problem, result.trajectory, params);
    result.report.epsilon = eps;
    result.report.initial_epsilon = initial.epsilon;
    result.report.outer_iterations = stages;
    result.report.inner_iterations = iterations;
    result.report.converged = converged;
    result.report.max_violation = std::max(0.0, native_violation(tr, problem, x, eps));
    fill_active_sets(result.report, problem);
    return result;
  };

  // Phase I: drive the input bounds strictly feasible if the initializer violates them.
  const double margin = 1e-3;
  double worst = native_violation(tr, problem, x, initial.epsilon);
  if (!(worst < 0.0)) {
    Barrier phase1(problem, tr, a_ref, Phase::Feasibility);
    Eigen::VectorXd g;
    if (!phase1.constraints(x, g, false)) throw SingularityError("initial reference not admissible");
    double slack = 0.0;
    for (int i = 0; i < g.size(); ++i)
      if (i % kPerWindow != 0) slack = std::max(slack, g(i));
    x(0) = slack + 1.0;
    const auto feasible = [&](const Eigen::VectorXd& z) { return z(0) < -margin; };
    double mu = 1e-2;
    bool centered = false;
    for (; stages < s.max_outer_iterations && !feasible(x); ++stages, mu *= 0.1) {
      iterations += phase1.center(x, mu, 1e-10, centered, feasible);
      if (mu * phase1.constraint_count() < 1e-3 * s.tolerance) break;
    }
    if (!feasible(x)) {
      const double eps = initial.epsilon;
      auto best = finish(false, eps);
      std::ostringstream os;
      os << "minimax problem infeasible: input bounds violated by up to "
         << best.report.max_violation << " (F_max = " << problem.F_max
         << " N, M_max = " << problem.M_max << " N m) after " << stages << " barrier stages";
      throw OptimizationError(os.str(), std::move(best));
    }
  }

  // Phase II: minimize eps from a strictly feasible start.
  Barrier phase2(problem, tr, a_ref, Phase::Minimax);
  {
    double a_max = 0.0;
    for (int k = 0; k < N; ++k) {
      double a = 0, F = 0, M = 0;
      tr.values(x, k, a, F, M);
      a_max = std::max(a_max, a);
    }
    x(0) = a_max + 1e-2 * a_ref;
  }
  const auto never = [](const Eigen::VectorXd&) { return false; };
  double mu = 1e-3;
  bool centered = false;
  bool converged = false;
  for (; stages < s.max_outer_iterations; ++stages) {
    iterations += phase2.center(x, mu, 1e-12, centered, never);
    // Duality gap of the barrier path, in native acceleration units.
    if (centered && mu * phase2.constraint_count() * a_ref <= s.tolerance) {
      converged = true;
      ++stages;
      break;
    }
    mu *= 0.1;
  }
  auto result = finish(converged, x(0));
  if (!converged) {
    std::ostringstream os;
    os << "minimax optimization did not converge after " << stages
       << " barrier stages (eps = " << x(0) << ", max violation " << result.report.max_violation
       << ")";
    throw OptimizationError(os.str(), std::move(result));
  }
  return result;
}


void write_report_json(std::ostream& out, const OptimizationReport& r) {
  nlohmann::ordered_json j;
  j["epsilon"] = r.epsilon;
  j["initial_epsilon"] = r.initial_epsilon;
  j["converged"] = r.converged;
  j["outer_iterations"] = r.outer_iterations;
  j["inner_iterations"] = r.inner_iterations;
  j["max_violation"] = r.max_violation;
  j["F_max"] = r.F_max;
  j["M_max"] = r.M_max;
  j["active"] = {{"acceleration", r.active_acceleration},
                 {"force", r.active_force},
                 {"torque", r.active_torque}};
  j["a_L"] = r.a_L;
  j["F"] = r.F;
  j["M"] = r.M;
  out << j.dump(2) << '\n';
}

}  // namespace gantry
