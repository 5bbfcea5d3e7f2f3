#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "vnc/connections.hpp"
#include "vnc/control.hpp"
#include "vnc/ode.hpp"
#include "vnc/sampling.hpp"
#include "vnc/systems.hpp"

namespace vnc {

struct TangentState {
  double t = 0.0;
  VectorXd q;
  VectorXd qdot;
};

struct TrajectorySample {
  double t = 0.0;
  VectorXd q;
  VectorXd qdot;
  VectorXd u;    // applied controls (zero-length when not closed loop)
  VectorXd phi;  // constraint residuals
  double energy = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<std::string> warnings;

  const TrajectorySample& front() const { return samples.front(); }
  const TrajectorySample& back() const { return samples.back(); }

  double max_drift() const {
    double worst = 0.0;
    for (const auto& s : samples)
      if (s.phi.size() > 0) worst = std::max(worst, s.phi.cwiseAbs().maxCoeff());
    return worst;
  }

  double max_control() const {
    double worst = 0.0;
    for (const auto& s : samples)
      if (s.u.size() > 0) worst = std::max(worst, s.u.cwiseAbs().maxCoeff());
    return worst;
  }

  std::pair<double, double> energy_span() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples) {
      lo = std::min(lo, s.energy);
      hi = std::max(hi, s.energy);
    }
    return {lo, hi};
  }
};

enum class IntegratorMethod { RK4, RK45 };

struct IntegratorSettings {
  IntegratorMethod method = IntegratorMethod::RK4;
  double dt = 1e-3;     // fixed step (RK4) / initial step (RK45)
  double atol = 1e-9;
  double rtol = 1e-9;
};

/// Kinetic plus potential energy at a state.
inline double energy(const SystemSpec& sys, const VectorXd& q, const VectorXd& v) {
  MatrixXd m = sys.metric.at(q);
  double e = 0.5 * v.dot(m * v);
  VecX<double> qq = q;
  e += sys.potential.at<double>(qq);
  return e;
}

using SampleDiagnostics = std::function<void(TrajectorySample&)>;

/// Explicit Runge-Kutta integration of a second-order field. RK4 records
/// every fixed step; RK45 records every accepted adaptive step.
inline Trajectory integrate(const Acceleration& accel, const TangentState& initial,
                            double T, const IntegratorSettings& settings = {},
                            const SampleDiagnostics& diag = {}) {
  if (!(settings.dt > 0.0)) throw StepFailure("dt must be positive");
  if (T < 0.0) throw StepFailure("horizon must be nonnegative");
  if (!initial.q.allFinite() || !initial.qdot.allFinite())
    throw StepFailure("initial state is not finite");

  Trajectory traj;
  auto record = [&](double t, const ode::State2& y) {
    TrajectorySample s;
    s.t = t;
    s.q = y.q;
    s.qdot = y.v;
    if (diag) diag(s);
    traj.samples.push_back(std::move(s));
  };

  ode::State2 y{initial.q, initial.qdot};
  double t = initial.t;
  record(t, y);
  if (T == 0.0) return traj;
  const double t_end = initial.t + T;

  if (settings.method == IntegratorMethod::RK4) {
    while (t < t_end - 1e-12) {
      const double h = std::min(settings.dt, t_end - t);
      y = ode::rk4_step(accel, y, h);
      t += h;
      record(t, y);
    }
    return traj;
  }

  // RK45 (Dormand-Prince) with standard PI-free step control.
  double h = std::min(settings.dt, T);
  const double h_min = 1e-12 * std::max(1.0, std::abs(t_end));
  while (t < t_end - 1e-12) {
    h = std::min(h, t_end - t);
    ode::Dp45Result res = ode::dp45_step(accel, y, h, settings.atol, settings.rtol);
    if (res.error_norm <= 1.0) {
      y = std::move(res.y5);
      t += h;
      record(t, y);
      const double grow =
          res.error_norm > 0 ? 0.9 * std::pow(res.error_norm, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(res.error_norm, -0.2), 0.2, 1.0);
      if (h < h_min) throw StepFailure("adaptive step underflow");
    }
  }
  return traj;
}

enum class Formulation { Uncontrolled, ClosedLoop, ConstrainedGeodesic, Nonholonomic };

inline const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::Uncontrolled:
      return "uncontrolled";
    case Formulation::ClosedLoop:
      return "closedloop";
    case Formulation::ConstrainedGeodesic:
      return "constrained";
    case Formulation::Nonholonomic:
      return "nonholonomic";
  }
  return "?";
}

inline Formulation formulation_from_string(const std::string& s) {
  if (s == "uncontrolled") return Formulation::Uncontrolled;
  if (s == "closedloop") return Formulation::ClosedLoop;
  if (s == "constrained") return Formulation::ConstrainedGeodesic;
  if (s == "nonholonomic") return Formulation::Nonholonomic;
  throw ConfigError("unknown formulation: " + s);
}

inline Acceleration make_acceleration(const SystemSpec& sys, Formulation f,
                                      bool allow_nonunique = false) {
  switch (f) {
    case Formulation::Uncontrolled:
      return [&sys](const VectorXd& q, const VectorXd& v) {
        return drift_acceleration(sys, q, v);
      };
    case Formulation::ClosedLoop:
      return [&sys, allow_nonunique](const VectorXd& q, const VectorXd& v) {
        return closed_loop_acceleration(sys, q, v, allow_nonunique);
      };
    case Formulation::ConstrainedGeodesic:
      return [&sys](const VectorXd& q, const VectorXd& v) {
        ConnectionCoefficients gamma =
            christoffel_of(sys, q, ConnectionKind::Constrained);
        VectorXd acc = -gamma.contract(v, v);
        if (!sys.potential.is_zero()) {
          ProjectorPair proj =
              oblique_projectors(sys.constraints, sys.inputs, sys.metric, q);
          acc -= proj.onto_constraint * grad_potential(sys.metric, sys.potential, q);
        }
        return acc;
      };
    case Formulation::Nonholonomic:
      return [&sys](const VectorXd& q, const VectorXd& v) {
        ConnectionCoefficients gamma =
            christoffel_of(sys, q, ConnectionKind::Nonholonomic);
        VectorXd acc = -gamma.contract(v, v);
        if (!sys.potential.is_zero()) {
          ProjectorPair proj = orthogonal_projectors(sys.metric, sys.constraints, q);
          acc -= proj.onto_constraint * grad_potential(sys.metric, sys.potential, q);
        }
        return acc;
      };
  }
  throw ConfigError("unknown formulation");
}

namespace detail_dyn {

inline SampleDiagnostics diagnostics_for(const SystemSpec& sys, Formulation f,
                                         bool allow_nonunique) {
  return [&sys, f, allow_nonunique](TrajectorySample& s) {
    s.phi = sys.constraints.residuals(s.q, s.qdot);
    s.energy = energy(sys, s.q, s.qdot);
    if (f == Formulation::ClosedLoop) {
      ControlSolution sol = solve_control(sys, s.q, s.qdot);
      if (sol.status == ControlStatus::Unique ||
          (sol.status == ControlStatus::NonUnique && allow_nonunique)) {
        s.u = sol.tau;
      }
    }
  };
}

/// Project the initial velocity onto D when it violates the constraints
/// (oblique projector for the closed-loop family, orthogonal otherwise).
inline TangentState project_initial(const SystemSpec& sys, TangentState state,
                                    Formulation f, Trajectory* warn_sink) {
  VectorXd phi = sys.constraints.residuals(state.q, state.qdot);
  if (phi.size() == 0 || phi.cwiseAbs().maxCoeff() <= 1e-10) return state;
  MatrixXd pd;
  if (f == Formulation::Nonholonomic) {
    pd = orthogonal_projectors(sys.metric, sys.constraints, state.q).onto_constraint;
  } else {
    pd = oblique_projectors(sys.constraints, sys.inputs, sys.metric, state.q)
             .onto_constraint;
  }
  if (warn_sink != nullptr) {
    warn_sink->warnings.push_back(
        "initial velocity violated the constraints (|phi| = " +
        std::to_string(phi.cwiseAbs().maxCoeff()) + "); projected onto D");
  }
  state.qdot = pd * state.qdot;
  return state;
}

}  // namespace detail_dyn

inline Trajectory simulate(const SystemSpec& sys, Formulation f,
                           const TangentState& initial, double T,
                           const IntegratorSettings& settings = {},
                           bool allow_nonunique = false) {
  Trajectory warn_sink;
  TangentState start = initial;
  if (f != Formulation::Uncontrolled) {
    start = detail_dyn::project_initial(sys, std::move(start), f, &warn_sink);
  }
  Acceleration accel = make_acceleration(sys, f, allow_nonunique);
  Trajectory traj = integrate(accel, start, T, settings,
                              detail_dyn::diagnostics_for(sys, f, allow_nonunique));
  traj.warnings = std::move(warn_sink.warnings);
  return traj;
}

inline Trajectory closed_loop_trajectory(const SystemSpec& sys,
                                         const TangentState& initial, double T,
                                         const IntegratorSettings& settings = {},
                                         bool allow_nonunique = false) {
  return simulate(sys, Formulation::ClosedLoop, initial, T, settings, allow_nonunique);
}

inline Trajectory constrained_geodesic_trajectory(
    const SystemSpec& sys, const TangentState& initial, double T,
    const IntegratorSettings& settings = {}) {
  return simulate(sys, Formulation::ConstrainedGeodesic, initial, T, settings);
}

inline Trajectory nonholonomic_trajectory(const SystemSpec& sys,
                                          const TangentState& initial, double T,
                                          const IntegratorSettings& settings = {}) {
  return simulate(sys, Formulation::Nonholonomic, initial, T, settings);
}

struct ComparisonReport {
  double max_q = 0.0;     // sup-norm distance on coordinates
  double max_qdot = 0.0;  // sup-norm distance on velocities
  int points = 0;
  double t_begin = 0.0;
  double t_end = 0.0;

  double max_overall() const { return std::max(max_q, max_qdot); }
};

namespace detail_dyn {

inline std::pair<VectorXd, VectorXd> interpolate(const Trajectory& traj, double t) {
  const auto& s = traj.samples;
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const TrajectorySample& a, double tt) { return a.t < tt; });
  if (it == s.begin()) return {it->q, it->qdot};
  if (it == s.end()) return {s.back().q, s.back().qdot};
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double span = hi.t - lo.t;
  if (span <= 0.0) return {hi.q, hi.qdot};
  const double w = (t - lo.t) / span;
  return {(1.0 - w) * lo.q + w * hi.q, (1.0 - w) * lo.qdot + w * hi.qdot};
}

}  // namespace detail_dyn

/// Sup-norm distance between two trajectories over their common time range,
/// evaluated on the coarser grid with linear interpolation of the finer one.
inline ComparisonReport compare_trajectories(const Trajectory& a,
                                             const Trajectory& b) {
  if (a.samples.empty() || b.samples.empty())
    throw GridMismatch("empty trajectory");
  if (a.samples.front().q.size() != b.samples.front().q.size())
    throw GridMismatch("trajectories have different state dimensions");
  const double t0 = std::max(a.samples.front().t, b.samples.front().t);
  const double t1 = std::min(a.samples.back().t, b.samples.back().t);
  if (t1 < t0) throw GridMismatch("trajectories do not overlap in time");

  auto count_in = [&](const Trajectory& tr) {
    int c = 0;
    for (const auto& s : tr.samples)
      if (s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12) ++c;
    return c;
  };
  const Trajectory& grid = count_in(a) <= count_in(b) ? a : b;

  ComparisonReport rep;
  rep.t_begin = t0;
  rep.t_end = t1;
  for (const auto& s : grid.samples) {
    if (s.t < t0 - 1e-12 || s.t > t1 + 1e-12) continue;
    auto [qa, va] = detail_dyn::interpolate(a, s.t);
    auto [qb, vb] = detail_dyn::interpolate(b, s.t);
    rep.max_q = std::max(rep.max_q, (qa - qb).cwiseAbs().maxCoeff());
    rep.max_qdot = std::max(rep.max_qdot, (va - vb).cwiseAbs().maxCoeff());
    ++rep.points;
  }
  return rep;
}

struct ConditionReport {
  double max_gap = 0.0;
  double tol = 1e-8;
  bool pass = false;
};

/// Orthogonal/oblique correction agreement on D-sections:
/// || (Q - P_F)(nabla^G_X X) || over random sections and points. Passing means
/// the constrained dynamics reproduces the nonholonomic dynamics.
inline ConditionReport check_modified_potential_condition(const SystemSpec& sys,
                                                          int n_points = 25,
                                                          int n_fields = 4,
                                                          unsigned seed = 1234,
                                                          double tol = 1e-8) {
  Rng rng(seed);
  ConditionReport rep;
  rep.tol = tol;
  for (int f = 0; f < n_fields; ++f) {
    VectorField x = random_constraint_section(sys, rng, 0.8);
    for (int p = 0; p < n_points; ++p) {
      VectorXd q = random_vector(rng, sys.dim());
      ConnectionCoefficients lc = christoffel_lc(sys.metric, q);
      VectorXd nabla_xx = covariant_derivative(lc, x, x, q);
      MatrixXd qq =
          orthogonal_complement_projector<double>(sys.metric, sys.constraints,
                                                  VecX<double>(q));
      MatrixXd pf = oblique_input_projector<double>(sys.constraints, sys.inputs,
                                                    sys.metric, VecX<double>(q));
      const double gap = ((qq - pf) * nabla_xx).cwiseAbs().maxCoeff();
      rep.max_gap = std::max(rep.max_gap, gap);
    }
  }
  rep.pass = rep.max_gap < tol;
  return rep;
}

struct TangencyReport {
  double max_residual = 0.0;  // mu(nabla^G_X X) over samples
  bool tangent = false;
  bool trajectories_compared = false;
  double max_trajectory_gap = 0.0;
  bool pass = false;
};

/// Is the geodesic field of the metric tangent to D? When it is, free
/// geodesics started on D satisfy the constraints, and the nonholonomic and
/// constrained flows both reduce to them; that coincidence is then verified
/// on sampled initial conditions.
inline TangencyReport geodesic_field_tangency_check(const SystemSpec& sys,
                                                    int n_points = 25,
                                                    int n_fields = 4,
                                                    unsigned seed = 4321,
                                                    double tol = 1e-8,
                                                    double traj_tol = 1e-6) {
  Rng rng(seed);
  TangencyReport rep;
  for (int f = 0; f < n_fields; ++f) {
    VectorField x = random_constraint_section(sys, rng, 0.8);
    for (int p = 0; p < n_points; ++p) {
      VectorXd q = random_vector(rng, sys.dim());
      ConnectionCoefficients lc = christoffel_lc(sys.metric, q);
      VectorXd nabla_xx = covariant_derivative(lc, x, x, q);
      MatrixXd c = sys.constraints.coefficient_matrix<double>(VecX<double>(q));
      const double res = (c * nabla_xx).cwiseAbs().maxCoeff();
      rep.max_residual = std::max(rep.max_residual, res);
    }
  }
  rep.tangent = rep.max_residual < tol;
  if (!rep.tangent) {
    rep.pass = true;  // nothing further to check
    return rep;
  }

  // Coincidence of the three families is a statement about geodesics, so it
  // only applies to force-free systems.
  if (!sys.potential.is_zero() || !sys.drift_force.is_zero()) {
    rep.pass = true;
    return rep;
  }
  rep.trajectories_compared = true;
  IntegratorSettings settings;
  Acceleration free_geodesic = [&sys](const VectorXd& q, const VectorXd& v) {
    return VectorXd(-christoffel_lc(sys.metric, q).contract(v, v));
  };
  for (int i = 0; i < 3; ++i) {
    auto [q0, v0] = random_on_constraint_state(sys, rng);
    TangentState init{0.0, q0, v0};
    Trajectory free_geo =
        integrate(free_geodesic, init, 5.0, settings,
                  detail_dyn::diagnostics_for(sys, Formulation::Uncontrolled, false));
    Trajectory nh = nonholonomic_trajectory(sys, init, 5.0, settings);
    Trajectory con = constrained_geodesic_trajectory(sys, init, 5.0, settings);
    rep.max_trajectory_gap =
        std::max({rep.max_trajectory_gap, compare_trajectories(free_geo, nh).max_overall(),
                  compare_trajectories(free_geo, con).max_overall()});
  }
  rep.pass = rep.max_trajectory_gap < traj_tol;
  return rep;
}

}  // namespace vnc
