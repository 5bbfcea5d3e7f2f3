#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vnc/config.hpp"
#include "vnc/dynamics.hpp"
#include "vnc/sampling.hpp"
#include "vnc/trajectory_io.hpp"

namespace vnc {

// Stable, documented exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitControlUnavailable = 3;
inline constexpr int kExitStepFailure = 4;

/// Map library errors onto the documented CLI exit codes.
template <class Fn>
int run_cli(Fn&& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << " (line " << e.line << ", column "
        << e.column << ")\n";
    return kExitConfigError;
  } catch (const InvalidSystem& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NotPositiveDefinite& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ControlUnavailable& e) {
    err << "control unavailable: " << e.what() << '\n';
    return kExitControlUnavailable;
  } catch (const StepFailure& e) {
    err << "integration failure: " << e.what() << '\n';
    return kExitStepFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

struct SimulateOptions {
  Formulation formulation = Formulation::ClosedLoop;
  bool allow_nonunique = false;
  double stabilize_gain = 0.0;  // optional -K phi feedback extension
};

namespace detail_cli {

inline void write_trajectory_file(const std::string& path, const std::string& format,
                                  const Trajectory& traj, int n, int n_inputs,
                                  int n_constraints, std::ostream& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  if (format == "json")
    write_trajectory_json(out, traj, n, n_inputs, n_constraints);
  else
    write_trajectory_csv(out, traj, n, n_inputs, n_constraints);
  log << "wrote " << traj.samples.size() << " samples to " << path << '\n';
}

/// Closed loop with an explicit residual-damping extension u = tau* - K A^-1 phi,
/// which drives phi to zero instead of merely holding it constant. Off by
/// default; the plain feedback preserves every level set of phi.
inline Acceleration stabilized_closed_loop(const SystemSpec& sys, double gain,
                                           bool allow_nonunique) {
  return [&sys, gain, allow_nonunique](const VectorXd& q, const VectorXd& v) {
    ControlSolution sol = solve_control(sys, q, v);
    if (sol.status == ControlStatus::NonExistent ||
        (sol.status == ControlStatus::NonUnique && !allow_nonunique)) {
      throw ControlUnavailable(std::string("control solve failed: ") +
                               to_string(sol.status));
    }
    MatrixXd a = control_matrix(sys, q);
    VectorXd phi = sys.constraints.residuals(q, v);
    VectorXd tau = sol.tau - gain * lu_solve<double>(a, phi);
    MatrixXd y = sys.inputs.field_matrix<double>(sys.metric, VecX<double>(q));
    return VectorXd(drift_acceleration(sys, q, v) + y * tau);
  };
}

}  // namespace detail_cli

/// `simulate`: integrate the chosen formulation, write the trajectory file,
/// print a one-screen summary.
inline int cmd_simulate(const SystemConfig& cfg, const SimulateOptions& opts = {},
                        std::ostream& out = std::cout) {
  SystemSpec sys = cfg.build_system();
  sys.metric.at(cfg.initial_state(sys).q);  // validate metric early
  TangentState init = cfg.initial_state(sys);

  Trajectory traj;
  if (opts.formulation == Formulation::ClosedLoop && opts.stabilize_gain > 0.0) {
    Acceleration accel = detail_cli::stabilized_closed_loop(sys, opts.stabilize_gain,
                                                            opts.allow_nonunique);
    traj = integrate(accel, init, cfg.horizon, cfg.integrator,
                     detail_dyn::diagnostics_for(sys, Formulation::ClosedLoop,
                                                 opts.allow_nonunique));
  } else {
    traj = simulate(sys, opts.formulation, init, cfg.horizon, cfg.integrator,
                    opts.allow_nonunique);
  }

  const std::string path =
      cfg.output_path.empty() ? "trajectory." + cfg.output_format : cfg.output_path;
  detail_cli::write_trajectory_file(path, cfg.output_format, traj, sys.dim(),
                                    sys.input_count(), sys.constraint_count(), out);

  for (const auto& w : traj.warnings) out << "warning: " << w << '\n';
  const auto& last = traj.back();
  out << "system: " << sys.name << "  formulation: " << to_string(opts.formulation)
      << '\n';
  out << "final t = " << format_g17(last.t) << '\n';
  out << "final q = [";
  for (int i = 0; i < sys.dim(); ++i) out << (i ? ", " : "") << format_g17(last.q[i]);
  out << "]\nfinal qdot = [";
  for (int i = 0; i < sys.dim(); ++i)
    out << (i ? ", " : "") << format_g17(last.qdot[i]);
  out << "]\n";
  out << "max_drift = " << format_g17(traj.max_drift()) << '\n';
  out << "max_control = " << format_g17(traj.max_control()) << '\n';
  auto [elo, ehi] = traj.energy_span();
  out << "energy_span = [" << format_g17(elo) << ", " << format_g17(ehi) << "]\n";
  return kExitOk;
}

struct ChristoffelOptions {
  ConnectionKind kind = ConnectionKind::Constrained;
  std::optional<VectorXd> point;
  bool with_reference = false;
  double zero_tol = 1e-12;
  std::string out_path;  // empty = stdout
};

inline ConnectionKind connection_kind_from_string(const std::string& s) {
  if (s == "levicivita") return ConnectionKind::LeviCivita;
  if (s == "nonholonomic") return ConnectionKind::Nonholonomic;
  if (s == "constrained") return ConnectionKind::Constrained;
  throw ConfigError("unknown connection kind: " + s);
}

/// Diff of computed coefficients against a published closed-form table.
/// Agreement is reported, not asserted; the published disk table is
/// internally inconsistent in places.
inline Json christoffel_reference_diff(const SystemSpec& sys,
                                       const ConnectionCoefficients& gamma,
                                       const VectorXd& q) {
  std::vector<ChristoffelReferenceEntry> table;
  if (sys.name == "rolling_disk")
    table = rolling_disk_reference_christoffels(sys);
  else if (sys.name == "se2_knife" || sys.name == "se2_damped")
    table = se2_knife_reference_christoffels(sys);
  else
    throw ConfigError("no reference christoffel table for system: " + sys.name);

  Json diffs = Json::array();
  double max_abs_diff = 0.0;
  VecX<double> qq = q;
  for (const auto& entry : table) {
    const double ref = entry.expr.eval_q<double>(qq, sys.chart->parameters());
    const double got = gamma(entry.k, entry.i, entry.j);
    Json d;
    d["symbol"] = entry.label;
    d["k"] = entry.k;
    d["i"] = entry.i;
    d["j"] = entry.j;
    d["computed"] = got;
    d["reference"] = ref;
    d["abs_diff"] = std::abs(got - ref);
    max_abs_diff = std::max(max_abs_diff, std::abs(got - ref));
    diffs.push_back(std::move(d));
  }
  Json j;
  j["entries"] = diffs;
  j["max_abs_diff"] = max_abs_diff;
  j["note"] = "informational comparison against the published closed forms";
  return j;
}

/// `christoffel`: dump the nonzero coefficients of the chosen connection at a
/// point as JSON, optionally with the reference diff.
inline int cmd_christoffel(const SystemConfig& cfg, const ChristoffelOptions& opts = {},
                           std::ostream& out = std::cout) {
  SystemSpec sys = cfg.build_system();
  VectorXd q = opts.point.value_or(
      cfg.q0.value_or(VectorXd::Zero(sys.dim())));
  if (q.size() != sys.dim())
    throw ConfigError("point dimension does not match the system");
  sys.metric.at(q);

  ConnectionCoefficients gamma = christoffel_of(sys, q, opts.kind);
  const auto& names = sys.chart->coordinate_names();

  Json j;
  j["system"] = sys.name;
  j["kind"] = to_string(opts.kind);
  j["point"] = std::vector<double>(q.data(), q.data() + q.size());
  Json coeffs = Json::array();
  for (int k = 0; k < sys.dim(); ++k)
    for (int i = 0; i < sys.dim(); ++i)
      for (int jj = 0; jj < sys.dim(); ++jj) {
        const double v = gamma(k, i, jj);
        if (std::abs(v) <= opts.zero_tol) continue;
        Json c;
        c["k"] = k;
        c["i"] = i;
        c["j"] = jj;
        c["symbol"] =
            "Gamma^" + names[k] + "_{" + names[i] + "," + names[jj] + "}";
        c["value"] = v;
        coeffs.push_back(std::move(c));
      }
  j["coefficients"] = coeffs;
  if (opts.with_reference) {
    j["reference_diff"] = christoffel_reference_diff(sys, gamma, q);
  }

  if (!opts.out_path.empty()) {
    std::ofstream f(opts.out_path);
    if (!f) throw ConfigError("cannot open output file: " + opts.out_path);
    f << j.dump(2) << '\n';
    out << "wrote " << opts.out_path << '\n';
  } else {
    out << j.dump(2) << '\n';
  }
  return kExitOk;
}

struct CompareOptions {
  Formulation first = Formulation::ClosedLoop;
  Formulation second = Formulation::ConstrainedGeodesic;
};

/// `compare`: run two formulations from the same initial state and report
/// sup-norm distances over the common time grid.
inline int cmd_compare(const SystemConfig& cfg, const CompareOptions& opts = {},
                       std::ostream& out = std::cout) {
  SystemSpec sys = cfg.build_system();
  TangentState init = cfg.initial_state(sys);
  sys.metric.at(init.q);
  Trajectory a = simulate(sys, opts.first, init, cfg.horizon, cfg.integrator);
  Trajectory b = simulate(sys, opts.second, init, cfg.horizon, cfg.integrator);
  ComparisonReport rep = compare_trajectories(a, b);
  Json j;
  j["system"] = sys.name;
  j["formulations"] = {to_string(opts.first), to_string(opts.second)};
  j["t_range"] = {rep.t_begin, rep.t_end};
  j["points"] = rep.points;
  j["max_q"] = rep.max_q;
  j["max_qdot"] = rep.max_qdot;
  j["max_overall"] = rep.max_overall();
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check: bundled identity/diagnosis report
// ---------------------------------------------------------------------------

struct CheckLine {
  std::string name;
  bool hard = false;    // failure flips the exit code
  bool ok = true;
  std::string detail;
};

struct CheckOptions {
  int n_points = 30;
  int n_states = 30;
  double identity_tol = 1e-9;
  double horizon = 10.0;
};

namespace detail_cli {

inline bool inputs_in_annihilator(const SystemSpec& sys, Rng& rng, double* max_rel) {
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    VectorXd q = random_vector(rng, sys.dim());
    MatrixXd mu = sys.constraints.coefficient_matrix<double>(VecX<double>(q));
    MatrixXd f = sys.inputs.form_matrix<double>(VecX<double>(q));
    for (int a = 0; a < sys.input_count(); ++a) {
      VectorXd fa = f.row(a).transpose();
      VectorXd c = mu.transpose()
                       .bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                       .solve(fa);
      const double rel = (mu.transpose() * c - fa).norm() / std::max(1.0, fa.norm());
      worst = std::max(worst, rel);
    }
  }
  *max_rel = worst;
  return worst < 1e-10;
}

inline std::string scalar(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace detail_cli

/// All sampled identity checks for one system. Pure function of the system
/// and the seed; the CLI prints one line per entry.
inline std::vector<CheckLine> run_system_checks(const SystemSpec& sys,
                                                unsigned seed,
                                                const CheckOptions& opts = {}) {
  std::vector<CheckLine> lines;
  Rng rng(seed);
  const double tol = opts.identity_tol;

  auto push = [&lines](std::string name, bool hard, bool ok, std::string detail) {
    lines.push_back({std::move(name), hard, ok, std::move(detail)});
  };

  // Metric validity at sampled points (throws NotPositiveDefinite upward on
  // an invalid system; that is a config-level failure).
  {
    double unused = 0.0;
    for (int s = 0; s < 10; ++s) {
      VectorXd q = random_vector(rng, sys.dim());
      unused += sys.metric.at(q)(0, 0);
    }
    (void)unused;
    push("metric-spd", true, true, "symmetric positive definite at 10 sampled points");
  }

  // Transversality census.
  bool transversal = true;
  {
    double worst_sigma = std::numeric_limits<double>::infinity();
    TransversalityReport last;
    for (int s = 0; s < 10; ++s) {
      VectorXd q = random_vector(rng, sys.dim());
      last = check_transversality(sys.constraints, sys.inputs, sys.metric, q);
      transversal = transversal && last.transversal;
      worst_sigma = std::min(worst_sigma, last.sigma_min);
    }
    if (transversal) {
      push("transversality", false, true,
           "TQ = D (+) F at sampled points, sigma_min >= " +
               detail_cli::scalar(worst_sigma));
    } else {
      push("transversality", false, true,
           std::string("deficient: ") + (last.spans ? "TQ = D + F, " : "") +
               "overlap dim " + std::to_string(last.overlap_dim) +
               " (dependent checks skipped)");
    }
  }

  // Input orthogonality and projector coincidence.
  {
    double rel = 0.0;
    const bool orth = detail_cli::inputs_in_annihilator(sys, rng, &rel);
    push("input-orthogonality", false, true,
         orth ? "F = D-perp (inputs lie in the annihilator of D)"
              : "F not orthogonal to D (max annihilator residual " +
                    detail_cli::scalar(rel) + ")");
    if (transversal) {
      double gap = 0.0;
      for (int s = 0; s < 10; ++s) {
        VectorXd q = random_vector(rng, sys.dim());
        ProjectorPair ob = oblique_projectors(sys.constraints, sys.inputs, sys.metric, q);
        ProjectorPair og = orthogonal_projectors(sys.metric, sys.constraints, q);
        gap = std::max(gap,
                       (ob.onto_constraint - og.onto_constraint).cwiseAbs().maxCoeff());
      }
      const bool coincide = gap < 1e-10;
      push("projector-coincidence", true, coincide == orth,
           std::string(coincide ? "oblique and orthogonal projectors coincide"
                                : "projectors differ") +
               " (max gap " + detail_cli::scalar(gap) + ")" +
               (coincide == orth ? "" : " -- inconsistent with orthogonality"));
    }
  }

  if (transversal) {
    // Lemma identity: c-nabla_X Y = P_D(nabla^G_X Y) on D-sections.
    {
      double worst = 0.0;
      for (int f = 0; f < 3; ++f) {
        VectorField x = random_constraint_section_oblique(sys, rng, 0.8);
        VectorField y = random_constraint_section_oblique(sys, rng, 0.8);
        for (int p = 0; p < opts.n_points / 3; ++p) {
          VectorXd q = random_vector(rng, sys.dim());
          VectorXd lhs = constrained_connection_apply(sys.metric, sys.constraints,
                                                      sys.inputs, x, y, q);
          ConnectionCoefficients lc = christoffel_lc(sys.metric, q);
          ProjectorPair pp = oblique_projectors(sys.constraints, sys.inputs,
                                                sys.metric, q);
          VectorXd rhs = pp.onto_constraint * covariant_derivative(lc, x, y, q);
          worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        }
      }
      push("constrained-projection-identity", true, worst < tol,
           "max residual " + detail_cli::scalar(worst));
    }

    // Torsion identity: T^c(X, Y) + P_F([X, Y]) = 0 on D-sections.
    {
      double worst = 0.0;
      for (int f = 0; f < 3; ++f) {
        VectorField x = random_constraint_section_oblique(sys, rng, 0.8);
        VectorField y = random_constraint_section_oblique(sys, rng, 0.8);
        for (int p = 0; p < opts.n_points / 3; ++p) {
          VectorXd q = random_vector(rng, sys.dim());
          VectorXd t = torsion_constrained(sys.metric, sys.constraints, sys.inputs,
                                           x, y, q);
          ProjectorPair pp = oblique_projectors(sys.constraints, sys.inputs,
                                                sys.metric, q);
          VectorXd pf_bracket = pp.onto_complement * lie_bracket(x, y, q);
          worst = std::max(worst, (t + pf_bracket).cwiseAbs().maxCoeff());
        }
      }
      push("torsion-identity", true, worst < tol,
           "max residual " + detail_cli::scalar(worst));
    }

    // Difference tensor is pointwise: value depends only on X(q), Y(q).
    {
      double worst = 0.0;
      for (int p = 0; p < 10; ++p) {
        VectorXd q = random_vector(rng, sys.dim());
        VectorField x1 = random_affine_field(rng, sys.dim(), 0.8);
        VectorField y1 = random_affine_field(rng, sys.dim(), 0.8);
        VectorField x2 = VectorField::constant(x1(q));
        VectorField y2 = VectorField::constant(y1(q));
        auto diff = [&](const VectorField& xx, const VectorField& yy) {
          return VectorXd(constrained_connection_apply(sys.metric, sys.constraints,
                                                       sys.inputs, xx, yy, q) -
                          nonholonomic_connection_apply(sys.metric, sys.constraints,
                                                        xx, yy, q));
        };
        worst = std::max(worst,
                         (diff(x1, y1) - diff(x2, y2)).cwiseAbs().maxCoeff());
      }
      push("difference-tensor-pointwise", true, worst < tol,
           "max residual " + detail_cli::scalar(worst));
    }

    // Closed-loop defining identity at random on-D states.
    {
      double worst = 0.0;
      bool solvable = true;
      for (int s = 0; s < opts.n_states; ++s) {
        auto [q, v] = random_on_constraint_state(sys, rng);
        try {
          VectorXd acc = closed_loop_acceleration(sys, q, v);
          worst = std::max(worst,
                           constraint_rate(sys, q, v, acc).cwiseAbs().maxCoeff());
        } catch (const ControlUnavailable&) {
          solvable = false;
        }
      }
      push("closed-loop-invariance-identity", true, solvable && worst < 1e-10,
           solvable ? "max |d/dt phi| " + detail_cli::scalar(worst)
                    : "control solve failed at a sampled state");
    }

    // Reference control agreement at on-D states.
    if (sys.has_reference_control()) {
      double worst = 0.0;
      for (int s = 0; s < opts.n_states; ++s) {
        auto [q, v] = random_on_constraint_state(sys, rng);
        ControlSolution sol = solve_control(sys, q, v);
        if (sol.status != ControlStatus::Unique) continue;
        worst = std::max(worst,
                         (sol.tau - sys.reference_control_at(q, v)).cwiseAbs().maxCoeff());
      }
      push("reference-control-agreement", true, worst < 1e-12,
           "max |tau - reference| " + detail_cli::scalar(worst));
    }

    // Geodesic invariance of D under the constrained connection.
    {
      Acceleration geo = [&sys](const VectorXd& q, const VectorXd& v) {
        return VectorXd(
            -christoffel_of(sys, q, ConnectionKind::Constrained).contract(v, v));
      };
      std::vector<std::pair<VectorXd, VectorXd>> samples;
      for (int s = 0; s < 5; ++s)
        samples.push_back(random_resolved_state_for(sys, rng, geo, opts.horizon));
      GeodesicInvarianceReport rep = geodesic_invariance_check(
          sys, ConnectionKind::Constrained, samples, opts.horizon, 1e-3, 1e-6);
      push("geodesic-invariance", true, rep.pass,
           "max drift " + detail_cli::scalar(rep.max_drift) + " over T=" +
               std::to_string(opts.horizon));
    }

    // Constrained flow vs nonholonomic flow.
    {
      ConditionReport rep = check_modified_potential_condition(sys, 15, 3, seed + 7);
      push("modified-potential-condition", false, true,
           rep.pass ? "holds: constrained = nonholonomic dynamics (max gap " +
                          detail_cli::scalar(rep.max_gap) + ")"
                    : "fails with gap " + detail_cli::scalar(rep.max_gap) +
                          ": flows differ");
    }

    // Geodesic field tangency.
    {
      TangencyReport rep = geodesic_field_tangency_check(sys, 15, 3, seed + 13);
      std::string msg = rep.tangent
                            ? "metric geodesic field tangent to D"
                            : "not tangent (max mu(nabla_X X) residual " +
                                  detail_cli::scalar(rep.max_residual) + ")";
      if (rep.trajectories_compared)
        msg += "; free = nonholonomic = constrained within " +
               detail_cli::scalar(rep.max_trajectory_gap);
      push("geodesic-field-tangency", rep.tangent, rep.pass, msg);
    }

    // Energy conservation when the inputs do no work on D.
    {
      double rel = 0.0;
      const bool orth = detail_cli::inputs_in_annihilator(sys, rng, &rel);
      if (orth && sys.potential.is_zero() && sys.drift_force.is_zero()) {
        auto [q, v] = random_resolved_state(sys, rng, opts.horizon);
        Trajectory traj = closed_loop_trajectory(sys, {0.0, q, v}, opts.horizon);
        auto [lo, hi] = traj.energy_span();
        push("energy-conservation", true, hi - lo < 1e-8,
             "energy span " + detail_cli::scalar(hi - lo) + " over T=" +
                 std::to_string(opts.horizon));
      }
    }
  } else {
    // Degenerate systems: census of the solve outcomes.
    int unique = 0, nonexistent = 0, nonunique = 0;
    for (int s = 0; s < opts.n_states; ++s) {
      VectorXd q = random_vector(rng, sys.dim());
      VectorXd v = random_vector(rng, sys.dim());
      switch (solve_control(sys, q, v).status) {
        case ControlStatus::Unique:
          ++unique;
          break;
        case ControlStatus::NonExistent:
          ++nonexistent;
          break;
        case ControlStatus::NonUnique:
          ++nonunique;
          break;
      }
    }
    push("control-solvability", false, true,
         "sampled states: " + std::to_string(unique) + " unique, " +
             std::to_string(nonexistent) + " nonexistent, " +
             std::to_string(nonunique) + " nonunique");
  }

  return lines;
}

/// `check`: run the bundle and print one line per check. Exit 0 when every
/// hard check passes, 1 otherwise.
inline int cmd_check(const SystemConfig& cfg, const CheckOptions& opts = {},
                     std::ostream& out = std::cout) {
  SystemSpec sys = cfg.build_system();
  std::vector<CheckLine> lines = run_system_checks(sys, cfg.seed, opts);
  bool all_ok = true;
  out << "check report for system '" << sys.name << "' (seed " << cfg.seed << ")\n";
  for (const auto& line : lines) {
    const char* tag = line.ok ? (line.hard ? "PASS" : "INFO") : (line.hard ? "FAIL" : "NOTE");
    out << '[' << tag << "] " << line.name << ": " << line.detail << '\n';
    if (line.hard && !line.ok) all_ok = false;
  }
  out << (all_ok ? "all checks passed\n" : "some checks FAILED\n");
  return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace vnc
