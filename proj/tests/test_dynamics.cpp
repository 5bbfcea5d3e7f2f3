#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "support/oracles.hpp"
#include "vnc/dynamics.hpp"
#include "vnc/sampling.hpp"
#include "vnc/systems.hpp"

using Eigen::VectorXd;
using vnc::Formulation;
using vnc::IntegratorMethod;
using vnc::TangentState;
using vnc::Trajectory;

TEST_CASE("integrate: free motion is reproduced exactly") {
  vnc::Acceleration none = [](const VectorXd& q, const VectorXd&) {
    return VectorXd::Zero(q.size());
  };
  TangentState init{0.0, Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(1.0, 0.0)};
  Trajectory traj = vnc::integrate(none, init, 1.0, {});
  CHECK(traj.samples.size() == 1001);
  CHECK((traj.back().q - Eigen::Vector2d(1.5, -1.0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((traj.back().qdot - Eigen::Vector2d(1.0, 0.0)).cwiseAbs().maxCoeff() < 1e-14);

  // zero horizon: a single sample
  Trajectory single = vnc::integrate(none, init, 0.0, {});
  CHECK(single.samples.size() == 1);
  CHECK(single.back().t == 0.0);
}

TEST_CASE("integrate: invalid inputs and blow-up detection") {
  vnc::Acceleration cubic = [](const VectorXd&, const VectorXd& v) {
    return VectorXd(v.array().pow(3).matrix());  // finite-time blow-up
  };
  TangentState init{0.0, VectorXd::Zero(1), VectorXd::Constant(1, 3.0)};
  CHECK_THROWS_AS(vnc::integrate(cubic, init, 10.0, {}), vnc::StepFailure);

  vnc::IntegratorSettings bad;
  bad.dt = 0.0;
  vnc::Acceleration none = [](const VectorXd& q, const VectorXd&) {
    return VectorXd::Zero(q.size());
  };
  CHECK_THROWS_AS(vnc::integrate(none, init, 1.0, bad), vnc::StepFailure);
}

TEST_CASE("rk4 and rk45 agree on the SE(2) closed loop") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 1)};
  vnc::IntegratorSettings rk4;
  vnc::IntegratorSettings rk45;
  rk45.method = IntegratorMethod::RK45;
  rk45.dt = 0.01;
  Trajectory a = vnc::closed_loop_trajectory(knife, init, 5.0, rk4);
  Trajectory b = vnc::closed_loop_trajectory(knife, init, 5.0, rk45);
  auto rep = vnc::compare_trajectories(a, b);
  CHECK(rep.max_overall() < 1e-6);
  CHECK(rep.points > 10);
}

TEST_CASE("closed loop trajectories: drift stays below tolerance") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 2)};
  Trajectory traj = vnc::closed_loop_trajectory(knife, init, 10.0);
  CHECK(traj.max_drift() < 1e-8);
  CHECK(traj.warnings.empty());

  vnc::SystemSpec disk = vnc::rolling_disk();
  VectorXd q4 = VectorXd::Zero(4);
  VectorXd v4(4);
  v4 << 1, 0, 1, 0.5;
  Trajectory dtraj = vnc::closed_loop_trajectory(disk, {0.0, q4, v4}, 10.0);
  CHECK(dtraj.max_drift() < 1e-8);

  // zero velocity start: stationary
  Trajectory rest = vnc::closed_loop_trajectory(knife, {0.0, Eigen::Vector3d(1, 2, 3),
                                                        VectorXd::Zero(3)}, 2.0);
  CHECK((rest.back().q - Eigen::Vector3d(1, 2, 3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(rest.max_drift() == 0.0);

  // off-D initial states get projected with a warning
  Trajectory proj = vnc::closed_loop_trajectory(knife, {0.0, Eigen::Vector3d(0, 0, 0),
                                                        Eigen::Vector3d(0, 1, 0)}, 0.1);
  CHECK(proj.warnings.size() == 1);
  CHECK(proj.max_drift() < 1e-10);
}

TEST_CASE("closed loop controls recorded along the trajectory") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 2)};
  Trajectory traj = vnc::closed_loop_trajectory(knife, init, 0.5);
  REQUIRE(traj.samples.front().u.size() == 1);
  CHECK(traj.samples.front().u[0] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(traj.max_control() >= 2.0 - 1e-9);
}

TEST_CASE("formulation equivalence: closed loop vs constrained geodesics") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 2)};
  auto a = vnc::closed_loop_trajectory(knife, init, 5.0);
  auto b = vnc::constrained_geodesic_trajectory(knife, init, 5.0);
  CHECK(vnc::compare_trajectories(a, b).max_overall() < 1e-6);

  // at rest with V = 0 the constrained geodesic stays put
  auto rest = vnc::constrained_geodesic_trajectory(
      knife, {0.0, Eigen::Vector3d(0.5, 0.5, 0.5), VectorXd::Zero(3)}, 1.0);
  CHECK((rest.back().q - Eigen::Vector3d(0.5, 0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("chaplygin: conserved speed and heading rate, orthogonal-input equivalence") {
  vnc::SystemSpec sleigh = vnc::chaplygin_sleigh(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0.4),
                    Eigen::Vector3d(std::cos(0.4) * 1.2, std::sin(0.4) * 1.2, 0.7)};
  Trajectory nh = vnc::nonholonomic_trajectory(sleigh, init, 10.0);
  for (const auto& s : nh.samples) {
    const double v = std::hypot(s.qdot[0], s.qdot[1]);
    CHECK(std::abs(v - 1.2) < 1e-8);
    CHECK(std::abs(s.qdot[2] - 0.7) < 1e-8);
  }
  // closed loop equals the nonholonomic flow (inputs in the annihilator)
  Trajectory cl = vnc::closed_loop_trajectory(sleigh, init, 5.0);
  CHECK(vnc::compare_trajectories(cl, nh).max_overall() < 1e-6);
  // energy is conserved: controls do no work on D
  auto [lo, hi] = cl.energy_span();
  CHECK(hi - lo < 1e-8);

  // the SE(2) knife input is not orthogonal: flows separate
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  TangentState ki{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 2)};
  auto kcl = vnc::closed_loop_trajectory(knife, ki, 5.0);
  auto knh = vnc::nonholonomic_trajectory(knife, ki, 5.0);
  CHECK(vnc::compare_trajectories(kcl, knh).max_overall() > 1e-3);
}

TEST_CASE("offset sleigh: full-coordinate run tracks the reduced equations") {
  const double m = 1.0, I = 1.0, a = 0.3;
  vnc::SystemSpec sleigh = vnc::offset_sleigh(m, I, a);
  const double v0 = 1.0, w0 = 1.0;
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(v0, 0, w0)};
  Trajectory full = vnc::nonholonomic_trajectory(sleigh, init, 5.0);

  // reduced oracle: wdot = -(m a/(I + m a^2)) v w, vdot = a w^2, same RK4 grid
  const double k = m * a / (I + m * a * a);
  double v = v0, w = w0;
  const double dt = 1e-3;
  auto f = [k, a](double vv, double ww) {
    return std::pair<double, double>(a * ww * ww, -k * vv * ww);
  };
  double worst_v = 0.0, worst_w = 0.0;
  std::size_t idx = 0;
  for (int step = 0;; ++step) {
    // compare at matching sample times
    const auto& s = full.samples[idx];
    const double vf = s.qdot[0] * std::cos(s.q[2]) + s.qdot[1] * std::sin(s.q[2]);
    const double wf = s.qdot[2];
    worst_v = std::max(worst_v, std::abs(vf - v));
    worst_w = std::max(worst_w, std::abs(wf - w));
    if (++idx >= full.samples.size()) break;
    // RK4 on the 2-state reduced system
    auto [k1v, k1w] = f(v, w);
    auto [k2v, k2w] = f(v + 0.5 * dt * k1v, w + 0.5 * dt * k1w);
    auto [k3v, k3w] = f(v + 0.5 * dt * k2v, w + 0.5 * dt * k2w);
    auto [k4v, k4w] = f(v + dt * k3v, w + dt * k3w);
    v += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    w += dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
  }
  CHECK(worst_v < 1e-6);
  CHECK(worst_w < 1e-6);

  // |omega| decays toward zero and v is nondecreasing (vdot = a w^2 >= 0)
  for (std::size_t i = 1; i < full.samples.size(); ++i) {
    CHECK(std::abs(full.samples[i].qdot[2]) <=
          std::abs(full.samples[i - 1].qdot[2]) + 1e-12);
  }
  const auto& s0 = full.samples.front();
  const auto& s1 = full.samples.back();
  const double vstart = s0.qdot[0] * std::cos(s0.q[2]) + s0.qdot[1] * std::sin(s0.q[2]);
  const double vend = s1.qdot[0] * std::cos(s1.q[2]) + s1.qdot[1] * std::sin(s1.q[2]);
  CHECK(vend >= vstart - 1e-12);

  // a = 0 reduces to the symmetric sleigh: constant (v, omega)
  vnc::SystemSpec sym = vnc::offset_sleigh(1.0, 1.0, 0.0);
  Trajectory symt = vnc::nonholonomic_trajectory(sym, init, 3.0);
  CHECK(std::abs(symt.back().qdot[2] - w0) < 1e-10);
}

TEST_CASE("two-formulation equivalence holds on the drift-free transversal builtins") {
  // closed loop = constrained geodesics requires the drift to be a potential
  // gradient; se2_damped carries a non-potential damping force, so its closed
  // loop is not a geodesic flow of the constrained connection (negative
  // control below)
  std::mt19937_64 rng(707);
  for (const char* name : {"se2_knife", "rolling_disk", "chaplygin", "offset_sleigh",
                           "flat3_integrable"}) {
    vnc::SystemSpec sys = vnc::make_builtin(name);
    auto [q, v] = vnc::random_resolved_state(sys, rng, 2.0);
    TangentState init{0.0, q, v};
    auto cl = vnc::closed_loop_trajectory(sys, init, 2.0);
    auto cg = vnc::constrained_geodesic_trajectory(sys, init, 2.0);
    INFO(std::string(name));
    CHECK(vnc::compare_trajectories(cl, cg).max_overall() < 1e-6);
  }

  vnc::SystemSpec damped = vnc::se2_damped(1.0, 1.0, 0.5);
  TangentState di{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 1)};
  auto dcl = vnc::closed_loop_trajectory(damped, di, 2.0);
  auto dcg = vnc::constrained_geodesic_trajectory(damped, di, 2.0);
  CHECK(vnc::compare_trajectories(dcl, dcg).max_overall() > 1e-2);

  // orthogonal-input case: the constrained geodesics ARE the nonholonomic flow
  vnc::SystemSpec sleigh = vnc::chaplygin_sleigh(1.0, 1.0);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 1)};
  auto cg = vnc::constrained_geodesic_trajectory(sleigh, init, 5.0);
  auto nh = vnc::nonholonomic_trajectory(sleigh, init, 5.0);
  CHECK(vnc::compare_trajectories(cg, nh).max_overall() < 1e-6);
}

TEST_CASE("compare_trajectories: identity, mismatch, interpolation") {
  vnc::SystemSpec knife = vnc::se2_knife();
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 1)};
  Trajectory a = vnc::closed_loop_trajectory(knife, init, 1.0);
  CHECK(vnc::compare_trajectories(a, a).max_overall() == 0.0);

  Trajectory b = a;
  for (auto& s : b.samples) s.t += 100.0;
  CHECK_THROWS_AS(vnc::compare_trajectories(a, b), vnc::GridMismatch);

  Trajectory empty;
  CHECK_THROWS_AS(vnc::compare_trajectories(a, empty), vnc::GridMismatch);
}

TEST_CASE("modified potential condition: orthogonal inputs pass, knife fails") {
  auto chap = vnc::check_modified_potential_condition(vnc::chaplygin_sleigh(1.0, 2.0));
  CHECK(chap.pass);
  CHECK(chap.max_gap < 1e-10);

  auto offset = vnc::check_modified_potential_condition(vnc::offset_sleigh(1.0, 1.0, 0.4));
  CHECK(offset.pass);

  auto knife = vnc::check_modified_potential_condition(vnc::se2_knife(1.0, 1.0));
  CHECK_FALSE(knife.pass);
  CHECK(knife.max_gap > 1e-3);  // quantified gap

  // the zero section satisfies the condition pointwise on any system
  vnc::SystemSpec k = vnc::se2_knife(1.0, 1.0);
  vnc::VectorField zero = vnc::VectorField::constant(Eigen::Vector3d::Zero());
  Eigen::VectorXd q = Eigen::Vector3d(0.3, -0.1, 0.8);
  auto lc = vnc::christoffel_lc(k.metric, q);
  Eigen::VectorXd nxx = vnc::covariant_derivative(lc, zero, zero, q);
  auto qq = vnc::orthogonal_projectors(k.metric, k.constraints, q);
  auto pf = vnc::oblique_projectors(k.constraints, k.inputs, k.metric, q);
  CHECK(((qq.onto_complement - pf.onto_complement) * nxx).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("geodesic field tangency: integrable flat case vs curved distributions") {
  auto flat = vnc::geodesic_field_tangency_check(vnc::flat3_integrable());
  CHECK(flat.tangent);
  CHECK(flat.trajectories_compared);
  CHECK(flat.max_trajectory_gap < 1e-6);
  CHECK(flat.pass);

  auto knife = vnc::geodesic_field_tangency_check(vnc::se2_knife(1.0, 1.0));
  CHECK_FALSE(knife.tangent);
  CHECK(knife.max_residual > 1e-3);

  // the sleigh distribution is curved the same way: straight lines with
  // nonzero heading rate leave D, so the geodesic field is not tangent
  auto chap = vnc::geodesic_field_tangency_check(vnc::chaplygin_sleigh(1.0, 1.0));
  CHECK_FALSE(chap.tangent);
}

TEST_CASE("drift bound across transversal builtins") {
  std::mt19937_64 rng(606);
  for (const char* name :
       {"se2_knife", "se2_damped", "rolling_disk", "chaplygin", "offset_sleigh",
        "flat3_integrable"}) {
    vnc::SystemSpec sys = vnc::make_builtin(name);
    for (int i = 0; i < 3; ++i) {
      auto [q, v] = vnc::random_resolved_state(sys, rng);
      Trajectory traj = vnc::closed_loop_trajectory(sys, {0.0, q, v}, 10.0);
      const double bound = 1e-8 * (1.0 + v.squaredNorm() * 10.0);
      CHECK(traj.max_drift() < bound);
    }
  }
}

TEST_CASE("uncontrolled formulation: damped SE(2) slows down") {
  vnc::SystemSpec damped = vnc::se2_damped(1.0, 1.0, 0.5);
  TangentState init{0.0, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 0)};
  Trajectory traj = vnc::simulate(damped, Formulation::Uncontrolled, init, 2.0);
  // xdot(t) = e^{-gamma t / m} xdot(0)
  CHECK(traj.back().qdot[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
  CHECK(traj.back().qdot[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
  CHECK(traj.back().qdot[2] == doctest::Approx(0.0));
}
