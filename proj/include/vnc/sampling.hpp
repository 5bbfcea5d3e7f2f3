#pragma once

#include <random>
#include <utility>

#include "vnc/connections.hpp"
#include "vnc/control.hpp"
#include "vnc/distributions.hpp"
#include "vnc/ode.hpp"
#include "vnc/systems.hpp"

namespace vnc {

using Rng = std::mt19937_64;

inline VectorXd random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

/// Random state with the velocity projected onto D (metric-orthogonally), so
/// constraint residuals vanish to machine precision.
inline std::pair<VectorXd, VectorXd> random_on_constraint_state(
    const SystemSpec& sys, Rng& rng, double q_range = 1.0, double v_range = 1.0) {
  VectorXd q = random_vector(rng, sys.dim(), -q_range, q_range);
  VectorXd v = random_vector(rng, sys.dim(), -v_range, v_range);
  ProjectorPair proj = orthogonal_projectors(sys.metric, sys.constraints, q);
  return {std::move(q), VectorXd(proj.onto_constraint * v)};
}

/// Random on-D state whose trajectory under `accel` stays in the regime a
/// fixed-step integrator resolves: sup_t |qdot|_inf <= growth * (1 + |qdot0|_inf)
/// over the probe horizon. Draws landing in an exponentially unstable regime
/// (reversed sleigh motion blows up the heading rate like e^{|v| t}) are
/// redrawn; drift tolerances presume resolved trajectories.
inline std::pair<VectorXd, VectorXd> random_resolved_state_for(
    const SystemSpec& sys, Rng& rng, const Acceleration& accel,
    double horizon = 10.0, double growth = 5.0, double q_range = 1.0,
    double v_range = 1.0) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto [q, v] = random_on_constraint_state(sys, rng, q_range, v_range);
    const double bound = growth * (1.0 + v.cwiseAbs().maxCoeff());
    ode::State2 y{q, v};
    const double dt = 1e-2;  // coarse probe; only magnitude growth matters
    bool resolved = true;
    try {
      const int steps = static_cast<int>(std::llround(horizon / dt));
      for (int s = 0; s < steps && resolved; ++s) {
        y = ode::rk4_step(accel, y, dt);
        if (y.v.cwiseAbs().maxCoeff() > bound) resolved = false;
      }
    } catch (const Error&) {
      resolved = false;
    }
    if (resolved) return {std::move(q), std::move(v)};
  }
  throw InvalidSystem("no integrator-resolved on-constraint state found for " +
                      sys.name);
}

/// As above, probing the closed-loop dynamics.
inline std::pair<VectorXd, VectorXd> random_resolved_state(
    const SystemSpec& sys, Rng& rng, double horizon = 10.0, double growth = 5.0,
    double q_range = 1.0, double v_range = 1.0) {
  Acceleration accel = [&sys](const VectorXd& qq, const VectorXd& vv) {
    return closed_loop_acceleration(sys, qq, vv);
  };
  return random_resolved_state_for(sys, rng, accel, horizon, growth, q_range, v_range);
}

/// Affine vector field q -> a + B q with scalar-generic evaluation.
inline VectorField affine_field(VectorXd a, MatrixXd b) {
  return VectorField::from([a, b](const auto& q) {
    using S = typename std::decay_t<decltype(q)>::Scalar;
    VecX<S> out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      S acc(a[i]);
      for (Eigen::Index j = 0; j < q.size(); ++j) acc += S(b(i, j)) * q[j];
      out[i] = acc;
    }
    return out;
  });
}

inline VectorField random_affine_field(Rng& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  VectorXd a(n);
  MatrixXd b(n, n);
  for (int i = 0; i < n; ++i) {
    a[i] = dist(rng);
    for (int j = 0; j < n; ++j) b(i, j) = dist(rng);
  }
  return affine_field(std::move(a), std::move(b));
}

/// Random smooth section of D: the metric-orthogonal projector applied to a
/// random affine field. Every section of D arises this way pointwise.
inline VectorField random_constraint_section(const SystemSpec& sys, Rng& rng,
                                             double scale = 1.0) {
  VectorField raw = random_affine_field(rng, sys.dim(), scale);
  return VectorField::from(
      [raw, metric = sys.metric, dist = sys.constraints](const auto& q) {
        using S = typename std::decay_t<decltype(q)>::Scalar;
        MatX<S> p = MatX<S>::Identity(q.size(), q.size()) -
                    orthogonal_complement_projector<S>(metric, dist, q);
        return (p * raw(q)).eval();
      });
}

/// Same but projected with the oblique projector P_D (requires
/// transversality); range is still D.
inline VectorField random_constraint_section_oblique(const SystemSpec& sys,
                                                     Rng& rng,
                                                     double scale = 1.0) {
  VectorField raw = random_affine_field(rng, sys.dim(), scale);
  return VectorField::from([raw, metric = sys.metric, dist = sys.constraints,
                            input = sys.inputs](const auto& q) {
    using S = typename std::decay_t<decltype(q)>::Scalar;
    MatX<S> pf = oblique_input_projector<S>(dist, input, metric, q);
    MatX<S> pd = MatX<S>::Identity(q.size(), q.size()) - pf;
    return (pd * raw(q)).eval();
  });
}

}  // namespace vnc
