#pragma once

#include <utility>

#include "vnc/distributions.hpp"
#include "vnc/geometry.hpp"
#include "vnc/systems.hpp"

namespace vnc {

/// Control matrix A^b_a = mu^b(q)(Y^a): how strongly each input pushes each
/// constraint residual. Invertible exactly when D and F are transversal.
inline MatrixXd control_matrix(const SystemSpec& sys, const VectorXd& q) {
  MatrixXd c = sys.constraints.coefficient_matrix<double>(VecX<double>(q));
  MatrixXd y = sys.inputs.field_matrix<double>(sys.metric, VecX<double>(q));
  return c * y;
}

/// Acceleration of the uncontrolled system:
/// -Gamma^G(qdot, qdot) - grad_G V + Y0(q, qdot).
inline VectorXd drift_acceleration(const SystemSpec& sys, const VectorXd& q,
                                   const VectorXd& qdot) {
  ConnectionCoefficients lc = christoffel_lc(sys.metric, q);
  VectorXd acc = -lc.contract(qdot, qdot);
  if (!sys.potential.is_zero()) acc -= grad_potential(sys.metric, sys.potential, q);
  if (!sys.drift_force.is_zero())
    acc += sys.drift_force.at<double>(VecX<double>(q), VecX<double>(qdot));
  return acc;
}

/// Right-hand side b^b = -d/dt phi^b along the uncontrolled flow:
/// b^b = -(d_j mu^b_i qdot^j qdot^i + mu^b_i a_drift^i).
inline VectorXd control_rhs(const SystemSpec& sys, const VectorXd& q,
                            const VectorXd& qdot) {
  const int n = sys.dim();
  const int m = sys.constraint_count();
  MatX<Dual> cd = sys.constraints.coefficient_matrix<Dual>(seed_coordinates(q));
  VectorXd drift = drift_acceleration(sys, q, qdot);

  VectorXd b(m);
  for (int a = 0; a < m; ++a) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += cd(a, i).value() * drift[i];
      for (int j = 0; j < n; ++j) acc += cd(a, i).partial(j) * qdot[j] * qdot[i];
    }
    b[a] = -acc;
  }
  return b;
}

/// Total time derivative of the residuals along a given acceleration:
/// d/dt phi^b = d_j mu^b_i qdot^j qdot^i + mu^b_i a^i. Vanishes identically
/// along the closed loop; that is the defining property of the feedback.
inline VectorXd constraint_rate(const SystemSpec& sys, const VectorXd& q,
                                const VectorXd& qdot, const VectorXd& accel) {
  const int n = sys.dim();
  const int m = sys.constraint_count();
  MatX<Dual> cd = sys.constraints.coefficient_matrix<Dual>(seed_coordinates(q));
  VectorXd rate(m);
  for (int a = 0; a < m; ++a) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += cd(a, i).value() * accel[i];
      for (int j = 0; j < n; ++j) acc += cd(a, i).partial(j) * qdot[j] * qdot[i];
    }
    rate[a] = acc;
  }
  return rate;
}

enum class ControlStatus { Unique, NonExistent, NonUnique };

inline const char* to_string(ControlStatus s) {
  switch (s) {
    case ControlStatus::Unique:
      return "unique";
    case ControlStatus::NonExistent:
      return "nonexistent";
    case ControlStatus::NonUnique:
      return "nonunique";
  }
  return "?";
}

struct ControlSolution {
  ControlStatus status = ControlStatus::NonExistent;
  VectorXd tau;       // unique solution, or minimum-norm when NonUnique
  double condition = 0.0;
  double residual = 0.0;  // ||A tau - b||
};

/// Solve A(v_q) tau = b(v_q). A square well-conditioned A yields the unique
/// invariance-enforcing feedback; otherwise the least-squares diagnosis
/// separates "no solution" from "many" and reports the minimum-norm one.
inline ControlSolution solve_control(const SystemSpec& sys, const VectorXd& q,
                                     const VectorXd& qdot,
                                     double sv_rel_tol = 1e-10) {
  MatrixXd a = control_matrix(sys, q);
  VectorXd b = control_rhs(sys, q, qdot);

  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > sv_rel_tol * std::max(1.0, smax)) ++rank;

  ControlSolution sol;
  if (a.rows() == a.cols() && rank == a.rows() && smax > 0.0) {
    sol.status = ControlStatus::Unique;
    sol.tau = svd.solve(b);
    sol.condition = sv[0] / sv[sv.size() - 1];
    sol.residual = (a * sol.tau - b).norm();
    return sol;
  }

  // Min-norm least squares through the rank-truncated SVD.
  VectorXd coeff = svd.matrixU().transpose() * b;
  VectorXd scaled = VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < rank; ++i) scaled[i] = coeff[i] / sv[i];
  sol.tau = svd.matrixV() * scaled;
  sol.residual = (a * sol.tau - b).norm();
  sol.condition = rank > 0 ? sv[0] / sv[rank - 1] : 0.0;
  sol.status = sol.residual > 1e-9 * (1.0 + b.norm()) ? ControlStatus::NonExistent
                                                      : ControlStatus::NonUnique;
  return sol;
}

/// Acceleration of the closed-loop system: drift plus tau*_a Y^a. By default
/// only a Unique solve is accepted; `allow_nonunique` admits the minimum-norm
/// law instead of refusing.
inline VectorXd closed_loop_acceleration(const SystemSpec& sys, const VectorXd& q,
                                         const VectorXd& qdot,
                                         bool allow_nonunique = false) {
  ControlSolution sol = solve_control(sys, q, qdot);
  if (sol.status == ControlStatus::NonExistent ||
      (sol.status == ControlStatus::NonUnique && !allow_nonunique)) {
    throw ControlUnavailable(std::string("control solve failed: ") +
                             to_string(sol.status));
  }
  MatrixXd y = sys.inputs.field_matrix<double>(sys.metric, VecX<double>(q));
  return drift_acceleration(sys, q, qdot) + y * sol.tau;
}

}  // namespace vnc
