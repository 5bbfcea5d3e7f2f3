#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "vnc/errors.hpp"
#include "vnc/linalg.hpp"

namespace vnc {

/// Second-order dynamics on the chart: (q, qdot) -> qddot.
using Acceleration =
    std::function<VectorXd(const VectorXd& q, const VectorXd& qdot)>;

namespace ode {

struct State2 {
  VectorXd q;
  VectorXd v;
};

inline State2 axpy(const State2& y, double h, const State2& k) {
  return {y.q + h * k.q, y.v + h * k.v};
}

inline State2 deriv(const Acceleration& accel, const State2& y) {
  return {y.v, accel(y.q, y.v)};
}

/// One classical RK4 step.
inline State2 rk4_step(const Acceleration& accel, const State2& y, double h) {
  State2 k1 = deriv(accel, y);
  State2 k2 = deriv(accel, axpy(y, 0.5 * h, k1));
  State2 k3 = deriv(accel, axpy(y, 0.5 * h, k2));
  State2 k4 = deriv(accel, axpy(y, h, k3));
  State2 out = y;
  out.q += (h / 6.0) * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  out.v += (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  if (!out.q.allFinite() || !out.v.allFinite())
    throw StepFailure("integration step produced a non-finite state");
  return out;
}

// Dormand-Prince 5(4) tableau.
struct Dp45Result {
  State2 y5;
  double error_norm;  // scaled; accept when <= 1
};

inline Dp45Result dp45_step(const Acceleration& accel, const State2& y, double h,
                            double atol, double rtol) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  State2 k1 = deriv(accel, y);
  State2 k2 = deriv(accel, {y.q + h * a21 * k1.q, y.v + h * a21 * k1.v});
  State2 k3 = deriv(accel, {y.q + h * (a31 * k1.q + a32 * k2.q),
                            y.v + h * (a31 * k1.v + a32 * k2.v)});
  State2 k4 = deriv(accel, {y.q + h * (a41 * k1.q + a42 * k2.q + a43 * k3.q),
                            y.v + h * (a41 * k1.v + a42 * k2.v + a43 * k3.v)});
  State2 k5 = deriv(accel,
                    {y.q + h * (a51 * k1.q + a52 * k2.q + a53 * k3.q + a54 * k4.q),
                     y.v + h * (a51 * k1.v + a52 * k2.v + a53 * k3.v + a54 * k4.v)});
  State2 k6 = deriv(
      accel,
      {y.q + h * (a61 * k1.q + a62 * k2.q + a63 * k3.q + a64 * k4.q + a65 * k5.q),
       y.v + h * (a61 * k1.v + a62 * k2.v + a63 * k3.v + a64 * k4.v + a65 * k5.v)});

  State2 y5{
      y.q + h * (b1 * k1.q + b3 * k3.q + b4 * k4.q + b5 * k5.q + b6 * k6.q),
      y.v + h * (b1 * k1.v + b3 * k3.v + b4 * k4.v + b5 * k5.v + b6 * k6.v)};
  State2 k7 = deriv(accel, y5);

  VectorXd err_q =
      h * (e1 * k1.q + e3 * k3.q + e4 * k4.q + e5 * k5.q + e6 * k6.q + e7 * k7.q);
  VectorXd err_v =
      h * (e1 * k1.v + e3 * k3.v + e4 * k4.v + e5 * k5.v + e6 * k6.v + e7 * k7.v);

  double acc = 0.0;
  const Eigen::Index n = y.q.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sq = atol + rtol * std::max(std::abs(y.q[i]), std::abs(y5.q[i]));
    const double sv = atol + rtol * std::max(std::abs(y.v[i]), std::abs(y5.v[i]));
    acc += (err_q[i] / sq) * (err_q[i] / sq) + (err_v[i] / sv) * (err_v[i] / sv);
  }
  const double norm = std::sqrt(acc / (2.0 * n));
  if (!y5.q.allFinite() || !y5.v.allFinite() || !std::isfinite(norm))
    throw StepFailure("integration step produced a non-finite state");
  return {std::move(y5), norm};
}

}  // namespace ode
}  // namespace vnc
