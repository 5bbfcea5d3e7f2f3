#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vnc/dynamics.hpp"
#include "vnc/systems.hpp"

namespace vnc {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> trajectory_columns(int n, int n_inputs,
                                                   int n_constraints) {
  std::vector<std::string> cols;
  cols.push_back("t");
  for (int i = 1; i <= n; ++i) cols.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("v" + std::to_string(i));
  for (int a = 1; a <= n_inputs; ++a) cols.push_back("u" + std::to_string(a));
  for (int a = 1; a <= n_constraints; ++a) cols.push_back("phi" + std::to_string(a));
  cols.push_back("energy");
  return cols;
}

namespace detail_io {

inline std::vector<double> row_of(const TrajectorySample& s, int n, int n_inputs,
                                  int n_constraints) {
  std::vector<double> row;
  row.reserve(2 + 2 * n + n_inputs + n_constraints);
  row.push_back(s.t);
  for (int i = 0; i < n; ++i) row.push_back(s.q[i]);
  for (int i = 0; i < n; ++i) row.push_back(s.qdot[i]);
  for (int a = 0; a < n_inputs; ++a) row.push_back(a < s.u.size() ? s.u[a] : 0.0);
  for (int a = 0; a < n_constraints; ++a)
    row.push_back(a < s.phi.size() ? s.phi[a] : 0.0);
  row.push_back(s.energy);
  return row;
}

}  // namespace detail_io

/// CSV with header t,q1..qn,v1..vn,u1..um,phi1..phim,energy and floats
/// printed with 17 significant digits (bit-faithful round trip).
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int n,
                                 int n_inputs, int n_constraints) {
  const auto cols = trajectory_columns(n, n_inputs, n_constraints);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out << ',';
    out << cols[i];
  }
  out << '\n';
  for (const auto& s : traj.samples) {
    const auto row = detail_io::row_of(s, n, n_inputs, n_constraints);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_g17(row[i]);
    }
    out << '\n';
  }
}

inline nlohmann::json trajectory_to_json(const Trajectory& traj, int n,
                                         int n_inputs, int n_constraints) {
  nlohmann::json j;
  j["columns"] = trajectory_columns(n, n_inputs, n_constraints);
  nlohmann::json data = nlohmann::json::array();
  for (const auto& s : traj.samples)
    data.push_back(detail_io::row_of(s, n, n_inputs, n_constraints));
  j["data"] = data;
  if (!traj.warnings.empty()) j["warnings"] = traj.warnings;
  return j;
}

inline void write_trajectory_json(std::ostream& out, const Trajectory& traj, int n,
                                  int n_inputs, int n_constraints) {
  out << trajectory_to_json(traj, n, n_inputs, n_constraints).dump(2) << '\n';
}

}  // namespace vnc
