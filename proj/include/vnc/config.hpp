#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vnc/dynamics.hpp"
#include "vnc/systems.hpp"

namespace vnc {

using Json = nlohmann::json;

/// Serialize a system to the JSON description the CLI accepts back.
inline Json system_to_json(const SystemSpec& sys) {
  Json j;
  if (!sys.name.empty()) j["name"] = sys.name;
  Json c;
  c["dim"] = sys.dim();
  c["coordinates"] = sys.chart->coordinate_names();
  Json params = Json::object();
  const auto& pnames = sys.chart->parameter_names();
  for (std::size_t i = 0; i < pnames.size(); ++i)
    params[pnames[i]] = sys.chart->parameters()[i];
  c["parameters"] = params;

  const int n = sys.dim();
  Json metric = Json::array();
  for (int i = 0; i < n; ++i) {
    Json row = Json::array();
    for (int j2 = 0; j2 < n; ++j2) row.push_back(sys.metric.entry(i, j2).str());
    metric.push_back(row);
  }
  c["metric"] = metric;
  c["potential"] = sys.potential.is_zero() ? "" : sys.potential.expr().str();

  auto forms_json = [n](const auto& dist) {
    Json rows = Json::array();
    for (int a = 0; a < dist.count(); ++a) {
      Json row = Json::array();
      for (int i = 0; i < n; ++i) row.push_back(dist.coefficient(a, i).str());
      rows.push_back(row);
    }
    return rows;
  };
  c["constraints"] = forms_json(sys.constraints);
  c["inputs"] = forms_json(sys.inputs);
  if (!sys.drift_force.is_zero()) {
    Json drift = Json::array();
    for (const auto& e : sys.drift_force.components()) drift.push_back(e.str());
    c["drift_force"] = drift;
  }
  j["custom"] = c;
  return j;
}

namespace detail_cfg {

inline std::vector<std::vector<std::string>> string_grid(const Json& j,
                                                         const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  std::vector<std::vector<std::string>> out;
  for (const auto& row : j) {
    if (!row.is_array()) throw ConfigError(std::string(what) + " rows must be arrays");
    std::vector<std::string> r;
    for (const auto& cell : row) {
      if (!cell.is_string())
        throw ConfigError(std::string(what) + " entries must be expression strings");
      r.push_back(cell.get<std::string>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> string_list(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  std::vector<std::string> out;
  for (const auto& cell : j) {
    if (!cell.is_string())
      throw ConfigError(std::string(what) + " entries must be strings");
    out.push_back(cell.get<std::string>());
  }
  return out;
}

}  // namespace detail_cfg

/// Build a system from the `custom` block of a config document.
inline SystemSpec system_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("custom system must be an object");
  SystemSource src;
  src.name = j.value("name", std::string{});
  if (!j.contains("coordinates"))
    throw ConfigError("custom system needs a coordinates array");
  src.coordinates = detail_cfg::string_list(j.at("coordinates"), "coordinates");
  if (j.contains("dim") &&
      j.at("dim").get<int>() != static_cast<int>(src.coordinates.size()))
    throw ConfigError("dim does not match the number of coordinates");
  if (j.contains("parameters")) {
    if (!j.at("parameters").is_object())
      throw ConfigError("parameters must be an object of numbers");
    for (const auto& [key, value] : j.at("parameters").items()) {
      if (!value.is_number()) throw ConfigError("parameter values must be numbers");
      src.parameter_names.push_back(key);
      src.parameter_values.push_back(value.get<double>());
    }
  }
  if (!j.contains("metric")) throw ConfigError("custom system needs a metric");
  src.metric = detail_cfg::string_grid(j.at("metric"), "metric");
  src.potential = j.value("potential", std::string{});
  if (!j.contains("constraints"))
    throw ConfigError("custom system needs constraint one-forms");
  src.constraints = detail_cfg::string_grid(j.at("constraints"), "constraints");
  if (!j.contains("inputs")) throw ConfigError("custom system needs input one-forms");
  src.inputs = detail_cfg::string_grid(j.at("inputs"), "inputs");
  if (j.contains("drift_force"))
    src.drift_force = detail_cfg::string_list(j.at("drift_force"), "drift_force");
  try {
    return make_system(src);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("bad expression in system definition: ") + e.what());
  } catch (const InvalidSystem& e) {
    throw ConfigError(std::string("invalid system definition: ") + e.what());
  }
}

/// Full CLI/config document: which system, integrator settings, initial
/// state, output destination and the sampling seed for `check`.
struct SystemConfig {
  std::string builtin;  // empty when custom is set
  std::optional<Json> custom;
  std::map<std::string, double> parameter_overrides;

  IntegratorSettings integrator;
  double horizon = 10.0;
  std::optional<VectorXd> q0;
  std::optional<VectorXd> qdot0;
  std::string output_path;
  std::string output_format = "csv";
  unsigned seed = 0;

  static SystemConfig from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    SystemConfig cfg;
    if (j.contains("name")) cfg.builtin = j.at("name").get<std::string>();
    if (j.contains("custom")) cfg.custom = j.at("custom");
    if (cfg.builtin.empty() && !cfg.custom)
      throw ConfigError("config needs either a builtin name or a custom system");
    if (!cfg.builtin.empty() && cfg.custom)
      throw ConfigError("config cannot have both a builtin name and a custom system");
    if (j.contains("parameters")) {
      for (const auto& [key, value] : j.at("parameters").items()) {
        if (!value.is_number()) throw ConfigError("parameter values must be numbers");
        cfg.parameter_overrides[key] = value.get<double>();
      }
    }
    if (j.contains("integrator")) {
      const Json& ji = j.at("integrator");
      const std::string method = ji.value("method", "rk4");
      if (method == "rk4")
        cfg.integrator.method = IntegratorMethod::RK4;
      else if (method == "rk45")
        cfg.integrator.method = IntegratorMethod::RK45;
      else
        throw ConfigError("unknown integrator method: " + method);
      cfg.integrator.dt = ji.value("dt", cfg.integrator.dt);
      cfg.integrator.atol = ji.value("atol", cfg.integrator.atol);
      cfg.integrator.rtol = ji.value("rtol", cfg.integrator.rtol);
      cfg.horizon = ji.value("T", cfg.horizon);
      if (cfg.integrator.dt <= 0.0) throw ConfigError("integrator dt must be positive");
      if (cfg.horizon < 0.0) throw ConfigError("integrator horizon must be nonnegative");
    }
    if (j.contains("initial")) {
      const Json& js = j.at("initial");
      auto vec = [](const Json& arr, const char* what) {
        if (!arr.is_array()) throw ConfigError(std::string(what) + " must be an array");
        VectorXd v(arr.size());
        Eigen::Index i = 0;
        for (const auto& cell : arr) {
          if (!cell.is_number())
            throw ConfigError(std::string(what) + " entries must be numbers");
          v[i++] = cell.get<double>();
        }
        return v;
      };
      if (js.contains("q")) cfg.q0 = vec(js.at("q"), "initial.q");
      if (js.contains("qdot")) cfg.qdot0 = vec(js.at("qdot"), "initial.qdot");
    }
    if (j.contains("output")) {
      const Json& jo = j.at("output");
      cfg.output_path = jo.value("path", cfg.output_path);
      cfg.output_format = jo.value("format", cfg.output_format);
      if (cfg.output_format != "csv" && cfg.output_format != "json")
        throw ConfigError("output format must be csv or json");
    }
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
  }

  static SystemConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    return from_json(j);
  }

  SystemSpec build_system() const {
    if (custom) return system_from_json(*custom);
    try {
      return make_builtin(builtin, parameter_overrides);
    } catch (const InvalidSystem& e) {
      throw ConfigError(e.what());
    }
  }

  /// Initial state; defaults to the origin at rest when unspecified.
  TangentState initial_state(const SystemSpec& sys) const {
    TangentState st;
    st.q = q0.value_or(VectorXd::Zero(sys.dim()));
    st.qdot = qdot0.value_or(VectorXd::Zero(sys.dim()));
    if (st.q.size() != sys.dim() || st.qdot.size() != sys.dim())
      throw ConfigError("initial state dimension does not match the system");
    return st;
  }
};

}  // namespace vnc
