// Command-line front end: load or pick a system, run simulations and
// geometric checks, dump trajectories and diagnostic reports.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vnc/cli_ops.hpp"

namespace {

Eigen::VectorXd parse_number_list(const std::string& text, const char* what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
        ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw vnc::ConfigError(std::string("cannot parse ") + what + ": '" + item + "'");
    }
  }
  if (values.empty())
    throw vnc::ConfigError(std::string("empty list for ") + what);
  return Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
}

struct CommonArgs {
  std::string system;
  std::string config_path;
  std::string out_path;
  std::string format;
  std::vector<std::string> params;  // name=value overrides
  std::optional<unsigned> seed;
  std::string q0, v0;
  std::optional<double> T, dt;
  std::string method;

  void attach(CLI::App* cmd) {
    cmd->add_option("--system", system, "builtin system name");
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_path, "output file path");
    cmd->add_option("--format", format, "output format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--param", params, "parameter override name=value (repeatable)");
    cmd->add_option("--seed", seed, "RNG seed for sampled checks");
    cmd->add_option("--q0", q0, "initial coordinates, comma separated");
    cmd->add_option("--v0", v0, "initial velocities, comma separated");
    cmd->add_option("--T", T, "integration horizon");
    cmd->add_option("--dt", dt, "integrator step (RK4) / initial step (RK45)");
    cmd->add_option("--method", method, "integrator: rk4|rk45")
        ->check(CLI::IsMember({"rk4", "rk45"}));
  }

  vnc::SystemConfig resolve() const {
    vnc::SystemConfig cfg;
    if (!config_path.empty()) {
      cfg = vnc::SystemConfig::from_file(config_path);
      if (!system.empty()) throw vnc::ConfigError("--system conflicts with --config");
    } else if (!system.empty()) {
      cfg.builtin = system;
    } else {
      throw vnc::ConfigError("need --system NAME or --config PATH");
    }
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos)
        throw vnc::ConfigError("parameter override must be name=value: " + p);
      try {
        cfg.parameter_overrides[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
      } catch (const std::exception&) {
        throw vnc::ConfigError("cannot parse parameter value in: " + p);
      }
    }
    if (!q0.empty()) cfg.q0 = parse_number_list(q0, "--q0");
    if (!v0.empty()) cfg.qdot0 = parse_number_list(v0, "--v0");
    if (T) cfg.horizon = *T;
    if (dt) {
      if (*dt <= 0) throw vnc::ConfigError("--dt must be positive");
      cfg.integrator.dt = *dt;
    }
    if (!method.empty())
      cfg.integrator.method = method == "rk45" ? vnc::IntegratorMethod::RK45
                                               : vnc::IntegratorMethod::RK4;
    if (seed) cfg.seed = *seed;
    if (!out_path.empty()) cfg.output_path = out_path;
    if (!format.empty()) cfg.output_format = format;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual nonholonomic constraints: simulation and verification"};
  app.require_subcommand(1);

  CommonArgs sim_args, check_args, chris_args, cmp_args;

  auto* sim = app.add_subcommand("simulate", "integrate a formulation and write the trajectory");
  sim_args.attach(sim);
  std::string sim_formulation = "closedloop";
  bool allow_nonunique = false;
  double stabilize = 0.0;
  sim->add_option("--formulation", sim_formulation,
                  "uncontrolled|closedloop|constrained|nonholonomic")
      ->check(CLI::IsMember({"uncontrolled", "closedloop", "constrained", "nonholonomic"}));
  sim->add_flag("--allow-nonunique", allow_nonunique,
                "accept the minimum-norm control when the solve is degenerate");
  sim->add_option("--stabilize", stabilize,
                  "extension: add residual damping -k*phi to the feedback");

  auto* chk = app.add_subcommand("check", "run the geometric identity checks");
  check_args.attach(chk);

  auto* chris = app.add_subcommand("christoffel",
                                   "dump nonzero connection coefficients at a point");
  chris_args.attach(chris);
  std::string point_text, kind_text = "constrained";
  bool with_reference = false;
  chris->add_option("--point", point_text, "chart point, comma separated");
  chris->add_option("--kind", kind_text, "levicivita|nonholonomic|constrained")
      ->check(CLI::IsMember({"levicivita", "nonholonomic", "constrained"}));
  chris->add_flag("--reference", with_reference,
                  "diff against the published closed-form table");

  auto* cmp = app.add_subcommand("compare", "distance between two formulations");
  cmp_args.attach(cmp);
  std::string formulations = "closedloop,constrained";
  cmp->add_option("--formulations", formulations, "pair a,b of formulation names");

  CLI11_PARSE(app, argc, argv);

  return vnc::run_cli([&]() -> int {
    if (sim->parsed()) {
      vnc::SimulateOptions opts;
      opts.formulation = vnc::formulation_from_string(sim_formulation);
      opts.allow_nonunique = allow_nonunique;
      opts.stabilize_gain = stabilize;
      return vnc::cmd_simulate(sim_args.resolve(), opts);
    }
    if (chk->parsed()) {
      return vnc::cmd_check(check_args.resolve());
    }
    if (chris->parsed()) {
      vnc::SystemConfig cfg = chris_args.resolve();
      vnc::ChristoffelOptions opts;
      opts.kind = vnc::connection_kind_from_string(kind_text);
      if (!point_text.empty()) opts.point = parse_number_list(point_text, "--point");
      opts.with_reference = with_reference;
      opts.out_path = cfg.output_path;
      return vnc::cmd_christoffel(cfg, opts);
    }
    if (cmp->parsed()) {
      vnc::SystemConfig cfg = cmp_args.resolve();
      const auto comma = formulations.find(',');
      if (comma == std::string::npos)
        throw vnc::ConfigError("--formulations needs a pair a,b");
      vnc::CompareOptions opts;
      opts.first = vnc::formulation_from_string(formulations.substr(0, comma));
      opts.second = vnc::formulation_from_string(formulations.substr(comma + 1));
      return vnc::cmd_compare(cfg, opts);
    }
    throw vnc::ConfigError("no subcommand given");
  });
}
