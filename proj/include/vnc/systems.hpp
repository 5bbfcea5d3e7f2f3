#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vnc/distributions.hpp"
#include "vnc/geometry.hpp"

namespace vnc {

/// Velocity-dependent drift force vector field Y0(q, qdot); an empty
/// component list means identically zero.
class ForceField {
 public:
  ForceField() = default;
  ForceField(ChartPtr chart, std::vector<std::string> components)
      : chart_(std::move(chart)) {
    if (components.empty()) return;
    if (static_cast<int>(components.size()) != chart_->dim())
      throw InvalidSystem("drift force has wrong length");
    components_.reserve(components.size());
    for (const auto& src : components)
      components_.push_back(Expr::parse(src, chart_->symbols()));
  }

  bool is_zero() const { return components_.empty(); }
  const std::vector<Expr>& components() const { return components_; }

  template <class S>
  VecX<S> at(const VecX<S>& q, const VecX<S>& v) const {
    if (is_zero()) return VecX<S>::Zero(q.size());
    VecX<S> out(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
      out[i] = components_[i].template eval<S>(q, v, chart_->parameters());
    return out;
  }

 private:
  ChartPtr chart_;
  std::vector<Expr> components_;
};

/// Immutable description of a mechanical control system on a chart: metric,
/// potential, constraint distribution, input distribution, drift force, and
/// (for builtins) the closed-form control law used for cross-validation.
struct SystemSpec {
  std::string name;
  ChartPtr chart;
  MetricField metric;
  PotentialField potential;
  Distribution constraints;
  InputDistribution inputs;
  ForceField drift_force;
  std::vector<Expr> reference_control;  // empty when no closed form is known

  int dim() const { return chart->dim(); }
  int constraint_count() const { return constraints.count(); }
  int input_count() const { return inputs.count(); }
  bool has_reference_control() const { return !reference_control.empty(); }

  VectorXd reference_control_at(const VectorXd& q, const VectorXd& v) const {
    VectorXd out(reference_control.size());
    VecX<double> qq = q, vv = v;
    for (std::size_t a = 0; a < reference_control.size(); ++a)
      out[a] = reference_control[a].eval<double>(qq, vv, chart->parameters());
    return out;
  }
};

struct SystemSource {
  std::string name;
  std::vector<std::string> coordinates;
  std::vector<std::string> parameter_names;
  std::vector<double> parameter_values;
  std::vector<std::vector<std::string>> metric;
  std::string potential;  // empty = zero
  std::vector<std::vector<std::string>> constraints;
  std::vector<std::vector<std::string>> inputs;
  std::vector<std::string> drift_force;        // empty = zero
  std::vector<std::string> reference_control;  // empty = none
};

/// Parse and validate a system description. Throws InvalidSystem/ParseError
/// on malformed input; metric validity is checked lazily at evaluated points.
inline SystemSpec make_system(const SystemSource& src) {
  auto chart = std::make_shared<const ChartSpec>(src.coordinates, src.parameter_names,
                                                 src.parameter_values);
  SystemSpec sys;
  sys.name = src.name;
  sys.chart = chart;
  sys.metric = MetricField(chart, src.metric);
  sys.potential = PotentialField(chart, src.potential);
  sys.constraints = Distribution(chart, src.constraints);
  sys.inputs = InputDistribution(chart, src.inputs);
  sys.drift_force = ForceField(chart, src.drift_force);
  for (const auto& expr : src.reference_control)
    sys.reference_control.push_back(Expr::parse(expr, chart->symbols()));

  const int n = sys.dim();
  if (sys.constraint_count() < 1 || sys.constraint_count() >= n)
    throw InvalidSystem("need 1 <= constraint count < dim");
  if (sys.input_count() < 1) throw InvalidSystem("need at least one input");
  if (sys.has_reference_control() &&
      static_cast<int>(sys.reference_control.size()) != sys.input_count())
    throw InvalidSystem("reference control length must match input count");
  return sys;
}

// ---------------------------------------------------------------------------
// Builtin systems
// ---------------------------------------------------------------------------

/// Knife edge on SE(2): flat metric diag(m, m, I), lateral-velocity
/// constraint, input one-form with a dtheta term (not orthogonal to D).
inline SystemSpec se2_knife(double m = 1.0, double I = 1.0) {
  SystemSource src;
  src.name = "se2_knife";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I"};
  src.parameter_values = {m, I};
  src.metric = {{"m", "0", "0"}, {"0", "m", "0"}, {"0", "0", "I"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"sin(theta)", "-cos(theta)", "1"}};
  src.reference_control = {"-m*v3*(cos(theta)*v1 + sin(theta)*v2)"};
  return make_system(src);
}

/// se2_knife with an added viscous drift force on the translational part.
inline SystemSpec se2_damped(double m = 1.0, double I = 1.0, double gamma = 0.5) {
  SystemSource src;
  src.name = "se2_damped";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I", "gamma"};
  src.parameter_values = {m, I, gamma};
  src.metric = {{"m", "0", "0"}, {"0", "m", "0"}, {"0", "0", "I"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"sin(theta)", "-cos(theta)", "1"}};
  src.drift_force = {"-gamma/m*v1", "-gamma/m*v2", "0"};
  src.reference_control = {"-m*v3*(cos(theta)*v1 + sin(theta)*v2)"};
  return make_system(src);
}

/// Vertical rolling disk: two rolling constraints, two inputs.
inline SystemSpec rolling_disk(double m = 1.0, double I = 1.0, double J = 1.0) {
  SystemSource src;
  src.name = "rolling_disk";
  src.coordinates = {"x", "y", "theta", "phi"};
  src.parameter_names = {"m", "I", "J"};
  src.parameter_values = {m, I, J};
  src.metric = {{"m", "0", "0", "0"},
                {"0", "m", "0", "0"},
                {"0", "0", "I", "0"},
                {"0", "0", "0", "J"}};
  src.constraints = {{"1", "0", "-cos(phi)", "0"}, {"0", "1", "-sin(phi)", "0"}};
  src.inputs = {{"1", "0", "-cos(phi)", "1"}, {"0", "1", "-sin(phi)", "1"}};
  src.reference_control = {"-m*v3*v4*sin(phi)", "m*v3*v4*cos(phi)"};
  return make_system(src);
}

/// Chaplygin sleigh (blade through the mass center): input one-form equals
/// the constraint one-form, so F is the metric-orthogonal complement of D.
inline SystemSpec chaplygin_sleigh(double m = 1.0, double I = 1.0) {
  SystemSource src;
  src.name = "chaplygin";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I"};
  src.parameter_values = {m, I};
  src.metric = {{"m", "0", "0"}, {"0", "m", "0"}, {"0", "0", "I"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"sin(theta)", "-cos(theta)", "0"}};
  src.reference_control = {"-m*v3*(cos(theta)*v1 + sin(theta)*v2)"};
  return make_system(src);
}

/// Sleigh with the mass center a blade-lengths ahead of the contact point.
/// Kinetic energy picks up theta-translation coupling terms; the input stays
/// in the annihilator of D so the closed loop is the nonholonomic flow.
inline SystemSpec offset_sleigh(double m = 1.0, double I = 1.0, double a = 0.3) {
  SystemSource src;
  src.name = "offset_sleigh";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I", "a"};
  src.parameter_values = {m, I, a};
  src.metric = {{"m", "0", "-m*a*sin(theta)"},
                {"0", "m", "m*a*cos(theta)"},
                {"-m*a*sin(theta)", "m*a*cos(theta)", "I + m*a^2"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"sin(theta)", "-cos(theta)", "0"}};
  return make_system(src);
}

/// Integrable benchmark: flat R^3, D = {dz = 0} = span{e1, e2}, F = span{e3}.
inline SystemSpec flat3_integrable() {
  SystemSource src;
  src.name = "flat3_integrable";
  src.coordinates = {"x", "y", "z"};
  src.metric = {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}};
  src.constraints = {{"0", "0", "1"}};
  src.inputs = {{"0", "0", "1"}};
  src.reference_control = {"0"};
  return make_system(src);
}

/// Input field lies inside D, so no feedback can keep D invariant away from
/// the degenerate set cos(theta) v1 + sin(theta) v2 = 0.
inline SystemSpec nonexistence_demo(double m = 1.0, double I = 1.0) {
  SystemSource src;
  src.name = "nonexistence_demo";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I"};
  src.parameter_values = {m, I};
  src.metric = {{"m", "0", "0"}, {"0", "m", "0"}, {"0", "0", "I"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"cos(theta)", "sin(theta)", "0"}};
  return make_system(src);
}

/// Two inputs, one of them inside D: TQ = D + F but the sum is not direct,
/// so the invariance-enforcing control exists without being unique.
inline SystemSpec nonuniqueness_demo(double m = 1.0, double I = 1.0) {
  SystemSource src;
  src.name = "nonuniqueness_demo";
  src.coordinates = {"x", "y", "theta"};
  src.parameter_names = {"m", "I"};
  src.parameter_values = {m, I};
  src.metric = {{"m", "0", "0"}, {"0", "m", "0"}, {"0", "0", "I"}};
  src.constraints = {{"sin(theta)", "-cos(theta)", "0"}};
  src.inputs = {{"sin(theta)", "-cos(theta)", "1"},
                {"sin(theta)", "-cos(theta)", "0"}};
  return make_system(src);
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {
      "se2_knife",       "se2_damped",        "rolling_disk",
      "chaplygin",       "offset_sleigh",     "flat3_integrable",
      "nonexistence_demo", "nonuniqueness_demo"};
  return names;
}

/// Construct a builtin by name; `overrides` replaces default parameters.
inline SystemSpec make_builtin(const std::string& name,
                               const std::map<std::string, double>& overrides = {}) {
  auto get = [&overrides](const char* key, double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
  };
  for (const auto& [key, _] : overrides) {
    if (key != "m" && key != "I" && key != "J" && key != "gamma" && key != "a")
      throw InvalidSystem("unknown parameter override: " + key);
  }
  if (name == "se2_knife") return se2_knife(get("m", 1.0), get("I", 1.0));
  if (name == "se2_damped")
    return se2_damped(get("m", 1.0), get("I", 1.0), get("gamma", 0.5));
  if (name == "rolling_disk")
    return rolling_disk(get("m", 1.0), get("I", 1.0), get("J", 1.0));
  if (name == "chaplygin") return chaplygin_sleigh(get("m", 1.0), get("I", 1.0));
  if (name == "offset_sleigh")
    return offset_sleigh(get("m", 1.0), get("I", 1.0), get("a", 0.3));
  if (name == "flat3_integrable") return flat3_integrable();
  if (name == "nonexistence_demo")
    return nonexistence_demo(get("m", 1.0), get("I", 1.0));
  if (name == "nonuniqueness_demo")
    return nonuniqueness_demo(get("m", 1.0), get("I", 1.0));
  throw InvalidSystem("unknown builtin system: " + name);
}

// ---------------------------------------------------------------------------
// Published closed-form Christoffel table for the rolling disk
// ---------------------------------------------------------------------------

struct ChristoffelReferenceEntry {
  int k, i, j;        // Gamma^k_ij
  std::string label;  // human-readable symbol
  Expr expr;          // function of phi and the parameters m, I, J
};

/// Published closed forms for the constrained-connection Christoffel symbols
/// of the SE(2) knife edge; all six nonzero entries.
inline std::vector<ChristoffelReferenceEntry> se2_knife_reference_christoffels(
    const SystemSpec& knife) {
  const SymbolTable& sym = knife.chart->symbols();
  auto coords = knife.chart->coordinate_names();
  auto make = [&](int k, int i, int j, const std::string& body) {
    std::string label =
        "Gamma^" + coords[k] + "_{" + coords[i] + "," + coords[j] + "}";
    return ChristoffelReferenceEntry{k, i, j, label, Expr::parse(body, sym)};
  };
  return {
      make(0, 2, 0, "2*sin(theta)*cos(theta)"),
      make(0, 2, 1, "sin(theta)^2 - cos(theta)^2"),
      make(1, 2, 0, "sin(theta)^2 - cos(theta)^2"),
      make(1, 2, 1, "-2*sin(theta)*cos(theta)"),
      make(2, 2, 0, "m*cos(theta)/I"),
      make(2, 2, 1, "m*sin(theta)/I"),
  };
}

/// Reference closed forms for the constrained-connection Christoffel symbols
/// of the rolling disk, transcribed verbatim from their published source.
/// The table looks internally inconsistent in places, so it is surfaced as a
/// diff report against our own values rather than asserted as ground truth.
inline std::vector<ChristoffelReferenceEntry> rolling_disk_reference_christoffels(
    const SystemSpec& disk) {
  const SymbolTable& sym = disk.chart->symbols();
  // Shared factor and its phi-derivative, inlined into every entry.
  const std::string L =
      "(-I + J*m*cos(phi)^2 - m*sin(phi)^2 + m*sin(phi)*cos(phi))";
  const std::string Lp =
      "(-2*J*m*sin(phi)*cos(phi) - 2*m*sin(phi)*cos(phi) + m*(cos(phi)^2 - sin(phi)^2))";

  auto coords = disk.chart->coordinate_names();
  auto make = [&](int k, int i, int j, std::string body) {
    std::string with_l;
    for (std::size_t p = 0; p < body.size();) {
      if (body.compare(p, 2, "L'") == 0) {
        with_l += Lp;
        p += 2;
      } else if (body[p] == 'L') {
        with_l += L;
        p += 1;
      } else {
        with_l += body[p];
        p += 1;
      }
    }
    std::string label = "Gamma^" + coords[k] + "_{" + coords[i] + "," + coords[j] + "}";
    return ChristoffelReferenceEntry{k, i, j, label, Expr::parse(with_l, sym)};
  };

  std::vector<ChristoffelReferenceEntry> table;
  // Gamma^._{phi x}
  table.push_back(make(0, 3, 0,
      "2*J*m*sin(phi)*cos(phi)/L - (I*J + J*m*sin(phi)^2)*L'/L^2"));
  table.push_back(make(1, 3, 0,
      "J*m*(sin(phi)^2 - cos(phi)^2)/L + J*m*sin(phi)*cos(phi)*L'/L^2"));
  table.push_back(make(2, 3, 0, "J*m*sin(phi)/L + J*m*cos(phi)*L'/L^2"));
  table.push_back(make(3, 3, 0,
      "m^2*(2*sin(phi)*cos(phi) + sin(phi)^2 - cos(phi)^2)/L"
      " - m*(I + m*sin(phi)^2 - m*sin(phi)*cos(phi))*L'/L^2"));
  // Gamma^._{phi y}
  table.push_back(make(0, 3, 1,
      "J*m*(sin(phi)^2 - cos(phi)^2)/L + (I - J*m*sin(phi)*cos(phi))*L'/L^2"));
  table.push_back(make(1, 3, 1,
      "-2*J*m*sin(phi)*cos(phi)/L + (-I + J*m*cos(phi)^2)*L'/L^2"));
  table.push_back(make(2, 3, 1,
      "2*J*m^2*sin(phi)^2*cos(phi)/(I*L)"
      " - (-I*m + J*m^2*cos(phi)^2)*cos(phi)/(I*L)"
      " - (-I*m + J*m^2*cos(phi)^2)*L'*sin(phi)/(I*L^2)"
      " + (I*m - J*m^2*sin(phi)*cos(phi))*sin(phi)/(I*L)"
      " - (I*m - J*m^2*sin(phi)*cos(phi))*L'*cos(phi)/(I*L^2)"
      " - (J*m^2*sin(phi)^2 - J*m^2*cos(phi)^2)*cos(phi)/(I*L)"));
  table.push_back(make(3, 3, 1,
      "(J*m^2*cos(phi)^2 - J*m^2*sin(phi)*cos(phi))*L'/(J*L^2)"
      " + m^2*(sin(phi)^2 - cos(phi)^2 - 2*sin(phi)*cos(phi))/L"));
  // Gamma^._{phi theta}
  table.push_back(make(0, 3, 2,
      "(I*J*sin(phi) - I*cos(phi))/L + (-I*J*cos(phi) - I*sin(phi))*L'/L^2"));
  table.push_back(make(1, 3, 2, "I*cos(phi)/L + I*L'*sin(phi)/L^2"));
  table.push_back(make(2, 3, 2,
      "-(2 + 2*J)*m*sin(phi)*cos(phi)/L - m*L'*sin(phi)^2/L^2"
      " + m*(cos(phi)^2 - sin(phi)^2)/L"
      " + (J*m*cos(phi) + m*sin(phi))*L'*cos(phi)/L^2"));
  table.push_back(make(3, 3, 2,
      "I*m*cos(phi)/(J*L) + I*m*L'*sin(phi)/(J*L^2)"
      " + (I*J*m*sin(phi) - I*m*cos(phi))/(J*L)"
      " + (-I*J*m*cos(phi) - I*m*sin(phi))*L'/(J*L^2)"));
  // Gamma^._{phi phi}
  table.push_back(make(0, 3, 3,
      "-2*J*sin(phi)*cos(phi)/L + (-I*J - J*m*sin(phi)^2)*L'/(m*L^2)"));
  table.push_back(make(1, 3, 3,
      "J*(cos(phi)^2 - sin(phi)^2)/L + J*L'*sin(phi)*cos(phi)/L^2"));
  table.push_back(make(2, 3, 3,
      "J*m*sin(phi)^3/(I*L) - J*m*L'*sin(phi)^2*cos(phi)/(I*L^2)"
      " + (-I*J - J*m*sin(phi)^2)*sin(phi)/(I*L)"
      " - (-I*J - J*m*sin(phi)^2)*L'*cos(phi)/(I*L^2)"));
  table.push_back(make(3, 3, 3,
      "-m*sin(phi)^2/L - 2*m*sin(phi)*cos(phi)/L + m*cos(phi)^2/L"
      " + m*L'*sin(phi)*cos(phi)/L^2 + (-I*J - J*m*sin(phi)^2)*L'/(J*L^2)"));
  return table;
}

}  // namespace vnc
