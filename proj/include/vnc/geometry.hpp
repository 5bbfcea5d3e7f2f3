#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vnc/expr.hpp"
#include "vnc/linalg.hpp"

namespace vnc {

/// A single coordinate chart: dimension, coordinate names and the bound
/// parameter constants every field expression of the system may reference.
class ChartSpec {
 public:
  ChartSpec(std::vector<std::string> coordinates,
            std::vector<std::string> parameter_names = {},
            std::vector<double> parameter_values = {})
      : symbols_(std::move(coordinates), std::move(parameter_names)),
        parameter_values_(std::move(parameter_values)) {
    if (symbols_.dim() < 1) throw InvalidSystem("chart needs dimension >= 1");
    if (symbols_.dim() > kMaxChartDim)
      throw InvalidSystem("chart dimension exceeds supported maximum");
    if (static_cast<int>(parameter_values_.size()) != symbols_.parameter_count())
      throw InvalidSystem("parameter names/values length mismatch");
  }

  int dim() const { return symbols_.dim(); }
  const SymbolTable& symbols() const { return symbols_; }
  const std::vector<double>& parameters() const { return parameter_values_; }
  const std::vector<std::string>& coordinate_names() const {
    return symbols_.coordinates();
  }
  const std::vector<std::string>& parameter_names() const {
    return symbols_.parameters();
  }

  double parameter(const std::string& name) const {
    const auto& names = symbols_.parameters();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return parameter_values_[i];
    throw InvalidSystem("unknown parameter: " + name);
  }

 private:
  SymbolTable symbols_;
  std::vector<double> parameter_values_;
};

using ChartPtr = std::shared_ptr<const ChartSpec>;

/// Kinetic-energy metric as an n x n grid of expressions in the coordinates.
class MetricField {
 public:
  MetricField() = default;
  MetricField(ChartPtr chart, std::vector<std::vector<std::string>> entries)
      : chart_(std::move(chart)) {
    const int n = chart_->dim();
    if (static_cast<int>(entries.size()) != n)
      throw InvalidSystem("metric must be n x n");
    entries_.resize(n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(entries[i].size()) != n)
        throw InvalidSystem("metric must be n x n");
      entries_[i].reserve(n);
      for (int j = 0; j < n; ++j) {
        Expr e = Expr::parse(entries[i][j], chart_->symbols());
        if (e.depends_on_velocity())
          throw InvalidSystem("metric entries may not depend on velocities");
        entries_[i].push_back(std::move(e));
      }
    }
  }

  const ChartSpec& chart() const { return *chart_; }
  const Expr& entry(int i, int j) const { return entries_[i][j]; }

  /// Plain evaluation, no validity checks; used on the dual path where the
  /// double path has already vetted the point.
  template <class S>
  MatX<S> at_unchecked(const VecX<S>& q) const {
    const int n = chart_->dim();
    MatX<S> m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m(i, j) = entries_[i][j].template eval_q<S>(q, chart_->parameters());
    return m;
  }

  /// Evaluate and validate: symmetric and positive definite (Cholesky).
  MatrixXd at(const VectorXd& q) const {
    MatrixXd m = at_unchecked<double>(q);
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
      throw NotPositiveDefinite("metric is not symmetric at the sampled point");
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("metric is not positive definite at the sampled point");
    return m;
  }

 private:
  ChartPtr chart_;
  std::vector<std::vector<Expr>> entries_;
};

/// Scalar potential V(q); an empty source means identically zero.
class PotentialField {
 public:
  PotentialField() = default;
  PotentialField(ChartPtr chart, const std::string& source) : chart_(std::move(chart)) {
    if (!source.empty()) {
      expr_ = Expr::parse(source, chart_->symbols());
      if (expr_.depends_on_velocity())
        throw InvalidSystem("potential may not depend on velocities");
    }
  }

  bool is_zero() const { return !expr_.valid(); }
  const Expr& expr() const { return expr_; }

  template <class S>
  S at(const VecX<S>& q) const {
    if (is_zero()) return S(0.0);
    return expr_.template eval_q<S>(q, chart_->parameters());
  }

  /// Differential dV(q) as a covector.
  VectorXd differential(const VectorXd& q) const {
    const int n = static_cast<int>(q.size());
    if (is_zero()) return VectorXd::Zero(n);
    Dual d = expr_.eval_q<Dual>(seed_coordinates(q), chart_->parameters());
    VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = d.partial(i);
    return out;
  }

 private:
  ChartPtr chart_;
  Expr expr_;
};

enum class ConnectionKind { LeviCivita, Nonholonomic, Constrained };

inline const char* to_string(ConnectionKind k) {
  switch (k) {
    case ConnectionKind::LeviCivita:
      return "levicivita";
    case ConnectionKind::Nonholonomic:
      return "nonholonomic";
    case ConnectionKind::Constrained:
      return "constrained";
  }
  return "?";
}

/// Christoffel symbols at a chart point, indexed (k, i, j): the k-th component
/// of the connection applied to coordinate fields (d/dq^i, d/dq^j).
class ConnectionCoefficients {
 public:
  ConnectionCoefficients(int n, ConnectionKind kind)
      : n_(n), kind_(kind), gamma_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }
  ConnectionKind kind() const { return kind_; }

  double operator()(int k, int i, int j) const { return gamma_[idx(k, i, j)]; }
  double& at(int k, int i, int j) { return gamma_[idx(k, i, j)]; }

  /// Quadratic contraction Gamma^k_ij xi^i eta^j.
  VectorXd contract(const VectorXd& xi, const VectorXd& eta) const {
    VectorXd out = VectorXd::Zero(n_);
    for (int k = 0; k < n_; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) acc += (*this)(k, i, j) * xi[i] * eta[j];
      out[k] = acc;
    }
    return out;
  }

  double max_asymmetry() const {
    double worst = 0.0;
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j)
          worst = std::max(worst, std::abs((*this)(k, i, j) - (*this)(k, j, i)));
    return worst;
  }

  double max_abs() const {
    double worst = 0.0;
    for (double g : gamma_) worst = std::max(worst, std::abs(g));
    return worst;
  }

 private:
  std::size_t idx(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * n_ + i) * n_ + j;
  }

  int n_;
  ConnectionKind kind_;
  std::vector<double> gamma_;
};

inline MatrixXd metric_at(const MetricField& metric, const VectorXd& q) {
  return metric.at(q);
}

/// Raise an index: M(q)^-1 * covector.
inline VectorXd sharp(const MetricField& metric, const VectorXd& q,
                      const VectorXd& covector) {
  MatrixXd m = metric.at(q);
  return Eigen::LLT<MatrixXd>(m).solve(covector);
}

/// Lower an index: M(q) * vector.
inline VectorXd flat(const MetricField& metric, const VectorXd& q,
                     const VectorXd& vector) {
  return metric.at(q) * vector;
}

/// Levi-Civita Christoffel symbols from exact metric derivatives:
/// Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij).
inline ConnectionCoefficients christoffel_lc(const MetricField& metric,
                                             const VectorXd& q) {
  const int n = static_cast<int>(q.size());
  MatX<Dual> gd = metric.at_unchecked<Dual>(seed_coordinates(q));
  MatrixXd g = values_of(gd);
  std::vector<MatrixXd> dg = partials_of(gd, n);  // dg[l](i,j) = d_l g_ij

  Eigen::LLT<MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("metric is not positive definite at the sampled point");
  MatrixXd ginv = llt.solve(MatrixXd::Identity(n, n));

  ConnectionCoefficients out(n, ConnectionKind::LeviCivita);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l)
          acc += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        out.at(k, i, j) = 0.5 * acc;
      }
  return out;
}

/// grad_G V = M(q)^-1 dV(q); zero vector when V vanishes.
inline VectorXd grad_potential(const MetricField& metric,
                               const PotentialField& potential,
                               const VectorXd& q) {
  if (potential.is_zero()) return VectorXd::Zero(q.size());
  return sharp(metric, q, potential.differential(q));
}

}  // namespace vnc
