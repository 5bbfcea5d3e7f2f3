#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vnc/geometry.hpp"

namespace vnc {

/// Constraint distribution D, described through its annihilator: m one-forms
/// mu^a with expression coefficients. Rank of D is n - m wherever the
/// coefficient matrix keeps full row rank.
class Distribution {
 public:
  Distribution() = default;
  Distribution(ChartPtr chart, std::vector<std::vector<std::string>> one_forms)
      : chart_(std::move(chart)) {
    const int n = chart_->dim();
    forms_.resize(one_forms.size());
    for (std::size_t a = 0; a < one_forms.size(); ++a) {
      if (static_cast<int>(one_forms[a].size()) != n)
        throw InvalidSystem("constraint one-form has wrong length");
      forms_[a].reserve(n);
      for (int i = 0; i < n; ++i) {
        Expr e = Expr::parse(one_forms[a][i], chart_->symbols());
        if (e.depends_on_velocity())
          throw InvalidSystem("constraint coefficients may not depend on velocities");
        forms_[a].push_back(std::move(e));
      }
    }
  }

  const ChartSpec& chart() const { return *chart_; }
  int count() const { return static_cast<int>(forms_.size()); }
  int dim() const { return chart_->dim(); }
  int rank() const { return dim() - count(); }
  const Expr& coefficient(int a, int i) const { return forms_[a][i]; }

  /// m x n matrix [mu^a_i(q)].
  template <class S>
  MatX<S> coefficient_matrix(const VecX<S>& q) const {
    MatX<S> c(count(), dim());
    for (int a = 0; a < count(); ++a)
      for (int i = 0; i < dim(); ++i)
        c(a, i) = forms_[a][i].template eval_q<S>(q, chart_->parameters());
    return c;
  }

  /// phi^a(q, qdot) = mu^a_i(q) qdot^i; the state is on D iff all vanish.
  VectorXd residuals(const VectorXd& q, const VectorXd& qdot) const {
    if (count() == 0) return VectorXd(0);
    return coefficient_matrix<double>(q) * qdot;
  }

 private:
  ChartPtr chart_;
  std::vector<std::vector<Expr>> forms_;
};

/// Input distribution F: one-forms f^a whose sharps Y^a = M^-1 f^a span the
/// directions in which controls act.
class InputDistribution {
 public:
  InputDistribution() = default;
  InputDistribution(ChartPtr chart, std::vector<std::vector<std::string>> one_forms)
      : chart_(std::move(chart)) {
    const int n = chart_->dim();
    forms_.resize(one_forms.size());
    for (std::size_t a = 0; a < one_forms.size(); ++a) {
      if (static_cast<int>(one_forms[a].size()) != n)
        throw InvalidSystem("input one-form has wrong length");
      forms_[a].reserve(n);
      for (int i = 0; i < n; ++i) {
        Expr e = Expr::parse(one_forms[a][i], chart_->symbols());
        if (e.depends_on_velocity())
          throw InvalidSystem("input coefficients may not depend on velocities");
        forms_[a].push_back(std::move(e));
      }
    }
  }

  const ChartSpec& chart() const { return *chart_; }
  int count() const { return static_cast<int>(forms_.size()); }
  int dim() const { return chart_->dim(); }
  const Expr& coefficient(int a, int i) const { return forms_[a][i]; }

  /// m_u x n matrix of covector rows [f^a_i(q)].
  template <class S>
  MatX<S> form_matrix(const VecX<S>& q) const {
    MatX<S> f(count(), dim());
    for (int a = 0; a < count(); ++a)
      for (int i = 0; i < dim(); ++i)
        f(a, i) = forms_[a][i].template eval_q<S>(q, chart_->parameters());
    return f;
  }

  /// n x m_u matrix with columns Y^a(q) = M(q)^-1 f^a(q).
  template <class S>
  MatX<S> field_matrix(const MetricField& metric, const VecX<S>& q) const {
    MatX<S> m = metric.at_unchecked<S>(q);
    MatX<S> rhs = form_matrix<S>(q).transpose();
    return lu_solve<S>(std::move(m), std::move(rhs));
  }

 private:
  ChartPtr chart_;
  std::vector<std::vector<Expr>> forms_;
};

/// Unit-column kernel basis of [mu^a_i(q)]; columns span D_q.
inline MatrixXd basis_D(const Distribution& dist, const VectorXd& q) {
  if (dist.count() == 0) return MatrixXd::Identity(dist.dim(), dist.dim());
  MatrixXd c = dist.coefficient_matrix<double>(q);
  if (numerical_rank(c, 1e-10) < dist.count()) {
    throw RankDeficientConstraints("constraint one-forms drop rank at the sampled point");
  }
  return kernel_basis(c);
}

/// Raw input vector fields Y^a(q) as columns.
inline MatrixXd basis_F(const InputDistribution& input, const MetricField& metric,
                        const VectorXd& q) {
  return input.field_matrix<double>(metric, q);
}

struct TransversalityReport {
  bool transversal = false;
  Eigen::Index stacked_rank = 0;
  Eigen::Index overlap_dim = 0;  // dim(D ∩ F) estimate when deficient
  double sigma_min = 0.0;
  bool spans = false;  // TQ = D + F (not necessarily direct)
};

/// TQ = D ⊕ F iff the stacked basis [basis_D | basis_F] is square with
/// smallest singular value above `tol`.
inline TransversalityReport check_transversality(const Distribution& dist,
                                                 const InputDistribution& input,
                                                 const MetricField& metric,
                                                 const VectorXd& q,
                                                 double tol = 1e-8) {
  const Eigen::Index n = dist.dim();
  MatrixXd bd = basis_D(dist, q);
  MatrixXd bf = basis_F(input, metric, q);
  MatrixXd stacked(n, bd.cols() + bf.cols());
  stacked << bd, bf;

  Eigen::JacobiSVD<MatrixXd> svd(stacked);
  const auto& sv = svd.singularValues();
  const double sigma_min = sv[sv.size() - 1];

  TransversalityReport rep;
  rep.sigma_min = sigma_min;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * std::max(1.0, sv[0])) ++rank;
  rep.stacked_rank = rank;
  rep.spans = (rank == n);
  const Eigen::Index dim_f = numerical_rank(bf, tol);
  rep.overlap_dim = bd.cols() + dim_f - rank;
  rep.transversal = (stacked.cols() == n) && sigma_min > tol;
  return rep;
}

enum class ProjectorKindTag { Oblique, Orthogonal };

/// Complementary projector pair. `onto_constraint` has range D; its partner
/// projects onto F (oblique) or onto the metric-orthogonal complement of D.
struct ProjectorPair {
  MatrixXd onto_constraint;  // P_D or script-P
  MatrixXd onto_complement;  // P_F or script-Q
  ProjectorKindTag kind;
};

/// Oblique input projector P_F = B_F (C B_F)^-1 C with C = [mu^a_i] and
/// B_F = [Y^a]; kernel D, range F. Generic so dual numbers can differentiate
/// the whole construction through the linear solves.
template <class S>
MatX<S> oblique_input_projector(const Distribution& dist,
                                const InputDistribution& input,
                                const MetricField& metric, const VecX<S>& q) {
  MatX<S> c = dist.coefficient_matrix<S>(q);
  MatX<S> bf = input.field_matrix<S>(metric, q);
  MatX<S> a = c * bf;  // the control matrix
  if (a.rows() != a.cols()) {
    throw NotTransversal("oblique projectors need matching constraint/input counts");
  }
  MatX<S> sol;
  try {
    sol = lu_solve<S>(std::move(a), std::move(c));
  } catch (const SingularMatrix&) {
    throw NotTransversal("constraint and input distributions are not transversal");
  }
  return bf * sol;
}

/// Metric-orthogonal projector onto D-perp:
/// Q = M^-1 N^T (N M^-1 N^T)^-1 N with N = [mu^a_i].
template <class S>
MatX<S> orthogonal_complement_projector(const MetricField& metric,
                                        const Distribution& dist,
                                        const VecX<S>& q) {
  const int n = dist.dim();
  if (dist.count() == 0) return MatX<S>::Zero(n, n);
  MatX<S> nmat = dist.coefficient_matrix<S>(q);
  MatX<S> w = lu_solve<S>(metric.at_unchecked<S>(q), MatX<S>(nmat.transpose()));
  MatX<S> gram = nmat * w;  // N M^-1 N^T, SPD when N has full row rank
  MatX<S> sol;
  try {
    sol = lu_solve<S>(std::move(gram), std::move(nmat));
  } catch (const SingularMatrix&) {
    throw RankDeficientConstraints("constraint one-forms drop rank at the sampled point");
  }
  return w * sol;
}

inline ProjectorPair oblique_projectors(const Distribution& dist,
                                        const InputDistribution& input,
                                        const MetricField& metric,
                                        const VectorXd& q) {
  MatrixXd pf = oblique_input_projector<double>(dist, input, metric, q);
  const Eigen::Index n = pf.rows();
  ProjectorPair pair{MatrixXd::Identity(n, n) - pf, std::move(pf),
                     ProjectorKindTag::Oblique};
  return pair;
}

inline ProjectorPair orthogonal_projectors(const MetricField& metric,
                                           const Distribution& dist,
                                           const VectorXd& q) {
  MatrixXd qq = orthogonal_complement_projector<double>(metric, dist, q);
  const Eigen::Index n = qq.rows();
  ProjectorPair pair{MatrixXd::Identity(n, n) - qq, std::move(qq),
                     ProjectorKindTag::Orthogonal};
  return pair;
}

}  // namespace vnc
