#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "vnc/dual.hpp"
#include "vnc/errors.hpp"

namespace vnc {

template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense LU solve with partial pivoting, generic over the scalar so dual
/// numbers differentiate straight through the factorization. Systems here are
/// tiny (chart dimension <= 16); robustness beyond a pivot check is the
/// caller's job (transversality / SPD diagnostics run on the double path).
template <class S>
MatX<S> lu_solve(MatX<S> a, MatX<S> rhs) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || rhs.rows() != n) {
    throw SingularMatrix("lu_solve: shape mismatch");
  }
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      scale = std::max(scale, std::abs(value_of(a(i, j))));
  if (scale == 0.0) throw SingularMatrix("lu_solve: zero matrix");

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    double best = std::abs(value_of(a(k, k)));
    for (Eigen::Index r = k + 1; r < n; ++r) {
      const double cand = std::abs(value_of(a(r, k)));
      if (cand > best) {
        best = cand;
        piv = r;
      }
    }
    if (best <= 1e-14 * scale) {
      throw SingularMatrix("lu_solve: numerically singular matrix");
    }
    if (piv != k) {
      a.row(k).swap(a.row(piv));
      rhs.row(k).swap(rhs.row(piv));
    }
    for (Eigen::Index r = k + 1; r < n; ++r) {
      S f = a(r, k) / a(k, k);
      a(r, k) = S(0.0);
      for (Eigen::Index c = k + 1; c < n; ++c) a(r, c) -= f * a(k, c);
      for (Eigen::Index c = 0; c < rhs.cols(); ++c) rhs(r, c) -= f * rhs(k, c);
    }
  }
  MatX<S> x = rhs;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      S acc = x(k, c);
      for (Eigen::Index j = k + 1; j < n; ++j) acc -= a(k, j) * x(j, c);
      x(k, c) = acc / a(k, k);
    }
  }
  return x;
}

template <class S>
VecX<S> lu_solve(const MatX<S>& a, const VecX<S>& b) {
  MatX<S> rhs = b;
  return lu_solve<S>(a, std::move(rhs)).col(0);
}

/// All coordinates become active dual variables (identity seed matrix).
inline VecX<Dual> seed_coordinates(const VectorXd& q) {
  const int n = static_cast<int>(q.size());
  VecX<Dual> out(n);
  for (int i = 0; i < n; ++i) out[i] = Dual::seeded(q[i], i, n);
  return out;
}

inline VecX<Dual> constant_duals(const VectorXd& v) {
  VecX<Dual> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = Dual(v[i]);
  return out;
}

inline VectorXd values_of(const VecX<Dual>& v) {
  VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i].value();
  return out;
}

inline MatrixXd values_of(const MatX<Dual>& m) {
  MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).value();
  return out;
}

/// d/dq_i of every entry, as one matrix per coordinate.
inline std::vector<MatrixXd> partials_of(const MatX<Dual>& m, int n) {
  std::vector<MatrixXd> out(n, MatrixXd::Zero(m.rows(), m.cols()));
  for (int k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        out[k](i, j) = m(i, j).partial(k);
  return out;
}

/// Evaluate a vector field given as a generic callable on dual-seeded
/// coordinates; returns the value W(q) and Jacobian dW/dq.
template <class F>
std::pair<VectorXd, MatrixXd> value_and_jacobian(F&& field, const VectorXd& q) {
  const int n = static_cast<int>(q.size());
  VecX<Dual> w = field(seed_coordinates(q));
  VectorXd val(w.size());
  MatrixXd jac(w.size(), n);
  for (Eigen::Index r = 0; r < w.size(); ++r) {
    val[r] = w[r].value();
    for (int c = 0; c < n; ++c) jac(r, c) = w[r].partial(c);
  }
  return {std::move(val), std::move(jac)};
}

/// Orthonormal basis of ker(c) via SVD. Column signs are pinned (first entry
/// above threshold made positive) so golden tests stay stable.
inline MatrixXd kernel_basis(const MatrixXd& c, double rank_tol = 1e-10) {
  const Eigen::Index n = c.cols();
  if (c.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rank_tol * std::max(1.0, smax)) ++rank;
  MatrixXd basis = svd.matrixV().rightCols(n - rank);
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(basis(i, j)) > 1e-9) {
        if (basis(i, j) < 0) basis.col(j) = -basis.col(j);
        break;
      }
    }
  }
  return basis;
}

inline Eigen::Index numerical_rank(const MatrixXd& m, double tol = 1e-8) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * std::max(1.0, sv[0])) ++rank;
  return rank;
}

}  // namespace vnc
