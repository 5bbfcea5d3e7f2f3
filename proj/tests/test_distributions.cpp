#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <random>

#include "support/oracles.hpp"
#include "vnc/distributions.hpp"
#include "vnc/sampling.hpp"
#include "vnc/systems.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool in_span(const MatrixXd& basis, const VectorXd& v, double tol = 1e-10) {
  VectorXd coeff = basis.colPivHouseholderQr().solve(v);
  return (basis * coeff - v).cwiseAbs().maxCoeff() < tol;
}

void check_projector_pair(const vnc::ProjectorPair& p, double tol = 1e-10) {
  const Eigen::Index n = p.onto_constraint.rows();
  CHECK((p.onto_constraint + p.onto_complement - MatrixXd::Identity(n, n))
            .cwiseAbs()
            .maxCoeff() < tol);
  CHECK((p.onto_constraint * p.onto_constraint - p.onto_constraint)
            .cwiseAbs()
            .maxCoeff() < tol);
  CHECK((p.onto_complement * p.onto_complement - p.onto_complement)
            .cwiseAbs()
            .maxCoeff() < tol);
  CHECK((p.onto_constraint * p.onto_complement).cwiseAbs().maxCoeff() < tol);
}

}  // namespace

TEST_CASE("constraint residuals: goldens") {
  vnc::SystemSpec knife = vnc::se2_knife();
  VectorXd q = Eigen::Vector3d(0, 0, 0);
  CHECK(knife.constraints.residuals(q, Eigen::Vector3d(1, 0, 2))[0] ==
        doctest::Approx(0.0));
  CHECK(knife.constraints.residuals(q, Eigen::Vector3d(0, 0, 0)).isZero(0.0));
  CHECK(knife.constraints.residuals(q, Eigen::Vector3d(0, 1, 0))[0] ==
        doctest::Approx(-1.0));

  vnc::SystemSpec disk = vnc::rolling_disk();
  VectorXd q4 = VectorXd::Zero(4);
  VectorXd v4(4);
  v4 << 1, 0, 1, 0;  // xdot = thetadot cos(phi), ydot = thetadot sin(phi)
  CHECK(disk.constraints.residuals(q4, v4).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("basis_D and basis_F: SE(2) goldens") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  VectorXd q = Eigen::Vector3d(0, 0, 0);
  MatrixXd bd = vnc::basis_D(knife.constraints, q);
  REQUIRE(bd.cols() == 2);
  // D at theta=0 is spanned by (1,0,0) and (0,0,1)
  CHECK(in_span(bd, Eigen::Vector3d(1, 0, 0)));
  CHECK(in_span(bd, Eigen::Vector3d(0, 0, 1)));
  CHECK_FALSE(in_span(bd, Eigen::Vector3d(0, 1, 0)));
  for (int c = 0; c < 2; ++c)
    CHECK(bd.col(c).norm() == doctest::Approx(1.0));  // unit columns

  MatrixXd bf = vnc::basis_F(knife.inputs, knife.metric, q);
  REQUIRE(bf.cols() == 1);
  CHECK(bf.col(0).isApprox(Eigen::Vector3d(0, -1, 1), 1e-14));  // raw Y
}

TEST_CASE("basis_D: deterministic sign convention and rank error") {
  vnc::SystemSpec knife = vnc::se2_knife();
  VectorXd q = Eigen::Vector3d(0.2, -0.4, 0.9);
  MatrixXd a = vnc::basis_D(knife.constraints, q);
  MatrixXd b = vnc::basis_D(knife.constraints, q);
  CHECK(a.isApprox(b, 0.0));  // identical on repeated evaluation

  // rank-deficient constraints: duplicated rows
  auto chart = std::make_shared<const vnc::ChartSpec>(
      std::vector<std::string>{"x", "y", "z"});
  vnc::Distribution dup(chart, {{"0", "0", "1"}, {"0", "0", "1"}});
  CHECK_THROWS_AS(vnc::basis_D(dup, Eigen::Vector3d(0, 0, 0)),
                  vnc::RankDeficientConstraints);
}

TEST_CASE("unconstrained degenerate case m = 0") {
  auto chart = std::make_shared<const vnc::ChartSpec>(
      std::vector<std::string>{"x", "y"});
  vnc::Distribution none(chart, {});
  CHECK(none.count() == 0);
  CHECK(none.residuals(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)).size() == 0);
  CHECK(vnc::basis_D(none, Eigen::Vector2d(0, 0)).isIdentity(0.0));
}

TEST_CASE("check_transversality: three regimes") {
  std::mt19937_64 rng(5);
  vnc::SystemSpec knife = vnc::se2_knife();
  for (int i = 0; i < 10; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -3, 3);
    auto rep = vnc::check_transversality(knife.constraints, knife.inputs, knife.metric, q);
    CHECK(rep.transversal);
    CHECK(rep.sigma_min > 1e-2);
  }

  vnc::SystemSpec nox = vnc::nonexistence_demo();
  for (int i = 0; i < 10; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -3, 3);
    auto rep = vnc::check_transversality(nox.constraints, nox.inputs, nox.metric, q);
    CHECK_FALSE(rep.transversal);
    CHECK(rep.overlap_dim == 1);  // F sits inside D
    CHECK_FALSE(rep.spans);
  }

  vnc::SystemSpec nun = vnc::nonuniqueness_demo();
  for (int i = 0; i < 10; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -3, 3);
    auto rep = vnc::check_transversality(nun.constraints, nun.inputs, nun.metric, q);
    CHECK_FALSE(rep.transversal);
    CHECK(rep.spans);             // TQ = D + F
    CHECK(rep.overlap_dim == 1);  // but the sum is not direct
  }
}

TEST_CASE("oblique projectors: SE(2) golden decomposition") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  VectorXd q = Eigen::Vector3d(0, 0, M_PI / 2);
  auto pair = vnc::oblique_projectors(knife.constraints, knife.inputs, knife.metric, q);
  check_projector_pair(pair);
  // d/dx = cos th X1 - (m sin th / I) X2 + m sin th Y  =>  P_F(d/dx) = (1,0,1) at th = pi/2
  VectorXd pfx = pair.onto_complement * Eigen::Vector3d(1, 0, 0);
  CHECK(pfx.isApprox(Eigen::Vector3d(1, 0, 1), 1e-12));

  // P_D fixes its range
  MatrixXd bd = vnc::basis_D(knife.constraints, q);
  for (int c = 0; c < bd.cols(); ++c) {
    CHECK((pair.onto_constraint * bd.col(c) - bd.col(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // mu annihilates the range of P_D
  MatrixXd mu = knife.constraints.coefficient_matrix<double>(vnc::VecX<double>(q));
  CHECK((mu * pair.onto_constraint).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(vnc::oblique_projectors(vnc::nonexistence_demo().constraints,
                                          vnc::nonexistence_demo().inputs,
                                          vnc::nonexistence_demo().metric,
                                          Eigen::Vector3d(0, 0, 0.4)),
                  vnc::NotTransversal);
}

TEST_CASE("oblique projector agrees with the block-solve construction") {
  // Random transversal pairs in R^4, two routes compared within 1e-10.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  auto chart = std::make_shared<const vnc::ChartSpec>(
      std::vector<std::string>{"a", "b", "c", "d"});
  int tested = 0;
  while (tested < 12) {
    auto rand_forms = [&](int rows) {
      std::vector<std::vector<std::string>> forms(rows, std::vector<std::string>(4));
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < 4; ++c) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.4f + %.4f*sin(%c)", coef(rng), 0.3 * coef(rng),
                        "abcd"[(r + c) % 4]);
          forms[r][c] = buf;
        }
      return forms;
    };
    vnc::SystemSource src;
    src.name = "random4";
    src.coordinates = {"a", "b", "c", "d"};
    src.metric = {{"1", "0", "0", "0"},
                  {"0", "1", "0", "0"},
                  {"0", "0", "1", "0"},
                  {"0", "0", "0", "1"}};
    src.constraints = rand_forms(2);
    src.inputs = rand_forms(2);
    vnc::SystemSpec sys = vnc::make_system(src);

    VectorXd q = vnc::random_vector(rng, 4);
    auto rep = vnc::check_transversality(sys.constraints, sys.inputs, sys.metric, q);
    if (!rep.transversal || rep.sigma_min < 0.15) continue;  // keep well-conditioned cases

    auto pair = vnc::oblique_projectors(sys.constraints, sys.inputs, sys.metric, q);
    MatrixXd pd_oracle = oracles::block_solve_pd(sys, q);
    CHECK((pair.onto_constraint - pd_oracle).cwiseAbs().maxCoeff() < 1e-10);
    check_projector_pair(pair);
    ++tested;
  }
}

TEST_CASE("orthogonal projectors: goldens and self-adjointness") {
  // identity metric, D = span{e1}: P = diag(1, 0)
  auto chart = std::make_shared<const vnc::ChartSpec>(
      std::vector<std::string>{"x", "y"});
  vnc::MetricField ident(chart, {{"1", "0"}, {"0", "1"}});
  vnc::Distribution d1(chart, {{"0", "1"}});  // annihilator of span{e1}
  auto p = vnc::orthogonal_projectors(ident, d1, Eigen::Vector2d(0, 0));
  check_projector_pair(p);
  CHECK(p.onto_constraint.isApprox(Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix(), 1e-14));

  // SE(2) at theta = 0: Q is the rank-one projector with (2,2) entry 1
  vnc::SystemSpec knife = vnc::se2_knife(2.0, 3.0);
  auto pk = vnc::orthogonal_projectors(knife.metric, knife.constraints,
                                       Eigen::Vector3d(0, 0, 0));
  MatrixXd expected = MatrixXd::Zero(3, 3);
  expected(1, 1) = 1.0;
  CHECK(pk.onto_complement.isApprox(expected, 1e-13));

  // G-self-adjoint: M P = P^T M
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -2, 2);
    auto pr = vnc::orthogonal_projectors(knife.metric, knife.constraints, q);
    MatrixXd m = knife.metric.at(q);
    CHECK((m * pr.onto_constraint - pr.onto_constraint.transpose() * m)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    // orthogonality of the split: G(P X, Q Y) = 0
    for (int k = 0; k < 5; ++k) {
      VectorXd x = vnc::random_vector(rng, 3, -2, 2);
      VectorXd y = vnc::random_vector(rng, 3, -2, 2);
      const double ip = (pr.onto_constraint * x).dot(m * (pr.onto_complement * y));
      CHECK(std::abs(ip) < 1e-9);
    }
  }
}

TEST_CASE("projector coincidence iff inputs lie in the annihilator") {
  std::mt19937_64 rng(17);
  vnc::SystemSpec sleigh = vnc::chaplygin_sleigh(1.3, 0.7);
  for (int i = 0; i < 50; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -3, 3);
    auto ob = vnc::oblique_projectors(sleigh.constraints, sleigh.inputs, sleigh.metric, q);
    auto og = vnc::orthogonal_projectors(sleigh.metric, sleigh.constraints, q);
    CHECK((ob.onto_constraint - og.onto_constraint).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ob.onto_complement - og.onto_complement).cwiseAbs().maxCoeff() < 1e-10);
  }

  vnc::SystemSpec knife = vnc::se2_knife();  // f has a dtheta term
  double gap = 0.0;
  for (int i = 0; i < 20; ++i) {
    VectorXd q = vnc::random_vector(rng, 3, -3, 3);
    auto ob = vnc::oblique_projectors(knife.constraints, knife.inputs, knife.metric, q);
    auto og = vnc::orthogonal_projectors(knife.metric, knife.constraints, q);
    gap = std::max(gap, (ob.onto_constraint - og.onto_constraint).cwiseAbs().maxCoeff());
  }
  CHECK(gap > 1e-2);
}

TEST_CASE("property: projector invariants at random points across builtins") {
  std::mt19937_64 rng(2024);
  for (const char* name : {"se2_knife", "rolling_disk", "chaplygin", "offset_sleigh"}) {
    vnc::SystemSpec sys = vnc::make_builtin(name);
    for (int i = 0; i < 50; ++i) {
      VectorXd q = vnc::random_vector(rng, sys.dim(), -2.5, 2.5);
      auto ob = vnc::oblique_projectors(sys.constraints, sys.inputs, sys.metric, q);
      auto og = vnc::orthogonal_projectors(sys.metric, sys.constraints, q);
      check_projector_pair(ob);
      check_projector_pair(og);
      // on-D velocities are fixed by P_D
      VectorXd v = og.onto_constraint * vnc::random_vector(rng, sys.dim(), -2, 2);
      CHECK((ob.onto_constraint * v - v).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(sys.constraints.residuals(q, v).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}
