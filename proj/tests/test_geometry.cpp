#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <random>

#include "support/oracles.hpp"
#include "vnc/geometry.hpp"
#include "vnc/sampling.hpp"
#include "vnc/systems.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using vnc::ChartSpec;
using vnc::Expr;
using vnc::MetricField;
using vnc::PotentialField;

namespace {

vnc::ChartPtr chart2(std::vector<std::string> names) {
  return std::make_shared<const ChartSpec>(std::move(names));
}

/// Random smooth SPD-by-construction metric on [-1,1]^n: diagonally dominant
/// grid of small trig/poly entries.
MetricField random_metric(vnc::ChartPtr chart, std::mt19937_64& rng) {
  const int n = chart->dim();
  std::uniform_real_distribution<double> coef(-0.15, 0.15);
  const auto& names = chart->coordinate_names();
  std::vector<std::vector<std::string>> g(n, std::vector<std::string>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.4f*sin(%s) + %.4f*%s", coef(rng),
                    names[(i + j) % n].c_str(), coef(rng), names[j].c_str());
      std::string off = buf;
      if (i == j) off = "2.5 + " + off;
      g[i][j] = off;
      g[j][i] = off;
    }
  }
  return MetricField(chart, g);
}

}  // namespace

TEST_CASE("metric_at: builtin golden values") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 2.0);
  MatrixXd m = vnc::metric_at(knife.metric, Eigen::Vector3d(0.4, -1.0, 2.2));
  CHECK(m.isApprox(Eigen::Vector3d(1, 1, 2).asDiagonal().toDenseMatrix()));

  vnc::SystemSpec disk = vnc::rolling_disk(1.0, 2.0, 3.0);
  VectorXd q4 = VectorXd::Zero(4);
  MatrixXd md = vnc::metric_at(disk.metric, q4);
  CHECK(md.isApprox(Eigen::Vector4d(1, 1, 2, 3).asDiagonal().toDenseMatrix()));

  auto chart = chart2({"a", "b"});
  MetricField ident(chart, {{"1", "0"}, {"0", "1"}});
  CHECK(vnc::metric_at(ident, Eigen::Vector2d(3, -9)).isIdentity(0.0));
}

TEST_CASE("metric_at rejects asymmetric and indefinite metrics") {
  auto chart = chart2({"a", "b"});
  MetricField asym(chart, {{"1", "a"}, {"0", "1"}});
  CHECK_THROWS_AS(vnc::metric_at(asym, Eigen::Vector2d(1, 0)), vnc::NotPositiveDefinite);
  // symmetric where a = 0
  CHECK_NOTHROW(vnc::metric_at(asym, Eigen::Vector2d(0, 5)));

  MetricField indef(chart, {{"1", "0"}, {"0", "-1"}});
  CHECK_THROWS_AS(vnc::metric_at(indef, Eigen::Vector2d(0, 0)), vnc::NotPositiveDefinite);
}

TEST_CASE("sharp and flat: SE(2) golden and inverse relation") {
  vnc::SystemSpec knife = vnc::se2_knife(1.0, 1.0);
  // f = sin(theta) dx - cos(theta) dy + dtheta at theta = 0 -> Y = (0, -1, 1)
  VectorXd q = Eigen::Vector3d(0, 0, 0);
  VectorXd f = Eigen::Vector3d(std::sin(0.0), -std::cos(0.0), 1.0);
  VectorXd y = vnc::sharp(knife.metric, q, f);
  CHECK(y.isApprox(Eigen::Vector3d(0, -1, 1), 1e-14));

  auto chart = chart2({"a", "b"});
  MetricField ident(chart, {{"1", "0"}, {"0", "1"}});
  VectorXd xi = Eigen::Vector2d(0.3, -2.0);
  CHECK(vnc::sharp(ident, Eigen::Vector2d(0, 0), xi).isApprox(xi, 0.0));

  std::mt19937_64 rng(11);
  auto chart3 = chart2({"a", "b", "c"});
  for (int trial = 0; trial < 20; ++trial) {
    MetricField g = random_metric(chart3, rng);
    VectorXd p = vnc::random_vector(rng, 3);
    VectorXd v = vnc::random_vector(rng, 3, -2, 2);
    VectorXd back = vnc::flat(g, p, vnc::sharp(g, p, v));
    CHECK((back - v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("christoffel_lc: flat metrics vanish, polar chart golden") {
  vnc::SystemSpec knife = vnc::se2_knife(2.0, 5.0);
  auto g = vnc::christoffel_lc(knife.metric, Eigen::Vector3d(0.1, 0.2, 0.3));
  CHECK(g.max_abs() == 0.0);

  // Euclidean plane in polar coordinates: ds^2 = dr^2 + r^2 dth^2
  auto chart = chart2({"r", "th"});
  MetricField polar(chart, {{"1", "0"}, {"0", "r^2"}});
  auto gp = vnc::christoffel_lc(polar, Eigen::Vector2d(2.0, 0.7));
  CHECK(gp(0, 1, 1) == doctest::Approx(-2.0).epsilon(1e-12));   // Gamma^r_thth = -r
  CHECK(gp(1, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));    // Gamma^th_rth = 1/r
  CHECK(gp(1, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gp(0, 0, 0) == doctest::Approx(0.0));
  CHECK(gp.max_asymmetry() == 0.0);
}

TEST_CASE("christoffel_lc symmetry and FD agreement on random metrics") {
  std::mt19937_64 rng(23);
  auto chart = chart2({"a", "b", "c"});
  for (int trial = 0; trial < 10; ++trial) {
    MetricField g = random_metric(chart, rng);
    VectorXd q = vnc::random_vector(rng, 3);
    auto gamma = vnc::christoffel_lc(g, q);
    CHECK(gamma.max_asymmetry() < 1e-14);
    auto fd = oracles::fd_christoffel_lc(g, q);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          worst = std::max(worst, std::abs(gamma(k, i, j) - fd(k, i, j)));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("levi-civita properties: symmetry and metric compatibility") {
  std::mt19937_64 rng(37);
  auto chart = chart2({"a", "b", "c"});
  MetricField g = random_metric(chart, rng);

  int points = 0;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd q = vnc::random_vector(rng, 3);
    vnc::VectorField x = vnc::random_affine_field(rng, 3, 0.6);
    vnc::VectorField y = vnc::random_affine_field(rng, 3, 0.6);
    vnc::VectorField z = vnc::random_affine_field(rng, 3, 0.6);
    auto gamma = vnc::christoffel_lc(g, q);

    // symmetry: nabla_X Y - nabla_Y X - [X, Y] = 0
    VectorXd sym = vnc::covariant_derivative(gamma, x, y, q) -
                   vnc::covariant_derivative(gamma, y, x, q) -
                   vnc::lie_bracket(x, y, q);
    CHECK(sym.cwiseAbs().maxCoeff() < 1e-8);

    // compatibility: X(G(Y,Z)) = G(nabla_X Y, Z) + G(Y, nabla_X Z)
    auto scalar_field = [&](const auto& qs) {
      using S = typename std::decay_t<decltype(qs)>::Scalar;
      vnc::MatX<S> m = g.at_unchecked<S>(qs);
      vnc::VecX<S> yy = y(qs), zz = z(qs);
      vnc::VecX<S> out(1);
      out[0] = (yy.transpose() * m * zz)(0, 0);
      return out;
    };
    auto [val, jac] = vnc::value_and_jacobian(scalar_field, q);
    (void)val;
    const double lhs = (jac * x(q))(0);
    MatrixXd m = g.at(q);
    const double rhs = vnc::covariant_derivative(gamma, x, y, q).dot(m * z(q)) +
                       y(q).dot(m * vnc::covariant_derivative(gamma, x, z, q));
    CHECK(std::abs(lhs - rhs) < 1e-8);
    ++points;
  }
  CHECK(points == 100);
}

TEST_CASE("grad_potential goldens") {
  auto chart = chart2({"q1", "q2"});
  MetricField ident(chart, {{"1", "0"}, {"0", "1"}});

  PotentialField zero(chart, "");
  CHECK(vnc::grad_potential(ident, zero, Eigen::Vector2d(1, 2)).isZero(0.0));

  PotentialField sq(chart, "q1^2");
  VectorXd g = vnc::grad_potential(ident, sq, Eigen::Vector2d(3, 0));
  CHECK(g.isApprox(Eigen::Vector2d(6, 0), 1e-14));

  auto chart1 = chart2({"q1"});
  MetricField two(chart1, {{"2"}});
  PotentialField lin(chart1, "q1");
  VectorXd g1 = vnc::grad_potential(two, lin, VectorXd::Constant(1, 7.0));
  CHECK(g1[0] == doctest::Approx(0.5));

  CHECK_THROWS_AS(PotentialField(chart, "v1 + q1"), vnc::InvalidSystem);
}

TEST_CASE("chart spec validation") {
  CHECK_THROWS_AS(ChartSpec({}), vnc::InvalidSystem);
  CHECK_THROWS_AS(ChartSpec({"x"}, {"m"}, {}), vnc::InvalidSystem);
  ChartSpec c({"x", "y"}, {"m"}, {2.5});
  CHECK(c.dim() == 2);
  CHECK(c.parameter("m") == 2.5);
  CHECK_THROWS_AS(c.parameter("nope"), vnc::InvalidSystem);
}
