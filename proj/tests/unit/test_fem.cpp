#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "dvto/fem.hpp"

using namespace dvto;

namespace {

// Plane-stress quad stiffness by 2x2 Gauss quadrature of B^T C B on [0,1]^2, node order
// lower-left, lower-right, upper-right, upper-left.
ElementMatrix gauss_stiffness(double nu) {
  Eigen::Matrix3d C;
  C << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  C /= 1 - nu * nu;
  const double xs[4] = {0, 1, 1, 0}, ys[4] = {0, 0, 1, 1};
  const double g = 0.5 / std::sqrt(3.0);
  ElementMatrix K = ElementMatrix::Zero();
  for (double gx : {0.5 - g, 0.5 + g}) {
    for (double gy : {0.5 - g, 0.5 + g}) {
      Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double sx = xs[a] ? 1 : -1, sy = ys[a] ? 1 : -1;
        const double nx = sx * (ys[a] ? gy : 1 - gy);
        const double ny = sy * (xs[a] ? gx : 1 - gx);
        B(0, 2 * a) = nx;
        B(1, 2 * a + 1) = ny;
        B(2, 2 * a) = ny;
        B(2, 2 * a + 1) = nx;
      }
      K += 0.25 * B.transpose() * C * B;
    }
  }
  return K;
}

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& s) { return Eigen::MatrixXd(s); }

}  // namespace

TEST_CASE("element stiffness matches Gauss quadrature") {
  for (double nu : {0.1, 0.3, 0.45}) {
    CAPTURE(nu);
    const ElementMatrix k = element_stiffness(nu);
    const ElementMatrix q = gauss_stiffness(nu);
    CHECK((k - q).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(k(0, 0) == doctest::Approx((0.5 - nu / 6) / (1 - nu * nu)));
  }
  CHECK_THROWS(element_stiffness(0.5));
  CHECK_THROWS(element_stiffness(-0.1));
}

TEST_CASE("element stiffness is symmetric with three rigid modes") {
  const ElementMatrix k = element_stiffness(0.3);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<ElementMatrix> es(k);
  int zeros = 0;
  for (int i = 0; i < 8; ++i) {
    CHECK(es.eigenvalues()[i] > -1e-12);
    if (std::abs(es.eigenvalues()[i]) < 1e-10) ++zeros;
  }
  CHECK(zeros == 3);
  Eigen::Matrix<double, 8, 1> tx, ty;
  for (int a = 0; a < 4; ++a) {
    tx[2 * a] = 1, tx[2 * a + 1] = 0;
    ty[2 * a] = 0, ty[2 * a + 1] = 1;
  }
  CHECK((k * tx).norm() < 1e-12);
  CHECK((k * ty).norm() < 1e-12);
}

TEST_CASE("assembly scales with the element modulus") {
  FemModel m = make_grid(2, 2, 0.3);
  m.fixed = {0, 1, 2, 3, 4, 5};  // left column of nodes
  m.load = Eigen::VectorXd::Zero(m.n_dofs());
  StateSolver solver(m);

  // dense oracle: scatter K_e by the DOF map, then drop the fixed rows and columns
  auto oracle = [&](const std::vector<double>& moduli) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m.n_dofs(), m.n_dofs());
    for (int e = 0; e < m.n_elements(); ++e) {
      const auto dofs = m.element_dofs(e);
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) K(dofs[a], dofs[b]) += moduli[e] * m.ke(a, b);
    }
    const int n = m.n_dofs() - 6;
    return Eigen::MatrixXd(K.bottomRightCorner(n, n));
  };

  MaterialSet mat;
  mat.e_min = 1e-3;
  DesignField gray(4, 1, 0.4);
  solver.assemble(gray, mat);
  const double s = 0.4 * (1 - 1e-3) + 1e-3;
  CHECK((dense(solver.matrix()) - oracle({s, s, s, s})).cwiseAbs().maxCoeff() < 1e-14);

  DesignField mixed(4, 1);
  mixed(1, 0) = mixed(2, 0) = 1.0;
  mixed.mark_binary();
  solver.assemble(mixed, mat);
  CHECK((dense(solver.matrix()) - oracle({1e-3, 1.0, 1.0, 1e-3})).cwiseAbs().maxCoeff() < 1e-14);
  const Eigen::MatrixXd K = dense(solver.matrix());
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const auto moduli = element_moduli(mixed, mat);
  CHECK(moduli[0] == doctest::Approx(1e-3));
  CHECK(moduli[1] == doctest::Approx(1.0));
}

TEST_CASE("multi-material moduli add over channels with one E0") {
  MaterialSet set;
  set.materials = {{0.5, 0.4}, {1.0, 1.0}};
  set.e_min = 1e-2;
  DesignField d(3, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 1.0;
  d.mark_binary();
  const auto m = element_moduli(d, set);
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(1.0));
  CHECK(m[2] == doctest::Approx(1e-2));
}

TEST_CASE("single element patch matches a dense solve") {
  FemModel m = make_grid(1, 1, 0.3);
  m.fixed = {0, 1, 2, 3};  // both left nodes
  m.load = Eigen::VectorXd::Zero(m.n_dofs());
  m.load[2 * m.node(1, 0) + 1] = 1.0;
  StateSolver solver(m);
  MaterialSet mat;
  DesignField solid(1, 1, 1.0);
  solid.mark_binary();
  const StateSolution st = solver.analyze(solid, mat);

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(8, 8);
  const auto dofs = m.element_dofs(0);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) K(dofs[a], dofs[b]) = m.ke(a, b);
  const Eigen::VectorXd u = K.bottomRightCorner(4, 4).ldlt().solve(m.load.tail(4));
  CHECK((st.u.tail(4) - u).norm() < 1e-12);
  CHECK(st.u.head(4).norm() == 0.0);
  CHECK(st.objective == doctest::Approx(m.load.dot(st.u)));
  CHECK((st.mu + st.u).norm() == 0.0);
}

TEST_CASE("zero load gives zero displacement") {
  FemModel m = make_grid(3, 2, 0.3);
  m.fixed = {0, 1, 2, 3, 4, 5};
  m.load = Eigen::VectorXd::Zero(m.n_dofs());
  StateSolver solver(m);
  DesignField solid(6, 1, 1.0);
  const StateSolution st = solver.analyze(solid, MaterialSet{});
  CHECK(st.u.norm() == 0.0);
  CHECK(st.objective == 0.0);
}

TEST_CASE("slender cantilever follows beam theory") {
  ProblemSpec s = make_preset("cantilever");
  s.nx = 64, s.ny = 8;
  const FemModel m = make_model(s);
  StateSolver solver(m);
  DesignField solid(m.n_elements(), 1, 1.0);
  solid.mark_binary();
  const StateSolution st = solver.analyze(solid, s.materials);
  const double tip = std::abs(st.u[m.output_dof >= 0 ? m.output_dof : 2 * m.node(64, 4) + 1]);
  const double beam = 4.0 * 64 * 64 * 64 / (8.0 * 8 * 8);  // 4 F L^3 / (E h^3), unit thickness
  CHECK(std::abs(tip - beam) / beam < 0.10);
}

TEST_CASE("compliance never increases when material is added") {
  ProblemSpec s = make_preset("cantilever");
  s.nx = 3, s.ny = 2;
  s.materials.e_min = 1e-3;
  const FemModel m = make_model(s);
  StateSolver solver(m);
  const int n = m.n_elements();
  for (int bits = 0; bits < (1 << n); ++bits) {
    DesignField d(n, 1);
    for (int e = 0; e < n; ++e) d(e, 0) = bits >> e & 1;
    const double f = solver.analyze(d, s.materials).objective;
    for (int e = 0; e < n; ++e) {
      if (bits >> e & 1) continue;
      DesignField more = d;
      more(e, 0) = 1.0;
      CHECK(solver.analyze(more, s.materials).objective <= f * (1 + 1e-10));
    }
  }
}

TEST_CASE("adjoints satisfy K mu = -df/du") {
  for (const char* preset : {"mbb", "mechanism"}) {
    CAPTURE(preset);
    ProblemSpec s = make_preset(preset);
    s.nx = 8, s.ny = 4;
    s.materials.e_min = 1e-2;
    const FemModel m = make_model(s);
    StateSolver solver(m);
    DesignField d(m.n_elements(), 1, 0.5);
    const StateSolution st = solver.analyze(d, s.materials);
    const Eigen::VectorXd dfdu = m.objective_selector();
    const Eigen::VectorXd lhs = solver.matrix() * solver.reduce(st.mu);
    const Eigen::VectorXd rhs = -solver.reduce(dfdu);
    CHECK((lhs - rhs).norm() <= 1e-8 * rhs.norm());
    const Eigen::VectorXd res = solver.matrix() * solver.reduce(st.u) - solver.reduce(m.load);
    CHECK(res.norm() <= 1e-8 * m.load.norm());
  }
}

TEST_CASE("mechanism with output at the input reads the input displacement") {
  ProblemSpec s = make_preset("mechanism");
  s.nx = 6, s.ny = 3;
  FemModel m = make_model(s);
  int in = -1;
  for (int i = 0; i < m.n_dofs(); ++i) {
    if (m.load[i] != 0.0) in = i;
  }
  REQUIRE(in >= 0);
  m.output_dof = in;
  StateSolver solver(m);
  DesignField d(m.n_elements(), 1, 1.0);
  const StateSolution st = solver.analyze(d, s.materials);
  CHECK(st.objective == doctest::Approx(st.u[in]));
}

TEST_CASE("presets place supports and loads") {
  ProblemSpec s = make_preset("mbb");
  s.nx = 4, s.ny = 2;
  FemModel m = make_model(s);
  CHECK(m.load[2 * m.node(0, 0) + 1] == -1.0);
  CHECK(std::count(m.fixed.begin(), m.fixed.end(), 2 * m.node(4, 2) + 1) == 1);
  for (int j = 0; j <= 2; ++j) {
    CHECK(std::count(m.fixed.begin(), m.fixed.end(), 2 * m.node(0, j)) == 1);
  }

  s = make_preset("cantilever");
  s.nx = 4, s.ny = 2;
  m = make_model(s);
  CHECK(m.load[2 * m.node(4, 1) + 1] == -1.0);
  CHECK(m.fixed.size() == 6u);

  s = make_preset("mechanism");
  s.nx = 4, s.ny = 2;
  m = make_model(s);
  CHECK(m.springs.size() == 2u);
  CHECK(m.output_dof >= 0);
  CHECK(m.objective == Objective::Mechanism);
}
