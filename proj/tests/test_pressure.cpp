#include <gtest/gtest.h>

#include <random>

#include "pneumo/pressure.hpp"

using namespace pneumo;

namespace {

// Strip of nelx x 1 elements, length `len`, pressure p0 on the left nodes and 0 on the right.
struct Strip {
  StructuredMesh mesh;
  BoundaryConditions bcs;
};

Strip make_strip(int nelx, double len, double p0) {
  Strip s{StructuredMesh(nelx, 1, len, len / nelx, 0.01), {}};
  for (int j = 0; j <= 1; ++j) {
    s.bcs.pressure_dirichlet.emplace_back(s.mesh.node(0, j), p0);
    s.bcs.pressure_dirichlet.emplace_back(s.mesh.node(nelx, j), 0.0);
  }
  s.bcs.output_dof = 2;
  s.bcs.finalize(s.mesh);
  return s;
}

Eigen::Matrix4d hand_mass(double a, double b, double t) {
  Eigen::Matrix4d m;
  m << 4, 2, 1, 2, 2, 4, 2, 1, 1, 2, 4, 2, 2, 1, 2, 4;
  return t * a * b / 36.0 * m;
}

Eigen::Matrix4d hand_conduction(double a, double b, double t) {
  Eigen::Matrix4d kx, ky;
  kx << 2, -2, -1, 1, -2, 2, 1, -1, -1, 1, 2, -2, 1, -1, -2, 2;
  ky << 2, 1, -1, -2, 1, 2, -2, -1, -1, -2, 2, 1, -2, -1, 1, 2;
  return t / 6.0 * (b / a * kx + a / b * ky);
}

// int N_a dN_b/dx_c over the rectangle, separable by hand.
Eigen::Matrix<double, 8, 4> hand_transformation(double a, double b, double t) {
  const int xs[4] = {0, 1, 1, 0};
  const int ys[4] = {0, 0, 1, 1};
  Eigen::Matrix<double, 8, 4> te;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double sx = xs[j] ? 0.5 : -0.5;  // int X_i X_j' dx
      const double sy = ys[j] ? 0.5 : -0.5;
      const double yy = ys[i] == ys[j] ? b / 3.0 : b / 6.0;
      const double xx = xs[i] == xs[j] ? a / 3.0 : a / 6.0;
      te(2 * i, j) = t * sx * yy;
      te(2 * i + 1, j) = t * xx * sy;
    }
  return te;
}

}  // namespace

TEST(FlowCoefficient, EndpointsAndThreshold) {
  const FlowParams p = FlowParams::standard(0.001);
  EXPECT_DOUBLE_EQ(flow_coefficient(0.0, p), 1.0);
  EXPECT_NEAR(flow_coefficient(1.0, p), 1e-7, 1e-20);
  const double h = std::tanh(1.0) / (std::tanh(1.0) + std::tanh(9.0));
  EXPECT_NEAR(h, 0.4323, 5e-5);
  EXPECT_NEAR(flow_coefficient(0.1, p), 1.0 - h * (1.0 - 1e-7), 1e-15);
}

TEST(FlowCoefficient, NonIncreasing) {
  const FlowParams p = FlowParams::standard(0.001);
  for (double x = 0.01; x <= 1.0; x += 0.01) EXPECT_LE(flow_coefficient(x, p), flow_coefficient(x - 0.01, p));
}

TEST(Drainage, EndpointsAndMidpoint) {
  const FlowParams p = FlowParams::standard(0.001);
  EXPECT_DOUBLE_EQ(drainage_coefficient(0.0, p), 0.0);
  EXPECT_NEAR(drainage_coefficient(1.0, p), p.drainage, 1e-12 * p.drainage);
  const double h = (std::tanh(1.0) + std::tanh(4.0)) / (std::tanh(1.0) + std::tanh(9.0));
  EXPECT_NEAR(drainage_coefficient(0.5, p), p.drainage * h, 1e-12 * p.drainage);
}

TEST(Drainage, StandardConstruction) {
  const double edge = 0.001;
  const FlowParams p = FlowParams::standard(edge);
  EXPECT_NEAR(p.drainage, std::pow(std::log(0.1) / (2.0 * edge), 2) * 1e-7, 1e-9);
  EXPECT_NO_THROW(p.validate());
  FlowParams bad = p;
  bad.contrast = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.eta_flow = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(FlowElementTest, MatchesHandIntegrals) {
  const double a = 0.003, b = 0.002, t = 0.01;
  const FlowElement fe = flow_element(a, b, t);
  EXPECT_LT((fe.mass - hand_mass(a, b, t)).cwiseAbs().maxCoeff(), 1e-18);
  EXPECT_LT((fe.conduction - hand_conduction(a, b, t)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(fe.conduction.rowwise().sum().cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Transformation, ElementMatchesHandQuadrature) {
  const double a = 0.5, b = 0.25, t = 0.02;
  const auto te = transformation_element(a, b, t);
  EXPECT_LT((te - hand_transformation(a, b, t)).cwiseAbs().maxCoeff(), 1e-16);
  // Unit gradient along x: p = x at the nodes. Load = -int N_u dV in x, 0 in y.
  const Eigen::Vector4d p(0.0, a, a, 0.0);
  const Eigen::Matrix<double, 8, 1> f = -te * p;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(f[2 * i], -t * a * b / 4.0, 1e-16);
    EXPECT_NEAR(f[2 * i + 1], 0.0, 1e-16);
  }
}

TEST(Transformation, UniformPressureGivesNoLoad) {
  const StructuredMesh m(7, 5, 0.07, 0.05, 0.01);
  const SparseMatrix t = build_transformation(m);
  const double p = 1e5;
  const Eigen::VectorXd f = -(t * Eigen::VectorXd::Constant(m.num_nodes(), p));
  EXPECT_LE(f.cwiseAbs().maxCoeff(), 1e-12 * t.norm() * p);
}

TEST(Transformation, LinearPressureResultant) {
  const StructuredMesh m(20, 3, 0.2, 0.01, 0.01);
  const SparseMatrix t = build_transformation(m);
  const double slope = -3e5;
  Eigen::VectorXd p(m.num_nodes());
  for (int n = 0; n < m.num_nodes(); ++n) p[n] = 1e5 + slope * m.node_coordinates(n).x();
  const Eigen::VectorXd f = -(t * p);
  double fx = 0.0, fy = 0.0;
  for (int n = 0; n < m.num_nodes(); ++n) {
    fx += f[2 * n];
    fy += f[2 * n + 1];
  }
  const double expected = -slope * m.total_volume();
  EXPECT_NEAR(fx / expected, 1.0, 1e-9);
  EXPECT_LE(std::abs(fy), 1e-9 * std::abs(expected));
}

TEST(Transformation, AssembledOnceIsReproducible) {
  const StructuredMesh m(6, 4, 0.06, 0.04, 0.01);
  const SparseMatrix a = build_transformation(m);
  const SparseMatrix b = build_transformation(m);
  ASSERT_EQ(a.nonZeros(), b.nonZeros());
  for (Eigen::Index k = 0; k < a.nonZeros(); ++k) EXPECT_EQ(a.valuePtr()[k], b.valuePtr()[k]);
}

TEST(DarcyStrip, LinearProfileWithoutDrainage) {
  const Strip s = make_strip(100, 1.0, 1e5);
  FlowParams fp = FlowParams::standard(0.01);
  fp.drainage = 0.0;
  const PressureModel model(s.mesh, s.bcs, fp);
  SpdSolver solver("flow");
  const PressureState st = model.solve(Eigen::VectorXd::Ones(s.mesh.num_elements()), solver);
  for (int n = 0; n < s.mesh.num_nodes(); ++n) {
    const double x = s.mesh.node_coordinates(n).x();
    EXPECT_NEAR(st.pressure[n], 1e5 * (1.0 - x), 1e-9 * 1e5);
  }
}

TEST(DarcyStrip, DrainageMatchesSinhProfile) {
  // Solid strip with sqrt(D/K) L = 3.
  const double len = 1.0, p0 = 1e5;
  const Strip s = make_strip(100, len, p0);
  FlowParams fp = FlowParams::standard(0.01);
  fp.drainage = std::pow(3.0 / len, 2) * fp.solid_flow();
  const PressureModel model(s.mesh, s.bcs, fp);
  SpdSolver solver("flow");
  const Eigen::VectorXd topo = Eigen::VectorXd::Ones(s.mesh.num_elements());
  const PressureState st = model.solve(topo, solver);
  const double k = std::sqrt(drainage_coefficient(1.0, fp) / flow_coefficient(1.0, fp));
  double worst = 0.0;
  for (int n = 0; n < s.mesh.num_nodes(); ++n) {
    const double x = s.mesh.node_coordinates(n).x();
    const double exact = p0 * std::sinh(k * (len - x)) / std::sinh(k * len);
    worst = std::max(worst, std::abs(st.pressure[n] - exact));
  }
  EXPECT_LE(worst, 0.01 * p0);
}

TEST(DarcySolve, ConstantDirichletGivesConstantField) {
  const StructuredMesh m(6, 4, 0.06, 0.04, 0.01);
  BoundaryConditions bc;
  for (int j = 0; j <= 4; ++j) bc.pressure_dirichlet.emplace_back(m.node(0, j), 7.5e4);
  bc.output_dof = 3;
  bc.finalize(m);
  FlowParams fp = FlowParams::standard(0.01);
  fp.drainage = 0.0;
  const PressureModel model(m, bc, fp);
  SpdSolver solver("flow");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd topo(m.num_elements());
  for (int e = 0; e < topo.size(); ++e) topo[e] = u(rng);
  const PressureState st = model.solve(topo, solver);
  EXPECT_LT((st.pressure.array() - 7.5e4).abs().maxCoeff(), 1e-8 * 7.5e4);
}

TEST(DarcySolve, AllVoidCarriesAppliedPressure) {
  const StructuredMesh m(10, 6, 0.1, 0.06, 0.01);
  BoundaryConditions bc;
  for (int j = 0; j <= 6; ++j) bc.pressure_dirichlet.emplace_back(m.node(0, j), 1e5);
  bc.output_dof = 3;
  bc.finalize(m);
  const PressureModel model(m, bc, FlowParams::standard(0.01));
  SpdSolver solver("flow");
  const PressureState st = model.solve(Eigen::VectorXd::Zero(m.num_elements()), solver);
  EXPECT_LT((st.pressure.array() - 1e5).abs().maxCoeff(), 1e-6);
}

TEST(DarcySolve, ResidualAndMaximumPrinciple) {
  const StructuredMesh m(12, 8, 0.12, 0.08, 0.01);
  BoundaryConditions bc;
  for (int j = 0; j <= 8; ++j) bc.pressure_dirichlet.emplace_back(m.node(0, j), 1e5);
  for (int i = 1; i <= 12; ++i) bc.pressure_dirichlet.emplace_back(m.node(i, 8), 0.0);
  bc.output_dof = 3;
  bc.finalize(m);
  const PressureModel model(m, bc, FlowParams::standard(0.01));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd topo(m.num_elements());
    for (int e = 0; e < topo.size(); ++e) topo[e] = u(rng) < 0.5 ? u(rng) : 1.0;
    SpdSolver solver("flow");
    const PressureState st = model.solve(topo, solver);
    Eigen::VectorXd rhs;
    const SparseMatrix a = model.assemble(topo, &rhs);
    const Eigen::VectorXd pf = model.assembler().restrict(st.pressure);
    EXPECT_LE(relative_residual(a, pf, rhs), 1e-10);
    EXPECT_GE(st.pressure.minCoeff(), -1e-9 * 1e5);
    EXPECT_LE(st.pressure.maxCoeff(), 1e5 * (1.0 + 1e-9));
    EXPECT_LT((st.loads + model.transformation() * st.pressure).cwiseAbs().maxCoeff(), 1e-300);
  }
}

TEST(DarcySolve, NoDirichletNodesIsModelError) {
  const StructuredMesh m(2, 2, 0.02, 0.02, 0.01);
  BoundaryConditions bc;
  bc.output_dof = 3;
  bc.finalize(m);
  EXPECT_THROW(PressureModel(m, bc, FlowParams::standard(0.01)), ModelError);
}

TEST(DarcySolve, AllVoidWithoutOutletOrDrainageStillSolves) {
  // Single Dirichlet node keeps the operator definite.
  const StructuredMesh m(3, 3, 0.03, 0.03, 0.01);
  BoundaryConditions bc;
  bc.pressure_dirichlet.emplace_back(0, 1.0);
  bc.output_dof = 3;
  bc.finalize(m);
  FlowParams fp = FlowParams::standard(0.01);
  fp.drainage = 0.0;
  const PressureModel model(m, bc, fp);
  SpdSolver solver("flow");
  const PressureState st = model.solve(Eigen::VectorXd::Zero(m.num_elements()), solver);
  EXPECT_LT((st.pressure.array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(DarcySolve, ClosedCavityHasNoNetForce) {
  // Solid ring, pressurised void inside, zero pressure on the outer boundary.
  const int n = 12;
  const StructuredMesh m(n, n, 0.12, 0.12, 0.01);
  BoundaryConditions bc;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      if (i == 0 || j == 0 || i == n || j == n) bc.pressure_dirichlet.emplace_back(m.node(i, j), 0.0);
  bc.pressure_dirichlet.emplace_back(m.node(5, 7), 1e5);
  bc.output_dof = 3;
  bc.finalize(m);
  Eigen::VectorXd topo(m.num_elements());
  for (int e = 0; e < topo.size(); ++e) {
    const int i = m.element_column(e), j = m.element_row(e);
    topo[e] = (i >= 3 && i < 9 && j >= 3 && j < 9) ? 0.0 : 1.0;
  }
  const PressureModel model(m, bc, FlowParams::standard(0.01));
  SpdSolver solver("flow");
  const PressureState st = model.solve(topo, solver);
  double fx = 0.0, fy = 0.0, fmax = 0.0;
  for (int k = 0; k < m.num_nodes(); ++k) {
    fx += st.loads[2 * k];
    fy += st.loads[2 * k + 1];
    fmax = std::max(fmax, std::abs(st.loads[2 * k]));
  }
  ASSERT_GT(fmax, 0.0);
  EXPECT_LE(std::abs(fx), 1e-12 * fmax * m.num_nodes());
  EXPECT_LE(std::abs(fy), 1e-12 * fmax * m.num_nodes());
}

TEST(DarcySolve, InvariantToFlowScaleWhenDrainageFollows) {
  const StructuredMesh m(10, 6, 0.1, 0.06, 0.01);
  BoundaryConditions bc;
  for (int j = 0; j <= 6; ++j) bc.pressure_dirichlet.emplace_back(m.node(0, j), 1e5);
  for (int i = 1; i <= 10; ++i) bc.pressure_dirichlet.emplace_back(m.node(i, 6), 0.0);
  bc.output_dof = 3;
  bc.finalize(m);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd topo(m.num_elements());
  for (int e = 0; e < topo.size(); ++e) topo[e] = u(rng);
  const PressureModel unit(m, bc, FlowParams::standard(0.01, 1.0));
  const PressureModel scaled(m, bc, FlowParams::standard(0.01, 3.7e-4));
  SpdSolver s1("flow"), s2("flow");
  const Eigen::VectorXd p1 = unit.solve(topo, s1).pressure;
  const Eigen::VectorXd p2 = scaled.solve(topo, s2).pressure;
  EXPECT_LE((p1 - p2).cwiseAbs().maxCoeff(), 1e-9 * 1e5);
}

TEST(FlowDerivative, MatchesCentralDifferences) {
  const FlowParams p = FlowParams::standard(0.01);
  const FlowElement fe = flow_element(0.01, 0.01, 0.01);
  const double h = 1e-6;
  for (double r : {0.05, 0.1, 0.3, 0.6, 0.9}) {
    const Eigen::Matrix4d fd = (element_flow_matrix(fe, r + h, p) - element_flow_matrix(fe, r - h, p)) / (2.0 * h);
    const Eigen::Matrix4d d = flow_matrix_derivative(fe, r, p);
    EXPECT_LE((fd - d).norm(), 1e-4 * d.norm()) << r;
  }
}

TEST(FlowDerivative, AssembledMatchesCentralDifferencesOnSmallMesh) {
  const StructuredMesh m(4, 3, 0.04, 0.03, 0.01);
  BoundaryConditions bc;
  bc.pressure_dirichlet.emplace_back(0, 1.0);
  bc.output_dof = 3;
  bc.finalize(m);
  const PressureModel model(m, bc, FlowParams::standard(0.01));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  Eigen::VectorXd topo(m.num_elements());
  for (int e = 0; e < topo.size(); ++e) topo[e] = u(rng);
  const double h = 1e-6;
  for (int e = 0; e < m.num_elements(); ++e) {
    Eigen::VectorXd tp = topo, tm = topo;
    tp[e] += h;
    tm[e] -= h;
    const Eigen::MatrixXd fd = Eigen::MatrixXd(model.assemble(tp) - model.assemble(tm)) / (2.0 * h);
    // Scatter the element derivative into the reduced matrix.
    const Eigen::Matrix4d de = flow_matrix_derivative(model.element(), topo[e], model.params());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(fd.rows(), fd.cols());
    const auto& nodes = m.element_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int fa = model.assembler().free_index(nodes[a]);
        const int fb = model.assembler().free_index(nodes[b]);
        if (fa >= 0 && fb >= 0) d(fa, fb) += de(a, b);
      }
    EXPECT_LE((fd - d).norm(), 1e-4 * d.norm()) << e;
  }
}

TEST(FlowDerivative, EndpointMagnitudes) {
  const FlowParams p = FlowParams::standard(0.01);
  const double denom = std::tanh(1.0) + std::tanh(9.0);
  const double at_solid = 10.0 / std::pow(std::cosh(9.0), 2) / denom;
  const double at_void = 10.0 / std::pow(std::cosh(1.0), 2) / denom;
  EXPECT_NEAR(std::abs(flow_coefficient_derivative(1.0, p)), (1.0 - 1e-7) * at_solid, 1e-20);
  EXPECT_LT(std::abs(flow_coefficient_derivative(1.0, p)), 1e-6);
  EXPECT_NEAR(std::abs(flow_coefficient_derivative(0.0, p)), (1.0 - 1e-7) * at_void, 1e-12);
  EXPECT_NEAR(drainage_coefficient_derivative(1.0, p), p.drainage * at_solid, 1e-12 * p.drainage);
}
