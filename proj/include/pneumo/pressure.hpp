#pragma once

// Darcy pressure model with a volumetric drainage sink.
//
// Per element the flow operator is  A_e = K(r) * C_e + D(r) * M_e  where C_e is
// the conduction (Laplacian) matrix, M_e the pressure mass matrix and r the
// projected topology variable. Nodal pressures become consistent structural
// loads through F = -T p, with T = sum_e int N_u^T grad N_p dV.

#include <cmath>
#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pneumo/element.hpp"
#include "pneumo/errors.hpp"
#include "pneumo/fields.hpp"
#include "pneumo/mesh.hpp"
#include "pneumo/sparse.hpp"

namespace pneumo {

struct FlowParams {
  double void_flow = 1.0;   // K_v
  double contrast = 1e-7;   // K_s / K_v
  double beta_flow = 10.0;
  double eta_flow = 0.1;
  double drainage = 0.0;    // D_s, sink strength of fully solid material
  double beta_drain = 10.0;
  double eta_drain = 0.1;

  double solid_flow() const { return contrast * void_flow; }

  // Drainage sized so pressure decays to `decay_ratio` over `penetration_elements`
  // element edges of solid: D_s = (ln r / ds)^2 K_s.
  static FlowParams standard(double element_edge, double void_flow = 1.0, double contrast = 1e-7,
                             double decay_ratio = 0.1, double penetration_elements = 2.0) {
    FlowParams p;
    p.void_flow = void_flow;
    p.contrast = contrast;
    const double ds = penetration_elements * element_edge;
    p.drainage = std::pow(std::log(decay_ratio) / ds, 2) * p.solid_flow();
    return p;
  }

  void validate() const {
    if (!(void_flow > 0.0)) throw ConfigError("flow: void flow coefficient must be positive");
    if (!(contrast > 0.0 && contrast < 1.0)) throw ConfigError("flow: contrast must lie in (0, 1)");
    if (!(beta_flow > 0.0) || !(beta_drain > 0.0)) throw ConfigError("flow: beta must be positive");
    if (!(eta_flow > 0.0 && eta_flow < 1.0) || !(eta_drain > 0.0 && eta_drain < 1.0))
      throw ConfigError("flow: eta must lie in (0, 1)");
    if (!(drainage >= 0.0)) throw ConfigError("flow: drainage must be non-negative");
  }
};

inline double flow_coefficient(double topo, const FlowParams& p) {
  const double h = heaviside(topo, p.beta_flow, p.eta_flow);
  return p.void_flow * ((1.0 - h) + p.contrast * h);  // exact contrast at h = 1
}

inline double flow_coefficient_derivative(double topo, const FlowParams& p) {
  return -p.void_flow * (1.0 - p.contrast) * heaviside_derivative(topo, p.beta_flow, p.eta_flow);
}

inline double drainage_coefficient(double topo, const FlowParams& p) {
  return p.drainage * heaviside(topo, p.beta_drain, p.eta_drain);
}

inline double drainage_coefficient_derivative(double topo, const FlowParams& p) {
  return p.drainage * heaviside_derivative(topo, p.beta_drain, p.eta_drain);
}

struct FlowElement {
  Eigen::Matrix4d conduction;
  Eigen::Matrix4d mass;
};

inline FlowElement flow_element(double dx, double dy, double thickness) {
  FlowElement fe;
  fe.conduction.setZero();
  fe.mass.setZero();
  for (const auto& q : gauss_points(dx, dy)) {
    fe.conduction += thickness * q.weight * q.grad.transpose() * q.grad;
    fe.mass += thickness * q.weight * q.n * q.n.transpose();
  }
  return fe;
}

// Rows: displacement dofs (x0, y0, x1, y1, ...), columns: pressure nodes.
inline Eigen::Matrix<double, 8, 4> transformation_element(double dx, double dy, double thickness) {
  Eigen::Matrix<double, 8, 4> te = Eigen::Matrix<double, 8, 4>::Zero();
  for (const auto& q : gauss_points(dx, dy))
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 2; ++c) te.row(2 * a + c) += thickness * q.weight * q.n[a] * q.grad.row(c);
  return te;
}

inline Eigen::Matrix4d element_flow_matrix(const FlowElement& fe, double topo, const FlowParams& p) {
  return flow_coefficient(topo, p) * fe.conduction + drainage_coefficient(topo, p) * fe.mass;
}

// dA_e / d r_e (topology column). Material columns do not enter the flow model.
inline Eigen::Matrix4d flow_matrix_derivative(const FlowElement& fe, double topo, const FlowParams& p) {
  return flow_coefficient_derivative(topo, p) * fe.conduction + drainage_coefficient_derivative(topo, p) * fe.mass;
}

inline SparseMatrix build_transformation(const StructuredMesh& mesh) {
  const Eigen::Matrix<double, 8, 4> te = transformation_element(mesh.dx(), mesh.dy(), mesh.thickness());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_elements()) * 32);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto udofs = mesh.element_displacement_dofs(e);
    const auto& nodes = mesh.element_nodes(e);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 4; ++b) triplets.emplace_back(udofs[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)], te(a, b));
  }
  SparseMatrix t(mesh.num_displacement_dofs(), mesh.num_pressure_dofs());
  t.setFromTriplets(triplets.begin(), triplets.end());
  t.makeCompressed();
  return t;
}

struct PressureState {
  Eigen::VectorXd pressure;  // nodal, Pa, Dirichlet values included
  Eigen::VectorXd loads;     // -T p, N
};

// Design-independent parts of the pressure model: assembled once, shared by
// both realizations. Each realization brings its own SpdSolver.
class PressureModel {
 public:
  PressureModel(const StructuredMesh& mesh, const BoundaryConditions& bcs, FlowParams params)
      : params_(params),
        element_(flow_element(mesh.dx(), mesh.dy(), mesh.thickness())),
        assembler_(mesh.connectivity(), mesh.num_pressure_dofs(), dirichlet_mask(mesh, bcs)),
        prescribed_(Eigen::VectorXd::Zero(mesh.num_pressure_dofs())),
        transformation_(build_transformation(mesh)) {
    params_.validate();
    if (bcs.pressure_dirichlet.empty()) throw ModelError("pressure: no Dirichlet pressure nodes");
    for (const auto& [node, value] : bcs.pressure_dirichlet) prescribed_[node] = value;
  }

  const FlowParams& params() const { return params_; }
  const FlowElement& element() const { return element_; }
  const ReducedAssembler<4>& assembler() const { return assembler_; }
  const SparseMatrix& transformation() const { return transformation_; }
  const Eigen::VectorXd& prescribed() const { return prescribed_; }

  // Free-free flow matrix for the given projected topology column; the Dirichlet
  // contribution goes to `rhs`.
  SparseMatrix assemble(const Eigen::VectorXd& topo, Eigen::VectorXd* rhs = nullptr) const {
    if (topo.size() != assembler_.num_elements()) throw ContractViolation("pressure: topology column size mismatch");
    return assembler_.assemble([&](int e) { return element_flow_matrix(element_, topo[e], params_); },
                               rhs ? &prescribed_ : nullptr, rhs);
  }

  PressureState solve(const Eigen::VectorXd& topo, SpdSolver& solver) const {
    Eigen::VectorXd rhs;
    const SparseMatrix a = assemble(topo, &rhs);
    solver.factorize(a);
    PressureState st;
    st.pressure = prescribed_;
    assembler_.scatter(solver.solve(rhs), st.pressure);
    st.loads = -(transformation_ * st.pressure);
    return st;
  }

  // Solves A_ff x_f = rhs_f with a factorization left by solve(); x is zero on
  // Dirichlet nodes.
  Eigen::VectorXd solve_adjoint(const SpdSolver& solver, const Eigen::VectorXd& rhs_full) const {
    return assembler_.extend(solver.solve(assembler_.restrict(rhs_full)));
  }

 private:
  static std::vector<char> dirichlet_mask(const StructuredMesh& mesh, const BoundaryConditions& bcs) {
    std::vector<char> mask(static_cast<std::size_t>(mesh.num_pressure_dofs()), 0);
    for (const auto& bc : bcs.pressure_dirichlet) mask[static_cast<std::size_t>(bc.first)] = 1;
    return mask;
  }

  FlowParams params_;
  FlowElement element_;
  ReducedAssembler<4> assembler_;
  Eigen::VectorXd prescribed_;
  SparseMatrix transformation_;
};

}  // namespace pneumo
