#pragma once

// Plane-stress linear elasticity on the structured grid. The global stiffness is
// sum_e E_e k0 scattered by connectivity, plus the workpiece spring on the output
// dof; support dofs are eliminated.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pneumo/element.hpp"
#include "pneumo/errors.hpp"
#include "pneumo/material.hpp"
#include "pneumo/mesh.hpp"
#include "pneumo/sparse.hpp"

namespace pneumo {

using ElementStiffness = Eigen::Matrix<double, 8, 8>;

// Unit-modulus plane-stress stiffness of a dx x dy rectangle.
inline ElementStiffness element_stiffness_unit(double dx, double dy, double poisson, double thickness) {
  Eigen::Matrix3d d;
  d << 1.0, poisson, 0.0,
       poisson, 1.0, 0.0,
       0.0, 0.0, 0.5 * (1.0 - poisson);
  d /= 1.0 - poisson * poisson;
  ElementStiffness k = ElementStiffness::Zero();
  for (const auto& q : gauss_points(dx, dy)) {
    Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
    for (int a = 0; a < 4; ++a) {
      b(0, 2 * a) = q.grad(0, a);
      b(1, 2 * a + 1) = q.grad(1, a);
      b(2, 2 * a) = q.grad(1, a);
      b(2, 2 * a + 1) = q.grad(0, a);
    }
    k += thickness * q.weight * b.transpose() * d * b;
  }
  return k;
}

inline ElementStiffness element_stiffness_unit(const StructuredMesh& mesh, double poisson) {
  return element_stiffness_unit(mesh.dx(), mesh.dy(), poisson, mesh.thickness());
}

struct DisplacementState {
  Eigen::VectorXd displacement;  // full, zero on supports
  double output = 0.0;           // u_out = sign * u[output_dof]
  double strain_energy = 0.0;    // 0.5 u^T K u, spring included
};

class StructuralModel {
 public:
  StructuralModel(const StructuredMesh& mesh, const BoundaryConditions& bcs, double poisson)
      : unit_(element_stiffness_unit(mesh, poisson)),
        assembler_(element_dofs(mesh), mesh.num_displacement_dofs(), bcs.fixed_mask(mesh.num_displacement_dofs())),
        output_dof_(bcs.output_dof),
        output_sign_(bcs.output_sign),
        spring_(bcs.spring_stiffness) {
    const int fo = assembler_.free_index(output_dof_);
    if (fo < 0) throw ConfigError("elasticity: output dof is fixed");
    // Locate the output diagonal in the pattern once.
    const SparseMatrix probe = assembler_.assemble([](int) { return ElementStiffness::Zero().eval(); });
    for (SparseMatrix::InnerIterator it(probe, fo); it; ++it)
      if (it.row() == fo) spring_slot_ = static_cast<int>(&it.valueRef() - probe.valuePtr());
    if (spring_slot_ < 0) throw ContractViolation("elasticity: output dof missing from pattern");
  }

  const ElementStiffness& unit_stiffness() const { return unit_; }
  const ReducedAssembler<8>& assembler() const { return assembler_; }
  int output_dof() const { return output_dof_; }
  double spring_stiffness() const { return spring_; }

  // Output selector l (full length): output_sign at the output dof.
  Eigen::VectorXd output_selector() const {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(assembler_.num_dofs());
    l[output_dof_] = output_sign_;
    return l;
  }

  SparseMatrix assemble(const Eigen::VectorXd& modulus, bool with_spring = true) const {
    if (modulus.size() != assembler_.num_elements()) throw ContractViolation("elasticity: modulus vector size mismatch");
    SparseMatrix k = assembler_.assemble([&](int e) { return (modulus[e] * unit_).eval(); });
    if (with_spring) k.valuePtr()[spring_slot_] += spring_;
    return k;
  }

  DisplacementState solve(const Eigen::VectorXd& modulus, const Eigen::VectorXd& loads, SpdSolver& solver) const {
    if (loads.size() != assembler_.num_dofs()) throw ContractViolation("elasticity: load vector size mismatch");
    const SparseMatrix k = assemble(modulus);
    solver.factorize(k);
    const Eigen::VectorXd ff = assembler_.restrict(loads);
    const Eigen::VectorXd uf = solver.solve(ff);
    DisplacementState st;
    st.displacement = assembler_.extend(uf);
    st.output = output_sign_ * st.displacement[output_dof_];
    st.strain_energy = 0.5 * uf.dot(k * uf);
    return st;
  }

  Eigen::VectorXd solve_adjoint(const SpdSolver& solver, const Eigen::VectorXd& rhs_full) const {
    return assembler_.extend(solver.solve(assembler_.restrict(rhs_full)));
  }

 private:
  static std::vector<std::array<int, 8>> element_dofs(const StructuredMesh& mesh) {
    std::vector<std::array<int, 8>> out;
    out.reserve(static_cast<std::size_t>(mesh.num_elements()));
    for (int e = 0; e < mesh.num_elements(); ++e) out.push_back(mesh.element_displacement_dofs(e));
    return out;
  }

  ElementStiffness unit_;
  ReducedAssembler<8> assembler_;
  int output_dof_;
  double output_sign_;
  double spring_;
  int spring_slot_ = -1;
};

}  // namespace pneumo
