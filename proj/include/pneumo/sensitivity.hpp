#pragma once

// Robust analysis (eroded + blueprint realizations) and adjoint gradients of the
// output displacement, the eroded strain energy and the blueprint volume
// constraints, taken all the way back to the raw design variables.

#include <future>
#include <vector>

#include <Eigen/Core>

#include "pneumo/elasticity.hpp"
#include "pneumo/errors.hpp"
#include "pneumo/fields.hpp"
#include "pneumo/material.hpp"
#include "pneumo/mesh.hpp"
#include "pneumo/pressure.hpp"

namespace pneumo {

using PinMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Raw variables the optimizer must not move: the topology variable of every
// passive element, all columns of forced-void elements and the material columns
// of forced-solid elements with a forced material.
inline PinMask pinned_entries(const PassiveMask& mask, int num_materials) {
  PinMask pinned = PinMask::Constant(mask.size(), num_materials, false);
  for (int e = 0; e < mask.size(); ++e) {
    const ElementTag tag = mask.tag(e);
    if (tag == ElementTag::Design) continue;
    pinned(e, 0) = true;
    if (tag == ElementTag::ForcedVoid || mask.forced_material[static_cast<std::size_t>(e)])
      for (int k = 1; k < num_materials; ++k) pinned(e, k) = true;
  }
  return pinned;
}

// Values the pinned raw variables are held at.
inline void apply_pins(const PassiveMask& mask, DesignField& rho) {
  const int m = static_cast<int>(rho.cols());
  for (int e = 0; e < mask.size(); ++e) {
    const ElementTag tag = mask.tag(e);
    if (tag == ElementTag::ForcedVoid) {
      rho.row(e).setZero();
    } else if (tag == ElementTag::ForcedSolid) {
      rho(e, 0) = 1.0;
      if (const auto& forced = mask.forced_material[static_cast<std::size_t>(e)])
        for (int k = 1; k < m; ++k) rho(e, k) = k <= *forced ? 1.0 : 0.0;
    }
  }
}

// Everything that does not change while the design evolves.
class MechanismProblem {
 public:
  MechanismProblem(Benchmark bench, MaterialSet mats, FlowParams flow, double filter_radius)
      : bench_(std::move(bench)),
        mats_(std::move(mats)),
        filter_(bench_.mesh, filter_radius),
        pressure_(bench_.mesh, bench_.bcs, flow),
        structure_(bench_.mesh, bench_.bcs, mats_.poisson) {
    mats_.validate();
    if (bench_.mask.size() != bench_.mesh.num_elements()) throw ConfigError("problem: passive mask size mismatch");
  }

  // Same problem with the density filter switched off.
  MechanismProblem(Benchmark bench, MaterialSet mats, FlowParams flow)
      : bench_(std::move(bench)),
        mats_(std::move(mats)),
        filter_(FilterOperator::identity(bench_.mesh.num_elements())),
        pressure_(bench_.mesh, bench_.bcs, flow),
        structure_(bench_.mesh, bench_.bcs, mats_.poisson) {
    mats_.validate();
  }

  const Benchmark& benchmark() const { return bench_; }
  const StructuredMesh& mesh() const { return bench_.mesh; }
  const BoundaryConditions& bcs() const { return bench_.bcs; }
  const PassiveMask& mask() const { return bench_.mask; }
  const MaterialSet& materials() const { return mats_; }
  int num_materials() const { return mats_.count(); }
  const FilterOperator& filter() const { return filter_; }
  const PressureModel& pressure() const { return pressure_; }
  const StructuralModel& structure() const { return structure_; }

 private:
  Benchmark bench_;
  MaterialSet mats_;
  FilterOperator filter_;
  PressureModel pressure_;
  StructuralModel structure_;
};

// Factorizations for one realization; reused by the adjoint solves.
struct RealizationWorkspace {
  SpdSolver flow{"flow matrix"};
  SpdSolver stiffness{"stiffness matrix"};
};

struct RealizationState {
  Realization which = Realization::Blueprint;
  DesignField physical;       // projected field, passive overrides applied
  DesignField dphysical;      // d physical / d filtered
  Eigen::VectorXd modulus;
  Eigen::MatrixXd dmodulus;   // dE/d physical, per column
  PressureState pressure;
  DisplacementState displacement;
};

inline RealizationState analyze(const MechanismProblem& prob, const DesignField& filtered, const ProjectionParams& proj,
                                Realization which, RealizationWorkspace& ws) {
  RealizationState st;
  st.which = which;
  st.physical = project(filtered, proj, which);
  st.dphysical = projection_derivative(filtered, proj, which);
  apply_passive(prob.mask(), st.physical, &st.dphysical);
  interpolate_field(st.physical, prob.materials(), st.modulus, st.dmodulus);
  st.pressure = prob.pressure().solve(st.physical.col(0), ws.flow);
  st.displacement = prob.structure().solve(st.modulus, st.pressure.loads, ws.stiffness);
  return st;
}

namespace detail {

template <int N>
inline Eigen::Matrix<double, N, 1> gather(const Eigen::VectorXd& v, const std::array<int, N>& dofs) {
  Eigen::Matrix<double, N, 1> out;
  for (int a = 0; a < N; ++a) out[a] = v[dofs[static_cast<std::size_t>(a)]];
  return out;
}

// Generic adjoint gradient with respect to the physical field of a quantity whose
// stiffness part is  stiff_weight * dE * (x_e^T k0 u_e)  and whose load part is
// mu_e^T dA_e p_e  on the topology column.
inline DesignField assemble_gradient(const MechanismProblem& prob, const RealizationState& st,
                                     const Eigen::VectorXd& left, double stiff_weight, const Eigen::VectorXd& mu) {
  const StructuredMesh& mesh = prob.mesh();
  const int m = prob.num_materials();
  const auto& k0 = prob.structure().unit_stiffness();
  const auto& fe = prob.pressure().element();
  const auto& fp = prob.pressure().params();
  DesignField grad(mesh.num_elements(), m);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto udofs = mesh.element_displacement_dofs(e);
    const Eigen::Matrix<double, 8, 1> ue = gather<8>(st.displacement.displacement, udofs);
    const Eigen::Matrix<double, 8, 1> le = gather<8>(left, udofs);
    const double energy = le.dot(k0 * ue);
    for (int k = 0; k < m; ++k) grad(e, k) = stiff_weight * st.dmodulus(e, k) * energy;
    const auto& nodes = mesh.element_nodes(e);
    const Eigen::Vector4d pe = gather<4>(st.pressure.pressure, nodes);
    const Eigen::Vector4d me = gather<4>(mu, nodes);
    grad(e, 0) += me.dot(flow_matrix_derivative(fe, st.physical(e, 0), fp) * pe);
  }
  return grad;
}

}  // namespace detail

// d u_out / d physical:  -w^T dK u + mu^T dA p,  w = K^-1 l,  mu = A^-1 T^T w.
inline DesignField objective_gradient(const MechanismProblem& prob, const RealizationState& st,
                                      const RealizationWorkspace& ws) {
  const Eigen::VectorXd w = prob.structure().solve_adjoint(ws.stiffness, prob.structure().output_selector());
  const Eigen::VectorXd mu = prob.pressure().solve_adjoint(ws.flow, prob.pressure().transformation().transpose() * w);
  return detail::assemble_gradient(prob, st, w, -1.0, mu);
}

// d (SE / SE*) / d physical:  [-1/2 u^T dK u + nu^T dA p] / SE*,  nu = A^-1 T^T u.
inline DesignField strain_energy_gradient(const MechanismProblem& prob, const RealizationState& st,
                                          const RealizationWorkspace& ws, double se_star) {
  if (!(se_star > 0.0)) throw ConfigError("strain energy gradient: SE* must be positive");
  const Eigen::VectorXd& u = st.displacement.displacement;
  const Eigen::VectorXd nu = prob.pressure().solve_adjoint(ws.flow, prob.pressure().transformation().transpose() * u);
  return detail::assemble_gradient(prob, st, u, -0.5, nu) / se_star;
}

// Blueprint volume constraints: column k limited to limits[k] of the total volume.
inline std::vector<double> volume_constraints(const StructuredMesh& mesh, const DesignField& physical,
                                              const std::vector<double>& limits) {
  if (static_cast<int>(limits.size()) != physical.cols()) throw ContractViolation("volume: limit count mismatch");
  std::vector<double> g(limits.size());
  for (std::size_t k = 0; k < limits.size(); ++k)
    g[k] = mesh.element_volume() * physical.col(static_cast<Eigen::Index>(k)).sum() / (mesh.total_volume() * limits[k]) - 1.0;
  return g;
}

inline std::vector<DesignField> volume_gradients(const StructuredMesh& mesh, const DesignField& dphysical,
                                                 const FilterOperator& filter, const std::vector<double>& limits) {
  if (static_cast<int>(limits.size()) != dphysical.cols()) throw ContractViolation("volume: limit count mismatch");
  std::vector<DesignField> out;
  for (std::size_t k = 0; k < limits.size(); ++k) {
    DesignField d = DesignField::Zero(dphysical.rows(), dphysical.cols());
    d.col(static_cast<Eigen::Index>(k)).setConstant(mesh.element_volume() / (mesh.total_volume() * limits[k]));
    out.push_back(chain_rule(d, dphysical, filter));
  }
  return out;
}

inline void zero_pinned(DesignField& grad, const PinMask& pinned) {
  grad = pinned.select(DesignField::Zero(grad.rows(), grad.cols()), grad);
}

struct RobustWorkspace {
  RealizationWorkspace eroded;
  RealizationWorkspace blueprint;
};

struct RobustEvaluation {
  RealizationState eroded;
  RealizationState blueprint;
  std::vector<double> volume;  // g_k = V_k / (V limit_k) - 1 on the blueprint field

  // Gradients with respect to the raw design variables, pinned entries zeroed.
  DesignField d_output_eroded;
  DesignField d_output_blueprint;
  DesignField d_strain_energy;   // of SE^e itself (SE* = 1)
  std::vector<DesignField> d_volume;

  double objective() const { return std::max(eroded.displacement.output, blueprint.displacement.output); }
  double strain_energy() const { return eroded.displacement.strain_energy; }
};

// Runs both realizations for raw design `rho`. Gradients are optional so the
// same routine serves as the finite-difference oracle's forward model.
inline RobustEvaluation evaluate(const MechanismProblem& prob, const DesignField& rho, const ProjectionParams& proj,
                                 const std::vector<double>& volume_limits, RobustWorkspace& ws, bool gradients,
                                 bool parallel = false) {
  if (rho.rows() != prob.mesh().num_elements() || rho.cols() != prob.num_materials())
    throw ContractViolation("evaluate: design field has wrong shape");
  const DesignField filtered = prob.filter().apply(rho);
  RobustEvaluation ev;
  auto run = [&](Realization which, RealizationWorkspace& rws, RealizationState& out, DesignField& dout,
                 DesignField* dse) {
    out = analyze(prob, filtered, proj, which, rws);
    if (!gradients) return;
    dout = chain_rule(objective_gradient(prob, out, rws), out.dphysical, prob.filter());
    if (dse) *dse = chain_rule(strain_energy_gradient(prob, out, rws, 1.0), out.dphysical, prob.filter());
  };
  if (parallel) {
    auto fut = std::async(std::launch::async, [&] {
      run(Realization::Eroded, ws.eroded, ev.eroded, ev.d_output_eroded, &ev.d_strain_energy);
    });
    run(Realization::Blueprint, ws.blueprint, ev.blueprint, ev.d_output_blueprint, nullptr);
    fut.get();
  } else {
    run(Realization::Eroded, ws.eroded, ev.eroded, ev.d_output_eroded, &ev.d_strain_energy);
    run(Realization::Blueprint, ws.blueprint, ev.blueprint, ev.d_output_blueprint, nullptr);
  }
  if (!volume_limits.empty()) ev.volume = volume_constraints(prob.mesh(), ev.blueprint.physical, volume_limits);
  if (gradients) {
    const PinMask pinned = pinned_entries(prob.mask(), prob.num_materials());
    zero_pinned(ev.d_output_eroded, pinned);
    zero_pinned(ev.d_output_blueprint, pinned);
    zero_pinned(ev.d_strain_energy, pinned);
    if (!volume_limits.empty()) {
      ev.d_volume = volume_gradients(prob.mesh(), ev.blueprint.dphysical, prob.filter(), volume_limits);
      for (auto& g : ev.d_volume) zero_pinned(g, pinned);
    }
  }
  return ev;
}

}  // namespace pneumo
