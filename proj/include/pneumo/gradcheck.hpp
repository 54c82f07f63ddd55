#pragma once

// Finite-difference check of the adjoint gradients.
//
// DenseOracle re-evaluates the whole chain (filter, projection, flow, loads,
// stiffness) with dense matrices in an arbitrary scalar type and its own
// Gaussian elimination. Run in a wide type (e.g. quad precision) its central
// differences are accurate far below the double-precision noise floor, which
// the flow operator's 1e7 conductivity contrast otherwise amplifies.
//
// Only element-level constants (k0, conduction, mass, load coupling, filter
// weights) are shared with the production path, converted exactly from double.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pneumo/elasticity.hpp"
#include "pneumo/fields.hpp"
#include "pneumo/mesh.hpp"
#include "pneumo/pressure.hpp"
#include "pneumo/sensitivity.hpp"

namespace pneumo {

template <typename T>
class DenseOracle {
 public:
  struct Outputs {
    T output_eroded;
    T output_blueprint;
    T strain_energy_eroded;
  };

  explicit DenseOracle(const MechanismProblem& prob) : prob_(prob) {
    const ElementStiffness& k0 = prob.structure().unit_stiffness();
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) k0_[a][b] = T(k0(a, b));
    const FlowElement& fe = prob.pressure().element();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        cond_[a][b] = T(fe.conduction(a, b));
        mass_[a][b] = T(fe.mass(a, b));
      }
    const auto te = transformation_element(prob.mesh().dx(), prob.mesh().dy(), prob.mesh().thickness());
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 4; ++b) te_[a][b] = T(te(a, b));
    const auto& w = prob.filter().weights();
    for (int r = 0; r < w.outerSize(); ++r)
      for (FilterOperator::Matrix::InnerIterator it(w, r); it; ++it)
        filter_.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), T(it.value())});
  }

  // rho is column-major nel x m.
  Outputs evaluate(const std::vector<T>& rho, const ProjectionParams& proj) const {
    const int nel = prob_.mesh().num_elements();
    const int m = prob_.num_materials();
    std::vector<T> filtered(rho.size(), T(0));
    for (int k = 0; k < m; ++k)
      for (const auto& f : filter_)
        filtered[static_cast<std::size_t>(k * nel + f.row)] += f.value * rho[static_cast<std::size_t>(k * nel + f.col)];
    Outputs out;
    const auto eroded = realization(filtered, T(proj.beta), T(proj.eta(Realization::Eroded)));
    const auto blueprint = realization(filtered, T(proj.beta), T(proj.eta(Realization::Blueprint)));
    out.output_eroded = eroded.first;
    out.strain_energy_eroded = eroded.second;
    out.output_blueprint = blueprint.first;
    return out;
  }

  static T heaviside(const T& x, const T& beta, const T& eta) {
    using std::tanh;
    const T tbe = tanh(beta * eta);
    return (tbe + tanh(beta * (x - eta))) / (tbe + tanh(beta * (T(1) - eta)));
  }

 private:
  struct Entry {
    int row;
    int col;
    T value;
  };

  T modulus(const std::vector<T>& row) const {
    using std::pow;
    const MaterialSet& mats = prob_.materials();
    const int m = mats.count();
    const T p(mats.penal);
    T inner(mats.youngs[static_cast<std::size_t>(m - 1)]);
    for (int k = m - 2; k >= 0; --k) {
      const T w = pow(row[static_cast<std::size_t>(k + 1)], p);
      inner = (T(1) - w) * T(mats.youngs[static_cast<std::size_t>(k)]) + w * inner;
    }
    const T w0 = pow(row[0], p);
    return (T(1) - w0) * T(mats.void_modulus()) + w0 * inner;
  }

  // Gaussian elimination with partial pivoting on a dense row-major system.
  static std::vector<T> solve(std::vector<T> a, std::vector<T> b) {
    using std::abs;
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (abs(a[r * n + c]) > abs(a[piv * n + c])) piv = r;
      if (a[piv * n + c] == T(0)) throw NumericalError("oracle: singular system");
      if (piv != c) {
        for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
        std::swap(b[c], b[piv]);
      }
      for (std::size_t r = c + 1; r < n; ++r) {
        const T f = a[r * n + c] / a[c * n + c];
        if (f == T(0)) continue;
        for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
        b[r] -= f * b[c];
      }
    }
    std::vector<T> x(n);
    for (std::size_t r = n; r-- > 0;) {
      T s = b[r];
      for (std::size_t k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
      x[r] = s / a[r * n + r];
    }
    return x;
  }

  // Returns (u_out, strain energy) of one projected realization.
  std::pair<T, T> realization(const std::vector<T>& filtered, const T& beta, const T& eta) const {
    const StructuredMesh& mesh = prob_.mesh();
    const PassiveMask& mask = prob_.mask();
    const BoundaryConditions& bcs = prob_.bcs();
    const FlowParams& fp = prob_.pressure().params();
    const int nel = mesh.num_elements();
    const int m = prob_.num_materials();
    const int nn = mesh.num_nodes();
    const int nd = mesh.num_displacement_dofs();

    std::vector<T> topo(static_cast<std::size_t>(nel));
    std::vector<T> young(static_cast<std::size_t>(nel));
    std::vector<T> row(static_cast<std::size_t>(m));
    for (int e = 0; e < nel; ++e) {
      for (int k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = heaviside(filtered[static_cast<std::size_t>(k * nel + e)], beta, eta);
      const ElementTag tag = mask.tag(e);
      if (tag != ElementTag::Design) {
        row[0] = tag == ElementTag::ForcedSolid ? T(1) : T(0);
        const auto& forced = mask.forced_material[static_cast<std::size_t>(e)];
        if (tag == ElementTag::ForcedSolid && forced)
          for (int k = 1; k < m; ++k) row[static_cast<std::size_t>(k)] = k <= *forced ? T(1) : T(0);
      }
      topo[static_cast<std::size_t>(e)] = row[0];
      young[static_cast<std::size_t>(e)] = modulus(row);
    }

    // Flow: A p = 0 with Dirichlet nodes eliminated.
    std::vector<T> prescribed(static_cast<std::size_t>(nn), T(0));
    std::vector<int> pfree(static_cast<std::size_t>(nn), 0);
    for (const auto& [node, value] : bcs.pressure_dirichlet) {
      prescribed[static_cast<std::size_t>(node)] = T(value);
      pfree[static_cast<std::size_t>(node)] = -1;
    }
    const std::vector<int> pmap = number_free(pfree);
    const int npf = *std::max_element(pmap.begin(), pmap.end()) + 1;
    std::vector<T> a(static_cast<std::size_t>(npf) * npf, T(0)), rhs(static_cast<std::size_t>(npf), T(0));
    const T kv(fp.void_flow), eps(fp.contrast), ds(fp.drainage);
    for (int e = 0; e < nel; ++e) {
      const T r = topo[static_cast<std::size_t>(e)];
      const T kc = kv * (T(1) - (T(1) - eps) * heaviside(r, T(fp.beta_flow), T(fp.eta_flow)));
      const T dc = ds * heaviside(r, T(fp.beta_drain), T(fp.eta_drain));
      const auto& nodes = mesh.element_nodes(e);
      for (int i = 0; i < 4; ++i) {
        const int fi = pmap[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])];
        if (fi < 0) continue;
        for (int j = 0; j < 4; ++j) {
          const int nj = nodes[static_cast<std::size_t>(j)];
          const T v = kc * cond_[i][j] + dc * mass_[i][j];
          const int fj = pmap[static_cast<std::size_t>(nj)];
          if (fj < 0)
            rhs[static_cast<std::size_t>(fi)] -= v * prescribed[static_cast<std::size_t>(nj)];
          else
            a[static_cast<std::size_t>(fi) * npf + fj] += v;
        }
      }
    }
    const std::vector<T> pf = solve(std::move(a), std::move(rhs));
    std::vector<T> p = prescribed;
    for (int n = 0; n < nn; ++n)
      if (pmap[static_cast<std::size_t>(n)] >= 0) p[static_cast<std::size_t>(n)] = pf[static_cast<std::size_t>(pmap[static_cast<std::size_t>(n)])];

    // Structure: K u = -T p, spring on the output dof.
    std::vector<int> ufree(static_cast<std::size_t>(nd), 0);
    for (int d : bcs.fixed_dofs) ufree[static_cast<std::size_t>(d)] = -1;
    const std::vector<int> umap = number_free(ufree);
    const int nuf = *std::max_element(umap.begin(), umap.end()) + 1;
    std::vector<T> k(static_cast<std::size_t>(nuf) * nuf, T(0)), f(static_cast<std::size_t>(nuf), T(0));
    for (int e = 0; e < nel; ++e) {
      const auto dofs = mesh.element_displacement_dofs(e);
      const auto& nodes = mesh.element_nodes(e);
      const T ee = young[static_cast<std::size_t>(e)];
      for (int i = 0; i < 8; ++i) {
        const int fi = umap[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])];
        if (fi < 0) continue;
        for (int j = 0; j < 4; ++j) f[static_cast<std::size_t>(fi)] -= te_[i][j] * p[static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)])];
        for (int j = 0; j < 8; ++j) {
          const int fj = umap[static_cast<std::size_t>(dofs[static_cast<std::size_t>(j)])];
          if (fj >= 0) k[static_cast<std::size_t>(fi) * nuf + fj] += ee * k0_[i][j];
        }
      }
    }
    const int fo = umap[static_cast<std::size_t>(bcs.output_dof)];
    k[static_cast<std::size_t>(fo) * nuf + fo] += T(bcs.spring_stiffness);
    const std::vector<T> kk = k;
    const std::vector<T> u = solve(std::move(k), f);
    T se(0);
    for (int i = 0; i < nuf; ++i) {
      T ku(0);
      for (int j = 0; j < nuf; ++j) ku += kk[static_cast<std::size_t>(i) * nuf + j] * u[static_cast<std::size_t>(j)];
      se += u[static_cast<std::size_t>(i)] * ku;
    }
    return {T(bcs.output_sign) * u[static_cast<std::size_t>(fo)], se / T(2)};
  }

  static std::vector<int> number_free(std::vector<int> flags) {
    int next = 0;
    for (int& f : flags) f = f < 0 ? -1 : next++;
    return flags;
  }

  const MechanismProblem& prob_;
  T k0_[8][8];
  T cond_[4][4];
  T mass_[4][4];
  T te_[8][4];
  std::vector<Entry> filter_;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  int compared = 0;       // components above the magnitude floor
  int skipped = 0;        // below the floor
  std::string worst;      // description of the worst component
};

// Compares the adjoint gradients of u_out (both realizations) and of the
// eroded strain energy against central differences of the oracle. Pinned
// entries are not design variables and are left out. A component enters the
// comparison when its adjoint magnitude exceeds floor * max|g|.
template <typename T>
GradientCheckReport check_gradients(const MechanismProblem& prob, const DesignField& rho, const ProjectionParams& proj,
                                    double step = 1e-7, double floor = 1e-8) {
  RobustWorkspace ws;
  const RobustEvaluation ev = evaluate(prob, rho, proj, {}, ws, true);
  const DenseOracle<T> oracle(prob);
  const PinMask pinned = pinned_entries(prob.mask(), prob.num_materials());

  const int n = static_cast<int>(rho.size());
  std::vector<T> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = T(rho.data()[i]);
  Eigen::MatrixXd fd(n, 3);
  const T h(step);
  for (int i = 0; i < n; ++i) {
    if (pinned.data()[i]) continue;
    std::vector<T> xp = x, xm = x;
    xp[static_cast<std::size_t>(i)] += h;
    xm[static_cast<std::size_t>(i)] -= h;
    const auto op = oracle.evaluate(xp, proj);
    const auto om = oracle.evaluate(xm, proj);
    const T two_h = T(2) * h;
    fd(i, 0) = static_cast<double>((op.output_eroded - om.output_eroded) / two_h);
    fd(i, 1) = static_cast<double>((op.output_blueprint - om.output_blueprint) / two_h);
    fd(i, 2) = static_cast<double>((op.strain_energy_eroded - om.strain_energy_eroded) / two_h);
  }

  GradientCheckReport rep;
  const DesignField* adj[3] = {&ev.d_output_eroded, &ev.d_output_blueprint, &ev.d_strain_energy};
  const char* names[3] = {"u_out eroded", "u_out blueprint", "SE eroded"};
  for (int q = 0; q < 3; ++q) {
    const double scale = adj[q]->cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (pinned.data()[i]) continue;
      const double a = adj[q]->data()[i];
      if (std::abs(a) <= floor * scale) {
        ++rep.skipped;
        continue;
      }
      ++rep.compared;
      const double err = std::abs(a - fd(i, q)) / std::abs(a);
      if (err > rep.max_relative_error) {
        rep.max_relative_error = err;
        std::ostringstream os;
        os << names[q] << " entry " << i << ": adjoint " << a << ", fd " << fd(i, q);
        rep.worst = os.str();
      }
    }
  }
  return rep;
}

struct GradientCheckCase {
  Benchmark benchmark;
  MaterialSet materials;
  double filter_radius;
  ProjectionParams projection;
  DesignField rho;
};

// A randomized 6 x 4 check problem: random domain size, material count and
// moduli, projection and filter settings, passive elements and output port.
// Raw densities are uniform in [0.2, 0.8].
inline GradientCheckCase random_gradient_case(std::uint64_t seed, int num_materials) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const int nelx = 6, nely = 4;
  StructuredMesh mesh(nelx, nely, uniform(0.03, 0.3), uniform(0.03, 0.2), uniform(0.005, 0.02));
  BoundaryConditions bcs;
  PassiveMask mask = PassiveMask::all_design(mesh.num_elements());

  for (int j = 0; j <= nely; ++j) bcs.pressure_dirichlet.emplace_back(mesh.node(0, j), uniform(0.5e5, 2e5));
  for (int i = 1; i <= nelx; ++i) bcs.pressure_dirichlet.emplace_back(mesh.node(i, nely), 0.0);
  for (int j = nely - 1; j <= nely; ++j) {
    bcs.fixed_dofs.push_back(2 * mesh.node(0, j));
    bcs.fixed_dofs.push_back(2 * mesh.node(0, j) + 1);
  }
  for (int i = 0; i <= nelx; ++i) bcs.symmetry_dofs.push_back(2 * mesh.node(i, 0) + 1);
  const int port = 1 + static_cast<int>(rng() % 3);
  bcs.output_dof = 2 * mesh.node(nelx, port) + static_cast<int>(rng() % 2);
  bcs.output_sign = rng() % 2 ? 1.0 : -1.0;
  bcs.spring_stiffness = uniform(1e4, 1e5);
  bcs.finalize(mesh);

  mask.tags[static_cast<std::size_t>(mesh.element(nelx - 1, 0))] = ElementTag::ForcedVoid;
  const int solid = mesh.element(0, nely - 1);
  mask.tags[static_cast<std::size_t>(solid)] = ElementTag::ForcedSolid;
  if (num_materials > 1 && rng() % 2) mask.forced_material[static_cast<std::size_t>(solid)] = static_cast<int>(rng() % num_materials);

  MaterialSet mats;
  mats.youngs.clear();
  double e = std::pow(10.0, uniform(6.0, 8.0));
  for (int k = 0; k < num_materials; ++k) {
    mats.youngs.push_back(e);
    e *= uniform(2.0, 10.0);
  }
  mats.poisson = uniform(0.2, 0.45);
  mats.thickness = mesh.thickness();

  ProjectionParams proj{std::pow(2.0, static_cast<double>(rng() % 4)), uniform(0.01, 0.15)};
  const double edge = std::min(mesh.dx(), mesh.dy());
  const double radius = uniform(1.2, 2.5) * edge;

  DesignField rho(mesh.num_elements(), num_materials);
  for (Eigen::Index i = 0; i < rho.size(); ++i) rho.data()[i] = uniform(0.2, 0.8);
  apply_pins(mask, rho);
  return {Benchmark{"random", std::move(mesh), std::move(bcs), std::move(mask), SymmetrySpec{true, false}}, mats,
          radius, proj, rho};
}

// Runs `trials` random cases cycling m over {1, 2, 3}; returns the worst report.
template <typename T>
GradientCheckReport random_gradient_check(std::uint64_t seed, int trials) {
  GradientCheckReport worst;
  for (int t = 0; t < trials; ++t) {
    GradientCheckCase c = random_gradient_case(seed + static_cast<std::uint64_t>(t), 1 + t % 3);
    const double edge = std::min(c.benchmark.mesh.dx(), c.benchmark.mesh.dy());
    const MechanismProblem prob(std::move(c.benchmark), c.materials, FlowParams::standard(edge), c.filter_radius);
    const GradientCheckReport rep = check_gradients<T>(prob, c.rho, c.projection);
    worst.compared += rep.compared;
    worst.skipped += rep.skipped;
    if (rep.max_relative_error >= worst.max_relative_error) {
      worst.max_relative_error = rep.max_relative_error;
      worst.worst = "trial " + std::to_string(t) + " (m=" + std::to_string(1 + t % 3) + "): " + rep.worst;
    }
  }
  return worst;
}

}  // namespace pneumo
