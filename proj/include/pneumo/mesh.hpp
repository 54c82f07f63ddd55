#pragma once

// Structured rectangular grids of bilinear quads, boundary-condition sets and
// passive masks for the pneumatic mechanism benchmarks.
//
// Numbering is column-major. With column index i in [0, nelx] along x and row
// index j in [0, nely] along y (bottom to top):
//   node(i, j)    = i * (nely + 1) + j
//   element(i, j) = i * nely + j
// Element nodes run counterclockwise from the bottom-left corner. Node n owns
// displacement dofs 2n (x) and 2n+1 (y) and pressure dof n.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pneumo/errors.hpp"

namespace pneumo {

class StructuredMesh {
 public:
  StructuredMesh(int nelx, int nely, double lx, double ly, double thickness)
      : nelx_(nelx), nely_(nely), lx_(lx), ly_(ly), thickness_(thickness) {
    if (nelx <= 0 || nely <= 0) throw ConfigError("mesh: element counts must be positive");
    if (!(lx > 0.0) || !(ly > 0.0) || !(thickness > 0.0))
      throw ConfigError("mesh: lengths and thickness must be positive");
    connectivity_.reserve(static_cast<std::size_t>(num_elements()));
    for (int i = 0; i < nelx_; ++i)
      for (int j = 0; j < nely_; ++j)
        connectivity_.push_back({node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)});
  }

  int nelx() const { return nelx_; }
  int nely() const { return nely_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double thickness() const { return thickness_; }
  double dx() const { return lx_ / nelx_; }
  double dy() const { return ly_ / nely_; }

  int num_elements() const { return nelx_ * nely_; }
  int num_nodes() const { return (nelx_ + 1) * (nely_ + 1); }
  int num_displacement_dofs() const { return 2 * num_nodes(); }
  int num_pressure_dofs() const { return num_nodes(); }

  int node(int i, int j) const { return i * (nely_ + 1) + j; }
  int element(int i, int j) const { return i * nely_ + j; }
  int node_column(int n) const { return n / (nely_ + 1); }
  int node_row(int n) const { return n % (nely_ + 1); }
  int element_column(int e) const { return e / nely_; }
  int element_row(int e) const { return e % nely_; }

  const std::array<int, 4>& element_nodes(int e) const { return connectivity_[static_cast<std::size_t>(e)]; }
  const std::vector<std::array<int, 4>>& connectivity() const { return connectivity_; }

  std::array<int, 8> element_displacement_dofs(int e) const {
    const auto& n = element_nodes(e);
    return {2 * n[0], 2 * n[0] + 1, 2 * n[1], 2 * n[1] + 1,
            2 * n[2], 2 * n[2] + 1, 2 * n[3], 2 * n[3] + 1};
  }

  Eigen::Vector2d node_coordinates(int n) const {
    return {node_column(n) * dx(), node_row(n) * dy()};
  }
  Eigen::Vector2d element_centroid(int e) const {
    return {(element_column(e) + 0.5) * dx(), (element_row(e) + 0.5) * dy()};
  }

  double element_area() const { return dx() * dy(); }
  double element_volume() const { return element_area() * thickness_; }
  double total_volume() const { return element_volume() * num_elements(); }

 private:
  int nelx_;
  int nely_;
  double lx_;
  double ly_;
  double thickness_;
  std::vector<std::array<int, 4>> connectivity_;
};

inline StructuredMesh build_grid(int nelx, int nely, double lx, double ly, double thickness) {
  return StructuredMesh(nelx, nely, lx, ly, thickness);
}

struct BoundaryConditions {
  std::vector<int> fixed_dofs;              // sorted, unique; includes symmetry dofs
  std::vector<int> symmetry_dofs;           // roller dofs, subset of fixed_dofs
  std::vector<std::pair<int, double>> pressure_dirichlet;  // (node, Pa), sorted by node
  int output_dof = -1;
  double output_sign = 1.0;                 // u_out = output_sign * u[output_dof]
  double spring_stiffness = 0.0;            // N/m, added at output_dof

  // Sorts/dedups the dof sets and checks the invariants.
  void finalize(const StructuredMesh& mesh) {
    auto uniq = [](std::vector<int>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(symmetry_dofs);
    fixed_dofs.insert(fixed_dofs.end(), symmetry_dofs.begin(), symmetry_dofs.end());
    uniq(fixed_dofs);
    std::sort(pressure_dirichlet.begin(), pressure_dirichlet.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < pressure_dirichlet.size(); ++k)
      if (pressure_dirichlet[k].first == pressure_dirichlet[k - 1].first)
        throw ConfigError("boundary conditions: duplicate pressure node");
    for (const auto& [n, p] : pressure_dirichlet) {
      if (n < 0 || n >= mesh.num_nodes()) throw ConfigError("boundary conditions: pressure node out of range");
      if (!std::isfinite(p) || p < 0.0) throw ConfigError("boundary conditions: pressure must be finite and >= 0");
    }
    for (int d : fixed_dofs)
      if (d < 0 || d >= mesh.num_displacement_dofs()) throw ConfigError("boundary conditions: fixed dof out of range");
    if (output_dof < 0 || output_dof >= mesh.num_displacement_dofs())
      throw ConfigError("boundary conditions: output dof out of range");
    if (std::binary_search(fixed_dofs.begin(), fixed_dofs.end(), output_dof))
      throw ConfigError("boundary conditions: output dof is fixed");
    if (spring_stiffness < 0.0) throw ConfigError("boundary conditions: negative spring stiffness");
  }

  std::vector<char> fixed_mask(int ndofs) const {
    std::vector<char> mask(static_cast<std::size_t>(ndofs), 0);
    for (int d : fixed_dofs) mask[static_cast<std::size_t>(d)] = 1;
    return mask;
  }

  double max_applied_pressure() const {
    double pmax = 0.0;
    for (const auto& bc : pressure_dirichlet) pmax = std::max(pmax, bc.second);
    return pmax;
  }
};

enum class ElementTag : unsigned char { Design, ForcedSolid, ForcedVoid };

struct PassiveMask {
  std::vector<ElementTag> tags;
  // Forced-solid elements may pin their material too: index k (0-based) into the
  // candidate list. Unset means only the topology variable is pinned.
  std::vector<std::optional<int>> forced_material;

  static PassiveMask all_design(int num_elements) {
    return {std::vector<ElementTag>(static_cast<std::size_t>(num_elements), ElementTag::Design),
            std::vector<std::optional<int>>(static_cast<std::size_t>(num_elements))};
  }

  int size() const { return static_cast<int>(tags.size()); }
  ElementTag tag(int e) const { return tags[static_cast<std::size_t>(e)]; }
  bool is_design(int e) const { return tag(e) == ElementTag::Design; }
  int count(ElementTag t) const { return static_cast<int>(std::count(tags.begin(), tags.end(), t)); }
};

struct SymmetrySpec {
  bool about_bottom = false;  // mirror line y = 0
  bool about_right = false;   // mirror line x = lx
  int copies() const { return (about_bottom ? 2 : 1) * (about_right ? 2 : 1); }
};

struct Benchmark {
  std::string name;
  StructuredMesh mesh;
  BoundaryConditions bcs;
  PassiveMask mask;
  SymmetrySpec symmetry;
};

struct BenchmarkOptions {
  std::optional<int> nelx;
  std::optional<int> nely;
  double input_pressure = 1.0e5;   // 1 bar excess pressure
  double spring_stiffness = 5.0e4;
  double thickness = 0.01;
};

namespace detail {

inline int scaled_count(int nel, double fraction) {
  return std::max(1, static_cast<int>(std::lround(nel * fraction)));
}

// Marks elements with column in [i0, i1) and row in [j0, j1).
inline void tag_block(const StructuredMesh& mesh, PassiveMask& mask, int i0, int i1, int j0, int j1,
                      ElementTag tag) {
  for (int i = std::max(0, i0); i < std::min(mesh.nelx(), i1); ++i)
    for (int j = std::max(0, j0); j < std::min(mesh.nely(), j1); ++j)
      mask.tags[static_cast<std::size_t>(mesh.element(i, j))] = tag;
}

// Support pad in the top-left corner: solid block, both displacement components
// fixed along the pad's outer (domain-boundary) edges.
inline void add_support_pad(const StructuredMesh& mesh, BoundaryConditions& bcs, PassiveMask& mask,
                            int pad_x, int pad_y) {
  const int nelx = mesh.nelx();
  const int nely = mesh.nely();
  tag_block(mesh, mask, 0, pad_x, nely - pad_y, nely, ElementTag::ForcedSolid);
  for (int j = nely - pad_y; j <= nely; ++j) {
    bcs.fixed_dofs.push_back(2 * mesh.node(0, j));
    bcs.fixed_dofs.push_back(2 * mesh.node(0, j) + 1);
  }
  for (int i = 0; i <= std::min(pad_x, nelx); ++i) {
    bcs.fixed_dofs.push_back(2 * mesh.node(i, nely));
    bcs.fixed_dofs.push_back(2 * mesh.node(i, nely) + 1);
  }
}

}  // namespace detail

// Gripper: symmetric half, mirror line along the bottom edge. Pressure enters on the
// left edge; top and right edges are held at 0 Pa. The workpiece void block and the
// jaw strip sit in the bottom-right corner; the output is the y-displacement of the
// jaw's lower-right node, which carries the workpiece spring.
inline Benchmark make_gripper(const BenchmarkOptions& opt, const std::string& name = "gripper") {
  const int nelx = opt.nelx.value_or(200);
  const int nely = opt.nely.value_or(100);
  StructuredMesh mesh(nelx, nely, 0.2, 0.1, opt.thickness);
  BoundaryConditions bcs;
  PassiveMask mask = PassiveMask::all_design(mesh.num_elements());

  const int void_x = detail::scaled_count(nelx, 1.0 / 5.0);
  const int void_y = detail::scaled_count(nely, 1.0 / 5.0);
  const int jaw_y = detail::scaled_count(nely, 1.0 / 50.0);
  detail::tag_block(mesh, mask, nelx - void_x, nelx, 0, void_y, ElementTag::ForcedVoid);
  detail::tag_block(mesh, mask, nelx - void_x, nelx, void_y, void_y + jaw_y, ElementTag::ForcedSolid);
  detail::add_support_pad(mesh, bcs, mask, detail::scaled_count(nelx, 1.0 / 20.0),
                          detail::scaled_count(nely, 1.0 / 20.0));

  for (int i = 0; i <= nelx; ++i) bcs.symmetry_dofs.push_back(2 * mesh.node(i, 0) + 1);

  for (int j = 0; j <= nely; ++j) bcs.pressure_dirichlet.emplace_back(mesh.node(0, j), opt.input_pressure);
  for (int i = 1; i <= nelx; ++i) bcs.pressure_dirichlet.emplace_back(mesh.node(i, nely), 0.0);
  for (int j = 0; j < nely; ++j) bcs.pressure_dirichlet.emplace_back(mesh.node(nelx, j), 0.0);

  bcs.output_dof = 2 * mesh.node(nelx, void_y) + 1;
  bcs.spring_stiffness = opt.spring_stiffness;
  bcs.finalize(mesh);
  return {name, std::move(mesh), std::move(bcs), std::move(mask), SymmetrySpec{true, false}};
}

// Contractor: quarter of the full mechanism (the half domain of the gripper size is
// itself mirrored about x = 0.1 m). Mirror lines are the bottom and right edges.
// Pressure enters on the left edge, the top edge is held at 0 Pa. The output is
// the y-displacement of the jaw's lower node on the right mirror line.
inline Benchmark make_contractor(const BenchmarkOptions& opt) {
  const int nelx = opt.nelx.value_or(100);
  const int nely = opt.nely.value_or(100);
  StructuredMesh mesh(nelx, nely, 0.1, 0.1, opt.thickness);
  BoundaryConditions bcs;
  PassiveMask mask = PassiveMask::all_design(mesh.num_elements());

  // Output blocks are L_x/5 wide in the half domain, so L_x/10 = lx/5 here.
  const int void_x = detail::scaled_count(nelx, 1.0 / 5.0);
  const int void_y = detail::scaled_count(nely, 1.0 / 5.0);
  const int jaw_y = detail::scaled_count(nely, 1.0 / 50.0);
  detail::tag_block(mesh, mask, nelx - void_x, nelx, 0, void_y, ElementTag::ForcedVoid);
  detail::tag_block(mesh, mask, nelx - void_x, nelx, void_y, void_y + jaw_y, ElementTag::ForcedSolid);
  // Pad is L_x/20 x L_y/20 of the half domain: 0.01 m x 0.005 m.
  detail::add_support_pad(mesh, bcs, mask, detail::scaled_count(nelx, 1.0 / 10.0),
                          detail::scaled_count(nely, 1.0 / 20.0));

  for (int i = 0; i <= nelx; ++i) bcs.symmetry_dofs.push_back(2 * mesh.node(i, 0) + 1);
  for (int j = 0; j <= nely; ++j) bcs.symmetry_dofs.push_back(2 * mesh.node(nelx, j));

  for (int j = 0; j <= nely; ++j) bcs.pressure_dirichlet.emplace_back(mesh.node(0, j), opt.input_pressure);
  for (int i = 1; i <= nelx; ++i) bcs.pressure_dirichlet.emplace_back(mesh.node(i, nely), 0.0);

  bcs.output_dof = 2 * mesh.node(nelx, void_y) + 1;
  bcs.spring_stiffness = opt.spring_stiffness;
  bcs.finalize(mesh);
  return {"contractor", std::move(mesh), std::move(bcs), std::move(mask), SymmetrySpec{true, true}};
}

inline Benchmark build_benchmark(const std::string& name, const BenchmarkOptions& opt = {}) {
  if (name == "gripper") return make_gripper(opt);
  if (name == "comparison-case") return make_gripper(opt, "comparison-case");
  if (name == "contractor") return make_contractor(opt);
  throw ConfigError("unknown benchmark '" + name + "'");
}

}  // namespace pneumo
