#pragma once

// Extended SIMP: nested power-law interpolation over m candidate materials.
//
//   E = (1 - r0^p) Ev + r0^p B0
//   B_k = (1 - r_{k+1}^p) E_k + r_{k+1}^p B_{k+1},   B_{m-1} = E_{m-1}
//
// r0 is the topology variable; r1.. select among candidates stored in
// ascending stiffness order.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pneumo/errors.hpp"

namespace pneumo {

struct MaterialSet {
  std::vector<double> youngs;  // N/m^2, ascending
  double penal = 3.0;
  double poisson = 0.4;
  double thickness = 0.01;     // m

  int count() const { return static_cast<int>(youngs.size()); }
  double void_modulus() const { return 1e-6 * *std::min_element(youngs.begin(), youngs.end()); }

  void validate() const {
    if (youngs.empty()) throw ConfigError("materials: at least one candidate modulus required");
    for (double e : youngs)
      if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("materials: moduli must be positive");
    if (!std::is_sorted(youngs.begin(), youngs.end()))
      throw ConfigError("materials: candidate moduli must be listed in ascending order");
    if (!(penal >= 1.0)) throw ConfigError("materials: penal must be >= 1");
    if (!(poisson >= 0.0 && poisson < 0.5)) throw ConfigError("materials: poisson ratio must lie in [0, 0.5)");
    if (!(thickness > 0.0)) throw ConfigError("materials: thickness must be positive");
  }
};

inline double interpolate(std::span<const double> row, const MaterialSet& mats) {
  const int m = mats.count();
  if (static_cast<int>(row.size()) != m) throw ContractViolation("interpolate: row length differs from material count");
  const double p = mats.penal;
  double inner = mats.youngs[static_cast<std::size_t>(m - 1)];
  for (int k = m - 2; k >= 0; --k) {
    const double w = std::pow(row[static_cast<std::size_t>(k + 1)], p);
    inner = (1.0 - w) * mats.youngs[static_cast<std::size_t>(k)] + w * inner;
  }
  const double w0 = std::pow(row[0], p);
  return (1.0 - w0) * mats.void_modulus() + w0 * inner;
}

// dE/dr_j = (prod_{i<j} r_i^p) * p r_j^(p-1) * (B_j - E_{j-1}),  E_{-1} := Ev.
inline void interpolate_gradient(std::span<const double> row, const MaterialSet& mats, std::span<double> out) {
  const int m = mats.count();
  if (static_cast<int>(row.size()) != m || static_cast<int>(out.size()) != m)
    throw ContractViolation("interpolate_gradient: row length differs from material count");
  const double p = mats.penal;
  std::vector<double> inner(static_cast<std::size_t>(m));  // B_k
  inner[static_cast<std::size_t>(m - 1)] = mats.youngs[static_cast<std::size_t>(m - 1)];
  for (int k = m - 2; k >= 0; --k) {
    const double w = std::pow(row[static_cast<std::size_t>(k + 1)], p);
    inner[static_cast<std::size_t>(k)] = (1.0 - w) * mats.youngs[static_cast<std::size_t>(k)] + w * inner[static_cast<std::size_t>(k + 1)];
  }
  double prefix = 1.0;
  for (int j = 0; j < m; ++j) {
    const double r = row[static_cast<std::size_t>(j)];
    const double lower = j == 0 ? mats.void_modulus() : mats.youngs[static_cast<std::size_t>(j - 1)];
    out[static_cast<std::size_t>(j)] = prefix * p * std::pow(r, p - 1.0) * (inner[static_cast<std::size_t>(j)] - lower);
    prefix *= std::pow(r, p);
  }
}

inline std::vector<double> interpolate_gradient(std::span<const double> row, const MaterialSet& mats) {
  std::vector<double> out(row.size());
  interpolate_gradient(row, mats, out);
  return out;
}

// Per-element moduli and their partials for a whole physical field.
inline void interpolate_field(const Eigen::MatrixXd& physical, const MaterialSet& mats, Eigen::VectorXd& modulus,
                              Eigen::MatrixXd& dmodulus) {
  const int nel = static_cast<int>(physical.rows());
  const int m = static_cast<int>(physical.cols());
  if (m != mats.count()) throw ContractViolation("interpolate_field: column count differs from material count");
  modulus.resize(nel);
  dmodulus.resize(nel, m);
  std::vector<double> row(static_cast<std::size_t>(m));
  std::vector<double> grad(static_cast<std::size_t>(m));
  for (int e = 0; e < nel; ++e) {
    for (int k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = physical(e, k);
    modulus[e] = interpolate(row, mats);
    interpolate_gradient(row, mats, grad);
    for (int k = 0; k < m; ++k) dmodulus(e, k) = grad[static_cast<std::size_t>(k)];
  }
}

}  // namespace pneumo
