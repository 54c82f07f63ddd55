#pragma once

// Design variables, density filter and smoothed Heaviside projection.
//
// A design field is an Nel x m matrix: column 0 holds the topology variable,
// columns 1..m-1 the material variables. The same filter acts on every column.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pneumo/errors.hpp"
#include "pneumo/mesh.hpp"

namespace pneumo {

using DesignField = Eigen::MatrixXd;

enum class Realization { Eroded, Blueprint };

inline const char* to_string(Realization r) { return r == Realization::Eroded ? "eroded" : "blueprint"; }

// Smoothed Heaviside used for projection and for the flow/drainage coefficients.
inline double heaviside(double x, double beta, double eta) {
  const double tbe = std::tanh(beta * eta);
  return (tbe + std::tanh(beta * (x - eta))) / (tbe + std::tanh(beta * (1.0 - eta)));
}

inline double heaviside_derivative(double x, double beta, double eta) {
  const double sech = 1.0 / std::cosh(beta * (x - eta));  // 1 - tanh^2 cancels in the tails
  return beta * sech * sech / (std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta)));
}

struct BetaSchedule {
  double initial = 1.0;
  int period = 50;
  double cap = 128.0;

  // Iterations are 1-based: the first `period` iterations use `initial`.
  double at(int iteration) const {
    double beta = initial;
    for (int k = 0; k < (iteration - 1) / period && beta < cap; ++k) beta *= 2.0;
    return std::min(beta, cap);
  }
};

struct ProjectionParams {
  double beta = 1.0;
  double delta_eta = 0.0;

  double eta(Realization r) const { return r == Realization::Blueprint ? 0.5 : 0.5 + delta_eta; }

  void validate() const {
    if (!(beta >= 1.0)) throw ConfigError("projection: beta must be >= 1");
    if (!(delta_eta >= 0.0 && delta_eta <= 0.5)) throw ConfigError("projection: delta_eta must lie in [0, 0.5]");
    if (!(eta(Realization::Eroded) < 1.0)) throw ConfigError("projection: eroded threshold must be < 1");
  }
};

// Row-normalized linear hat filter on element centroids. Rows are renormalized at
// the domain boundary (no padding).
class FilterOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  FilterOperator(const StructuredMesh& mesh, double radius) : radius_(radius) {
    if (!(radius > 0.0)) throw ConfigError("filter: radius must be positive");
    const int nel = mesh.num_elements();
    const int reach_x = static_cast<int>(std::ceil(radius / mesh.dx()));
    const int reach_y = static_cast<int>(std::ceil(radius / mesh.dy()));
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nel) * static_cast<std::size_t>((2 * reach_x + 1) * (2 * reach_y + 1)));
    std::vector<Eigen::Triplet<double>> row;
    for (int e = 0; e < nel; ++e) {
      const int ie = mesh.element_column(e);
      const int je = mesh.element_row(e);
      const Eigen::Vector2d ce = mesh.element_centroid(e);
      row.clear();
      double sum = 0.0;
      for (int i = std::max(0, ie - reach_x); i <= std::min(mesh.nelx() - 1, ie + reach_x); ++i) {
        for (int j = std::max(0, je - reach_y); j <= std::min(mesh.nely() - 1, je + reach_y); ++j) {
          const int f = mesh.element(i, j);
          const double w = std::max(0.0, 1.0 - (mesh.element_centroid(f) - ce).norm() / radius);
          if (w <= 0.0) continue;
          const double vw = mesh.element_volume() * w;
          row.emplace_back(e, f, vw);
          sum += vw;
        }
      }
      for (const auto& t : row) triplets.emplace_back(t.row(), t.col(), t.value() / sum);
    }
    weights_.resize(nel, nel);
    weights_.setFromTriplets(triplets.begin(), triplets.end());
    weights_.makeCompressed();
    transpose_ = weights_.transpose();
  }

  // Identity filter, used where a test or caller wants filtering switched off.
  static FilterOperator identity(int num_elements) { return FilterOperator(num_elements); }

  double radius() const { return radius_; }
  int size() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }

  DesignField apply(const DesignField& field) const {
    if (field.rows() != weights_.cols()) throw ContractViolation("filter: field has wrong number of rows");
    return weights_ * field;
  }

  // W^T g, column by column.
  DesignField apply_transpose(const DesignField& g) const {
    if (g.rows() != weights_.rows()) throw ContractViolation("filter: gradient has wrong number of rows");
    return transpose_ * g;
  }

 private:
  explicit FilterOperator(int n) : radius_(0.0) {
    weights_.resize(n, n);
    weights_.setIdentity();
    weights_.makeCompressed();
    transpose_ = weights_;
  }

  double radius_;
  Matrix weights_;
  Matrix transpose_;
};

inline DesignField apply_filter(const FilterOperator& op, const DesignField& field) { return op.apply(field); }

inline DesignField project(const DesignField& filtered, const ProjectionParams& params, Realization r) {
  const double eta = params.eta(r);
  return filtered.unaryExpr([&](double x) { return heaviside(x, params.beta, eta); });
}

inline DesignField projection_derivative(const DesignField& filtered, const ProjectionParams& params, Realization r) {
  const double eta = params.eta(r);
  return filtered.unaryExpr([&](double x) { return heaviside_derivative(x, params.beta, eta); });
}

// df/drho = W^T (df/drho_bar .* drho_bar/drho_tilde).
inline DesignField chain_rule(const DesignField& df_dphys, const DesignField& dphys_dfilt, const FilterOperator& op) {
  if (df_dphys.rows() != dphys_dfilt.rows() || df_dphys.cols() != dphys_dfilt.cols())
    throw ContractViolation("chain_rule: shape mismatch");
  return op.apply_transpose(df_dphys.cwiseProduct(dphys_dfilt));
}

// Overrides the physical field on passive elements and zeroes the matching
// projection derivatives, so gradients never flow into pinned entries.
inline void apply_passive(const PassiveMask& mask, DesignField& physical, DesignField* derivative = nullptr) {
  const int m = static_cast<int>(physical.cols());
  for (int e = 0; e < mask.size(); ++e) {
    const ElementTag tag = mask.tag(e);
    if (tag == ElementTag::Design) continue;
    const double topo = tag == ElementTag::ForcedSolid ? 1.0 : 0.0;
    physical(e, 0) = topo;
    if (derivative) (*derivative)(e, 0) = 0.0;
    const auto& forced = mask.forced_material[static_cast<std::size_t>(e)];
    if (tag == ElementTag::ForcedSolid && forced) {
      for (int k = 1; k < m; ++k) {
        physical(e, k) = k <= *forced ? 1.0 : 0.0;
        if (derivative) (*derivative)(e, k) = 0.0;
      }
    }
  }
}

}  // namespace pneumo
