#pragma once

// Bilinear rectangle of size dx x dy, nodes counterclockwise from the
// bottom-left corner, integrated with 2x2 Gauss quadrature.

#include <array>
#include <cmath>

#include <Eigen/Core>

namespace pneumo {

struct QuadPoint {
  Eigen::Vector4d n;                 // shape function values
  Eigen::Matrix<double, 2, 4> grad;  // physical gradients
  double weight;                     // includes det J
};

inline std::array<QuadPoint, 4> gauss_points(double dx, double dy) {
  constexpr std::array<double, 4> xi_node = {-1.0, 1.0, 1.0, -1.0};
  constexpr std::array<double, 4> eta_node = {-1.0, -1.0, 1.0, 1.0};
  const double g = 1.0 / std::sqrt(3.0);
  const std::array<double, 2> pts = {-g, g};
  std::array<QuadPoint, 4> out{};
  int q = 0;
  for (double eta : pts) {
    for (double xi : pts) {
      QuadPoint& p = out[static_cast<std::size_t>(q++)];
      for (int a = 0; a < 4; ++a) {
        const double xa = xi_node[static_cast<std::size_t>(a)];
        const double ya = eta_node[static_cast<std::size_t>(a)];
        p.n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
        p.grad(0, a) = 0.25 * xa * (1.0 + ya * eta) * 2.0 / dx;
        p.grad(1, a) = 0.25 * ya * (1.0 + xa * xi) * 2.0 / dy;
      }
      p.weight = 0.25 * dx * dy;
    }
  }
  return out;
}

}  // namespace pneumo
