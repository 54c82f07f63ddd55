#pragma once

// Element-by-element assembly onto the free-free block of a symmetric system
// with a fixed sparsity pattern, plus a reusable sparse Cholesky solver.
//
// Accumulation order is element-major (ascending element index), then row,
// then column of the element matrix, so identical inputs give bit-identical
// matrices.

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "pneumo/errors.hpp"

namespace pneumo {

using SparseMatrix = Eigen::SparseMatrix<double>;

template <int N>
class ReducedAssembler {
 public:
  using ElementMatrix = Eigen::Matrix<double, N, N>;
  using ElementDofs = std::array<int, N>;

  ReducedAssembler(std::vector<ElementDofs> element_dofs, int num_dofs, const std::vector<char>& fixed)
      : element_dofs_(std::move(element_dofs)), free_index_(static_cast<std::size_t>(num_dofs), -1) {
    if (static_cast<int>(fixed.size()) != num_dofs) throw ContractViolation("assembler: fixed mask size mismatch");
    for (int d = 0; d < num_dofs; ++d) {
      if (fixed[static_cast<std::size_t>(d)]) continue;
      free_index_[static_cast<std::size_t>(d)] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(d);
    }
    const int nf = num_free();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(element_dofs_.size() * N * N);
    for (const auto& dofs : element_dofs_)
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          const int fa = free_index_[static_cast<std::size_t>(dofs[a])];
          const int fb = free_index_[static_cast<std::size_t>(dofs[b])];
          if (fa >= 0 && fb >= 0) triplets.emplace_back(fa, fb, 1.0);
        }
    pattern_.resize(nf, nf);
    pattern_.setFromTriplets(triplets.begin(), triplets.end());
    pattern_.makeCompressed();
    pattern_.coeffs().setZero();

    slots_.resize(element_dofs_.size() * N * N, -1);
    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    for (std::size_t e = 0; e < element_dofs_.size(); ++e)
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          const int fa = free_index_[static_cast<std::size_t>(element_dofs_[e][a])];
          const int fb = free_index_[static_cast<std::size_t>(element_dofs_[e][b])];
          if (fa < 0 || fb < 0) continue;
          // column-major storage: column fb, row fa
          const int* begin = inner + outer[fb];
          const int* end = inner + outer[fb + 1];
          const int* it = std::lower_bound(begin, end, fa);
          slots_[slot_index(e, a, b)] = static_cast<int>(it - inner);
        }
  }

  int num_dofs() const { return static_cast<int>(free_index_.size()); }
  int num_free() const { return static_cast<int>(free_dofs_.size()); }
  int num_elements() const { return static_cast<int>(element_dofs_.size()); }
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  int free_index(int dof) const { return free_index_[static_cast<std::size_t>(dof)]; }
  const ElementDofs& element_dofs(int e) const { return element_dofs_[static_cast<std::size_t>(e)]; }

  // element_matrix(e) -> ElementMatrix. If `prescribed` (full-length) is given,
  // the contribution of fixed dofs is moved to `rhs` (free-length) as -K_fd g_d.
  template <class Fn>
  SparseMatrix assemble(Fn&& element_matrix, const Eigen::VectorXd* prescribed = nullptr,
                        Eigen::VectorXd* rhs = nullptr) const {
    SparseMatrix out = pattern_;
    double* values = out.valuePtr();
    if (rhs) rhs->setZero(num_free());
    for (std::size_t e = 0; e < element_dofs_.size(); ++e) {
      const ElementMatrix ke = element_matrix(static_cast<int>(e));
      const auto& dofs = element_dofs_[e];
      for (int a = 0; a < N; ++a) {
        const int fa = free_index_[static_cast<std::size_t>(dofs[a])];
        if (fa < 0) continue;
        for (int b = 0; b < N; ++b) {
          const int slot = slots_[slot_index(e, a, b)];
          if (slot >= 0) {
            values[slot] += ke(a, b);
          } else if (prescribed && rhs) {
            (*rhs)[fa] -= ke(a, b) * (*prescribed)[dofs[b]];
          }
        }
      }
    }
    return out;
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(num_free());
    for (int i = 0; i < num_free(); ++i) out[i] = full[free_dofs_[static_cast<std::size_t>(i)]];
    return out;
  }

  // Scatters free values into `full` (fixed entries left untouched).
  void scatter(const Eigen::VectorXd& free, Eigen::VectorXd& full) const {
    for (int i = 0; i < num_free(); ++i) full[free_dofs_[static_cast<std::size_t>(i)]] = free[i];
  }

  Eigen::VectorXd extend(const Eigen::VectorXd& free) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(num_dofs());
    scatter(free, full);
    return full;
  }

 private:
  static std::size_t slot_index(std::size_t e, int a, int b) {
    return e * N * N + static_cast<std::size_t>(a * N + b);
  }

  std::vector<ElementDofs> element_dofs_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  SparseMatrix pattern_;
  std::vector<int> slots_;
};

// Sparse LL^T with the symbolic analysis done once per pattern.
class SpdSolver {
 public:
  explicit SpdSolver(std::string label) : label_(std::move(label)) {}

  void factorize(const SparseMatrix& a) {
    if (!analyzed_) {
      llt_.analyzePattern(a);
      analyzed_ = true;
    }
    llt_.factorize(a);
    if (llt_.info() != Eigen::Success)
      throw ModelError(label_ + ": matrix is not positive definite (n = " + std::to_string(a.rows()) + ")");
    factored_ = true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (!factored_) throw ContractViolation(label_ + ": solve before factorize");
    Eigen::VectorXd x = llt_.solve(rhs);
    if (llt_.info() != Eigen::Success || !x.allFinite())
      throw NumericalError(label_ + ": triangular solve failed");
    return x;
  }

 private:
  std::string label_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> llt_;
  bool analyzed_ = false;
  bool factored_ = false;
};

inline double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const double scale = b.norm();
  const double r = (a * x - b).norm();
  return scale > 0.0 ? r / scale : r;
}

}  // namespace pneumo
