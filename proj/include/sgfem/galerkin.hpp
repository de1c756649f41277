#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>
#include <vector>

#include "sgfem/field.hpp"
#include "sgfem/mesh.hpp"
#include "sgfem/multi_index.hpp"

namespace sgfem {

using SparseMat = Eigen::SparseMatrix<double>;

/// Conforming P1 Lagrange space with a homogeneous Dirichlet mask on the domain
/// boundary. The mesh must outlive the space.
class FESpace {
 public:
  explicit FESpace(const Mesh2D& mesh);

  const Mesh2D& mesh() const { return *mesh_; }
  int node_count() const { return mesh_->vertex_count(); }
  int free_count() const { return free_count_; }
  int order() const { return 1; }

  bool is_dirichlet(int v) const { return free_index_[static_cast<std::size_t>(v)] < 0; }
  int free_index(int v) const { return free_index_[static_cast<std::size_t>(v)]; }

  /// Constant gradient of the hat function of local vertex l on triangle t.
  const Vec2& hat_gradient(int t, int l) const {
    return gradients_[static_cast<std::size_t>(3 * t + l)];
  }

 private:
  const Mesh2D* mesh_;
  std::vector<int> free_index_;
  int free_count_ = 0;
  std::vector<Vec2> gradients_;
};

/// Dense coefficient tensor of a discrete field, indexed [node, flat chaos index].
/// Rows cover every mesh node; Dirichlet rows stay zero for solution tensors.
struct CoeffTensor {
  Eigen::MatrixXd values;  // J x |Lambda|
  MultiIndexSet lambda;

  CoeffTensor() = default;
  CoeffTensor(int nodes, MultiIndexSet set)
      : values(Eigen::MatrixXd::Zero(nodes, static_cast<Eigen::Index>(set.size()))), lambda(std::move(set)) {}
};

/// Stiffness matrix on free dofs with P1 coefficient given by nodal values.
SparseMat assemble_stiffness(const FESpace& space, const Eigen::VectorXd& a_nodal);

/// Stiffness with the coefficient evaluated at quadrature points (midpoint rule).
SparseMat assemble_stiffness_pointwise(const FESpace& space, const std::function<double(const Vec2&)>& a);

/// Load tensor b[j, mu] = delta_{mu 0} * integral of f phi_j.
CoeffTensor assemble_rhs(const FESpace& space, const std::function<double(const Vec2&)>& f,
                         const MultiIndexSet& lambda);

/// Matrix-free stochastic Galerkin operator: sum over active coefficient modes of
/// K_alpha applied in space and the triple-product coupling applied across chaos modes.
class GalerkinOperator {
 public:
  /// sup_cut prunes coefficient modes with sup norm below sup_cut * ||a_0||_inf; 0 keeps all.
  GalerkinOperator(const FESpace& space, const DiscreteCoefficient& coeff, const MultiIndexSet& lambda,
                   double sup_cut = 1e-12);

  const MultiIndexSet& lambda() const { return lambda_; }
  const FESpace& space() const { return *space_; }
  int active_mode_count() const { return static_cast<int>(active_.size()); }
  const std::vector<MultiIndex>& active_modes() const { return active_index_; }
  const SparseMat& stiffness(int active_idx) const {
    return active_[static_cast<std::size_t>(active_idx)].stiffness;
  }

  /// Operator action on a free-dof matrix (free_count x |Lambda|).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const;

  /// Mean-field block preconditioner: K_0^{-1} applied to each chaos column.
  Eigen::MatrixXd precondition(const Eigen::MatrixXd& r) const;

  /// Energy product B(v, w) of two full-node tensors.
  double energy_product(const CoeffTensor& v, const CoeffTensor& w) const;

  Eigen::MatrixXd restrict_free(const CoeffTensor& full) const;
  CoeffTensor extend_full(const Eigen::MatrixXd& free) const;

  /// Materialized dense system matrix; small instances only.
  Eigen::MatrixXd materialize() const;

 private:
  struct ActiveMode {
    SparseMat stiffness;
    std::vector<const Eigen::MatrixXd*> coupling;  // per mode, d_m x d_m
  };

  const FESpace* space_;
  MultiIndexSet lambda_;
  std::vector<ActiveMode> active_;
  std::vector<MultiIndex> active_index_;
  // cached coupling blocks T^m_k(beta, mu) = tau^m(k, beta, mu)
  std::vector<std::vector<Eigen::MatrixXd>> couplings_;
  Eigen::SimplicialLDLT<SparseMat> mean_solver_;
};

struct SolveReport {
  CoeffTensor solution;
  int iterations = 0;
  double residual = 0.0;
};

/// Preconditioned conjugate gradients to the given relative residual.
SolveReport solve(const GalerkinOperator& op, const CoeffTensor& rhs, double tol = 1e-10, int maxit = 10000);

/// Nodal interpolation of per-vertex values through one refinement step.
Eigen::VectorXd prolong_vertex_values(const RefinementMap& map, const Eigen::VectorXd& coarse);

/// Prolongation of a coefficient tensor: nodal interpolation in space composed
/// with zero padding onto the (componentwise larger) target index set.
CoeffTensor prolong_tensor(const CoeffTensor& coarse, const RefinementMap& map, const MultiIndexSet& fine_lambda);

}  // namespace sgfem
