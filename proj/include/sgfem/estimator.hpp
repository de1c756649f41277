#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sgfem/chaos.hpp"
#include "sgfem/field.hpp"
#include "sgfem/galerkin.hpp"
#include "sgfem/mesh.hpp"
#include "sgfem/multi_index.hpp"

namespace sgfem {

using SpatialFn = std::function<double(const Vec2&)>;

/// Solution-independent tables shared by all estimator evaluations on one
/// (mesh, coefficient, index set) configuration: per-mode triple products,
/// the doubly orthogonal transform of the covering set Lambda_{d + dhat - 1},
/// and the tau-contracted nodal coefficient slices.
class EstimatorContext {
 public:
  EstimatorContext(const FESpace& space, const DiscreteCoefficient& coeff, const MultiIndexSet& lambda,
                   const ModeScaling& scaling);

  const FESpace& space() const { return *space_; }
  const DiscreteCoefficient& coeff() const { return *coeff_; }
  const MultiIndexSet& lambda() const { return lambda_; }
  const ModeScaling& scaling() const { return *scaling_; }
  const DoublyOrthogonalTransform& transform() const { return transform_; }

  int mode_count() const { return modes_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<int>& dhat() const { return dhat_; }
  const std::vector<int>& cover() const { return cover_; }
  bool boundary_empty() const;

  int term_count() const { return terms_; }
  double term_weight(int r, int node) const;

  /// tau-contracted coefficient slice of term r at a node: a (d_m x cover_m) block
  /// with entries sum_k a-factor[node, k] tau^m(beta, k, i).
  Eigen::Block<const Eigen::MatrixXd> t_block(int r, int m, int node) const;

  /// Weighted Gram block of mode m (cover_m x cover_m), from the transform identity.
  const Eigen::MatrixXd& g2(int m) const { return g2_[static_cast<std::size_t>(m)]; }

  /// Per-mode triple products tau(beta < d_m, alpha < dhat_m, i < cover_m).
  const TripleProductTable& tau(int m) const { return tau_[static_cast<std::size_t>(m)]; }

  /// prod_m g2[m](mu_m, mu_m) = ||P_mu zeta||^2_{pi_0}.
  double basis_weight_sq(const MultiIndex& mu) const;

  /// Gradient components of w on element t, flattened over Lambda_d.
  void element_gradients(const CoeffTensor& w, int t, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const;

  /// c^node_{mu beta} for explicit index lists (small instances).
  double node_coeff(int node, const MultiIndex& mu, const MultiIndex& beta) const;

 private:
  const FESpace* space_;
  const DiscreteCoefficient* coeff_;
  const ModeScaling* scaling_;
  MultiIndexSet lambda_;
  std::vector<int> dims_, dhat_, cover_;
  int modes_ = 0;
  int terms_ = 0;
  DoublyOrthogonalTransform transform_;
  std::vector<Eigen::MatrixXd> g2_;
  std::vector<TripleProductTable> tau_;
  std::vector<std::vector<Eigen::MatrixXd>> tvec_;  // [term][mode]: (J * d_m) x cover_m
};

struct EtaDetReport {
  Eigen::VectorXd per_element;  // sqrt(vol^2 + jump^2) on each triangle
  double volume_sq = 0.0;
  double jump_sq = 0.0;
  double total = 0.0;
};

/// Deterministic contribution over Lambda_d, Eqs. of the volume and jump residual.
EtaDetReport eta_det(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f);

/// Deterministic contribution restricted to an explicit index subset.
double eta_det_restricted(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f,
                          const std::vector<MultiIndex>& subset);

/// Stochastic contribution over the full boundary of Lambda_d.
double eta_sto_boundary(const CoeffTensor& w, const EstimatorContext& ctx);

/// Stochastic contribution of the look-ahead slab of one mode (1-based).
double eta_sto_slab(const CoeffTensor& w, const EstimatorContext& ctx, int mode, int q);

/// Stochastic contribution of an explicit subset of the boundary.
double eta_sto(const CoeffTensor& w, const EstimatorContext& ctx, const std::vector<MultiIndex>& delta);

struct EstimatorReport {
  double eta_det = 0.0;
  double eta_det_vol_sq = 0.0;
  double eta_det_jump_sq = 0.0;
  double eta_sto = 0.0;
  double eta = 0.0;
  double c_eq = 1.0;
  Eigen::VectorXd eta_det_per_element;
  std::vector<double> slab_values;  // per mode, zero where no look-ahead is admissible
  std::vector<char> slab_valid;
};

EstimatorReport eta_total(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f, double c_eq,
                          const std::vector<int>& lookahead);

struct LipschitzDiagnostic {
  double c_lambda = 0.0;    // constant over the active set
  double c_boundary = 0.0;  // constant over the boundary set; NaN when skipped
};

LipschitzDiagnostic lipschitz_diagnostic(const EstimatorContext& ctx, std::size_t boundary_cap = 1u << 21);

/// || g_{d1} . g_{d2} ||_{pi_0, D} for g_S = sum_{mu in S} r_mu P_mu; used to
/// audit the quasi-additivity defect bound.
double pair_product_norm(const CoeffTensor& w, const EstimatorContext& ctx, const std::vector<MultiIndex>& d1,
                         const std::vector<MultiIndex>& d2);

/// Lazy view of the residual expansion coefficients r_mu = sum a_N[.,a] w[.,b] tau phi grad phi.
class ResidualModes {
 public:
  ResidualModes(const CoeffTensor& w, const EstimatorContext& ctx);

  MultiIndexSet support() const { return MultiIndexSet(ctx_->cover()); }
  bool in_support(const MultiIndex& mu) const { return support().contains(mu); }

  /// Value of r_mu at a barycentric point of element t.
  Vec2 evaluate(int t, const std::array<double, 3>& bary, const MultiIndex& mu) const;

  /// Elementwise divergence (constant for P1).
  double divergence(int t, const MultiIndex& mu) const;

 private:
  const CoeffTensor* w_;
  const EstimatorContext* ctx_;
};

inline ResidualModes residual_modes(const CoeffTensor& w, const EstimatorContext& ctx) {
  return ResidualModes(w, ctx);
}

}  // namespace sgfem
