#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sgfem/chaos.hpp"
#include "sgfem/mesh.hpp"
#include "sgfem/multi_index.hpp"

namespace sgfem {

/// Affine Gaussian exponent gamma(x, y) = sum_m gamma_m(x) y_m with analytically
/// supplied sup norms.
struct AffineField {
  std::vector<std::function<double(const Vec2&)>> modes;
  std::vector<double> sup_norms;

  int mode_count() const { return static_cast<int>(modes.size()); }
  double evaluate(const Vec2& x, const std::vector<double>& y) const;
};

/// Mode-index maps of the planar Fourier benchmark field.
struct FourierModeInfo {
  int k = 0;
  int beta1 = 0;
  int beta2 = 0;
};
FourierModeInfo fourier_mode_info(int m);

/// Riemann zeta by series summation with Euler-Maclaurin tail, accurate to 1e-12.
double riemann_zeta(double s);

/// Planar Fourier modes gamma_m(x) = 9/(10 zeta(sigma)) m^{-sigma}
/// cos(2 pi beta1 x1) cos(2 pi beta2 x2) in increasing total order.
AffineField benchmark_modes(int m_hat, double sigma);

/// Barycentric sources of mesh nodes inside a fixed carrier mesh: every nodal
/// value is a combination of at most three carrier-node values. Nested bisection
/// keeps the source count at three.
struct InterpolationStencil {
  std::vector<std::array<int, 3>> nodes;
  std::vector<std::array<double, 3>> weights;  // zero-padded

  static InterpolationStencil identity(int node_count);
  /// Pushes the stencil through one refinement step.
  InterpolationStencil refine(const RefinementMap& map) const;
  int node_count() const { return static_cast<int>(nodes.size()); }
};

/// Chaos coefficients of exp(gamma) interpolated in the P1 nodal basis. The per-node
/// coefficients factorize over modes: a[j, mu] = prod_m factors[m](j, mu_m); stencil
/// interpolants of a factored carrier and arbitrary dense tensors are also supported.
class DiscreteCoefficient {
 public:
  DiscreteCoefficient() = default;

  static DiscreteCoefficient factored(std::vector<int> dhat_dims, std::vector<Eigen::MatrixXd> node_factors);
  static DiscreteCoefficient dense(std::vector<int> dhat_dims, Eigen::MatrixXd values);
  /// Exact restriction of a factored carrier to a nested refinement.
  static DiscreteCoefficient interpolated(const DiscreteCoefficient& carrier, InterpolationStencil stencil);

  const std::vector<int>& dhat_dims() const { return dhat_dims_; }
  int mode_count() const { return static_cast<int>(dhat_dims_.size()); }
  int node_count() const { return node_count_; }
  bool is_factored() const { return storage_ == Storage::kFactored; }

  /// Number of rank-one terms in the per-node product representation.
  int term_count() const;

  /// Factor of term r in mode m at node j and degree k.
  double term_factor(int r, int m, int j, int k) const;

  /// Scalar multiplier of term r carried outside the mode factors (dense storage
  /// keeps the tensor entry here; factored storage returns 1).
  double term_weight(int r, int j) const;

  double value(int j, const MultiIndex& alpha) const;
  Eigen::VectorXd mode_values(const MultiIndex& alpha) const;  // all nodes
  double sup_norm(const MultiIndex& alpha) const;

  /// Materialized J x |Lambda_dhat| tensor; guarded against oversized requests.
  Eigen::MatrixXd to_dense() const;

 private:
  enum class Storage { kFactored, kDense, kInterpolated };
  std::vector<int> dhat_dims_;
  int node_count_ = 0;
  Storage storage_ = Storage::kFactored;
  std::vector<Eigen::MatrixXd> node_factors_;  // factored/interpolated: per mode (carrier) J x dhat_m
  Eigen::MatrixXd values_;                     // dense: J x |Lambda_dhat|
  InterpolationStencil stencil_;               // interpolated only
};

/// Smallest per-mode degrees whose tail factor exp(b^2 s^2 / 2) (b s)^k / sqrt(k!)
/// falls below the threshold, with b the mode sup norm and s = sigma_m(theta rho).
std::vector<int> select_dhat(const AffineField& field, const ModeScaling& scaling, double tail_threshold,
                             int cap = 16);

/// Semi-analytic expansion of exp(gamma) into the nodal chaos basis.
DiscreteCoefficient expand_lognormal(const AffineField& field, const ModeScaling& scaling,
                                     const std::vector<int>& dhat_dims, const Mesh2D& mesh);

/// Monte Carlo estimate of || a - a_N || / || a || in L2(Gamma, pi_0; Linf-over-nodes)
/// for a given coefficient carrier evaluated on the given mesh.
double coefficient_residual(const DiscreteCoefficient& coeff, const AffineField& field, const ModeScaling& scaling,
                            const Mesh2D& mesh, int sample_count, std::uint64_t seed = 7);

/// Same measurement with a freshly expanded carrier on the mesh itself.
double truncation_residual(const AffineField& field, const ModeScaling& scaling, const std::vector<int>& dhat_dims,
                           const Mesh2D& mesh, int sample_count, std::uint64_t seed = 7);

}  // namespace sgfem
